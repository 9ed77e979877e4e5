//! Scratch probe: criterion-6 grid, theta=0 extension, Schubart dichotomy.
use std::time::Instant;
use trivar_core::*;

fn run(variant: Variant, m: f64, p: i64, q: u64, n: usize) -> MinimizerReport {
    let spec = ProblemSpec {
        masses: MassSet::new(m).unwrap(),
        theta: Angle::from_pi_fraction(p, q),
        variant,
        n_nodes: n,
        duration: 1.0,
        seed: 7,
    };
    minimize(&spec, &MinimizeOptions::default()).unwrap()
}

fn main() {
    let t_all = Instant::now();
    for variant in [Variant::Prograde, Variant::Retrograde] {
        for &m in &[0.5, 1.0, 2.0] {
            for &(p, q) in &[(1i64, 10u64), (1, 4), (2, 5)] {
                let t0 = Instant::now();
                let rep = run(variant, m, p, q, 121);
                let masses = MassSet::new(m).unwrap();
                let verdict = verify_minimizer(&rep, &masses, &VerifyOptions::default());
                // refine and re-minimize
                let spec2 = ProblemSpec { n_nodes: 241, ..rep.problem };
                let rep2 = minimize(
                    &spec2,
                    &MinimizeOptions {
                        strategy: Some(InitStrategy::FromPath(rep.path.refine(&masses))),
                        ..Default::default()
                    },
                )
                .unwrap();
                println!(
                    "{:<10} m={:<4} th={}/{}pi conv={}/{} case={} dmin/diam={:.4} el={:.2e}->{:.2e} (x{:.2}) verify={} A={:.6} it={}+{} {:?}",
                    variant.tag(), m, p, q, rep.converged, rep2.converged, rep.case.tag(),
                    rep.min_pairwise_distance / rep.path.diameter(),
                    rep.el_residual, rep2.el_residual, rep.el_residual / rep2.el_residual,
                    verdict.passed, rep.action, rep.iterations, rep2.iterations, t0.elapsed()
                );
            }
        }
    }
    println!("grid total: {:?}", t_all.elapsed());

    // theta = 0 prograde + extension closure
    let t0 = Instant::now();
    let rep = run(Variant::Prograde, 1.0, 0, 1, 161);
    let masses = MassSet::new(1.0).unwrap();
    let traj = extend_orbit(&rep, &masses, 4).unwrap();
    println!(
        "theta=0: conv={} case={} A={:.8} closure_gap={:.2e} periodicity={:?} energy_drift={:.2e} {:?}",
        rep.converged, rep.case.tag(), rep.action,
        traj.closure_gap.unwrap(), traj.periodicity.unwrap(), traj.energy_drift, t0.elapsed()
    );
    // closure: last state vs first state
    let first = &traj.states[0];
    let last = traj.states.last().unwrap();
    let pos_gap = first.config.positions().iter().zip(last.config.positions())
        .map(|(a, b)| (*a - b).norm()).fold(0.0, f64::max);
    let vel_gap = first.vel.iter().zip(last.vel.iter())
        .map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max);
    println!("  state closure: pos {pos_gap:.2e} vel {vel_gap:.2e}, domains {}", traj.times.len());

    // action < A_Euler for small theta (m = 1, theta = 0.02pi)
    let rep2 = run(Variant::Prograde, 1.0, 1, 50, 121);
    let euler = euler_action_m1(rep2.problem.theta.radians()).unwrap();
    println!("theta=0.02pi: A={:.6} < A_Euler={:.6}: {}", rep2.action, euler, rep2.action < euler);

    // Schubart boundary case, theta = pi/2 retrograde
    for &m in &[1.0] {
        let t0 = Instant::now();
        let spec = ProblemSpec {
            masses: MassSet::new(m).unwrap(),
            theta: Angle::from_pi_fraction(1, 2),
            variant: Variant::Retrograde,
            n_nodes: 161,
            duration: 1.0,
            seed: 7,
        };
        match minimize(&spec, &MinimizeOptions::default()) {
            Ok(rep) => {
                let label = schubart_dichotomy(&rep);
                println!(
                    "schubart m={m}: conv={} case={} dmin={:.3e} a1={:.3e} label={:?} A={:.6} {:?}",
                    rep.converged, rep.case.tag(), rep.min_pairwise_distance,
                    rep.boundary_params[0], label, rep.action, t0.elapsed()
                );
            }
            Err(e) => println!("schubart m={m}: ERROR {e}"),
        }
    }
}
