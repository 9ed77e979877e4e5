//! Does a case-a (non-Euler) path beat the Euler arc at large prograde theta?
use trivar_core::*;

fn main() {
    let masses = MassSet::new(1.0).unwrap();
    // continuation from theta = 0.1pi (case a) upward in steps
    let mut warm: Option<DiscretePath> = None;
    for &(p, q) in &[(1i64, 10u64), (3, 20), (1, 5), (9, 40), (1, 4), (3, 10), (7, 20), (2, 5)] {
        let spec = ProblemSpec {
            masses,
            theta: Angle::from_pi_fraction(p, q),
            variant: Variant::Prograde,
            n_nodes: 121,
            duration: 1.0,
            seed: 7,
        };
        let opts = MinimizeOptions {
            strategy: warm.clone().map(InitStrategy::FromPath),
            ..Default::default()
        };
        let rep = minimize(&spec, &opts).unwrap();
        let euler_cont = euler_action_m1(spec.theta.radians()).unwrap();
        // also solve fresh (linear-interp init) for comparison
        let fresh = minimize(&spec, &MinimizeOptions::default()).unwrap();
        println!(
            "th={}/{}pi  cont: case={} A={:.6} | fresh: case={} A={:.6} | A_Euler(analytic)={:.6}",
            p, q, rep.case.tag(), rep.action, fresh.case.tag(), fresh.action, euler_cont
        );
        warm = Some(rep.path.clone());
    }
}
