//! Scratch probe: Table 1 reproduction timing and accuracy.
use std::time::Instant;
use trivar_core::*;

fn main() {
    let spec = ProblemSpec {
        masses: MassSet::new(1.0).unwrap(),
        theta: Angle::parse("0.053pi").unwrap(),
        variant: Variant::Prograde,
        n_nodes: 241,
        duration: 1.0,
        seed: 7,
    };
    let t0 = Instant::now();
    let rep = minimize(&spec, &MinimizeOptions::default()).unwrap();
    let dt = t0.elapsed();
    println!(
        "converged={} iters={} grad={:.3e} action={:.12} case={} mindist={:.4} el={:.3e} time={:.2?}",
        rep.converged, rep.iterations, rep.grad_norm, rep.action, rep.case.tag(),
        rep.min_pairwise_distance, rep.el_residual, dt
    );
    println!("params: {:?}", rep.boundary_params);

    let table = TestPathTable::builtin();
    let theta = spec.theta.radians();
    let mut worst = 0.0f64;
    for k in 0..11 {
        let node = rep.path.node(24 * k);
        let (_, mut q1, mut q2) = table.rows[k];
        if k == 10 {
            q1 = q1.rotate(theta);
            q2 = q2.rotate(theta);
        }
        let err = (node.q1 - q1)
            .abs()
            .x
            .max((node.q1 - q1).abs().y)
            .max((node.q2 - q2).abs().x)
            .max((node.q2 - q2).abs().y);
        worst = worst.max(err);
        println!("row {k}: err {err:.5}");
    }
    println!("worst coordinate error vs table: {worst:.5}");

    // doubling residual check
    let fine_spec = ProblemSpec { n_nodes: 481, ..spec };
    let warm = InitStrategy::FromPath(rep.path.refine(&spec.masses));
    let t0 = Instant::now();
    let rep2 = minimize(
        &fine_spec,
        &MinimizeOptions {
            strategy: Some(warm),
            ..Default::default()
        },
    )
    .unwrap();
    println!(
        "n=481: converged={} iters={} grad={:.3e} el={:.3e} action={:.12} time={:.2?}",
        rep2.converged, rep2.iterations, rep2.grad_norm, rep2.el_residual, rep2.action, t0.elapsed()
    );
    println!("residual ratio: {:.3}", rep.el_residual / rep2.el_residual);
}
