//! Action-minimizing paths of the planar three-body problem with masses
//! `[1, m, m]`.
//!
//! The crate solves two-point free boundary minimization problems connecting
//! collinear configurations (with order constraints) to rotated isosceles
//! configurations, verifies the geometric collision-exclusion invariants on
//! the computed minimizers, and evaluates the closed-form level estimates
//! and test paths used by the exclusion arguments.
//!
//! Modules:
//! - [`geometry`]: configuration space, the `(Z1, Z2)` variables, boundary
//!   families, quadrant classification and reflection.
//! - [`action`]: kinetic/potential energy, trapezoid quadrature and exact
//!   piecewise-linear action with gradients.
//! - [`minimize`]: the free boundary descent solver plus verification.
//! - [`levels`]: closed-form level estimates, the ring integral, the
//!   interpolated test path and the rotation sweep.
//! - [`dynamics`]: Newtonian equations, adaptive integration, EL residual,
//!   symmetry extension to (quasi-)periodic orbits.
//! - [`io`]: text formats for orbits, trajectories and plot series.

pub mod action;
pub mod angle;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod levels;
pub mod minimize;
pub mod vec2;

pub use action::{
    action_gradient, action_piecewise_linear, action_quadrature, kinetic, kinetic_jacobi,
    potential, potential_jacobi, potential_polar, DiscretePath, PolarPotentialArgs,
};
pub use angle::Angle;
pub use dynamics::{
    accel_cartesian, accel_jacobi, el_residual, extend_orbit, integrate, lagrange_equilateral,
    schubart_dichotomy, IntegrateOptions, Periodicity, PhaseState, SchubartDichotomy, Trajectory,
};
pub use error::{Error, Result};
pub use geometry::{
    alpha_angles, boundary_config, classify_quadrants, delta_adjacent, delta_angle,
    delta_opposite, from_jacobi, reflect_path, to_jacobi, BoundarySpec, JacobiPair, MassSet,
    PathCase, PlanarConfig, QuadrantReport, QuadrantTag,
};
pub use levels::{
    circular_retrograde_path, euler_action_m1, euler_collapse_test_action, f_diff, g_poly,
    g_poly_derivative, interpolated_test_action, j_integral, level_report, ratio_small_mass_bound,
    retrograde_test_action, retrograde_test_action_bound, sweep_compare, LevelReport, SweepResult,
    TestPathTable, total_collision_lower_bound,
};
pub use minimize::{
    initial_path, minimize, reflect_improve, verify_minimizer, InitStrategy, MinimizeOptions,
    MinimizerReport, ProblemSpec, Variant, VerifyOptions, VerifyVerdict,
};
pub use vec2::Vec2;
