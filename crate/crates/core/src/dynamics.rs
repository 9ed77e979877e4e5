//! Newtonian dynamics: accelerations in both coordinate systems, adaptive
//! time integration with conservation tracking, the Euler-Lagrange residual
//! of discrete paths, and symmetry extension of minimizing arcs.

use crate::action::{kinetic, potential, DiscretePath};
use crate::error::{Error, Result};
use crate::geometry::{JacobiPair, MassSet, PlanarConfig, EPS_AXIS_REL, EPS_ZERO_REL};
use crate::minimize::{verify_minimizer, MinimizerReport, VerifyOptions};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};

/// Positions plus momentum-free velocities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub config: PlanarConfig,
    pub vel: [Vec2; 3],
}

impl PhaseState {
    /// Checks the center-of-mass and total-momentum identities.
    pub fn new(config: PlanarConfig, vel: [Vec2; 3], masses: &MassSet) -> Result<Self> {
        let mv = masses.values();
        let p = mv[0] * vel[0] + mv[1] * vel[1] + mv[2] * vel[2];
        let vscale = vel.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if p.norm() > 1e-9 * vscale.max(1e-12) {
            return Err(Error::Domain(format!(
                "velocities carry net momentum {:e}",
                p.norm()
            )));
        }
        let qres = config.chi_residual(masses);
        if qres > 1e-9 * config.scale().max(1e-12) {
            return Err(Error::Domain(format!(
                "configuration outside the center-of-mass space: {qres:e}"
            )));
        }
        Ok(Self { config, vel })
    }

    pub fn energy(&self, masses: &MassSet) -> Result<f64> {
        Ok(kinetic(&self.vel, masses) - potential(&self.config, masses)?)
    }

    pub fn angular_momentum(&self, masses: &MassSet) -> f64 {
        let mv = masses.values();
        let q = self.config.positions();
        (0..3).map(|i| mv[i] * q[i].cross(self.vel[i])).sum()
    }
}

/// Accelerations of the three bodies under Newtonian gravity (G = 1).
pub fn accel_cartesian(config: &PlanarConfig, masses: &MassSet) -> Result<[Vec2; 3]> {
    let q = config.positions();
    let mv = masses.values();
    let eps = EPS_ZERO_REL * config.scale();
    let mut acc = [Vec2::default(); 3];
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let rel = q[i] - q[j];
        let r = rel.norm();
        if r <= eps {
            return Err(Error::CollisionSingularity {
                pair: (i + 1, j + 1),
                dist: r,
            });
        }
        let f = rel / (r * r * r);
        acc[i] -= mv[j] * f;
        acc[j] += mv[i] * f;
    }
    Ok(acc)
}

/// The reduced equations of motion:
///
/// ```text
/// Z1'' = (Z2 - Z1/2)/|Z2 - Z1/2|^3 - (Z2 + Z1/2)/|Z2 + Z1/2|^3 - 2m Z1/|Z1|^3
/// Z2'' = -(1+2m)/2 [ (Z2 - Z1/2)/|Z2 - Z1/2|^3 + (Z2 + Z1/2)/|Z2 + Z1/2|^3 ]
/// ```
pub fn accel_jacobi(zpair: &JacobiPair, masses: &MassSet) -> Result<(Vec2, Vec2)> {
    let m = masses.m();
    let half = 0.5 * zpair.z1;
    let a = zpair.z2 - half;
    let b = zpair.z2 + half;
    let scale = zpair.z1.norm().max(zpair.z2.norm());
    let eps = EPS_ZERO_REL * scale;
    let (ra, rb, r1) = (a.norm(), b.norm(), zpair.z1.norm());
    for (r, pair) in [(ra, (1, 2)), (rb, (1, 3)), (r1, (2, 3))] {
        if r <= eps {
            return Err(Error::CollisionSingularity { pair, dist: r });
        }
    }
    let fa = a / (ra * ra * ra);
    let fb = b / (rb * rb * rb);
    let z1dd = fa - fb - 2.0 * m / (r1 * r1 * r1) * zpair.z1;
    let z2dd = -0.5 * (1.0 + 2.0 * m) * (fa + fb);
    Ok((z1dd, z2dd))
}

/// Whether the trajectory closes into a periodic orbit under its symmetry
/// group, and after how many fundamental domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Periodicity {
    Periodic { domains: u64 },
    QuasiPeriodic,
}

/// A time-ordered sequence of phase states with conservation diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    /// Max relative drift of `K - U` over the run.
    pub energy_drift: f64,
    /// Max drift of the total angular momentum, relative to its scale.
    pub angmom_drift: f64,
    /// Set when integration stopped at the pairwise-distance floor:
    /// `(time, min_distance)`.
    pub collision_stop: Option<(f64, f64)>,
    /// For symmetry extensions: periodicity label and seam diagnostics.
    pub periodicity: Option<Periodicity>,
    /// Largest phase-space mismatch across extension seams.
    pub closure_gap: Option<f64>,
}

impl Trajectory {
    /// Maps a collision stop into [`Error::CollisionApproach`].
    pub fn complete(&self) -> Result<&Self> {
        match self.collision_stop {
            Some((time, min_distance)) => Err(Error::CollisionApproach {
                time,
                min_distance,
            }),
            None => Ok(self),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Absolute pairwise-distance floor; defaults to 1e-6 of the initial
    /// configuration scale.
    pub collision_floor: Option<f64>,
    pub max_steps: usize,
    /// When set, record exactly `n + 1` uniform samples instead of every
    /// accepted step.
    pub uniform_samples: Option<usize>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            collision_floor: None,
            max_steps: 4_000_000,
            uniform_samples: None,
        }
    }
}

// Dormand-Prince 5(4) tableau (the system is autonomous; stage times are unused).
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

type OdeVec = [f64; 12];

fn pack(state: &PhaseState) -> OdeVec {
    let q = state.config.positions();
    [
        q[0].x,
        q[0].y,
        q[1].x,
        q[1].y,
        q[2].x,
        q[2].y,
        state.vel[0].x,
        state.vel[0].y,
        state.vel[1].x,
        state.vel[1].y,
        state.vel[2].x,
        state.vel[2].y,
    ]
}

fn unpack(y: &OdeVec) -> PhaseState {
    PhaseState {
        config: PlanarConfig {
            q1: Vec2::new(y[0], y[1]),
            q2: Vec2::new(y[2], y[3]),
            q3: Vec2::new(y[4], y[5]),
        },
        vel: [
            Vec2::new(y[6], y[7]),
            Vec2::new(y[8], y[9]),
            Vec2::new(y[10], y[11]),
        ],
    }
}

fn deriv(y: &OdeVec, masses: &MassSet) -> Result<OdeVec> {
    let st = unpack(y);
    let acc = accel_cartesian(&st.config, masses)?;
    Ok([
        y[6], y[7], y[8], y[9], y[10], y[11], acc[0].x, acc[0].y, acc[1].x, acc[1].y, acc[2].x,
        acc[2].y,
    ])
}

fn min_pair_distance(y: &OdeVec) -> f64 {
    unpack(y).config.min_pair_distance().0
}

/// Adaptive Dormand-Prince 5(4) integration of the Newtonian equations over
/// `t_span`, recording energy and angular-momentum drift. Integration stops
/// early (marking `collision_stop`) when a pairwise distance falls under the
/// collision floor.
pub fn integrate(
    state: &PhaseState,
    masses: &MassSet,
    t_span: (f64, f64),
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::Domain(format!("bad time span [{t0}, {t1}]")));
    }
    let floor = opts
        .collision_floor
        .unwrap_or(1e-6 * state.config.scale());
    let mut y = pack(state);
    if min_pair_distance(&y) <= floor {
        return Err(Error::CollisionApproach {
            time: t0,
            min_distance: min_pair_distance(&y),
        });
    }

    let e0 = state.energy(masses)?;
    let l0 = state.angular_momentum(masses);
    let e_scale = e0.abs().max(1.0);
    let l_scale = l0.abs().max(1.0);

    let sample_times: Option<Vec<f64>> = opts.uniform_samples.map(|n| {
        (0..=n)
            .map(|k| t0 + (t1 - t0) * k as f64 / n.max(1) as f64)
            .collect()
    });
    let mut next_sample = 1usize;

    let mut times = vec![t0];
    let mut states = vec![*state];
    let mut energy_drift = 0.0f64;
    let mut angmom_drift = 0.0f64;

    let mut t = t0;
    let mut h = ((t1 - t0) * 1e-4).min(1e-3);
    let mut k0 = deriv(&y, masses)?;
    let mut collision_stop = None;

    let mut steps = 0usize;
    'outer: while t < t1 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Domain(format!(
                "integration exceeded {} steps",
                opts.max_steps
            )));
        }
        // clip to the end and to the next requested sample time
        let target = match &sample_times {
            Some(samples) if next_sample < samples.len() => samples[next_sample].min(t1),
            _ => t1,
        };
        let mut hit_target = false;
        if t + h >= target {
            h = target - t;
            hit_target = true;
        }
        if h <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            h = 4.0 * f64::EPSILON * t.abs().max(1.0);
            hit_target = t + h >= target;
        }

        // stage evaluations
        let mut k = [[0.0f64; 12]; 7];
        k[0] = k0;
        let mut failed_stage = false;
        for s in 1..7 {
            let mut ys = y;
            for (i, yi) in ys.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += DP_A[s][j] * kj[i];
                }
                *yi += h * acc;
            }
            match deriv(&ys, masses) {
                Ok(d) => k[s] = d,
                Err(_) => {
                    failed_stage = true;
                    break;
                }
            }
        }
        if failed_stage {
            h *= 0.25;
            continue 'outer;
        }

        // 5th-order solution and embedded error estimate
        let mut y_new = y;
        let mut err_norm_sq = 0.0;
        for i in 0..12 {
            let mut acc = 0.0;
            let mut err = 0.0;
            for (j, kj) in k.iter().enumerate() {
                if j < 6 {
                    acc += DP_A[6][j] * kj[i];
                }
                err += DP_ERR[j] * kj[i];
            }
            y_new[i] = y[i] + h * acc;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let e = h * err / sc;
            err_norm_sq += e * e;
        }
        let err_norm = (err_norm_sq / 12.0).sqrt();

        let dist = min_pair_distance(&y_new);
        if err_norm <= 1.0 && dist > floor {
            t = if hit_target { target } else { t + h };
            y = y_new;
            k0 = deriv(&y, masses)?;
            // with uniform sampling the step is clipped to land exactly on
            // the next sample time, so hitting the target means recording
            let is_sample = match &sample_times {
                Some(_) => {
                    if hit_target {
                        next_sample += 1;
                    }
                    hit_target
                }
                None => true,
            };
            if is_sample {
                let st = unpack(&y);
                energy_drift = energy_drift.max((st.energy(masses)? - e0).abs() / e_scale);
                angmom_drift =
                    angmom_drift.max((st.angular_momentum(masses) - l0).abs() / l_scale);
                times.push(t);
                states.push(st);
            }
            let factor = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * factor).max(1e-14 * (t1 - t0));
        } else if dist <= floor && err_norm <= 1.0 {
            // accurate step, but it violates the distance floor
            if h < 1e-12 * (t1 - t0) {
                collision_stop = Some((t, dist));
                break 'outer;
            }
            h *= 0.5;
        } else {
            h *= (0.9 * err_norm.powf(-0.2)).clamp(0.1, 0.9);
        }
    }

    Ok(Trajectory {
        times,
        states,
        energy_drift,
        angmom_drift,
        collision_stop,
        periodicity: None,
        closure_gap: None,
    })
}

/// Max over interior nodes of the scaled defect between the central second
/// difference of the path and the Newtonian acceleration:
/// `max_k max_i |qdd_i - a_i| / max_i |a_i|`.
pub fn el_residual(path: &DiscretePath, masses: &MassSet) -> Result<f64> {
    let n = path.n_nodes();
    if n < 3 {
        return Err(Error::Domain("need at least 3 nodes".into()));
    }
    let h = path.h();
    let mut worst = 0.0f64;
    for k in 1..n - 1 {
        let acc = accel_cartesian(path.node(k), masses)?;
        let qm = path.node(k - 1).positions();
        let q0 = path.node(k).positions();
        let qp = path.node(k + 1).positions();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..3 {
            let qdd = (qp[i] - 2.0 * q0[i] + qm[i]) / (h * h);
            num = num.max((qdd - acc[i]).norm());
            den = den.max(acc[i].norm());
        }
        worst = worst.max(num / den.max(1e-300));
    }
    Ok(worst)
}

/// The Lagrange equilateral relative equilibrium for masses `[1, m, m]`:
/// state at `t = 0` and the rotation period.
pub fn lagrange_equilateral(masses: &MassSet, side: f64) -> (PhaseState, f64) {
    let m = masses.m();
    let p = [
        Vec2::new(0.0, 0.0),
        Vec2::new(side, 0.0),
        Vec2::new(0.5 * side, side * 3.0f64.sqrt() / 2.0),
    ];
    let total = masses.total();
    let com = (p[0] + m * p[1] + m * p[2]) / total;
    let q: Vec<Vec2> = p.iter().map(|&v| v - com).collect();
    let omega = (total / side.powi(3)).sqrt();
    let vel: Vec<Vec2> = q.iter().map(|&v| omega * Vec2::new(-v.y, v.x)).collect();
    let state = PhaseState {
        config: PlanarConfig {
            q1: q[0],
            q2: q[1],
            q3: q[2],
        },
        vel: [vel[0], vel[1], vel[2]],
    };
    (state, 2.0 * std::f64::consts::PI / omega)
}

/// Outcome of the rotation-by-quarter dichotomy at `theta = pi/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SchubartDichotomy {
    /// The arc is collinear throughout (Schubart-type candidate).
    Collinear,
    /// The arc is collision-free and genuinely planar
    /// (Broucke-Henon-type candidate).
    IsoscelesFree,
    Undetermined { reason: String },
}

/// Classifies a retrograde `theta = pi/2` minimizer as collinear or
/// collision-free planar.
pub fn schubart_dichotomy(report: &MinimizerReport) -> SchubartDichotomy {
    let path = &report.path;
    let diam = path.diameter();
    let eps_axis = EPS_AXIS_REL.max(1e-6) * diam;
    let max_y = path
        .nodes()
        .iter()
        .flat_map(|c| c.positions())
        .map(|p| p.y.abs())
        .fold(0.0, f64::max);
    if max_y < eps_axis {
        return SchubartDichotomy::Collinear;
    }
    let (dmin, _, _) = path.min_separation();
    if dmin > 1e-6 * diam {
        return SchubartDichotomy::IsoscelesFree;
    }
    SchubartDichotomy::Undetermined {
        reason: format!(
            "neither collinear (max |y| = {max_y:e}) nor clearly collision-free (min distance {dmin:e})"
        ),
    }
}

/// Body-2/3 swap composed with reflection across the line at angle `theta`.
fn isosceles_reflect(cfg: &PlanarConfig, theta: f64) -> PlanarConfig {
    let refl = |v: Vec2| {
        let r = v.rotate(-theta);
        Vec2::new(r.x, -r.y).rotate(theta)
    };
    PlanarConfig {
        q1: refl(cfg.q1),
        q2: refl(cfg.q3),
        q3: refl(cfg.q2),
    }
}

fn isosceles_reflect_vec(v: &[Vec2; 3], theta: f64) -> [Vec2; 3] {
    let refl = |v: Vec2| {
        let r = v.rotate(-theta);
        Vec2::new(r.x, -r.y).rotate(theta)
    };
    [refl(v[0]), refl(v[2]), refl(v[1])]
}

fn rotate_swap(cfg: &PlanarConfig, angle: f64) -> PlanarConfig {
    PlanarConfig {
        q1: cfg.q1.rotate(angle),
        q2: cfg.q3.rotate(angle),
        q3: cfg.q2.rotate(angle),
    }
}

fn rotate_swap_vec(v: &[Vec2; 3], angle: f64) -> [Vec2; 3] {
    [v[0].rotate(angle), v[2].rotate(angle), v[1].rotate(angle)]
}

/// Extends a verified minimizing arc over `copies` fundamental domains by
/// the boundary symmetries: brake reflection across the x-axis at the
/// collinear end, reflection across the rotated isosceles axis (with the
/// equal-mass body swap) at the other.
///
/// The result is labeled periodic, with the minimal period in fundamental
/// domains, exactly when `theta` is a rational multiple of pi.
pub fn extend_orbit(
    report: &MinimizerReport,
    masses: &MassSet,
    copies: usize,
) -> Result<Trajectory> {
    let verdict = verify_minimizer(report, masses, &VerifyOptions::default());
    if !verdict.passed {
        return Err(Error::NotVerified(verdict.summary()));
    }
    if copies == 0 {
        return Err(Error::Domain("copies must be at least 1".into()));
    }
    let theta = report.problem.theta.radians();
    let path = &report.path;
    let n = path.n_nodes();
    let dur = path.duration();
    let vels = path.velocities();

    // seam defects: anti-symmetric velocity components at the two ends
    let collinear_gap = {
        let v = &vels[0];
        2.0 * v.iter().map(|w| w.x.abs()).fold(0.0, f64::max)
    };
    let isosceles_gap = {
        let v = vels[n - 1];
        let rv = isosceles_reflect_vec(&v, theta);
        (0..3)
            .map(|i| (v[i] + rv[i]).norm())
            .fold(0.0, f64::max)
    };
    let closure_gap = collinear_gap.max(isosceles_gap);

    // Domain d maps onto the arc as follows, with the block transform
    // B = R(2 theta) . swap and T the arc duration:
    //   d even: q(dT + s) =  B^(d/2) F(s)
    //   d odd : q(dT + s) =  B^(d/2) sigma1 F(T - s), velocities negated
    // where sigma1 reflects across the rotated isosceles axis and swaps the
    // equal-mass bodies. Both seams are continuous by the boundary symmetry.
    let h = path.h();
    let mut times = Vec::with_capacity(copies * (n - 1) + 1);
    let mut states = Vec::with_capacity(copies * (n - 1) + 1);
    for d in 0..copies {
        let j = d / 2;
        let block_angle = 2.0 * theta * j as f64;
        let start_k = if d == 0 { 0 } else { 1 };
        for k in start_k..n {
            let (mut cfg, mut vel, sign) = if d % 2 == 0 {
                (*path.node(k), vels[k], 1.0)
            } else {
                (*path.node(n - 1 - k), vels[n - 1 - k], -1.0)
            };
            if d % 2 == 1 {
                cfg = isosceles_reflect(&cfg, theta);
                vel = isosceles_reflect_vec(&vel, theta);
            }
            if j % 2 == 1 {
                cfg = rotate_swap(&cfg, block_angle);
                vel = rotate_swap_vec(&vel, block_angle);
            } else if block_angle != 0.0 {
                cfg = PlanarConfig {
                    q1: cfg.q1.rotate(block_angle),
                    q2: cfg.q2.rotate(block_angle),
                    q3: cfg.q3.rotate(block_angle),
                };
                vel = [
                    vel[0].rotate(block_angle),
                    vel[1].rotate(block_angle),
                    vel[2].rotate(block_angle),
                ];
            }
            if sign < 0.0 {
                vel = [-vel[0], -vel[1], -vel[2]];
            }
            times.push(d as f64 * dur + k as f64 * h);
            states.push(PhaseState { config: cfg, vel });
        }
    }

    // conservation diagnostics across the assembled trajectory
    let e0 = states[0].energy(masses)?;
    let l0 = states[0].angular_momentum(masses);
    let mut energy_drift = 0.0f64;
    let mut angmom_drift = 0.0f64;
    for st in &states {
        energy_drift = energy_drift.max((st.energy(masses)? - e0).abs() / e0.abs().max(1.0));
        angmom_drift =
            angmom_drift.max((st.angular_momentum(masses) - l0).abs() / l0.abs().max(1.0));
    }

    let periodicity = match report.problem.theta.over_pi() {
        Some((_, q)) => {
            let blocks = if q % 2 == 0 { q } else { 2 * q };
            Some(Periodicity::Periodic {
                domains: 2 * blocks,
            })
        }
        None => Some(Periodicity::QuasiPeriodic),
    };

    Ok(Trajectory {
        times,
        states,
        energy_drift,
        angmom_drift,
        collision_stop: None,
        periodicity,
        closure_gap: Some(closure_gap),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn masses(m: f64) -> MassSet {
        MassSet::new(m).unwrap()
    }

    struct Xorshift(u64);
    impl Xorshift {
        fn next(&mut self) -> f64 {
            self.0 ^= self.0 << 13;
            self.0 ^= self.0 >> 7;
            self.0 ^= self.0 << 17;
            (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        }
        fn vec(&mut self) -> Vec2 {
            Vec2::new(self.next(), self.next())
        }
    }

    #[test]
    fn jacobi_acceleration_example() {
        let ms = masses(1.0);
        let zp = JacobiPair::new(Vec2::new(2.0, 0.0), Vec2::new(0.0, 0.0));
        let (z1dd, z2dd) = accel_jacobi(&zp, &ms).unwrap();
        assert_relative_eq!(z1dd.x, -2.5);
        assert_relative_eq!(z1dd.y, 0.0);
        assert_relative_eq!(z2dd.norm(), 0.0);
    }

    #[test]
    fn jacobi_acceleration_matches_cartesian() {
        use crate::geometry::{from_jacobi, to_jacobi};
        let mut rng = Xorshift(0xfeed);
        for &m in &[0.3, 1.0, 5.0] {
            let ms = masses(m);
            let mut done = 0;
            while done < 350 {
                let cfg = crate::geometry::PlanarConfig::from_free(rng.vec(), rng.vec(), &ms);
                if cfg.min_pair_distance().0 < 5e-2 {
                    continue;
                }
                done += 1;
                let zp = to_jacobi(&cfg, &ms);
                let (z1dd, z2dd) = accel_jacobi(&zp, &ms).unwrap();
                let acc = accel_cartesian(&cfg, &ms).unwrap();
                let z1dd_c = acc[1] - acc[2];
                let z2dd_c = (1.0 + 0.5 / m) * acc[0];
                let scale = z1dd_c.norm().max(z2dd_c.norm()).max(1.0);
                assert!((z1dd - z1dd_c).norm() <= 1e-12 * scale);
                assert!((z2dd - z2dd_c).norm() <= 1e-12 * scale);
                // round-trip keeps the config consistent
                let back = from_jacobi(&zp, &ms);
                assert!((back.q1 - cfg.q1).norm() <= 1e-13 * cfg.scale().max(1.0));
            }
        }
    }

    #[test]
    fn jacobi_acceleration_parity() {
        // negating Z2 negates Z2'' and keeps Z1'''s structure
        let ms = masses(0.7);
        let zp = JacobiPair::new(Vec2::new(1.3, 0.4), Vec2::new(0.5, -0.8));
        let neg = JacobiPair::new(zp.z1, -zp.z2);
        let (a1, a2) = accel_jacobi(&zp, &ms).unwrap();
        let (b1, b2) = accel_jacobi(&neg, &ms).unwrap();
        assert!((a2 + b2).norm() <= 1e-14 * a2.norm().max(1.0));
        assert!((a1 - b1).norm() <= 1e-14 * a1.norm().max(1.0));
    }

    #[test]
    fn lagrange_orbit_closes() {
        for &m in &[0.5, 1.0] {
            let ms = masses(m);
            let (state, period) = lagrange_equilateral(&ms, 1.0);
            let traj = integrate(&state, &ms, (0.0, period), &IntegrateOptions::default()).unwrap();
            assert!(traj.collision_stop.is_none());
            let last = traj.states.last().unwrap();
            let scale = state.config.scale();
            for (a, b) in last
                .config
                .positions()
                .iter()
                .zip(state.config.positions())
            {
                assert!(
                    (*a - b).norm() <= 1e-6 * scale,
                    "m={m}: endpoint off by {:e}",
                    (*a - b).norm()
                );
            }
            assert!(traj.energy_drift < 1e-9, "energy drift {}", traj.energy_drift);
            assert!(traj.angmom_drift < 1e-9, "angmom drift {}", traj.angmom_drift);
        }
    }

    #[test]
    fn conservation_on_generic_states() {
        let ms = masses(1.0);
        let mut rng = Xorshift(0xbead);
        let mut done = 0;
        while done < 5 {
            let q2 = rng.vec();
            let q3 = rng.vec();
            let cfg = crate::geometry::PlanarConfig::from_free(q2, q3, &ms);
            if cfg.min_pair_distance().0 < 0.5 {
                continue;
            }
            let v2 = 0.3 * rng.vec();
            let v3 = 0.3 * rng.vec();
            let v1 = -(ms.m() * (v2 + v3));
            let state = PhaseState::new(cfg, [v1, v2, v3], &ms).unwrap();
            let traj = match integrate(&state, &ms, (0.0, 1.0), &IntegrateOptions::default()) {
                Ok(t) => t,
                Err(_) => continue,
            };
            if traj.collision_stop.is_some() {
                continue;
            }
            done += 1;
            assert!(traj.energy_drift < 1e-9, "drift {}", traj.energy_drift);
            assert!(traj.angmom_drift < 1e-9, "drift {}", traj.angmom_drift);
            // center of mass stays at the origin
            for st in &traj.states {
                assert!(st.config.chi_residual(&ms) <= 1e-12 * st.config.scale().max(1.0));
            }
        }
    }

    #[test]
    fn collinear_invariant_set() {
        // collinear positions with collinear velocities stay collinear
        let ms = masses(1.0);
        let cfg = crate::geometry::PlanarConfig::from_free(
            Vec2::new(1.0, 0.0),
            Vec2::new(-1.0, 0.0),
            &ms,
        );
        let v2 = Vec2::new(1.0, 0.0);
        let v3 = Vec2::new(-1.0, 0.0);
        let v1 = -(v2 + v3);
        let state = PhaseState::new(cfg, [v1, v2, v3], &ms).unwrap();
        let traj = integrate(&state, &ms, (0.0, 1.0), &IntegrateOptions::default())
            .unwrap();
        assert!(traj.collision_stop.is_none());
        for st in &traj.states {
            for p in st.config.positions() {
                assert!(p.y.abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn isosceles_invariant_set() {
        // q1 on the y-axis, bodies 2/3 mirror images: the symmetry persists
        let ms = masses(1.0);
        let q2 = Vec2::new(0.8, -0.3);
        let q3 = Vec2::new(-0.8, -0.3);
        let cfg = crate::geometry::PlanarConfig::from_free(q2, q3, &ms);
        assert!(cfg.q1.x.abs() <= 1e-15);
        let v2 = Vec2::new(0.2, 0.5);
        let v3 = Vec2::new(-0.2, 0.5);
        let v1 = -(ms.m() * (v2 + v3));
        let state = PhaseState::new(cfg, [v1, v2, v3], &ms).unwrap();
        let traj = integrate(&state, &ms, (0.0, 1.0), &IntegrateOptions::default()).unwrap();
        assert!(traj.collision_stop.is_none());
        for st in &traj.states {
            assert!(st.config.q1.x.abs() <= 1e-10);
            assert!((st.config.q2.x + st.config.q3.x).abs() <= 1e-10);
            assert!((st.config.q2.y - st.config.q3.y).abs() <= 1e-10);
        }
    }

    #[test]
    fn el_residual_second_order_on_solution() {
        let ms = masses(1.0);
        let (state, period) = lagrange_equilateral(&ms, 1.0);
        let omega = 2.0 * PI / period;
        let res: Vec<f64> = [200usize, 400]
            .iter()
            .map(|&n| {
                let nodes = (0..n)
                    .map(|k| {
                        let ang = omega * 0.4 * period * k as f64 / (n - 1) as f64;
                        let q = state.config.positions();
                        crate::geometry::PlanarConfig {
                            q1: q[0].rotate(ang),
                            q2: q[1].rotate(ang),
                            q3: q[2].rotate(ang),
                        }
                    })
                    .collect();
                let path = crate::action::DiscretePath::new(nodes, 0.4 * period).unwrap();
                el_residual(&path, &ms).unwrap()
            })
            .collect();
        let ratio = res[0] / res[1];
        assert!(
            (3.0..5.0).contains(&ratio),
            "expected quartering, got {res:?}"
        );
    }

    #[test]
    fn el_residual_flags_non_solutions() {
        // straight uniform motion in a gravitational field is not a solution
        let ms = masses(1.0);
        let nodes = (0..50)
            .map(|k| {
                let t = k as f64 / 49.0;
                crate::geometry::PlanarConfig::from_free(
                    Vec2::new(1.0 + 0.3 * t, 0.1),
                    Vec2::new(-1.0, -0.1),
                    &ms,
                )
            })
            .collect();
        let path = crate::action::DiscretePath::new(nodes, 1.0).unwrap();
        let res = el_residual(&path, &ms).unwrap();
        assert!(res > 0.9, "uniform drift should have residual near 1, got {res}");
    }

    #[test]
    fn integrator_stops_at_collision_floor() {
        // head-on infall of the binary pair
        let ms = masses(1.0);
        let cfg = crate::geometry::PlanarConfig::from_free(
            Vec2::new(0.5, 0.0),
            Vec2::new(-0.5, 0.0),
            &ms,
        );
        let state = PhaseState::new(cfg, [Vec2::default(); 3], &ms).unwrap();
        let traj = integrate(&state, &ms, (0.0, 5.0), &IntegrateOptions::default()).unwrap();
        assert!(traj.collision_stop.is_some());
        assert!(traj.complete().is_err());
        let (t_stop, d) = traj.collision_stop.unwrap();
        assert!(t_stop > 0.0 && t_stop < 5.0);
        assert!(d <= 1e-4);
    }

    #[test]
    fn uniform_sampling_hits_grid() {
        let ms = masses(1.0);
        let (state, _) = lagrange_equilateral(&ms, 1.0);
        let opts = IntegrateOptions {
            uniform_samples: Some(64),
            ..Default::default()
        };
        let traj = integrate(&state, &ms, (0.0, 1.0), &opts).unwrap();
        assert_eq!(traj.times.len(), 65);
        for (k, t) in traj.times.iter().enumerate() {
            assert_relative_eq!(*t, k as f64 / 64.0, epsilon = 1e-9);
        }
    }
}
