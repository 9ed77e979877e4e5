//! Closed-form level estimates and test paths.
//!
//! The exclusion arguments rest on explicit numbers: a lower bound on the
//! action of any total-collision path, the action of Euler-type collapse
//! paths, a circular retrograde test path whose action has a closed form in
//! terms of the ring integral `J(s)`, and an 11-node interpolated test path
//! compared against the Euler action on a fine rotation grid.

use crate::action::{action_piecewise_linear, DiscretePath};
use crate::angle::Angle;
use crate::error::{Error, Result};
use crate::geometry::{MassSet, PlanarConfig};
use crate::vec2::Vec2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

fn check_mass(m: f64) -> Result<()> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::Domain(format!("mass must be positive, got {m}")));
    }
    Ok(())
}

/// Lower bound on the action of any path with a total collision:
/// `(3m/2) pi^(2/3) (m+2) / (1+2m)^(1/3)`, scaled by `duration^(1/3)`.
pub fn total_collision_lower_bound(m: f64, duration: f64) -> Result<f64> {
    check_mass(m)?;
    if !(duration > 0.0) {
        return Err(Error::Domain(format!(
            "duration must be positive, got {duration}"
        )));
    }
    Ok(1.5 * m * PI.powf(2.0 / 3.0) * (m + 2.0) / (1.0 + 2.0 * m).powf(1.0 / 3.0)
        * duration.powf(1.0 / 3.0))
}

/// Action of the collapsing Euler test path:
/// `(3/2) (pi/2 - theta)^(2/3) [2 m^3 (2 + m/2)^2]^(1/3)`.
pub fn euler_collapse_test_action(m: f64, theta: f64) -> Result<f64> {
    check_mass(m)?;
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(Error::Domain(format!("theta {theta} outside [0, pi/2]")));
    }
    let cube = 2.0 * m.powi(3) * (2.0 + 0.5 * m).powi(2);
    Ok(1.5 * (FRAC_PI_2 - theta).powf(2.0 / 3.0) * cube.powf(1.0 / 3.0))
}

/// `g(m) = 8 (m+2)^3 - (4+m)^2 (1+2m)`; positivity of `g` is equivalent to
/// the total-collision bound exceeding the Euler test action.
pub fn g_poly(m: f64) -> f64 {
    8.0 * (m + 2.0).powi(3) - (4.0 + m).powi(2) * (1.0 + 2.0 * m)
}

/// `g'(m) = 18 m^2 + 62 m + 56`.
pub fn g_poly_derivative(m: f64) -> f64 {
    18.0 * m * m + 62.0 * m + 56.0
}

/// Euler action for unit mass ratio: `3 (5/4)^(2/3) (pi/2 - theta)^(2/3)`.
pub fn euler_action_m1(theta: f64) -> Result<f64> {
    if !(0.0..=FRAC_PI_2).contains(&theta) {
        return Err(Error::Domain(format!("theta {theta} outside [0, pi/2]")));
    }
    Ok(3.0 * (5.0 / 4.0f64).powf(2.0 / 3.0) * (FRAC_PI_2 - theta).powf(2.0 / 3.0))
}

/// Ring integral `J(s) = int_0^1 dt / sqrt(1 - 2 s cos(2 pi t) + s^2)`.
///
/// Trapezoid sums on the doubling grid converge spectrally for this smooth
/// periodic integrand; the refinement stops at an absolute tolerance of
/// `1e-10`.
pub fn j_integral(s: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::Domain(format!("J(s) needs 0 <= s < 1, got {s}")));
    }
    let f = |t: f64| 1.0 / (1.0 - 2.0 * s * (2.0 * PI * t).cos() + s * s).sqrt();
    let mut n = 8usize;
    let mut prev = trapezoid_periodic(&f, n);
    loop {
        n *= 2;
        let cur = trapezoid_periodic(&f, n);
        if (cur - prev).abs() < 0.5e-10 || n >= 1 << 22 {
            return Ok(cur);
        }
        prev = cur;
    }
}

fn trapezoid_periodic(f: &impl Fn(f64) -> f64, n: usize) -> f64 {
    // f has period 1; endpoints coincide, so the plain mean is the trapezoid sum
    (0..n).map(|k| f(k as f64 / n as f64)).sum::<f64>() / n as f64
}

fn j_half() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| j_integral(0.5).expect("J(1/2) in range"))
}

/// Samples the circular retrograde test path at parameter `t` of its full
/// period; `[0, 1/4]` is a fundamental domain.
///
/// The outer body rides a circle of frequency `phi = 4 theta` while the
/// inner pair counter-rotates at `phi - 2 pi`.
pub fn circular_retrograde_config(masses: &MassSet, theta: f64, t: f64) -> PlanarConfig {
    let m = masses.m();
    let mt = masses.total();
    let phi = 4.0 * theta;
    let q = Vec2::new((mt * phi).powf(-2.0 / 3.0), 0.0).rotate(phi * t);
    let r = Vec2::new(
        ((2.0 * m).powf(2.0 / 3.0) * (2.0 * PI).powf(2.0 / 3.0)).recip(),
        0.0,
    )
    .rotate((phi - 2.0 * PI) * t);
    PlanarConfig {
        q1: -2.0 * m * q,
        q2: q - m * r,
        q3: q + m * r,
    }
}

/// The circular retrograde test path sampled on `n_nodes` over the
/// fundamental domain `[0, 1/4]`.
pub fn circular_retrograde_path(
    masses: &MassSet,
    theta: f64,
    n_nodes: usize,
) -> Result<DiscretePath> {
    if !(theta > 0.0 && theta <= FRAC_PI_2) {
        return Err(Error::Domain(format!("theta {theta} outside (0, pi/2]")));
    }
    let nodes = (0..n_nodes)
        .map(|k| {
            let t = 0.25 * k as f64 / (n_nodes - 1) as f64;
            circular_retrograde_config(masses, theta, t)
        })
        .collect();
    DiscretePath::new(nodes, 0.25)
}

/// Exact action of the circular retrograde test path over its fundamental
/// domain `[0, 1/4]`.
pub fn retrograde_test_action(m: f64, theta: f64) -> Result<f64> {
    check_mass(m)?;
    if !(theta > 0.0 && theta <= FRAC_PI_2) {
        return Err(Error::Domain(format!("theta {theta} outside (0, pi/2]")));
    }
    let mt = 2.0 * m + 1.0;
    let phi = 4.0 * theta;
    let alpha =
        (phi * phi / mt).powf(1.0 / 3.0) / ((2.0 * m).powf(2.0 / 3.0) * (2.0 * PI).powf(2.0 / 3.0));
    let k_total = m
        * ((phi / (mt * mt)).powf(2.0 / 3.0)
            + m * m * (phi - 2.0 * PI).powi(2)
                / ((2.0 * m).powf(4.0 / 3.0) * (2.0 * PI).powf(4.0 / 3.0)))
        + 2.0 * m * m * (phi / (mt * mt)).powf(2.0 / 3.0);
    let u_pair = 2.0f64.powf(1.0 / 3.0) * m.powf(5.0 / 3.0) * PI.powf(2.0 / 3.0);
    let u_ring = 2.0 * m * (phi * phi / mt).powf(1.0 / 3.0) * j_integral(m * alpha)?;
    Ok(0.25 * (k_total + u_pair + u_ring))
}

/// The `theta`-free majorization of [`retrograde_test_action`]:
/// `(m/4) (pi^2/M)^(1/3) [3 2^(-2/3) m^(2/3) M^(1/3) + (2 J(1/2) + 1) 2^(2/3)]`
/// with `M = 2m + 1`.
pub fn retrograde_test_action_bound(m: f64) -> Result<f64> {
    check_mass(m)?;
    let mt = 2.0 * m + 1.0;
    Ok(m / 4.0
        * (PI * PI / mt).powf(1.0 / 3.0)
        * (3.0 * 2.0f64.powf(-2.0 / 3.0) * m.powf(2.0 / 3.0) * mt.powf(1.0 / 3.0)
            + (2.0 * j_half() + 1.0) * 2.0f64.powf(2.0 / 3.0)))
}

/// `f(m) = f1(m) - f2(m)`: the bound minus the quarter-period
/// total-collision level. Negative for `m >= 1`.
pub fn f_diff(m: f64) -> Result<f64> {
    Ok(retrograde_test_action_bound(m)? - total_collision_lower_bound(m, 0.25)?)
}

/// The bracketed factor of `f(m)`:
/// `3 2^(-2/3) m^(2/3) M^(1/3) + (2 J(1/2) + 1) 2^(2/3) - 3 2^(1/3) (m+2)`.
/// Decreasing for `m >= 1`.
pub fn retrograde_margin_factor(m: f64) -> Result<f64> {
    check_mass(m)?;
    let mt = 2.0 * m + 1.0;
    Ok(
        3.0 * 2.0f64.powf(-2.0 / 3.0) * m.powf(2.0 / 3.0) * mt.powf(1.0 / 3.0)
            + (2.0 * j_half() + 1.0) * 2.0f64.powf(2.0 / 3.0)
            - 3.0 * 2.0f64.powf(1.0 / 3.0) * (m + 2.0),
    )
}

/// The small-mass ratio constant
/// `1/(2 3^(2/3)) + (2 J(1/2) + 1) 2^(2/3) / (6 2^(1/3))`, which bounds
/// test-over-total for all `0 < m <= 1`. Roughly `0.9011`.
pub fn ratio_small_mass_bound() -> f64 {
    0.5 * 3.0f64.powf(-2.0 / 3.0)
        + (2.0 * j_half() + 1.0) * 2.0f64.powf(2.0 / 3.0) / (6.0 * 2.0f64.powf(1.0 / 3.0))
}

/// The 11-point interpolation table: times, `q1` and `q2` rows; `q3`
/// always follows from the center-of-mass identity. The final row is stored
/// unrotated and receives `R(theta)` when a path is built.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPathTable {
    pub theta0: Angle,
    pub rows: Vec<(f64, Vec2, Vec2)>,
}

static TABLE1_TEXT: &str = include_str!("../data/table1.txt");

impl TestPathTable {
    /// The checked-in 11-point table (unit mass ratio, `theta0 = 0.053 pi`).
    pub fn builtin() -> &'static TestPathTable {
        static CACHE: OnceLock<TestPathTable> = OnceLock::new();
        CACHE.get_or_init(|| {
            TestPathTable::parse(TABLE1_TEXT, "builtin table1").expect("builtin table parses")
        })
    }

    /// Parses the table format: a `theta0:` header then one `t q1x q1y q2x q2y`
    /// row per node.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let malformed = |line: usize, msg: String| Error::MalformedFile {
            path: origin.to_string(),
            line: line + 1,
            msg,
        };
        let (hline, header) = lines
            .next()
            .ok_or_else(|| malformed(0, "empty file".into()))?;
        let theta0 = header
            .strip_prefix("theta0:")
            .map(str::trim)
            .ok_or_else(|| malformed(hline, "expected 'theta0:' header".into()))
            .and_then(|s| {
                Angle::parse(s).map_err(|e| malformed(hline, format!("bad theta0: {e}")))
            })?;
        let mut rows = Vec::new();
        for (ln, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| malformed(ln, format!("bad number '{tok}'")))
                })
                .collect::<Result<_>>()?;
            if fields.len() != 5 {
                return Err(malformed(
                    ln,
                    format!("expected 5 fields (t q1x q1y q2x q2y), got {}", fields.len()),
                ));
            }
            rows.push((
                fields[0],
                Vec2::new(fields[1], fields[2]),
                Vec2::new(fields[3], fields[4]),
            ));
        }
        if rows.len() < 2 {
            return Err(malformed(0, "need at least 2 rows".into()));
        }
        Ok(Self { theta0, rows })
    }

    /// Builds the piecewise-linear test path for rotation `theta`: all rows
    /// verbatim except the last, which is rotated by `R(theta)`; `q3`
    /// completes each node in the center-of-mass space.
    pub fn path(&self, theta: f64, masses: &MassSet) -> Result<DiscretePath> {
        let m = masses.m();
        let n = self.rows.len();
        let nodes = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, &(_, q1, q2))| {
                let (q1, q2) = if i == n - 1 {
                    (q1.rotate(theta), q2.rotate(theta))
                } else {
                    (q1, q2)
                };
                let q3 = -(q1 + m * q2) / m;
                PlanarConfig { q1, q2, q3 }
            })
            .collect();
        DiscretePath::new(nodes, 1.0)
    }
}

/// Exact piecewise-linear action of the interpolated test path at `theta`.
pub fn interpolated_test_action(table: &TestPathTable, theta: f64) -> Result<f64> {
    let masses = MassSet::new(1.0)?;
    let path = table.path(theta, &masses)?;
    action_piecewise_linear(&path, &masses)
}

/// One row of the rotation sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub a_test: f64,
    pub a_euler: f64,
    pub gap: f64,
}

/// Result of sweeping the test-path and Euler actions over a rotation grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub min_gap: f64,
    pub min_gap_theta: f64,
}

/// Tabulates `euler_action_m1` against the interpolated test action on the
/// grid `theta_lo, theta_lo + step, ..` up to `theta_hi` (inclusive within
/// roundoff). Rows evaluate in parallel; order is by grid index.
pub fn sweep_compare(theta_lo: f64, theta_hi: f64, step: f64) -> Result<SweepResult> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {step}")));
    }
    if theta_hi < theta_lo {
        return Err(Error::Domain(format!(
            "empty range: {theta_lo} > {theta_hi}"
        )));
    }
    let count = ((theta_hi - theta_lo) / step + 1e-9).floor() as usize + 1;
    let table = TestPathTable::builtin();
    let rows: Vec<SweepRow> = (0..count)
        .into_par_iter()
        .map(|k| -> Result<SweepRow> {
            let theta = theta_lo + k as f64 * step;
            let a_test = interpolated_test_action(table, theta)?;
            let a_euler = euler_action_m1(theta)?;
            Ok(SweepRow {
                theta,
                a_test,
                a_euler,
                gap: a_euler - a_test,
            })
        })
        .collect::<Result<_>>()?;
    let (min_gap, min_gap_theta) = rows
        .iter()
        .map(|r| (r.gap, r.theta))
        .fold((f64::INFINITY, 0.0), |acc, x| if x.0 < acc.0 { x } else { acc });
    Ok(SweepResult {
        rows,
        min_gap,
        min_gap_theta,
    })
}

/// All closed-form level quantities for one `(m, theta, duration)` input,
/// with the outcome of each level inequality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelReport {
    pub m: f64,
    pub theta: f64,
    pub duration: f64,
    pub a_total_lb: f64,
    pub a_euler_collapse: f64,
    /// Circular retrograde test action (fundamental domain `[0, 1/4]`);
    /// absent at `theta = 0`.
    pub a_retro_test: Option<f64>,
    pub a_retro_test_bound: f64,
    pub a_total_lb_quarter: f64,
    pub g_value: f64,
    pub g_derivative: f64,
    pub f_value: f64,
    pub ratio_small_mass: f64,
    /// `a_total_lb - a_euler_collapse`, the total-collision exclusion margin.
    pub margin: f64,
    pub checks: Vec<LevelCheck>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelCheck {
    pub name: String,
    pub passed: bool,
}

/// Evaluates every level quantity at `(m, theta, duration)`.
pub fn level_report(m: f64, theta: f64, duration: f64) -> Result<LevelReport> {
    check_mass(m)?;
    let a_total_lb = total_collision_lower_bound(m, duration)?;
    let a_euler_collapse = euler_collapse_test_action(m, theta)?;
    let a_retro_test = if theta > 0.0 && theta <= FRAC_PI_2 {
        Some(retrograde_test_action(m, theta)?)
    } else {
        None
    };
    let a_retro_test_bound = retrograde_test_action_bound(m)?;
    let a_total_lb_quarter = total_collision_lower_bound(m, 0.25)?;
    let g_value = g_poly(m);
    let f_value = f_diff(m)?;
    let ratio_small_mass = ratio_small_mass_bound();
    let margin = a_total_lb - a_euler_collapse;
    let mut checks = vec![
        LevelCheck {
            name: "g_positive".into(),
            passed: g_value > 0.0,
        },
        LevelCheck {
            name: "total_lb_exceeds_euler_collapse".into(),
            passed: a_total_lb > a_euler_collapse,
        },
        LevelCheck {
            name: "retro_bound_below_total_lb_quarter".into(),
            passed: a_retro_test_bound < a_total_lb_quarter,
        },
        LevelCheck {
            name: "small_mass_ratio_below_one".into(),
            passed: ratio_small_mass < 1.0,
        },
    ];
    if let Some(a) = a_retro_test {
        checks.push(LevelCheck {
            name: "retro_test_below_bound".into(),
            passed: a <= a_retro_test_bound,
        });
        checks.push(LevelCheck {
            name: "retro_test_below_total_lb_quarter".into(),
            passed: a < a_total_lb_quarter,
        });
    }
    if m >= 1.0 {
        checks.push(LevelCheck {
            name: "f_negative".into(),
            passed: f_value < 0.0,
        });
    }
    Ok(LevelReport {
        m,
        theta,
        duration,
        a_total_lb,
        a_euler_collapse,
        a_retro_test,
        a_retro_test_bound,
        a_total_lb_quarter,
        g_value,
        g_derivative: g_poly_derivative(m),
        f_value,
        ratio_small_mass,
        margin,
        checks,
    })
}
