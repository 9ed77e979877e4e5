//! Configuration-space primitives for the planar three-body problem with
//! masses `[1, m, m]`: the center-of-mass space, the Jacobi-style change of
//! variables `Z1 = q2 - q3`, `Z2 = (1 + 1/(2m)) q1`, the boundary
//! configuration families, and the quadrant geometry of `(Z1, Z2)` paths.

use crate::error::{Error, Result};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

/// Relative threshold under which a vector counts as zero for angle purposes.
pub const EPS_ZERO_REL: f64 = 1e-12;

/// Relative band around the axes used by quadrant classification.
pub const EPS_AXIS_REL: f64 = 1e-9;

/// Masses `[1, m, m]`: body 1 carries unit mass, bodies 2 and 3 carry `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassSet {
    m: f64,
}

impl MassSet {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Domain(format!("mass m must be positive, got {m}")));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `[m1, m2, m3] = [1, m, m]`.
    pub fn values(&self) -> [f64; 3] {
        [1.0, self.m, self.m]
    }

    pub fn total(&self) -> f64 {
        1.0 + 2.0 * self.m
    }
}

/// Positions of the three bodies with the center of mass at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarConfig {
    pub q1: Vec2,
    pub q2: Vec2,
    pub q3: Vec2,
}

impl PlanarConfig {
    /// Builds a configuration, checking the center-of-mass identity
    /// `q1 + m q2 + m q3 = 0` to `1e-12` relative to the position scale.
    pub fn new(q1: Vec2, q2: Vec2, q3: Vec2, masses: &MassSet) -> Result<Self> {
        let cfg = Self { q1, q2, q3 };
        let res = cfg.chi_residual(masses);
        let scale = cfg.scale().max(1e-300);
        if res > 1e-12 * scale {
            return Err(Error::Domain(format!(
                "configuration not in the center-of-mass space: residual {res:e} at scale {scale:e}"
            )));
        }
        Ok(cfg)
    }

    /// Builds a configuration from free coordinates `(q2, q3)`, recovering
    /// `q1 = -m (q2 + q3)` so the center-of-mass identity holds exactly.
    pub fn from_free(q2: Vec2, q3: Vec2, masses: &MassSet) -> Self {
        Self {
            q1: -masses.m() * (q2 + q3),
            q2,
            q3,
        }
    }

    pub fn positions(&self) -> [Vec2; 3] {
        [self.q1, self.q2, self.q3]
    }

    /// `|q1 + m q2 + m q3|`.
    pub fn chi_residual(&self, masses: &MassSet) -> f64 {
        (self.q1 + masses.m() * (self.q2 + self.q3)).norm()
    }

    pub fn scale(&self) -> f64 {
        self.q1.norm().max(self.q2.norm()).max(self.q3.norm())
    }

    pub fn pair_distance(&self, i: usize, j: usize) -> f64 {
        let q = self.positions();
        (q[i] - q[j]).norm()
    }

    /// Smallest pairwise distance and the (1-based) body pair realizing it.
    pub fn min_pair_distance(&self) -> (f64, (usize, usize)) {
        let q = self.positions();
        let mut best = (f64::INFINITY, (1, 2));
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let d = (q[i] - q[j]).norm();
            if d < best.0 {
                best = (d, (i + 1, j + 1));
            }
        }
        best
    }
}

/// The reduced pair `(Z1, Z2)` with `Z1 = q2 - q3` and `Z2 = (1 + 1/(2m)) q1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiPair {
    pub z1: Vec2,
    pub z2: Vec2,
}

impl JacobiPair {
    pub const fn new(z1: Vec2, z2: Vec2) -> Self {
        Self { z1, z2 }
    }
}

pub fn to_jacobi(config: &PlanarConfig, masses: &MassSet) -> JacobiPair {
    let c = 1.0 + 1.0 / (2.0 * masses.m());
    JacobiPair {
        z1: config.q2 - config.q3,
        z2: c * config.q1,
    }
}

pub fn from_jacobi(zpair: &JacobiPair, masses: &MassSet) -> PlanarConfig {
    let m = masses.m();
    let q1 = zpair.z2 * (2.0 * m / (2.0 * m + 1.0));
    let half_sum = -0.5 * q1 / m; // (q2 + q3) / 2
    PlanarConfig {
        q1,
        q2: half_sum + 0.5 * zpair.z1,
        q3: half_sum - 0.5 * zpair.z1,
    }
}

/// One of the boundary configuration families.
///
/// The start families are collinear on the x-axis; `ProgradeStart` orders the
/// bodies `q2x <= q1x <= q3x`, `RetrogradeStart` orders them
/// `q1x <= q2x <= q3x`. `IsoscelesEnd` is an isosceles triangle with body 1
/// at the vertex, its symmetry axis rotated counterclockwise by `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundarySpec {
    ProgradeStart { a1: f64, a2: f64 },
    RetrogradeStart { a1: f64, a2: f64 },
    IsoscelesEnd { theta: f64, b1: f64, b2: f64 },
}

/// Emits the configuration matrix of a boundary family member.
///
/// Rows are built in the unrotated frame and, for the isosceles end,
/// right-multiplied by `R(theta) = [[cos, sin], [-sin, cos]]`, i.e. each row
/// vector is rotated counterclockwise by `theta`.
pub fn boundary_config(spec: &BoundarySpec, masses: &MassSet) -> Result<PlanarConfig> {
    let m = masses.m();
    match *spec {
        BoundarySpec::ProgradeStart { a1, a2 } => {
            check_nonneg("a1", a1)?;
            check_nonneg("a2", a2)?;
            Ok(PlanarConfig {
                q1: Vec2::new(m * (a1 - a2), 0.0),
                q2: Vec2::new(-(m + 1.0) * a1 - m * a2, 0.0),
                q3: Vec2::new(m * a1 + (m + 1.0) * a2, 0.0),
            })
        }
        BoundarySpec::RetrogradeStart { a1, a2 } => {
            check_nonneg("a1", a1)?;
            check_nonneg("a2", a2)?;
            Ok(PlanarConfig {
                q1: Vec2::new(-2.0 * m * a1 - m * a2, 0.0),
                q2: Vec2::new(a1 - m * a2, 0.0),
                q3: Vec2::new(a1 + (m + 1.0) * a2, 0.0),
            })
        }
        BoundarySpec::IsoscelesEnd { theta, b1, b2 } => Ok(PlanarConfig {
            q1: Vec2::new(2.0 * m * b2, 0.0).rotate(theta),
            q2: Vec2::new(-b2, b1).rotate(theta),
            q3: Vec2::new(-b2, -b1).rotate(theta),
        }),
    }
}

fn check_nonneg(name: &'static str, value: f64) -> Result<()> {
    if value < 0.0 || !value.is_finite() {
        return Err(Error::NegativeParameter { name, value });
    }
    Ok(())
}

/// The angle in `[0, pi/2]` between the lines spanned by `Z1` and `Z2`.
pub fn delta_angle(zpair: &JacobiPair) -> Result<f64> {
    let n1 = zpair.z1.norm();
    let n2 = zpair.z2.norm();
    let scale = n1.max(n2);
    if n1 <= EPS_ZERO_REL * scale || n1 == 0.0 {
        return Err(Error::ZeroVector { index: 1, norm: n1 });
    }
    if n2 <= EPS_ZERO_REL * scale {
        return Err(Error::ZeroVector { index: 2, norm: n2 });
    }
    let beta = zpair.z1.cross(zpair.z2).abs().atan2(zpair.z1.dot(zpair.z2));
    Ok(beta.min(PI - beta))
}

/// Folded angles of `Z1` and `Z2` against the x-axis line, each in `[0, pi/2]`.
pub fn alpha_angles(zpair: &JacobiPair) -> Result<(f64, f64)> {
    let n1 = zpair.z1.norm();
    let n2 = zpair.z2.norm();
    let scale = n1.max(n2);
    if n1 <= EPS_ZERO_REL * scale || n1 == 0.0 {
        return Err(Error::ZeroVector { index: 1, norm: n1 });
    }
    if n2 <= EPS_ZERO_REL * scale {
        return Err(Error::ZeroVector { index: 2, norm: n2 });
    }
    let fold = |v: Vec2| v.y.abs().atan2(v.x.abs());
    Ok((fold(zpair.z1), fold(zpair.z2)))
}

/// `Delta_1 = min(a1 + a2, pi - a1 - a2)`: the line angle realized when the
/// two vectors sit in adjacent quadrants.
pub fn delta_adjacent(alpha1: f64, alpha2: f64) -> Result<f64> {
    check_alpha(alpha1)?;
    check_alpha(alpha2)?;
    let s = alpha1 + alpha2;
    Ok(s.min(PI - s))
}

/// `Delta_2 = |a1 - a2|`: the line angle realized in the same or opposite
/// quadrant placement.
pub fn delta_opposite(alpha1: f64, alpha2: f64) -> Result<f64> {
    check_alpha(alpha1)?;
    check_alpha(alpha2)?;
    Ok((alpha1 - alpha2).abs())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(-1e-12..=FRAC_PI_2 + 1e-12).contains(&alpha) {
        return Err(Error::Domain(format!(
            "folded angle {alpha} outside [0, pi/2]"
        )));
    }
    Ok(())
}

/// Quadrant membership of a point, with an absolute axis band `eps`.
///
/// A point within `eps` of an axis belongs to both adjoining closed
/// quadrants; near the origin it belongs to all four.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantTag {
    /// Primary quadrant by strict signs, 1..=4.
    pub index: u8,
    pub on_x_axis: bool,
    pub on_y_axis: bool,
}

impl QuadrantTag {
    pub fn classify(p: Vec2, eps: f64) -> Self {
        let index = match (p.x >= 0.0, p.y >= 0.0) {
            (true, true) => 1,
            (false, true) => 2,
            (false, false) => 3,
            (true, false) => 4,
        };
        Self {
            index,
            on_x_axis: p.y.abs() <= eps,
            on_y_axis: p.x.abs() <= eps,
        }
    }

    pub fn at_origin(&self) -> bool {
        self.on_x_axis && self.on_y_axis
    }

    /// Bitmask of closed quadrants containing the point (bit `i-1` for `Qi`).
    pub fn members(&self) -> u8 {
        let mut mask = 1u8 << (self.index - 1);
        if self.on_x_axis {
            // reflect across the x-axis: 1<->4, 2<->3
            mask |= 1 << (x_mirror(self.index) - 1);
        }
        if self.on_y_axis {
            mask |= 1 << (y_mirror(self.index) - 1);
        }
        if self.at_origin() {
            mask = 0b1111;
        }
        mask
    }
}

fn x_mirror(i: u8) -> u8 {
    match i {
        1 => 4,
        2 => 3,
        3 => 2,
        _ => 1,
    }
}

fn y_mirror(i: u8) -> u8 {
    match i {
        1 => 2,
        2 => 1,
        3 => 4,
        _ => 3,
    }
}

/// Whether closed quadrants `Qi` and `Qj` share a half-axis edge.
pub fn quadrants_adjacent(i: u8, j: u8) -> bool {
    i != j && (i as i8 - j as i8).rem_euclid(4) != 2
}

/// Whether some pair of quadrants, one from each membership mask, is adjacent.
fn masks_adjacent(m1: u8, m2: u8) -> bool {
    for i in 1..=4u8 {
        if m1 & (1 << (i - 1)) == 0 {
            continue;
        }
        for j in 1..=4u8 {
            if m2 & (1 << (j - 1)) != 0 && quadrants_adjacent(i, j) {
                return true;
            }
        }
    }
    false
}

/// The trichotomy of minimizing `(Z1, Z2)` paths, plus the failure outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathCase {
    /// Case a: adjacency holds and the axes are untouched on the open interval.
    Interior,
    /// Case b: both components stay on the coordinate axes throughout.
    OnAxes,
    /// Case c: `Z2` vanishes identically (an Euler arc).
    EulerZ2Zero,
    /// The adjacency invariant fails, or the path mixes axis contact with
    /// interior excursions.
    Violation,
}

impl PathCase {
    pub fn tag(&self) -> &'static str {
        match self {
            PathCase::Interior => "a",
            PathCase::OnAxes => "b",
            PathCase::EulerZ2Zero => "c",
            PathCase::Violation => "violation",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        match s {
            "a" => Some(PathCase::Interior),
            "b" => Some(PathCase::OnAxes),
            "c" => Some(PathCase::EulerZ2Zero),
            "violation" => Some(PathCase::Violation),
            _ => None,
        }
    }
}

impl fmt::Display for PathCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Per-sample quadrant tags and the overall classification of a sampled
/// `(Z1, Z2)` path.
#[derive(Debug, Clone)]
pub struct QuadrantReport {
    pub samples: Vec<(QuadrantTag, QuadrantTag)>,
    pub adjacency_ok: bool,
    /// First sample index at which adjacency fails.
    pub first_violation: Option<usize>,
    pub case: PathCase,
}

/// Tags every sample and classifies the path into the interior / on-axes /
/// Euler trichotomy, or `Violation` when the adjacency invariant fails.
pub fn classify_quadrants(path: &[JacobiPair], eps_axis: f64) -> QuadrantReport {
    let samples: Vec<(QuadrantTag, QuadrantTag)> = path
        .iter()
        .map(|zp| {
            (
                QuadrantTag::classify(zp.z1, eps_axis),
                QuadrantTag::classify(zp.z2, eps_axis),
            )
        })
        .collect();

    let mut first_violation = None;
    for (k, (t1, t2)) in samples.iter().enumerate() {
        if !masks_adjacent(t1.members(), t2.members()) {
            first_violation = Some(k);
            break;
        }
    }
    let adjacency_ok = first_violation.is_none();

    let case = if !adjacency_ok {
        PathCase::Violation
    } else if samples.iter().all(|(_, t2)| t2.at_origin()) {
        PathCase::EulerZ2Zero
    } else if samples
        .iter()
        .all(|(t1, t2)| (t1.on_x_axis || t1.on_y_axis) && (t2.on_x_axis || t2.on_y_axis))
    {
        PathCase::OnAxes
    } else if samples.len() >= 2
        && samples[1..samples.len() - 1]
            .iter()
            .all(|(t1, t2)| !(t1.on_x_axis || t1.on_y_axis) && !(t2.on_x_axis || t2.on_y_axis))
    {
        PathCase::Interior
    } else {
        // Mixed axis contact: the trichotomy does not allow it.
        PathCase::Violation
    };

    QuadrantReport {
        samples,
        adjacency_ok,
        first_violation,
        case,
    }
}

/// Reflects every sample into a fixed pair of adjacent closed quadrants,
/// replacing `Z1` by the reflection landing in the first target and `Z2`
/// by the one landing in the second. Samplewise norms are preserved.
pub fn reflect_path(path: &[JacobiPair], targets: (u8, u8)) -> Result<Vec<JacobiPair>> {
    if !(1..=4).contains(&targets.0) || !(1..=4).contains(&targets.1) {
        return Err(Error::Domain(format!(
            "quadrant indices must be 1..=4, got {targets:?}"
        )));
    }
    if !quadrants_adjacent(targets.0, targets.1) {
        return Err(Error::NotAdjacent(targets.0, targets.1));
    }
    let s1 = quadrant_signs(targets.0);
    let s2 = quadrant_signs(targets.1);
    Ok(path
        .iter()
        .map(|zp| JacobiPair {
            z1: Vec2::new(s1.0 * zp.z1.x.abs(), s1.1 * zp.z1.y.abs()),
            z2: Vec2::new(s2.0 * zp.z2.x.abs(), s2.1 * zp.z2.y.abs()),
        })
        .collect())
}

fn quadrant_signs(i: u8) -> (f64, f64) {
    match i {
        1 => (1.0, 1.0),
        2 => (-1.0, 1.0),
        3 => (-1.0, -1.0),
        _ => (1.0, -1.0),
    }
}
