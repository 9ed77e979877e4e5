//! Kinetic energy, potential energy and the action functional.
//!
//! Two evaluations of the action coexist: composite trapezoid quadrature with
//! finite-difference nodal velocities, and the exact closed form on
//! piecewise-linear paths (segmentwise constant velocity plus the analytic
//! line-segment integral of the 1/r potential). Exact gradients of both, with
//! respect to interior nodes in reduced coordinates and to the boundary
//! family parameters, feed the minimizer.

use crate::error::{Error, Result};
use crate::geometry::{BoundarySpec, JacobiPair, MassSet, PlanarConfig, EPS_ZERO_REL};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};

/// Relative threshold (times path diameter) under which a piecewise-linear
/// segment counts as singular. Segments closer to collision are errors, not
/// clamped values; clamping would corrupt the minimization landscape.
pub const EPS_SEG_REL: f64 = 1e-8;

/// A path sampled on a uniform time grid over `[0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePath {
    nodes: Vec<PlanarConfig>,
    duration: f64,
}

impl DiscretePath {
    pub fn new(nodes: Vec<PlanarConfig>, duration: f64) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Domain(format!(
                "a discrete path needs at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::Domain(format!(
                "duration must be positive, got {duration}"
            )));
        }
        Ok(Self { nodes, duration })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Grid spacing `duration / (n - 1)`.
    pub fn h(&self) -> f64 {
        self.duration / (self.nodes.len() - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.duration * k as f64 / (self.nodes.len() - 1) as f64
    }

    pub fn node(&self, k: usize) -> &PlanarConfig {
        &self.nodes[k]
    }

    pub fn nodes(&self) -> &[PlanarConfig] {
        &self.nodes
    }

    pub fn nodes_mut(&mut self) -> &mut [PlanarConfig] {
        &mut self.nodes
    }

    /// Bounding-box diagonal over every sampled body position.
    pub fn diameter(&self) -> f64 {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for cfg in &self.nodes {
            for p in cfg.positions() {
                lo.x = lo.x.min(p.x);
                lo.y = lo.y.min(p.y);
                hi.x = hi.x.max(p.x);
                hi.y = hi.y.max(p.y);
            }
        }
        (hi - lo).norm()
    }

    pub fn jacobi(&self, masses: &MassSet) -> Vec<JacobiPair> {
        self.nodes
            .iter()
            .map(|c| crate::geometry::to_jacobi(c, masses))
            .collect()
    }

    /// Nodal velocities: central differences inside, second-order one-sided
    /// at the endpoints (first-order when only two nodes exist).
    pub fn velocities(&self) -> Vec<[Vec2; 3]> {
        let n = self.nodes.len();
        let h = self.h();
        let q = |k: usize| self.nodes[k].positions();
        let mut v = vec![[Vec2::default(); 3]; n];
        if n == 2 {
            for i in 0..3 {
                let d = (q(1)[i] - q(0)[i]) / h;
                v[0][i] = d;
                v[1][i] = d;
            }
            return v;
        }
        for k in 1..n - 1 {
            for i in 0..3 {
                v[k][i] = (q(k + 1)[i] - q(k - 1)[i]) / (2.0 * h);
            }
        }
        for i in 0..3 {
            v[0][i] = (-3.0 * q(0)[i] + 4.0 * q(1)[i] - q(2)[i]) / (2.0 * h);
            v[n - 1][i] = (3.0 * q(n - 1)[i] - 4.0 * q(n - 2)[i] + q(n - 3)[i]) / (2.0 * h);
        }
        v
    }

    /// Minimum pairwise distance over the piecewise-linear interpolant,
    /// with the (1-based) pair and the segment index realizing it.
    pub fn min_separation(&self) -> (f64, (usize, usize), usize) {
        let mut best = (f64::INFINITY, (1, 2), 0);
        for k in 0..self.nodes.len() - 1 {
            let a = self.nodes[k].positions();
            let b = self.nodes[k + 1].positions();
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let x0 = a[i] - a[j];
                let x1 = b[i] - b[j];
                let d = segment_min_norm(x0, x1);
                if d < best.0 {
                    best = (d, (i + 1, j + 1), k);
                }
            }
        }
        best
    }

    /// Midpoint-inserts one node per segment (2n-1 nodes), interpolating the
    /// free coordinates linearly so every new node stays in the
    /// center-of-mass space exactly.
    pub fn refine(&self, masses: &MassSet) -> DiscretePath {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for k in 0..self.nodes.len() - 1 {
            let a = &self.nodes[k];
            let b = &self.nodes[k + 1];
            nodes.push(*a);
            nodes.push(PlanarConfig::from_free(
                0.5 * (a.q2 + b.q2),
                0.5 * (a.q3 + b.q3),
                masses,
            ));
        }
        nodes.push(self.nodes[self.nodes.len() - 1]);
        DiscretePath {
            nodes,
            duration: self.duration,
        }
    }
}

fn segment_min_norm(x0: Vec2, x1: Vec2) -> f64 {
    let d = x1 - x0;
    let dn2 = d.norm_sq();
    if dn2 == 0.0 {
        return x0.norm();
    }
    let t = (-(x0.dot(d)) / dn2).clamp(0.0, 1.0);
    (x0 + t * d).norm()
}

/// Kinetic energy of the three bodies.
pub fn kinetic(velocities: &[Vec2; 3], masses: &MassSet) -> f64 {
    let mv = masses.values();
    0.5 * (mv[0] * velocities[0].norm_sq()
        + mv[1] * velocities[1].norm_sq()
        + mv[2] * velocities[2].norm_sq())
}

/// Kinetic energy in the reduced variables: `(m/4)|Z1'|^2 + (m/(2m+1))|Z2'|^2`.
pub fn kinetic_jacobi(z1_dot: Vec2, z2_dot: Vec2, masses: &MassSet) -> f64 {
    let m = masses.m();
    0.25 * m * z1_dot.norm_sq() + m / (2.0 * m + 1.0) * z2_dot.norm_sq()
}

/// Newtonian potential `sum m_i m_j / |q_i - q_j|`.
pub fn potential(config: &PlanarConfig, masses: &MassSet) -> Result<f64> {
    let q = config.positions();
    let mv = masses.values();
    let eps = EPS_ZERO_REL * config.scale();
    let mut u = 0.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let r = (q[i] - q[j]).norm();
        if r <= eps {
            return Err(Error::CollisionSingularity {
                pair: (i + 1, j + 1),
                dist: r,
            });
        }
        u += mv[i] * mv[j] / r;
    }
    Ok(u)
}

/// Potential in the reduced variables:
/// `m^2/|Z1| + m/|Z1/2 + Z2| + m/|Z1/2 - Z2|`.
pub fn potential_jacobi(zpair: &JacobiPair, masses: &MassSet) -> Result<f64> {
    let m = masses.m();
    let half = 0.5 * zpair.z1;
    let r23 = zpair.z1.norm();
    let r13 = (half + zpair.z2).norm();
    let r12 = (half - zpair.z2).norm();
    let eps = EPS_ZERO_REL * zpair.z1.norm().max(zpair.z2.norm());
    for (r, pair) in [(r23, (2, 3)), (r13, (1, 3)), (r12, (1, 2))] {
        if r <= eps {
            return Err(Error::CollisionSingularity { pair, dist: r });
        }
    }
    Ok(m * m / r23 + m / r13 + m / r12)
}

/// Arguments of the polar form of the potential: the two norms and the line
/// angle between `Z1` and `Z2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPotentialArgs {
    pub r1: f64,
    pub r2: f64,
    pub delta: f64,
}

/// The law-of-cosines form:
/// `m^2/r1 + m/sqrt(r1^2/4 + r2^2 + r1 r2 cos d) + m/sqrt(r1^2/4 + r2^2 - r1 r2 cos d)`.
pub fn potential_polar(args: &PolarPotentialArgs, masses: &MassSet) -> Result<f64> {
    let PolarPotentialArgs { r1, r2, delta } = *args;
    if r1 < 0.0 || r2 < 0.0 {
        return Err(Error::Domain(format!("negative norm: r1={r1}, r2={r2}")));
    }
    if !(-1e-12..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&delta) {
        return Err(Error::Domain(format!("delta {delta} outside [0, pi/2]")));
    }
    let m = masses.m();
    let scale = r1.max(r2);
    let eps = EPS_ZERO_REL * scale;
    if r1 <= eps {
        return Err(Error::CollisionSingularity {
            pair: (2, 3),
            dist: r1,
        });
    }
    let base = 0.25 * r1 * r1 + r2 * r2;
    let cross = r1 * r2 * delta.cos();
    let plus = (base + cross).sqrt();
    let minus = (base - cross).max(0.0).sqrt();
    if minus <= eps {
        return Err(Error::CollisionSingularity {
            pair: (1, 2),
            dist: minus,
        });
    }
    Ok(m * m / r1 + m / plus + m / minus)
}

/// Gradient of the potential with respect to each body position.
pub fn potential_gradient(config: &PlanarConfig, masses: &MassSet) -> Result<[Vec2; 3]> {
    let q = config.positions();
    let mv = masses.values();
    let eps = EPS_ZERO_REL * config.scale();
    let mut g = [Vec2::default(); 3];
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let rel = q[i] - q[j];
        let r = rel.norm();
        if r <= eps {
            return Err(Error::CollisionSingularity {
                pair: (i + 1, j + 1),
                dist: r,
            });
        }
        let f = -(mv[i] * mv[j]) / (r * r * r) * rel;
        g[i] += f;
        g[j] -= f;
    }
    Ok(g)
}

/// Composite trapezoid quadrature of `K + U` on the node grid, with
/// finite-difference nodal velocities (see [`DiscretePath::velocities`]).
pub fn action_quadrature(path: &DiscretePath, masses: &MassSet) -> Result<f64> {
    Ok(quadrature_value_and_node_gradient(path, masses, false)?.0)
}

/// Exact action of the piecewise-linear interpolant of `path`.
///
/// Per segment of duration `h` the kinetic term is `(1/2) sum m |dq|^2 / h`
/// and each pair potential integrates in closed form.
pub fn action_piecewise_linear(path: &DiscretePath, masses: &MassSet) -> Result<f64> {
    guard_segments(path)?;
    Ok(piecewise_value_and_node_gradient(path, masses, false).0)
}

fn guard_segments(path: &DiscretePath) -> Result<()> {
    let eps_seg = EPS_SEG_REL * path.diameter();
    let (dist, pair, segment) = path.min_separation();
    if dist < eps_seg {
        return Err(Error::SegmentSingularity {
            segment,
            pair,
            dist,
        });
    }
    Ok(())
}

/// `int_0^1 dt / |x0 + t (x1 - x0)|` with gradients in the endpoints.
///
/// Evaluated in the frame of the segment: with `p` the coordinate along the
/// displacement and `q >= 0` the distance of the supporting line from the
/// origin, the antiderivatives are asinh/log expressions, rewritten where
/// needed to avoid cancellation.
pub fn segment_inverse_distance(x0: Vec2, x1: Vec2) -> (f64, Vec2, Vec2) {
    let d = x1 - x0;
    let dn = d.norm();
    let r0 = x0.norm();
    let r1 = x1.norm();
    if dn <= 1e-14 * r0.max(r1) {
        // constant separation
        let g = -0.5 / (r0 * r0 * r0) * x0;
        return (1.0 / r0, g, g);
    }
    let dh = d / dn;
    let p0 = x0.dot(dh);
    let p1 = p0 + dn;
    let qs = dh.cross(x0); // signed perpendicular offset
    let q = qs.abs();
    let nh = if qs >= 0.0 {
        Vec2::new(-dh.y, dh.x)
    } else {
        Vec2::new(dh.y, -dh.x)
    };

    // I0s = int_0^dn ds / r(s),   r(s) = sqrt(q^2 + (p0 + s)^2)
    let i0s = if q > 1e-12 * r0.max(r1) {
        let a = p0 / q;
        let b = p1 / q;
        let arg = if a * b > 0.0 {
            // stable difference of asinh for same-sign arguments
            (b - a) * (b + a) / (b * (1.0 + a * a).sqrt() + a * (1.0 + b * b).sqrt())
        } else {
            b * (1.0 + a * a).sqrt() - a * (1.0 + b * b).sqrt()
        };
        arg.asinh()
    } else if p0 > 0.0 {
        // collinear with the origin; the caller guards against sign changes
        (p1 / p0).ln()
    } else {
        (p0 / p1).ln()
    };

    // E1 = int ds / r^3, E2 = int (p0+s) ds / r^3, and friends.
    let same_sign = p0 * p1 > 0.0;
    let e1 = if same_sign {
        (p1 * p1 - p0 * p0) / ((p1 * r0 + p0 * r1) * r0 * r1)
    } else {
        (p1 / r1 - p0 / r0) / (q * q)
    };
    let e2 = (p1 * p1 - p0 * p0) / ((r0 + r1) * r0 * r1);
    let e3 = e2 - p0 * e1;
    let e4 = i0s - q * q * e1 - p0 * e2;

    let value = i0s / dn;
    let tail = (e4 * dh + (q * e3) * nh) / (dn * dn);
    let g1 = -1.0 * tail;
    let g0 = -(e2 * dh + (q * e1) * nh) / dn + tail;
    (value, g0, g1)
}

/// Value of the piecewise-linear action and, optionally, its gradient with
/// respect to every node position (full coordinates, all three bodies).
fn piecewise_value_and_node_gradient(
    path: &DiscretePath,
    masses: &MassSet,
    with_grad: bool,
) -> (f64, Vec<[Vec2; 3]>) {
    let n = path.n_nodes();
    let h = path.h();
    let mv = masses.values();
    let mut total = 0.0;
    let mut grad = if with_grad {
        vec![[Vec2::default(); 3]; n]
    } else {
        Vec::new()
    };
    for k in 0..n - 1 {
        let a = path.node(k).positions();
        let b = path.node(k + 1).positions();
        for i in 0..3 {
            let dq = b[i] - a[i];
            total += 0.5 * mv[i] * dq.norm_sq() / h;
            if with_grad {
                let g = mv[i] / h * dq;
                grad[k][i] -= g;
                grad[k + 1][i] += g;
            }
        }
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let (value, g0, g1) = segment_inverse_distance(a[i] - a[j], b[i] - b[j]);
            let c = mv[i] * mv[j] * h;
            total += c * value;
            if with_grad {
                grad[k][i] += c * g0;
                grad[k][j] -= c * g0;
                grad[k + 1][i] += c * g1;
                grad[k + 1][j] -= c * g1;
            }
        }
    }
    (total, grad)
}

/// Value of the trapezoid-quadrature action and, optionally, its gradient
/// with respect to every node position.
fn quadrature_value_and_node_gradient(
    path: &DiscretePath,
    masses: &MassSet,
    with_grad: bool,
) -> Result<(f64, Vec<[Vec2; 3]>)> {
    let n = path.n_nodes();
    let h = path.h();
    let mv = masses.values();
    let v = path.velocities();
    let weight = |k: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };

    let mut total = 0.0;
    for k in 0..n {
        let u = potential(path.node(k), masses)?;
        total += h * weight(k) * (kinetic(&v[k], masses) + u);
    }
    if !with_grad {
        return Ok((total, Vec::new()));
    }

    let mut grad = vec![[Vec2::default(); 3]; n];
    for k in 0..n {
        let gu = potential_gradient(path.node(k), masses)?;
        let w = h * weight(k);
        for i in 0..3 {
            grad[k][i] += w * gu[i];
        }
    }
    // kinetic part: adjoint of the finite-difference stencils
    let coeff: Vec<[Vec2; 3]> = (0..n)
        .map(|k| {
            let w = h * weight(k);
            [
                w * mv[0] * v[k][0],
                w * mv[1] * v[k][1],
                w * mv[2] * v[k][2],
            ]
        })
        .collect();
    if n == 2 {
        for i in 0..3 {
            let c = (coeff[0][i] + coeff[1][i]) / h;
            grad[0][i] -= c;
            grad[1][i] += c;
        }
        return Ok((total, grad));
    }
    let two_h = 2.0 * h;
    for k in 1..n - 1 {
        for i in 0..3 {
            grad[k + 1][i] += coeff[k][i] / two_h;
            grad[k - 1][i] -= coeff[k][i] / two_h;
        }
    }
    for i in 0..3 {
        grad[0][i] += -3.0 / two_h * coeff[0][i];
        grad[1][i] += 4.0 / two_h * coeff[0][i];
        grad[2][i] += -1.0 / two_h * coeff[0][i];
        grad[n - 1][i] += 3.0 / two_h * coeff[n - 1][i];
        grad[n - 2][i] += -4.0 / two_h * coeff[n - 1][i];
        grad[n - 3][i] += 1.0 / two_h * coeff[n - 1][i];
    }
    Ok((total, grad))
}

/// Gradient of a discrete action in the free coordinates of the two-point
/// free boundary problem: reduced interior nodes plus boundary parameters.
#[derive(Debug, Clone)]
pub struct PathGradient {
    /// Per interior node `k = 1..n-2`: derivatives in the reduced coordinates
    /// `(q2, q3)` (with `q1 = -m (q2 + q3)` eliminated).
    pub interior: Vec<[Vec2; 2]>,
    /// Derivatives in the start-family parameters `(a1, a2)`.
    pub start: [f64; 2],
    /// Derivatives in the end-family parameters `(b1, b2)`.
    pub end: [f64; 2],
}

impl PathGradient {
    pub fn norm(&self) -> f64 {
        let mut s = self.start[0] * self.start[0]
            + self.start[1] * self.start[1]
            + self.end[0] * self.end[0]
            + self.end[1] * self.end[1];
        for g in &self.interior {
            s += g[0].norm_sq() + g[1].norm_sq();
        }
        s.sqrt()
    }
}

/// Rows of `d(config)/d(param)` for a boundary family.
pub(crate) fn boundary_jacobian(spec: &BoundarySpec, masses: &MassSet) -> [[Vec2; 3]; 2] {
    let m = masses.m();
    match *spec {
        BoundarySpec::ProgradeStart { .. } => [
            [
                Vec2::new(m, 0.0),
                Vec2::new(-(m + 1.0), 0.0),
                Vec2::new(m, 0.0),
            ],
            [
                Vec2::new(-m, 0.0),
                Vec2::new(-m, 0.0),
                Vec2::new(m + 1.0, 0.0),
            ],
        ],
        BoundarySpec::RetrogradeStart { .. } => [
            [
                Vec2::new(-2.0 * m, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 0.0),
            ],
            [
                Vec2::new(-m, 0.0),
                Vec2::new(-m, 0.0),
                Vec2::new(m + 1.0, 0.0),
            ],
        ],
        BoundarySpec::IsoscelesEnd { theta, .. } => [
            [
                Vec2::new(0.0, 0.0),
                Vec2::new(0.0, 1.0).rotate(theta),
                Vec2::new(0.0, -1.0).rotate(theta),
            ],
            [
                Vec2::new(2.0 * m, 0.0).rotate(theta),
                Vec2::new(-1.0, 0.0).rotate(theta),
                Vec2::new(-1.0, 0.0).rotate(theta),
            ],
        ],
    }
}

fn reduce_node_gradient(
    node_grad: &[[Vec2; 3]],
    masses: &MassSet,
    start: &BoundarySpec,
    end: &BoundarySpec,
) -> PathGradient {
    let n = node_grad.len();
    let m = masses.m();
    let interior = node_grad[1..n - 1]
        .iter()
        .map(|g| [g[1] - m * g[0], g[2] - m * g[0]])
        .collect();
    let contract = |g: &[Vec2; 3], rows: &[Vec2; 3]| {
        g[0].dot(rows[0]) + g[1].dot(rows[1]) + g[2].dot(rows[2])
    };
    let sj = boundary_jacobian(start, masses);
    let ej = boundary_jacobian(end, masses);
    PathGradient {
        interior,
        start: [
            contract(&node_grad[0], &sj[0]),
            contract(&node_grad[0], &sj[1]),
        ],
        end: [
            contract(&node_grad[n - 1], &ej[0]),
            contract(&node_grad[n - 1], &ej[1]),
        ],
    }
}

/// Exact gradient of [`action_quadrature`] in the free coordinates.
///
/// `start` and `end` are the boundary families generating the first and last
/// node; interior nodes vary in reduced `(q2, q3)` coordinates so the
/// center-of-mass constraint is eliminated rather than projected.
pub fn action_gradient(
    path: &DiscretePath,
    masses: &MassSet,
    start: &BoundarySpec,
    end: &BoundarySpec,
) -> Result<PathGradient> {
    let (_, node_grad) = quadrature_value_and_node_gradient(path, masses, true)?;
    Ok(reduce_node_gradient(&node_grad, masses, start, end))
}

/// Exact gradient of [`action_piecewise_linear`] in the free coordinates.
pub fn action_gradient_piecewise_linear(
    path: &DiscretePath,
    masses: &MassSet,
    start: &BoundarySpec,
    end: &BoundarySpec,
) -> Result<PathGradient> {
    guard_segments(path)?;
    let (_, node_grad) = piecewise_value_and_node_gradient(path, masses, true);
    Ok(reduce_node_gradient(&node_grad, masses, start, end))
}

/// Piecewise-linear action value together with its free-coordinate gradient.
pub(crate) fn pl_value_and_gradient(
    path: &DiscretePath,
    masses: &MassSet,
    start: &BoundarySpec,
    end: &BoundarySpec,
) -> Result<(f64, PathGradient)> {
    guard_segments(path)?;
    let (value, node_grad) = piecewise_value_and_node_gradient(path, masses, true);
    Ok((value, reduce_node_gradient(&node_grad, masses, start, end)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{from_jacobi, to_jacobi};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

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
    fn kinetic_forms_agree() {
        let ms = masses(1.0);
        assert_eq!(kinetic(&[Vec2::default(); 3], &ms), 0.0);
        // q' = [(0,0),(1,0),(-1,0)]: K = 1; Jacobi: Z1' = (2,0), Z2' = 0
        let v = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)];
        assert_relative_eq!(kinetic(&v, &ms), 1.0);
        assert_relative_eq!(kinetic_jacobi(Vec2::new(2.0, 0.0), Vec2::default(), &ms), 1.0);

        let mut rng = Xorshift(0xabcdef);
        for &m in &[0.3, 1.0, 5.0] {
            let ms = masses(m);
            for _ in 0..200 {
                // chi-tangent velocities: v1 = -m (v2 + v3)
                let v2 = rng.vec();
                let v3 = rng.vec();
                let v1 = -m * (v2 + v3);
                let k_cart = kinetic(&[v1, v2, v3], &ms);
                let z1d = v2 - v3;
                let z2d = (1.0 + 0.5 / m) * v1;
                let k_jac = kinetic_jacobi(z1d, z2d, &ms);
                assert_relative_eq!(k_cart, k_jac, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn potential_forms_agree() {
        let ms = masses(1.0);
        let cfg = PlanarConfig::new(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(-1.0, 0.0),
            &ms,
        )
        .unwrap();
        assert_relative_eq!(potential(&cfg, &ms).unwrap(), 2.5);

        // equilateral with side 1: m^2 + 2m for any m
        for &m in &[0.3, 1.0, 5.0] {
            let ms = masses(m);
            let p1 = Vec2::new(0.0, 0.0);
            let p2 = Vec2::new(1.0, 0.0);
            let p3 = Vec2::new(0.5, 3f64.sqrt() / 2.0);
            let com = (p1 + m * p2 + m * p3) / ms.total();
            let cfg = PlanarConfig::new(p1 - com, p2 - com, p3 - com, &ms).unwrap();
            assert_relative_eq!(
                potential(&cfg, &ms).unwrap(),
                m * m + 2.0 * m,
                max_relative = 1e-13
            );
        }

        let mut rng = Xorshift(0x5eed);
        for &m in &[0.3, 1.0, 5.0] {
            let ms = masses(m);
            let mut done = 0;
            while done < 400 {
                let cfg = PlanarConfig::from_free(rng.vec(), rng.vec(), &ms);
                if cfg.min_pair_distance().0 < 1e-3 {
                    continue;
                }
                done += 1;
                let u_cart = potential(&cfg, &ms).unwrap();
                let u_jac = potential_jacobi(&to_jacobi(&cfg, &ms), &ms).unwrap();
                assert_relative_eq!(u_cart, u_jac, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn polar_form() {
        let ms = masses(1.0);
        let v = potential_polar(
            &PolarPotentialArgs {
                r1: 2.0,
                r2: 1.0,
                delta: FRAC_PI_2,
            },
            &ms,
        )
        .unwrap();
        assert_relative_eq!(v, 0.5 + 2.0 / 2f64.sqrt(), max_relative = 1e-12);

        // aligned r2 = r1/2 is the collision ray
        assert!(matches!(
            potential_polar(
                &PolarPotentialArgs {
                    r1: 2.0,
                    r2: 1.0,
                    delta: 0.0
                },
                &ms
            ),
            Err(Error::CollisionSingularity { .. })
        ));

        // agrees with the vector form on random pairs
        let mut rng = Xorshift(0x97531);
        let mut done = 0;
        while done < 500 {
            let zp = crate::geometry::JacobiPair::new(rng.vec(), rng.vec());
            let ms = masses(0.7);
            let delta = match crate::geometry::delta_angle(&zp) {
                Ok(d) => d,
                Err(_) => continue,
            };
            let args = PolarPotentialArgs {
                r1: zp.z1.norm(),
                r2: zp.z2.norm(),
                delta,
            };
            let direct = match potential_jacobi(&zp, &ms) {
                Ok(u) => u,
                Err(_) => continue,
            };
            let polar = match potential_polar(&args, &ms) {
                Ok(u) => u,
                Err(_) => continue,
            };
            assert_relative_eq!(direct, polar, max_relative = 1e-12);
            done += 1;
        }
    }

    #[test]
    fn polar_monotone_in_delta() {
        let mut rng = Xorshift(0x2468);
        for _ in 0..100 {
            let r1 = rng.next().abs() + 0.05;
            let r2 = rng.next().abs() + 0.05;
            let m = rng.next().abs() + 0.1;
            let ms = masses(m);
            let mut prev = f64::INFINITY;
            let mut started = false;
            for k in 0..=100 {
                let delta = FRAC_PI_2 * k as f64 / 100.0;
                match potential_polar(&PolarPotentialArgs { r1, r2, delta }, &ms) {
                    Ok(u) => {
                        if started {
                            assert!(
                                u < prev + 1e-12,
                                "not decreasing at r1={r1} r2={r2} delta={delta}"
                            );
                        }
                        prev = u;
                        started = true;
                    }
                    Err(_) => continue, // singular ray at delta = 0
                }
            }
        }
    }

    #[test]
    fn static_path_action_is_potential_times_duration() {
        let ms = masses(1.0);
        let cfg = PlanarConfig::new(
            Vec2::new(0.0, 0.5),
            Vec2::new(1.0, -0.25),
            Vec2::new(-1.0, -0.25),
            &ms,
        )
        .unwrap();
        let u = potential(&cfg, &ms).unwrap();
        for &t_total in &[1.0, 0.25] {
            let path = DiscretePath::new(vec![cfg; 9], t_total).unwrap();
            assert_relative_eq!(
                action_piecewise_linear(&path, &ms).unwrap(),
                u * t_total,
                max_relative = 1e-13
            );
            assert_relative_eq!(
                action_quadrature(&path, &ms).unwrap(),
                u * t_total,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn circular_path_matches_closed_form() {
        // quadrature of the sampled circular retrograde path against the
        // closed-form action
        let ms = masses(1.0);
        let theta = FRAC_PI_4;
        let path = crate::levels::circular_retrograde_path(&ms, theta, 2000).unwrap();
        let a_quad = action_quadrature(&path, &ms).unwrap();
        let a_exact = crate::levels::retrograde_test_action(1.0, theta).unwrap();
        assert_relative_eq!(a_quad, a_exact, epsilon = 1e-6);
    }

    #[test]
    fn quadrature_refinement_is_second_order() {
        let ms = masses(1.0);
        let theta = FRAC_PI_4;
        let exact = crate::levels::retrograde_test_action(1.0, theta).unwrap();
        let errs: Vec<f64> = [200, 400, 800]
            .iter()
            .map(|&n| {
                let path = crate::levels::circular_retrograde_path(&ms, theta, n).unwrap();
                (action_quadrature(&path, &ms).unwrap() - exact).abs()
            })
            .collect();
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
        assert!(errs[1] / errs[2] > 3.0, "{errs:?}");
    }

    #[test]
    fn piecewise_linear_matches_dense_quadrature() {
        // the closed-form segment integrals against heavy sub-sampling of
        // the same piecewise-linear interpolant
        let ms = masses(1.0);
        let table = crate::levels::TestPathTable::builtin();
        let theta = table.theta0.radians();
        let path = table.path(theta, &ms).unwrap();
        let a_exact = action_piecewise_linear(&path, &ms).unwrap();

        // sub-sample each segment: the interpolant is linear, so quadrature
        // of U along segments plus the exact kinetic term converges to the
        // same action
        let sub = 100_000usize;
        let h = path.h();
        let mut a_quad = 0.0;
        for k in 0..path.n_nodes() - 1 {
            let a = path.node(k);
            let b = path.node(k + 1);
            for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
                let qa = a.positions();
                let qb = b.positions();
                let x0 = qa[i] - qa[j];
                let x1 = qb[i] - qb[j];
                let mv = ms.values();
                let mut s = 0.0;
                for u in 0..=sub {
                    let t = u as f64 / sub as f64;
                    let w = if u == 0 || u == sub { 0.5 } else { 1.0 };
                    s += w / (x0 + t * (x1 - x0)).norm();
                }
                a_quad += mv[i] * mv[j] * h * s / sub as f64;
            }
            let qa = a.positions();
            let qb = b.positions();
            let mv = ms.values();
            for i in 0..3 {
                a_quad += 0.5 * mv[i] * (qb[i] - qa[i]).norm_sq() / h;
            }
        }
        assert_relative_eq!(a_exact, a_quad, epsilon = 1e-6);
    }

    #[test]
    fn segment_constant_separation_branch() {
        // one pair holds distance fixed along the segment: h / |a| exactly
        let (v, _, _) = segment_inverse_distance(Vec2::new(0.0, 2.0), Vec2::new(0.0, 2.0));
        assert_relative_eq!(v, 0.5);
        // collinear motion along the ray, no crossing
        let (v, _, _) = segment_inverse_distance(Vec2::new(1.0, 0.0), Vec2::new(3.0, 0.0));
        assert_relative_eq!(v, 3f64.ln() / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn segment_gradients_match_finite_differences() {
        let mut rng = Xorshift(0x13579);
        let step = 1e-7;
        let mut done = 0;
        while done < 200 {
            let x0 = rng.vec();
            let x1 = rng.vec();
            if segment_min_norm(x0, x1) < 0.1 {
                continue;
            }
            done += 1;
            let (_, g0, g1) = segment_inverse_distance(x0, x1);
            for dim in 0..4 {
                let mut e = [Vec2::default(); 2];
                let (vi, di) = (dim / 2, dim % 2);
                if di == 0 {
                    e[vi].x = step;
                } else {
                    e[vi].y = step;
                }
                let (vp, _, _) = segment_inverse_distance(x0 + e[0], x1 + e[1]);
                let (vm, _, _) = segment_inverse_distance(x0 - e[0], x1 - e[1]);
                let fd = (vp - vm) / (2.0 * step);
                let an = match (vi, di) {
                    (0, 0) => g0.x,
                    (0, 1) => g0.y,
                    (1, 0) => g1.x,
                    _ => g1.y,
                };
                assert!(
                    (fd - an).abs() <= 2e-5 * fd.abs().max(1.0),
                    "x0={x0:?} x1={x1:?} dim={dim}: {fd} vs {an}"
                );
            }
        }
    }

    fn random_problem_path(
        rng: &mut Xorshift,
        ms: &MassSet,
        n: usize,
        theta: f64,
    ) -> (DiscretePath, BoundarySpec, BoundarySpec) {
        let start = BoundarySpec::ProgradeStart {
            a1: 0.4 + 0.1 * rng.next().abs(),
            a2: 0.3 + 0.1 * rng.next().abs(),
        };
        let end = BoundarySpec::IsoscelesEnd {
            theta,
            b1: 0.6 + 0.1 * rng.next(),
            b2: 0.5 + 0.1 * rng.next(),
        };
        let c0 = crate::geometry::boundary_config(&start, ms).unwrap();
        let c1 = crate::geometry::boundary_config(&end, ms).unwrap();
        let nodes: Vec<PlanarConfig> = (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                if k == 0 {
                    return c0;
                }
                if k == n - 1 {
                    return c1;
                }
                let bump = 0.35 * (PI * t).sin();
                let q2 = c0.q2 + t * (c1.q2 - c0.q2) + Vec2::new(0.0, bump);
                let q3 = c0.q3 + t * (c1.q3 - c0.q3) + Vec2::new(0.05 * bump, -bump);
                PlanarConfig::from_free(q2, q3, ms)
            })
            .collect();
        (DiscretePath::new(nodes, 1.0).unwrap(), start, end)
    }

    #[test]
    fn quadrature_gradient_matches_finite_differences() {
        let ms = masses(1.0);
        let mut rng = Xorshift(0x777);
        let theta = 0.053 * PI;
        let (path, start, end) = random_problem_path(&mut rng, &ms, 17, theta);
        let grad = action_gradient(&path, &ms, &start, &end).unwrap();

        let scale = path.diameter();
        let step = 1e-6 * scale;
        // interior nodes in reduced coordinates
        for k in [1usize, 7, 15] {
            for c in 0..4 {
                let bump = |sign: f64| {
                    let mut p2 = path.clone();
                    let node = *p2.node(k);
                    let (mut q2, mut q3) = (node.q2, node.q3);
                    match c {
                        0 => q2.x += sign * step,
                        1 => q2.y += sign * step,
                        2 => q3.x += sign * step,
                        _ => q3.y += sign * step,
                    }
                    p2.nodes_mut()[k] = PlanarConfig::from_free(q2, q3, &ms);
                    action_quadrature(&p2, &ms).unwrap()
                };
                let fd = (bump(1.0) - bump(-1.0)) / (2.0 * step);
                let an = match c {
                    0 => grad.interior[k - 1][0].x,
                    1 => grad.interior[k - 1][0].y,
                    2 => grad.interior[k - 1][1].x,
                    _ => grad.interior[k - 1][1].y,
                };
                assert!(
                    (fd - an).abs() <= 1e-5 * fd.abs().max(1.0),
                    "node {k} coord {c}: fd {fd} vs {an}"
                );
            }
        }

        // boundary parameters through the family chain rule
        let eval_params = |da1: f64, da2: f64, db1: f64, db2: f64| {
            let (a1, a2, b1, b2) = match (start, end) {
                (
                    BoundarySpec::ProgradeStart { a1, a2 },
                    BoundarySpec::IsoscelesEnd { b1, b2, .. },
                ) => (a1 + da1, a2 + da2, b1 + db1, b2 + db2),
                _ => unreachable!(),
            };
            let mut p2 = path.clone();
            let s2 = BoundarySpec::ProgradeStart { a1, a2 };
            let e2 = BoundarySpec::IsoscelesEnd { theta, b1, b2 };
            let n = p2.n_nodes();
            p2.nodes_mut()[0] = crate::geometry::boundary_config(&s2, &ms).unwrap();
            p2.nodes_mut()[n - 1] = crate::geometry::boundary_config(&e2, &ms).unwrap();
            action_quadrature(&p2, &ms).unwrap()
        };
        let checks = [
            (grad.start[0], (step, 0.0, 0.0, 0.0)),
            (grad.start[1], (0.0, step, 0.0, 0.0)),
            (grad.end[0], (0.0, 0.0, step, 0.0)),
            (grad.end[1], (0.0, 0.0, 0.0, step)),
        ];
        for (an, (d1, d2, d3, d4)) in checks {
            let fd =
                (eval_params(d1, d2, d3, d4) - eval_params(-d1, -d2, -d3, -d4)) / (2.0 * step);
            assert!(
                (fd - an).abs() <= 1e-5 * fd.abs().max(1.0),
                "boundary param: fd {fd} vs {an}"
            );
        }
    }

    #[test]
    fn piecewise_gradient_matches_finite_differences() {
        let ms = masses(0.8);
        let mut rng = Xorshift(0x888);
        let theta = 0.1 * PI;
        let (path, start, end) = random_problem_path(&mut rng, &ms, 13, theta);
        let (_, grad) = pl_value_and_gradient(&path, &ms, &start, &end).unwrap();
        let step = 1e-6 * path.diameter();
        for k in [1usize, 6, 11] {
            for c in 0..4 {
                let bump = |sign: f64| {
                    let mut p2 = path.clone();
                    let node = *p2.node(k);
                    let (mut q2, mut q3) = (node.q2, node.q3);
                    match c {
                        0 => q2.x += sign * step,
                        1 => q2.y += sign * step,
                        2 => q3.x += sign * step,
                        _ => q3.y += sign * step,
                    }
                    p2.nodes_mut()[k] = PlanarConfig::from_free(q2, q3, &ms);
                    action_piecewise_linear(&p2, &ms).unwrap()
                };
                let fd = (bump(1.0) - bump(-1.0)) / (2.0 * step);
                let an = match c {
                    0 => grad.interior[k - 1][0].x,
                    1 => grad.interior[k - 1][0].y,
                    2 => grad.interior[k - 1][1].x,
                    _ => grad.interior[k - 1][1].y,
                };
                assert!(
                    (fd - an).abs() <= 1e-5 * fd.abs().max(1.0),
                    "node {k} coord {c}: fd {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn gradient_small_on_lagrange_orbit() {
        // a discretized relative equilibrium is near-stationary for the
        // fixed-endpoint coordinates; interior gradient norms shrink with h
        let ms = masses(1.0);
        let norms: Vec<f64> = [60usize, 120]
            .iter()
            .map(|&n| {
                let (state, period) = crate::dynamics::lagrange_equilateral(&ms, 1.0);
                let frac = 0.3; // fraction of a revolution
                let nodes: Vec<PlanarConfig> = (0..n)
                    .map(|k| {
                        let ang = 2.0 * PI * frac * k as f64 / (n - 1) as f64;
                        let q = state.config.positions();
                        PlanarConfig {
                            q1: q[0].rotate(ang),
                            q2: q[1].rotate(ang),
                            q3: q[2].rotate(ang),
                        }
                    })
                    .collect();
                let path = DiscretePath::new(nodes, frac * period).unwrap();
                let start = BoundarySpec::ProgradeStart { a1: 1.0, a2: 1.0 };
                let end = BoundarySpec::IsoscelesEnd {
                    theta: 0.0,
                    b1: 1.0,
                    b2: 1.0,
                };
                let g = action_gradient(&path, &ms, &start, &end).unwrap();
                // skip the stencil-boundary nodes: the arc solves the interior
                // equations but not the free-boundary conditions, so the
                // discrete boundary term there is O(1) by design
                g.interior[3..g.interior.len() - 3]
                    .iter()
                    .map(|p| p[0].norm().max(p[1].norm()))
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(norms[0] < 1e-3, "{norms:?}");
        assert!(norms[1] < 0.35 * norms[0], "{norms:?}");
    }

    #[test]
    fn scaling_law() {
        // positions scaled by lambda and duration by lambda^(3/2) scale the
        // action by lambda^(1/2)
        let ms = masses(1.3);
        let mut rng = Xorshift(0x424242);
        let (path, _, _) = random_problem_path(&mut rng, &ms, 21, 0.2);
        let a1 = action_piecewise_linear(&path, &ms).unwrap();
        let lambda = 2.7;
        let nodes = path
            .nodes()
            .iter()
            .map(|c| PlanarConfig {
                q1: lambda * c.q1,
                q2: lambda * c.q2,
                q3: lambda * c.q3,
            })
            .collect();
        let scaled = DiscretePath::new(nodes, path.duration() * lambda.powf(1.5)).unwrap();
        let a2 = action_piecewise_linear(&scaled, &ms).unwrap();
        assert_relative_eq!(a2, lambda.sqrt() * a1, max_relative = 1e-12);
    }

    #[test]
    fn segment_guard_rejects_collisions() {
        let ms = masses(1.0);
        // bodies 2 and 3 cross head-on in the middle of the segment
        let c0 = PlanarConfig::from_free(Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), &ms);
        let c1 = PlanarConfig::from_free(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), &ms);
        let path = DiscretePath::new(vec![c0, c1], 1.0).unwrap();
        assert!(matches!(
            action_piecewise_linear(&path, &ms),
            Err(Error::SegmentSingularity { .. })
        ));
    }

    #[test]
    fn refine_doubles_segments() {
        let ms = masses(1.0);
        let mut rng = Xorshift(0x31415);
        let (path, _, _) = random_problem_path(&mut rng, &ms, 9, 0.15);
        let fine = path.refine(&ms);
        assert_eq!(fine.n_nodes(), 17);
        assert_eq!(fine.duration(), path.duration());
        for k in 0..path.n_nodes() {
            let a = path.node(k).positions();
            let b = fine.node(2 * k).positions();
            for (x, y) in a.iter().zip(b) {
                assert!((*x - y).norm() < 1e-15);
            }
        }
    }
}
