//! The two-point free boundary minimization problems and their diagnostics.
//!
//! Both problems connect a collinear configuration (prograde or retrograde
//! body order, free nonnegative parameters `a1, a2`) to a rotated isosceles
//! configuration (free parameters `b1, b2`) over a fixed time, minimizing
//! the discretized action jointly in the interior nodes and the four
//! boundary parameters. Descent runs on the exact piecewise-linear action,
//! whose compact-stencil stationarity conditions are free of the
//! odd-even null modes that central-difference quadrature admits.

use crate::action::{pl_value_and_gradient, DiscretePath};
use crate::angle::Angle;
use crate::error::{Error, Result};
use crate::geometry::{
    boundary_config, classify_quadrants, from_jacobi, reflect_path, BoundarySpec, MassSet,
    PathCase, PlanarConfig, QuadrantReport, EPS_AXIS_REL,
};
use crate::vec2::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, PI};

/// Which collinear start family the problem uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Order `q2x <= q1x <= q3x` at the start; `theta` in `[0, pi/2)`.
    Prograde,
    /// Order `q1x <= q2x <= q3x` at the start; `theta` in `(0, pi/2]`.
    Retrograde,
}

impl Variant {
    pub fn tag(&self) -> &'static str {
        match self {
            Variant::Prograde => "prograde",
            Variant::Retrograde => "retrograde",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        match s {
            "prograde" => Some(Variant::Prograde),
            "retrograde" => Some(Variant::Retrograde),
            _ => None,
        }
    }
}

/// A fully specified minimization problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub masses: MassSet,
    pub theta: Angle,
    pub variant: Variant,
    pub n_nodes: usize,
    pub duration: f64,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let th = self.theta.radians();
        match self.variant {
            Variant::Prograde => {
                if !(0.0..FRAC_PI_2).contains(&th) {
                    return Err(Error::InvalidProblem(format!(
                        "prograde problems need theta in [0, pi/2), got {th}"
                    )));
                }
            }
            Variant::Retrograde => {
                if !(th > 0.0 && th <= FRAC_PI_2) {
                    return Err(Error::InvalidProblem(format!(
                        "retrograde problems need theta in (0, pi/2], got {th}"
                    )));
                }
            }
        }
        if self.n_nodes < 3 {
            return Err(Error::InvalidProblem(format!(
                "n_nodes = {} leaves no interior degrees of freedom",
                self.n_nodes
            )));
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        Ok(())
    }

    pub fn start_family(&self, a1: f64, a2: f64) -> BoundarySpec {
        match self.variant {
            Variant::Prograde => BoundarySpec::ProgradeStart { a1, a2 },
            Variant::Retrograde => BoundarySpec::RetrogradeStart { a1, a2 },
        }
    }

    pub fn end_family(&self, b1: f64, b2: f64) -> BoundarySpec {
        BoundarySpec::IsoscelesEnd {
            theta: self.theta.radians(),
            b1,
            b2,
        }
    }

    /// Whether this is the retrograde quarter-rotation boundary case, where
    /// a collision at the start node is admissible.
    pub fn is_schubart_boundary(&self) -> bool {
        self.variant == Variant::Retrograde
            && (self.theta.radians() - FRAC_PI_2).abs() <= 1e-15
    }
}

/// How the first iterate is built.
#[derive(Debug, Clone)]
pub enum InitStrategy {
    /// Straight-line interpolation between representative boundary
    /// configurations, with an out-of-line bump of relative size
    /// `perturbation` (its sign selects the mirror branch at `theta = 0`).
    LinearInterp { perturbation: f64 },
    /// The circular retrograde test path sampled on the grid, rescaled to
    /// the problem duration.
    CircularArc,
    /// A caller-supplied path (for warm starts and file input).
    FromPath(DiscretePath),
}

impl Default for InitStrategy {
    fn default() -> Self {
        InitStrategy::LinearInterp { perturbation: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    pub strategy: Option<InitStrategy>,
    pub max_iters: usize,
    /// Multiplies the built-in gradient tolerance
    /// `1e-8 x action scale / path diameter`.
    pub tol_factor: f64,
    /// L-BFGS history length.
    pub history: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            strategy: None,
            max_iters: 50_000,
            tol_factor: 1.0,
            history: 12,
        }
    }
}

/// Converged minimizer with its diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizerReport {
    pub problem: ProblemSpec,
    pub path: DiscretePath,
    /// Exact action of the piecewise-linear interpolant of `path`.
    pub action: f64,
    /// `(a1, a2, b1, b2)`.
    pub boundary_params: [f64; 4],
    pub min_pairwise_distance: f64,
    pub case: PathCase,
    pub adjacency_ok: bool,
    /// Scaled Euler-Lagrange defect of the converged path.
    pub el_residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl MinimizerReport {
    pub fn quadrant_report(&self) -> QuadrantReport {
        let eps = EPS_AXIS_REL * self.path.diameter();
        classify_quadrants(&self.path.jacobi(&self.problem.masses), eps)
    }
}

/// Builds the first iterate for a problem.
pub fn initial_path(spec: &ProblemSpec, strategy: &InitStrategy) -> Result<DiscretePath> {
    spec.validate()?;
    let masses = spec.masses;
    match strategy {
        InitStrategy::FromPath(path) => {
            if path.n_nodes() != spec.n_nodes {
                // resample by refinement or linear interpolation onto the grid
                return Ok(resample(path, spec.n_nodes, spec.duration, &masses));
            }
            Ok(path.clone())
        }
        InitStrategy::CircularArc => {
            if spec.variant != Variant::Retrograde {
                return Err(Error::InvalidProblem(
                    "the circular-arc start applies to the retrograde problem".into(),
                ));
            }
            let arc =
                crate::levels::circular_retrograde_path(&masses, spec.theta.radians(), spec.n_nodes)?;
            // Keplerian rescale from the natural quarter-period to `duration`:
            // time scales as lambda^(3/2) when positions scale as lambda.
            let lambda = (spec.duration / arc.duration()).powf(2.0 / 3.0);
            let nodes = arc
                .nodes()
                .iter()
                .map(|c| PlanarConfig {
                    q1: lambda * c.q1,
                    q2: lambda * c.q2,
                    q3: lambda * c.q3,
                })
                .collect();
            DiscretePath::new(nodes, spec.duration)
        }
        InitStrategy::LinearInterp { perturbation } => {
            let start = boundary_config(&spec.start_family(0.5, 0.5), &masses)?;
            let end = boundary_config(&spec.end_family(0.5, 0.5), &masses)?;
            let n = spec.n_nodes;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let jitter = 0.002 * perturbation.abs();
            let nodes = (0..n)
                .map(|k| {
                    let t = k as f64 / (n - 1) as f64;
                    if k == 0 {
                        return start;
                    }
                    if k == n - 1 {
                        return end;
                    }
                    let lerp = |a: Vec2, b: Vec2| a + t * (b - a);
                    let bump = perturbation * (PI * t).sin();
                    let mut jx = || jitter * (rng.gen::<f64>() - 0.5) * (PI * t).sin();
                    let q2 = lerp(start.q2, end.q2) + Vec2::new(jx(), bump + jx());
                    let q3 = lerp(start.q3, end.q3) + Vec2::new(jx(), -bump + jx());
                    PlanarConfig::from_free(q2, q3, &masses)
                })
                .collect();
            DiscretePath::new(nodes, spec.duration)
        }
    }
}

/// Linear resampling of a path onto a new uniform grid.
fn resample(path: &DiscretePath, n_nodes: usize, duration: f64, masses: &MassSet) -> DiscretePath {
    let n_old = path.n_nodes();
    let nodes = (0..n_nodes)
        .map(|k| {
            let t = k as f64 / (n_nodes - 1) as f64 * (n_old - 1) as f64;
            let i = (t.floor() as usize).min(n_old - 2);
            let frac = t - i as f64;
            let a = path.node(i);
            let b = path.node(i + 1);
            PlanarConfig::from_free(
                a.q2 + frac * (b.q2 - a.q2),
                a.q3 + frac * (b.q3 - a.q3),
                masses,
            )
        })
        .collect();
    DiscretePath::new(nodes, duration).expect("valid resample")
}

/// Replaces the path by its reflection into the adjacent closed quadrant
/// pair determined by the boundary values of `(Z1, Z2)`, whenever the
/// reflection does not increase the piecewise-linear action.
pub fn reflect_improve(path: &DiscretePath, masses: &MassSet) -> Result<DiscretePath> {
    let zs = path.jacobi(masses);
    let eps = EPS_AXIS_REL * path.diameter();
    let first = &zs[0];
    let last = &zs[zs.len() - 1];
    let member = |v: Vec2| crate::geometry::QuadrantTag::classify(v, eps).members();
    let m1 = member(first.z1) & member(last.z1);
    let m2 = member(first.z2) & member(last.z2);

    // candidate adjacent pairs compatible with both endpoints
    let mut candidates = Vec::new();
    for i in 1..=4u8 {
        for j in 1..=4u8 {
            if crate::geometry::quadrants_adjacent(i, j)
                && m1 & (1 << (i - 1)) != 0
                && m2 & (1 << (j - 1)) != 0
            {
                candidates.push((i, j));
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::NotAdjacent(0, 0));
    }
    // prefer the pair already containing the most samples
    let score = |(i, j): (u8, u8)| {
        zs.iter()
            .filter(|zp| {
                crate::geometry::QuadrantTag::classify(zp.z1, eps).members() & (1 << (i - 1)) != 0
                    && crate::geometry::QuadrantTag::classify(zp.z2, eps).members()
                        & (1 << (j - 1))
                        != 0
            })
            .count()
    };
    let best = *candidates
        .iter()
        .max_by_key(|&&pair| score(pair))
        .expect("non-empty");

    let reflected = reflect_path(&zs, best)?;
    let nodes: Vec<PlanarConfig> = reflected
        .iter()
        .map(|zp| from_jacobi(zp, masses))
        .collect();
    let cand = DiscretePath::new(nodes, path.duration())?;
    let a_old = crate::action::action_piecewise_linear(path, masses)?;
    let a_new = crate::action::action_piecewise_linear(&cand, masses)?;
    if a_new <= a_old + 1e-12 * a_old.abs() {
        Ok(cand)
    } else {
        Ok(path.clone())
    }
}

// ---------------------------------------------------------------------------
// the descent engine
// ---------------------------------------------------------------------------

struct Transcription<'a> {
    spec: &'a ProblemSpec,
    masses: MassSet,
}

impl Transcription<'_> {
    fn dim(&self) -> usize {
        4 + 4 * (self.spec.n_nodes - 2)
    }

    fn build(&self, x: &[f64]) -> Result<(DiscretePath, BoundarySpec, BoundarySpec)> {
        let start = self.spec.start_family(x[0], x[1]);
        let end = self.spec.end_family(x[2], x[3]);
        let n = self.spec.n_nodes;
        let mut nodes = Vec::with_capacity(n);
        nodes.push(boundary_config(&start, &self.masses)?);
        for k in 1..n - 1 {
            let o = 4 + 4 * (k - 1);
            nodes.push(PlanarConfig::from_free(
                Vec2::new(x[o], x[o + 1]),
                Vec2::new(x[o + 2], x[o + 3]),
                &self.masses,
            ));
        }
        nodes.push(boundary_config(&end, &self.masses)?);
        Ok((
            DiscretePath::new(nodes, self.spec.duration)?,
            start,
            end,
        ))
    }

    fn pack_from(&self, path: &DiscretePath, params: [f64; 4]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        x.extend_from_slice(&params);
        for k in 1..path.n_nodes() - 1 {
            let node = path.node(k);
            x.extend_from_slice(&[node.q2.x, node.q2.y, node.q3.x, node.q3.y]);
        }
        x
    }

    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (path, start, end) = self.build(x)?;
        let (value, grad) = pl_value_and_gradient(&path, &self.masses, &start, &end)?;
        let mut g = Vec::with_capacity(self.dim());
        g.extend_from_slice(&[grad.start[0], grad.start[1], grad.end[0], grad.end[1]]);
        for gi in &grad.interior {
            g.extend_from_slice(&[gi[0].x, gi[0].y, gi[1].x, gi[1].y]);
        }
        Ok((value, g))
    }
}

fn project(x: &mut [f64]) {
    // a1, a2 >= 0
    x[0] = x[0].max(0.0);
    x[1] = x[1].max(0.0);
}

fn projected_gradient_norm(x: &[f64], g: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let gi = if i < 2 && x[i] <= 0.0 && g[i] > 0.0 {
            0.0
        } else {
            g[i]
        };
        s += gi * gi;
    }
    s.sqrt()
}

/// Lower-banded Cholesky factorization of a symmetric positive definite
/// matrix, stored by diagonals: `a[i * (hbw + 1) + k] = A[i][i - k]`.
struct BandedCholesky {
    dim: usize,
    hbw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    fn factor(dim: usize, hbw: usize, a: &[f64]) -> Option<Self> {
        let w = hbw + 1;
        let mut l = a.to_vec();
        for i in 0..dim {
            let lo = i.saturating_sub(hbw);
            for j in lo..i {
                let mut sum = l[i * w + (i - j)];
                let p_lo = lo.max(j.saturating_sub(hbw));
                for p in p_lo..j {
                    sum -= l[i * w + (i - p)] * l[j * w + (j - p)];
                }
                l[i * w + (i - j)] = sum / l[j * w];
            }
            let mut d = l[i * w];
            for p in lo..i {
                let v = l[i * w + (i - p)];
                d -= v * v;
            }
            if d <= 0.0 {
                return None;
            }
            l[i * w] = d.sqrt();
        }
        Some(Self { dim, hbw, l })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let w = self.hbw + 1;
        let mut z = rhs.to_vec();
        for i in 0..self.dim {
            let lo = i.saturating_sub(self.hbw);
            let mut v = z[i];
            for p in lo..i {
                v -= self.l[i * w + (i - p)] * z[p];
            }
            z[i] = v / self.l[i * w];
        }
        for i in (0..self.dim).rev() {
            let hi = (i + self.hbw + 1).min(self.dim);
            let mut v = z[i];
            for p in i + 1..hi {
                v -= self.l[p * w + (p - i)] * z[p];
            }
            z[i] = v / self.l[i * w];
        }
        z
    }
}

/// The kinetic part of the discrete action Hessian in the free coordinates.
///
/// It is constant over iterations (the kinetic energy is quadratic) and
/// carries all of the transcription's stiffness, so its inverse makes an
/// effective seed for the quasi-Newton recursion. Internally the variables
/// are permuted to `[a | node 1 | ... | node n-2 | b]` so the matrix is
/// banded with half-bandwidth 7.
struct KineticPreconditioner {
    chol: BandedCholesky,
    dim: usize,
}

impl KineticPreconditioner {
    fn build(spec: &ProblemSpec, masses: &MassSet) -> Option<Self> {
        let n = spec.n_nodes;
        let dim = 4 * (n - 2) + 4;
        let hbw = 7usize;
        let w = hbw + 1;
        let h = spec.duration / (n - 1) as f64;
        let m = masses.m();
        let mv = masses.values();

        // reduced-coordinate body maps: q1 = -m (q2 + q3)
        // mass metric of one segment difference, in (q2, q3) coordinates
        let diag_c = m + m * m; // coefficient of |dq2|^2 and |dq3|^2
        let cross_c = m * m; // coefficient of dq2 . dq3 (times 2)

        let mut a = vec![0.0; dim * w];
        let mut add = |i: usize, j: usize, v: f64| {
            // lower-banded storage, i >= j
            let (i, j) = if i >= j { (i, j) } else { (j, i) };
            debug_assert!(i - j <= hbw);
            a[i * w + (i - j)] += v;
        };

        // index of internal coordinate c (0..4) of interior node k (1-based)
        let node = |k: usize, c: usize| 2 + 4 * (k - 1) + c;
        let m_red = |c: usize, d: usize| -> f64 {
            // 4x4 metric: coords (q2x, q2y, q3x, q3y)
            if c == d {
                diag_c
            } else if (c + 2) % 4 == d || (d + 2) % 4 == c {
                cross_c
            } else {
                0.0
            }
        };

        // interior-interior segments (k, k+1), k = 1..n-3
        for k in 1..n - 2 {
            for c in 0..4 {
                for d in 0..4 {
                    let v = m_red(c, d) / h;
                    if v == 0.0 {
                        continue;
                    }
                    if d <= c {
                        add(node(k, c), node(k, d), v);
                        add(node(k + 1, c), node(k + 1, d), v);
                    }
                    add(node(k + 1, c), node(k, d), -v);
                }
            }
        }

        // boundary segments couple the parameter blocks to the edge nodes
        let sj = crate::action::boundary_jacobian(&spec.start_family(1.0, 1.0), masses);
        let ej = crate::action::boundary_jacobian(&spec.end_family(1.0, 1.0), masses);
        // body map B_i applied to a reduced displacement u = (q2, q3)
        let body_map = |i: usize, u: [f64; 4]| -> Vec2 {
            match i {
                0 => Vec2::new(-m * (u[0] + u[2]), -m * (u[1] + u[3])),
                1 => Vec2::new(u[0], u[1]),
                _ => Vec2::new(u[2], u[3]),
            }
        };
        let unit4 = |c: usize| {
            let mut u = [0.0; 4];
            u[c] = 1.0;
            u
        };
        for (params, node_k, param_base) in [(&sj, 1usize, 0usize), (&ej, n - 2, dim - 2)] {
            // param-param block
            for p in 0..2 {
                for q in 0..=p {
                    let mut v = 0.0;
                    for i in 0..3 {
                        v += mv[i] * params[p][i].dot(params[q][i]);
                    }
                    add(param_base + p, param_base + q, v / h);
                }
            }
            // node-node block (the edge node's own segment term)
            for c in 0..4 {
                for d in 0..=c {
                    let v = m_red(c, d) / h;
                    if v != 0.0 {
                        add(node(node_k, c), node(node_k, d), v);
                    }
                }
            }
            // cross block: -(1/h) sum_i m_i (B_i e_c) . (J_p row i)
            for c in 0..4 {
                for p in 0..2 {
                    let mut v = 0.0;
                    for i in 0..3 {
                        v += mv[i] * body_map(i, unit4(c)).dot(params[p][i]);
                    }
                    add(node(node_k, c), param_base + p, -v / h);
                }
            }
        }

        // small shift keeps the factorization strictly positive definite
        // (at theta = 0 the kinetic form has an exact translation null mode)
        let max_diag = (0..dim).map(|i| a[i * w]).fold(0.0, f64::max);
        let sigma = 1e-8 * max_diag.max(1e-12);
        for i in 0..dim {
            a[i * w] += sigma;
        }

        Some(Self {
            chol: BandedCholesky::factor(dim, hbw, &a)?,
            dim,
        })
    }

    /// Solves `K z = g` in the external layout `[a1 a2 b1 b2 | nodes]`.
    fn apply(&self, g: &[f64]) -> Vec<f64> {
        let dim = self.dim;
        let mut internal = vec![0.0; dim];
        internal[0] = g[0];
        internal[1] = g[1];
        internal[dim - 2] = g[2];
        internal[dim - 1] = g[3];
        internal[2..dim - 2].copy_from_slice(&g[4..]);
        let z = self.chol.solve(&internal);
        let mut out = vec![0.0; dim];
        out[0] = z[0];
        out[1] = z[1];
        out[2] = z[dim - 2];
        out[3] = z[dim - 1];
        out[4..].copy_from_slice(&z[2..dim - 2]);
        out
    }
}

struct LbfgsMemory {
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    rho: VecDeque<f64>,
    cap: usize,
}

impl LbfgsMemory {
    fn new(cap: usize) -> Self {
        Self {
            s: VecDeque::new(),
            y: VecDeque::new(),
            rho: VecDeque::new(),
            cap,
        }
    }

    fn clear(&mut self) {
        self.s.clear();
        self.y.clear();
        self.rho.clear();
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        let ss = dot(&s, &s).sqrt();
        let yy = dot(&y, &y).sqrt();
        if sy <= 1e-12 * ss * yy {
            return; // curvature condition failed; skip the pair
        }
        if self.s.len() == self.cap {
            self.s.pop_front();
            self.y.pop_front();
            self.rho.pop_front();
        }
        self.rho.push_back(1.0 / sy);
        self.s.push_back(s);
        self.y.push_back(y);
    }

    /// Two-loop recursion: returns `H g` for the implicit inverse Hessian,
    /// seeded by the kinetic preconditioner when available.
    fn apply(&self, g: &[f64], precond: Option<&KineticPreconditioner>) -> Vec<f64> {
        let mut q = g.to_vec();
        let k = self.s.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = self.rho[i] * dot(&self.s[i], &q);
            axpy(-alpha[i], &self.y[i], &mut q);
        }
        match precond {
            Some(p) => q = p.apply(&q),
            None => {
                if k > 0 {
                    let y = &self.y[k - 1];
                    let s = &self.s[k - 1];
                    let gamma = dot(s, y) / dot(y, y).max(1e-300);
                    for qi in q.iter_mut() {
                        *qi *= gamma;
                    }
                }
            }
        }
        for i in 0..k {
            let beta = self.rho[i] * dot(&self.y[i], &q);
            axpy(alpha[i] - beta, &self.s[i], &mut q);
        }
        q
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Solves the free boundary problem by projected L-BFGS descent on the
/// piecewise-linear action. Boundary parameters `a1, a2` stay nonnegative by
/// projection; the line search backtracks through collision singularities.
pub fn minimize(spec: &ProblemSpec, opts: &MinimizeOptions) -> Result<MinimizerReport> {
    spec.validate()?;
    let masses = spec.masses;
    let default_strategy = match spec.variant {
        Variant::Prograde => InitStrategy::default(),
        Variant::Retrograde => InitStrategy::CircularArc,
    };
    let strategy = opts.strategy.clone().unwrap_or(default_strategy);
    let init = initial_path(spec, &strategy)?;
    let init = reflect_improve(&init, &masses).unwrap_or(init);

    let trans = Transcription {
        spec,
        masses,
    };
    // recover boundary parameters from the endpoints of the initial path
    let params = fit_boundary_params(spec, &init);
    let mut x = trans.pack_from(&init, params);
    project(&mut x);

    let (mut f, mut g) = trans.eval(&x).map_err(|e| match e {
        Error::SegmentSingularity { segment, pair, .. } => Error::CollisionEncountered {
            pair,
            time: init.time(segment),
        },
        other => other,
    })?;

    let precond = KineticPreconditioner::build(spec, &masses);
    let mut memory = LbfgsMemory::new(opts.history);
    let mut iterations = 0usize;
    let mut converged = false;
    let mut stalled = false;
    let mut pg_norm = projected_gradient_norm(&x, &g);

    while iterations < opts.max_iters {
        let (path_now, _, _) = trans.build(&x)?;
        let tol = opts.tol_factor * 1e-8 * f.abs().max(1.0) / path_now.diameter().max(1e-9);
        pg_norm = projected_gradient_norm(&x, &g);
        if pg_norm < tol {
            converged = true;
            break;
        }

        let mut dir = memory.apply(&g, precond.as_ref());
        for d in dir.iter_mut() {
            *d = -*d;
        }
        // freeze active bound coordinates that the direction would violate
        for i in 0..2 {
            if x[i] <= 0.0 && dir[i] < 0.0 {
                dir[i] = 0.0;
            }
        }
        if dot(&dir, &g) >= 0.0 {
            memory.clear();
            dir = match &precond {
                Some(p) => p.apply(&g).iter().map(|v| -v).collect(),
                None => g.iter().map(|v| -v).collect(),
            };
            for i in 0..2 {
                if x[i] <= 0.0 && dir[i] < 0.0 {
                    dir[i] = 0.0;
                }
            }
        }

        let mut accepted = false;
        let mut t_step = 1.0;
        let mut x_new = vec![0.0; x.len()];
        let mut f_new = f;
        let mut g_new = Vec::new();
        let mut last_collision: Option<Error> = None;
        for _ in 0..64 {
            for i in 0..x.len() {
                x_new[i] = x[i] + t_step * dir[i];
            }
            project(&mut x_new);
            let dirder: f64 = (0..x.len()).map(|i| g[i] * (x_new[i] - x[i])).sum();
            if dirder >= 0.0 {
                // projection blocked all movement
                t_step *= 0.5;
                continue;
            }
            match trans.eval(&x_new) {
                Ok((fv, gv)) => {
                    if fv <= f + 1e-4 * dirder {
                        f_new = fv;
                        g_new = gv;
                        accepted = true;
                        break;
                    }
                    t_step *= 0.5;
                }
                Err(e @ Error::SegmentSingularity { .. })
                | Err(e @ Error::CollisionSingularity { .. }) => {
                    last_collision = Some(e);
                    t_step *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }

        if !accepted {
            if memory.s.is_empty() {
                // steepest descent cannot move: either a stall at the
                // resolution of f64, or a collision wall
                if let (Some(err), true) = (&last_collision, pg_norm > 1e3 * tol) {
                    if let Error::SegmentSingularity { segment, pair, .. } = err {
                        return Err(Error::CollisionEncountered {
                            pair: *pair,
                            time: path_now.time(*segment),
                        });
                    }
                }
                stalled = true;
                break;
            }
            memory.clear();
            continue; // retry the iteration as steepest descent
        }

        let s: Vec<f64> = (0..x.len()).map(|i| x_new[i] - x[i]).collect();
        let yv: Vec<f64> = (0..x.len()).map(|i| g_new[i] - g[i]).collect();
        memory.push(s, yv);
        x.copy_from_slice(&x_new);
        f = f_new;
        g = g_new;
        iterations += 1;
    }

    if !converged && !stalled && iterations >= opts.max_iters {
        return Err(Error::NonConvergence {
            iterations,
            grad_norm: pg_norm,
        });
    }

    // Terminal polish: the Armijo phase stalls once action differences fall
    // under f64 resolution, which happens well above the gradient tolerance.
    // Near the minimum the quasi-Newton iteration on the stationarity system
    // needs no function comparisons, so continue on the gradient alone,
    // keeping the best iterate seen.
    if stalled && !converged {
        let mut best_x = x.clone();
        let mut best_g = g.clone();
        let mut best_norm = pg_norm;
        let mut bad_streak = 0usize;
        for _ in 0..4000 {
            let (path_now, _, _) = trans.build(&x)?;
            let tol =
                opts.tol_factor * 1e-8 * f.abs().max(1.0) / path_now.diameter().max(1e-9);
            if pg_norm < tol {
                converged = true;
                break;
            }
            let mut dir = memory.apply(&g, precond.as_ref());
            for d in dir.iter_mut() {
                *d = -*d;
            }
            for i in 0..2 {
                if x[i] <= 0.0 && dir[i] < 0.0 {
                    dir[i] = 0.0;
                }
            }
            // clamp the step; the quadratic model is only trusted locally
            let dn = dot(&dir, &dir).sqrt();
            let clamp = 1e-3 * path_now.diameter();
            let scale = if dn > clamp { clamp / dn } else { 1.0 };
            let mut x_new = x.clone();
            for i in 0..x.len() {
                x_new[i] += scale * dir[i];
            }
            project(&mut x_new);
            match trans.eval(&x_new) {
                Ok((fv, gv)) => {
                    let s: Vec<f64> = (0..x.len()).map(|i| x_new[i] - x[i]).collect();
                    let yv: Vec<f64> = (0..x.len()).map(|i| gv[i] - g[i]).collect();
                    memory.push(s, yv);
                    x = x_new;
                    f = fv;
                    g = gv;
                    iterations += 1;
                    pg_norm = projected_gradient_norm(&x, &g);
                    if pg_norm < best_norm {
                        best_norm = pg_norm;
                        best_x.copy_from_slice(&x);
                        best_g.copy_from_slice(&g);
                        bad_streak = 0;
                    } else {
                        bad_streak += 1;
                        if bad_streak > 40 {
                            break;
                        }
                    }
                }
                Err(_) => break,
            }
        }
        if best_norm < pg_norm {
            x = best_x;
            g = best_g;
            pg_norm = best_norm;
            let (fv, _) = trans.eval(&x)?;
            f = fv;
        }
        if !converged {
            let (path_now, _, _) = trans.build(&x)?;
            let tol =
                opts.tol_factor * 1e-8 * f.abs().max(1.0) / path_now.diameter().max(1e-9);
            converged = pg_norm < tol;
        }
    }

    let (path, _, _) = trans.build(&x)?;
    let (min_dist, _, _) = path.min_separation();
    let eps_axis = EPS_AXIS_REL * path.diameter();
    let quad = classify_quadrants(&path.jacobi(&masses), eps_axis);
    let el = crate::dynamics::el_residual(&path, &masses).unwrap_or(f64::NAN);

    Ok(MinimizerReport {
        problem: *spec,
        path,
        action: f,
        boundary_params: [x[0], x[1], x[2], x[3]],
        min_pairwise_distance: min_dist,
        case: quad.case,
        adjacency_ok: quad.adjacency_ok,
        el_residual: el,
        converged,
        iterations,
        grad_norm: pg_norm,
    })
}

/// Least-squares fit of the family parameters to the endpoint
/// configurations of a path (exact when the endpoints lie in the families).
fn fit_boundary_params(spec: &ProblemSpec, path: &DiscretePath) -> [f64; 4] {
    let m = spec.masses.m();
    let start = path.node(0);
    let end = path.node(path.n_nodes() - 1);
    let (a1, a2) = match spec.variant {
        // q2x = -(m+1) a1 - m a2, q3x = m a1 + (m+1) a2
        Variant::Prograde => {
            let det = -(m + 1.0) * (m + 1.0) + m * m;
            let a1 = ((m + 1.0) * start.q2.x + m * start.q3.x) / det;
            let a2 = (-m * start.q2.x - (m + 1.0) * start.q3.x) / det;
            (a1, a2)
        }
        // q2x = a1 - m a2, q3x = a1 + (m+1) a2
        Variant::Retrograde => {
            let a2 = (start.q3.x - start.q2.x) / (2.0 * m + 1.0);
            let a1 = start.q2.x + m * a2;
            (a1, a2)
        }
    };
    // unrotate the end configuration and read off (b1, b2)
    let th = spec.theta.radians();
    let q2 = end.q2.rotate(-th);
    let q3 = end.q3.rotate(-th);
    let b1 = 0.5 * (q2.y - q3.y);
    let b2 = -0.5 * (q2.x + q3.x);
    [a1.max(0.0), a2.max(0.0), b1, b2]
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Axis band, relative to the path diameter.
    pub eps_axis_rel: f64,
    /// Collision floor, relative to the path diameter.
    pub eps_coll_rel: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            eps_axis_rel: EPS_AXIS_REL,
            eps_coll_rel: 1e-3,
        }
    }
}

/// Outcome of checking a minimizer against the confinement and
/// collision-exclusion invariants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyVerdict {
    pub adjacency_ok: bool,
    pub case: PathCase,
    pub min_distance: f64,
    pub min_distance_ok: bool,
    /// For prograde rotations in (0, pi/2): `Z1` confined to one of
    /// `Q2`/`Q3` with `Z2` in the adjacent `Q1`/`Q4`.
    pub branch_ok: Option<bool>,
    pub passed: bool,
    pub notes: Vec<String>,
}

impl VerifyVerdict {
    pub fn summary(&self) -> String {
        if self.passed {
            format!(
                "pass: case {}, min distance {:.3e}",
                self.case.tag(),
                self.min_distance
            )
        } else {
            format!(
                "fail: case {}, adjacency {}, min distance {:.3e} ({}); {}",
                self.case.tag(),
                self.adjacency_ok,
                self.min_distance,
                if self.min_distance_ok { "ok" } else { "low" },
                self.notes.join("; ")
            )
        }
    }
}

/// Checks a minimizer report: samplewise adjacency, collision clearance,
/// trichotomy case, and (for prograde interior rotations) confinement of
/// `(Z1, Z2)` to a single adjacent quadrant pair.
///
/// At the retrograde quarter-rotation boundary the clearance check skips the
/// start node, where a collision is admissible.
pub fn verify_minimizer(
    report: &MinimizerReport,
    masses: &MassSet,
    opts: &VerifyOptions,
) -> VerifyVerdict {
    let path = &report.path;
    let diam = path.diameter();
    let eps_axis = opts.eps_axis_rel * diam;
    let eps_coll = opts.eps_coll_rel * diam;
    let zs = path.jacobi(masses);
    let quad = classify_quadrants(&zs, eps_axis);
    let mut notes = Vec::new();

    // collision clearance over the piecewise-linear interpolant
    let (mut min_dist, pair, seg) = path.min_separation();
    if report.problem.is_schubart_boundary() && seg == 0 {
        // re-measure skipping the first segment
        let mut best = f64::INFINITY;
        for k in 1..path.n_nodes() - 1 {
            let a = path.node(k).positions();
            let b = path.node(k + 1).positions();
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let x0 = a[i] - a[j];
                let x1 = b[i] - b[j];
                let d = x1 - x0;
                let t = if d.norm_sq() > 0.0 {
                    (-(x0.dot(d)) / d.norm_sq()).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                best = best.min((x0 + t * d).norm());
            }
        }
        notes.push(format!(
            "start-node clearance waived at theta = pi/2 (pair {:?} at {:.3e})",
            pair, min_dist
        ));
        min_dist = best;
    }
    let min_distance_ok = min_dist > eps_coll;
    if !min_distance_ok {
        notes.push(format!(
            "min pairwise distance {min_dist:.3e} under {eps_coll:.3e}"
        ));
    }

    if !quad.adjacency_ok {
        if let Some(k) = quad.first_violation {
            notes.push(format!("adjacency fails at node {k}"));
        }
    }

    // prograde interior rotations: single-pair confinement
    let th = report.problem.theta.radians();
    let branch_ok = if report.problem.variant == Variant::Prograde
        && th > 0.0
        && th < FRAC_PI_2
    {
        let confined = |q1: u8, q2: u8| {
            zs.iter().all(|zp| {
                crate::geometry::QuadrantTag::classify(zp.z1, eps_axis).members()
                    & (1 << (q1 - 1))
                    != 0
                    && crate::geometry::QuadrantTag::classify(zp.z2, eps_axis).members()
                        & (1 << (q2 - 1))
                        != 0
            })
        };
        let ok = confined(2, 1) || confined(3, 4);
        if !ok {
            notes.push("Z1/Z2 not confined to an upper or lower adjacent pair".into());
        }
        Some(ok)
    } else {
        None
    };

    let passed = quad.adjacency_ok
        && quad.case != PathCase::Violation
        && min_distance_ok
        && branch_ok.unwrap_or(true);

    VerifyVerdict {
        adjacency_ok: quad.adjacency_ok,
        case: quad.case,
        min_distance: min_dist,
        min_distance_ok,
        branch_ok,
        passed,
        notes,
    }
}

#[allow(unused_imports)]
use crate::geometry::QuadrantTag;
