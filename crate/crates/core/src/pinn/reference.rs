//! Reference fields: closed forms where available, otherwise numerical
//! oracles on fine grids with bilinear interpolation.

use super::problem::wave_profile;
use super::{PdeProblem, PinnError, ProblemId};
use crate::tensor::Tensor;

/// Node values `values[i * ny + j]` on the tensor grid `xs × ys`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridField {
    fn locate(nodes: &[f64], v: f64) -> (usize, f64) {
        let n = nodes.len();
        let (lo, hi) = (nodes[0], nodes[n - 1]);
        let s = ((v - lo) / (hi - lo) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        (i, s - i as f64)
    }

    /// Bilinear interpolation on a uniform grid.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let ny = self.ys.len();
        let (i, fx) = Self::locate(&self.xs, x);
        let (j, fy) = Self::locate(&self.ys, y);
        let v = |a: usize, b: usize| self.values[a * ny + b];
        (1.0 - fx) * ((1.0 - fy) * v(i, j) + fy * v(i, j + 1))
            + fx * ((1.0 - fy) * v(i + 1, j) + fy * v(i + 1, j + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Interior unknowns per side for the Poisson solve.
    pub poisson_n: usize,
    pub poisson_tol: f64,
    /// Spatial nodes for method-of-lines solves.
    pub diffusion_nodes: usize,
    pub burgers_nodes: usize,
    /// Time snapshots stored for interpolation.
    pub snapshots: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            poisson_n: 255,
            poisson_tol: 1e-11,
            diffusion_nodes: 801,
            burgers_nodes: 4097,
            snapshots: 401,
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Analytic,
    Wave,
    Grid(GridField),
}

/// A precomputed reference for one problem.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    problem: PdeProblem,
    source: Source,
}

impl ReferenceSolution {
    pub fn new(problem: &PdeProblem) -> Result<Self, PinnError> {
        Self::with_settings(problem, SolverSettings::default())
    }

    pub fn with_settings(problem: &PdeProblem, s: SolverSettings) -> Result<Self, PinnError> {
        problem.validate()?;
        let source = match problem.id {
            ProblemId::SinRegression | ProblemId::Beltrami => Source::Analytic,
            ProblemId::Wave => Source::Wave,
            ProblemId::Poisson => Source::Grid(poisson_fd(problem, s.poisson_n, s.poisson_tol)?),
            ProblemId::DiffusionReaction => Source::Grid(diffusion_reaction_mol(problem, s.diffusion_nodes, s.snapshots)?),
            ProblemId::Burgers => Source::Grid(burgers_mol(problem, s.burgers_nodes, s.snapshots)?),
        };
        Ok(Self {
            problem: problem.clone(),
            source,
        })
    }

    pub fn grid(&self) -> Option<&GridField> {
        match &self.source {
            Source::Grid(g) => Some(g),
            _ => None,
        }
    }

    pub fn value_at(&self, p: &[f64]) -> Vec<f64> {
        match &self.source {
            Source::Analytic => self.problem.exact(p).expect("analytic problem"),
            Source::Wave => vec![wave_dalembert(&self.problem, p[0], p[1])],
            Source::Grid(g) => vec![g.interpolate(p[0], p[1])],
        }
    }

    /// Reference outputs `[n, outputs]` at raw points `[n, d]`.
    pub fn evaluate(&self, points: &Tensor) -> Result<Tensor, PinnError> {
        points.expect_rank("reference", 2)?;
        let d = self.problem.input_dim();
        if points.cols() != d {
            return Err(PinnError::Mismatch(format!("reference expects {d} coordinates, got {}", points.cols())));
        }
        let mut out = Vec::with_capacity(points.rows() * self.problem.output_dim());
        for i in 0..points.rows() {
            let p = points.row(i);
            if !self.problem.contains(p) {
                return Err(PinnError::OutsideDomain(p.to_vec()));
            }
            out.extend(self.value_at(p));
        }
        Ok(Tensor::new(vec![points.rows(), self.problem.output_dim()], out)?)
    }
}

/// One-shot convenience wrapper around [`ReferenceSolution`].
pub fn reference_solution(problem: &PdeProblem, points: &Tensor) -> Result<Tensor, PinnError> {
    ReferenceSolution::new(problem)?.evaluate(points)
}

/// Exact solution of the wave problem by d'Alembert's formula with the
/// odd reflection of the initial profile across both walls.
pub fn wave_dalembert(problem: &PdeProblem, x: f64, t: f64) -> f64 {
    let [lo, hi] = problem.domain[0];
    let len = hi - lo;
    let ext = |y: f64| {
        // Period 2·len; odd about each wall.
        let s = (y - lo).rem_euclid(2.0 * len);
        if s <= len {
            wave_profile(lo + s)
        } else {
            -wave_profile(lo + (2.0 * len - s))
        }
    };
    0.5 * (ext(x - t) + ext(x + t))
}

/// Second-order five-point solve of `-Δu = 1` with zero Dirichlet data by
/// conjugate gradients.
fn poisson_fd(problem: &PdeProblem, n: usize, tol: f64) -> Result<GridField, PinnError> {
    let [x0, x1] = problem.domain[0];
    let [y0, y1] = problem.domain[1];
    let hx = (x1 - x0) / (n + 1) as f64;
    let hy = (y1 - y0) / (n + 1) as f64;
    let (cx, cy) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let apply = |u: &[f64], out: &mut [f64]| {
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                let c = u[k];
                let l = if i > 0 { u[k - n] } else { 0.0 };
                let r = if i + 1 < n { u[k + n] } else { 0.0 };
                let d = if j > 0 { u[k - 1] } else { 0.0 };
                let t = if j + 1 < n { u[k + 1] } else { 0.0 };
                out[k] = cx * (2.0 * c - l - r) + cy * (2.0 * c - d - t);
            }
        }
    };
    let m = n * n;
    let b = vec![1.0; m];
    let mut u = vec![0.0; m];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; m];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(&b, &b).sqrt();
    let mut rr = dot(&r, &r);
    let max_iter = 20 * n + 100;
    let mut iter = 0;
    while rr.sqrt() > tol * bnorm {
        if iter >= max_iter {
            return Err(PinnError::Reference {
                iterations: iter,
                residual: rr.sqrt() / bnorm,
            });
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for k in 0..m {
            u[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for k in 0..m {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_new;
        iter += 1;
    }
    let xs: Vec<f64> = (0..n + 2).map(|i| x0 + hx * i as f64).collect();
    let ys: Vec<f64> = (0..n + 2).map(|j| y0 + hy * j as f64).collect();
    let mut values = vec![0.0; (n + 2) * (n + 2)];
    for i in 0..n {
        for j in 0..n {
            values[(i + 1) * (n + 2) + j + 1] = u[i * n + j];
        }
    }
    Ok(GridField { xs, ys, values })
}

/// Advances `u` by one classical RK4 step of `du/dt = rhs(u)`.
fn rk4(u: &mut [f64], dt: f64, rhs: &dyn Fn(&[f64], &mut [f64])) {
    let n = u.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    rhs(u, &mut k1);
    for i in 0..n {
        tmp[i] = u[i] + 0.5 * dt * k1[i];
    }
    rhs(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = u[i] + 0.5 * dt * k2[i];
    }
    rhs(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = u[i] + dt * k3[i];
    }
    rhs(&tmp, &mut k4);
    for i in 0..n {
        u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrates `u_t = rhs(u)` on `[t0, t1]`, storing `snapshots` equispaced
/// states. Boundary nodes are left to `rhs` (which must zero their rate).
fn march(
    xs: Vec<f64>,
    mut u: Vec<f64>,
    t_span: [f64; 2],
    dt_max: f64,
    snapshots: usize,
    rhs: &dyn Fn(&[f64], &mut [f64]),
) -> Result<GridField, PinnError> {
    let nx = xs.len();
    let snapshots = snapshots.max(2);
    let ts: Vec<f64> = (0..snapshots)
        .map(|k| t_span[0] + (t_span[1] - t_span[0]) * k as f64 / (snapshots - 1) as f64)
        .collect();
    let interval = ts[1] - ts[0];
    let sub = (interval / dt_max).ceil().max(1.0) as usize;
    let dt = interval / sub as f64;
    let mut frames = vec![u.clone()];
    for k in 1..snapshots {
        for _ in 0..sub {
            rk4(&mut u, dt, rhs);
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(PinnError::Reference {
                iterations: k * sub,
                residual: f64::NAN,
            });
        }
        frames.push(u.clone());
    }
    // Store as values[i * nt + j] (x-major).
    let mut values = vec![0.0; nx * snapshots];
    for (j, f) in frames.iter().enumerate() {
        for i in 0..nx {
            values[i * snapshots + j] = f[i];
        }
    }
    Ok(GridField { xs, ys: ts, values })
}

fn diffusion_reaction_mol(problem: &PdeProblem, nodes: usize, snapshots: usize) -> Result<GridField, PinnError> {
    let [x0, x1] = problem.domain[0];
    let dx = (x1 - x0) / (nodes - 1) as f64;
    let xs: Vec<f64> = (0..nodes).map(|i| x0 + dx * i as f64).collect();
    let u0: Vec<f64> = xs.iter().map(|&x| problem.initial_value(&[x, 0.0])[0]).collect();
    let k = problem.k;
    let inv = 1.0 / (dx * dx);
    let rhs = move |u: &[f64], out: &mut [f64]| {
        let n = u.len();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv + k * u[i] * u[i];
        }
    };
    // RK4 is stable for dt·4/dx² below about 2.78.
    march(xs, u0, problem.domain[1], 0.5 * dx * dx, snapshots, &rhs)
}

/// Burgers in conservative form `u_t + (u²/2)_x = ν u_xx` with zero
/// Dirichlet walls, central differences in space.
fn burgers_mol(problem: &PdeProblem, nodes: usize, snapshots: usize) -> Result<GridField, PinnError> {
    let [x0, x1] = problem.domain[0];
    let dx = (x1 - x0) / (nodes - 1) as f64;
    let xs: Vec<f64> = (0..nodes).map(|i| x0 + dx * i as f64).collect();
    let mut u0: Vec<f64> = xs.iter().map(|&x| problem.initial_value(&[x, 0.0])[0]).collect();
    u0[0] = 0.0;
    u0[nodes - 1] = 0.0;
    let nu = problem.nu;
    let inv2 = 1.0 / (dx * dx);
    let inv4 = 1.0 / (4.0 * dx);
    let rhs = move |u: &[f64], out: &mut [f64]| {
        let n = u.len();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            let flux = (u[i + 1] * u[i + 1] - u[i - 1] * u[i - 1]) * inv4;
            out[i] = -flux + nu * (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv2;
        }
    };
    let dt_diff = if nu > 0.0 { 0.5 * dx * dx / nu } else { f64::INFINITY };
    let dt = dt_diff.min(0.5 * dx);
    march(xs, u0, problem.domain[1], dt, snapshots, &rhs)
}
