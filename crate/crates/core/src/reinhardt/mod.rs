//! Reinhardt-invariant solutions `u(z) = v(ρ_1, ..., ρ_n)` with `ρ_j = |z_j|^2`.
//!
//! The complex Hessian is unitarily equivalent to the real symmetric matrix
//! `A_jk = v_j δ_jk + sqrt(ρ_j ρ_k) v_jk`, so the equation `S_k(A) = f` is
//! discretized on a tensor grid in `ρ` and solved by damped Newton with a
//! banded direct solve.

mod stencil;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::barriers::{
    assemble_subsolution, f_eps, ApproximationParams, SubsolutionField,
};
use crate::error::{Error, Result};
use crate::geometry::{InnerDomain, NodeClass, ReinhardtGrid};
use crate::linalg::BandMatrix;
use crate::radial::{NewtonOptions, Source};
use crate::symmfunc::{binomial, elementary_symmetric, hessian_derivative_real, Spectrum};

use stencil::{MixedKind, NodeStencil};

type BoundaryFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One Dirichlet problem on the slab between the hole and `Σ ρ_j = R^2`.
#[derive(Clone)]
pub struct ReinhardtProblem {
    pub grid: ReinhardtGrid,
    pub k: usize,
    pub source: Source,
    pub params: Option<ApproximationParams>,
    /// Present for the exterior problem; supplies boundary data and the
    /// initial guess.
    pub subsolution: Option<SubsolutionField>,
    boundary: BoundaryFn,
}

impl fmt::Debug for ReinhardtProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReinhardtProblem")
            .field("dim", &self.grid.dim)
            .field("per_axis", &self.grid.per_axis)
            .field("k", &self.k)
            .field("source", &self.source)
            .finish()
    }
}

impl ReinhardtProblem {
    /// Truncated exterior problem `S_k = f^ε` with data from the glued
    /// subsolution on both boundaries.
    pub fn exterior(
        params: &ApproximationParams,
        inner: InnerDomain,
        outer_radius: f64,
        per_axis: usize,
    ) -> Result<Self> {
        if inner.dim() != params.n {
            return Err(Error::Domain(format!(
                "hole has dimension {}, parameters have n = {}",
                inner.dim(),
                params.n
            )));
        }
        if params.t > inner.inscribed_radius() * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "B_t with t = {} is not contained in the hole (inscribed radius {})",
                params.t,
                inner.inscribed_radius()
            )));
        }
        if !(outer_radius > 1.0 + params.s) {
            return Err(Error::Domain(format!(
                "R = {outer_radius} must exceed 1 + s = {}",
                1.0 + params.s
            )));
        }
        let field = assemble_subsolution(params, &inner)?;
        let grid = ReinhardtGrid::new(inner, outer_radius, per_axis)?;
        let boundary = {
            let f = field.clone();
            Arc::new(move |rho: &[f64]| f.value_rho(rho)) as BoundaryFn
        };
        Ok(Self {
            grid,
            k: params.k,
            source: Source::FEps,
            params: Some(params.clone()),
            subsolution: Some(field),
            boundary,
        })
    }

    /// Problem with arbitrary Dirichlet data; `boundary` is also the initial guess.
    pub fn with_boundary(
        grid: ReinhardtGrid,
        k: usize,
        source: Source,
        params: Option<ApproximationParams>,
        boundary: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let n = grid.dim;
        if !(1 <= k && k <= n) {
            return Err(Error::Domain(format!("order k = {k} must lie in 1..={n}")));
        }
        if matches!(source, Source::FEps) && params.is_none() {
            return Err(Error::Domain("f^ε source needs approximation parameters".into()));
        }
        Ok(Self {
            grid,
            k,
            source,
            params,
            subsolution: None,
            boundary: Arc::new(boundary),
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn boundary_value(&self, rho: &[f64]) -> f64 {
        (self.boundary)(rho)
    }

    pub fn source_at(&self, norm_sq: f64) -> f64 {
        match &self.source {
            Source::FEps => f_eps(norm_sq, self.params.as_ref().expect("checked")),
            Source::Constant(c) => *c,
            Source::Zero => 0.0,
            Source::Custom(f) => f(norm_sq),
        }
    }

    /// Nodal values of the boundary data, `NaN` at exterior nodes.
    pub fn boundary_extension(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|p| match self.grid.class(p) {
                NodeClass::Exterior => f64::NAN,
                _ => self.boundary_value(&self.grid.rho(p)),
            })
            .collect()
    }
}

/// Converged (or sampled) data at one unknown node.
#[derive(Clone, Debug)]
pub struct NodeState {
    pub grad: Vec<f64>,
    /// Entries in an axis slot are not evaluated and stored as zero.
    pub hess: DMatrix<f64>,
    pub matrix: DMatrix<f64>,
    pub spectrum: Spectrum,
    pub residual: f64,
    /// `min_j S_j / max|λ|^j`.
    pub margin: f64,
}

/// Nodal values on a Reinhardt grid with per-node Hessian data.
#[derive(Clone, Debug)]
pub struct ReinhardtField {
    pub grid: ReinhardtGrid,
    pub k: usize,
    /// `NaN` at exterior nodes.
    pub values: Vec<f64>,
    /// `Some` exactly at interior and axis nodes.
    pub nodes: Vec<Option<NodeState>>,
    pub residual_norm: f64,
    pub cone_margin_min: f64,
    /// Nodes whose mixed derivatives use a fallback stencil.
    pub fallback_stencils: usize,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl ReinhardtField {
    /// Evaluates derivatives, spectra and residuals of given nodal values.
    /// Boundary entries of `values` are replaced by the Dirichlet data.
    pub fn from_values(problem: &ReinhardtProblem, values: Vec<f64>) -> Result<Self> {
        let disc = Discretization::new(problem)?;
        disc.field(values, 0, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn unknown_nodes(&self) -> impl Iterator<Item = (usize, &NodeState)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(p, s)| s.as_ref().map(|s| (p, s)))
    }
}

/// `A_jk = v_j δ_jk + sqrt(ρ_j ρ_k) v_jk` at node `p` from nodal values, with
/// its spectrum.
pub fn assemble_matrix(
    problem: &ReinhardtProblem,
    values: &[f64],
    p: usize,
) -> Result<(DMatrix<f64>, Spectrum)> {
    let grid = &problem.grid;
    if p >= grid.len() || !grid.class(p).is_unknown() {
        return Err(Error::Domain(format!(
            "node {p} is not an interior or axis node"
        )));
    }
    let boundary = |rho: &[f64]| problem.boundary_value(rho);
    let (st, _) = stencil::build(grid, p, &boundary)?;
    let a = eval_matrix(&st, values, grid.dim);
    let spec = symmetric_spectrum(&a)?;
    Ok((a, spec))
}

/// `S_k(λ) - f` at every interior and axis node of `values`, zero elsewhere.
pub fn residual_field(problem: &ReinhardtProblem, values: &[f64]) -> Result<Vec<f64>> {
    let field = ReinhardtField::from_values(problem, values.to_vec())?;
    Ok(field
        .nodes
        .iter()
        .map(|s| s.as_ref().map_or(0.0, |s| s.residual))
        .collect())
}

fn eval_matrix(st: &NodeStencil, values: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |j, k| st.matrix[j * n + k].eval(values))
}

fn symmetric_spectrum(a: &DMatrix<f64>) -> Result<Spectrum> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite reduced Hessian".into()));
    }
    Spectrum::new(a.clone().symmetric_eigenvalues().iter().copied().collect())
}

fn margin_of(lambda: &[f64], k: usize) -> f64 {
    let e = elementary_symmetric(lambda, k);
    let mag = lambda.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    (1..=k)
        .map(|j| e[j] / mag.powi(j as i32))
        .fold(f64::INFINITY, f64::min)
}

struct Discretization<'a> {
    problem: &'a ReinhardtProblem,
    stencils: Vec<NodeStencil>,
    fallback: usize,
    /// Flat node number to unknown position.
    position: Vec<Option<usize>>,
    source: Vec<f64>,
    bandwidth: usize,
}

struct NodeEval {
    residual: f64,
    scale: f64,
    admissible: bool,
    /// Bit `j - 1` is set when `S_j > 0` (for `j = k` also when `f <= 0`).
    positive: u32,
    derivative: DMatrix<f64>,
}

impl<'a> Discretization<'a> {
    fn new(problem: &'a ReinhardtProblem) -> Result<Self> {
        let grid = &problem.grid;
        let boundary = |rho: &[f64]| problem.boundary_value(rho);
        let unknown: Vec<usize> = (0..grid.len()).filter(|&p| grid.class(p).is_unknown()).collect();
        let built: Vec<(NodeStencil, Vec<MixedKind>)> = unknown
            .par_iter()
            .map(|&p| stencil::build(grid, p, &boundary))
            .collect::<Result<_>>()?;
        let mut position = vec![None; grid.len()];
        for (i, &p) in unknown.iter().enumerate() {
            position[p] = Some(i);
        }
        let mut bandwidth = 0;
        let mut fallback = 0;
        let mut stencils = Vec::with_capacity(built.len());
        for (i, (st, kinds)) in built.into_iter().enumerate() {
            if kinds.iter().any(|&k| k != MixedKind::AntiDiagonal) {
                fallback += 1;
            }
            for lin in &st.matrix {
                for &(q, _) in &lin.terms {
                    if let Some(c) = position[q] {
                        bandwidth = bandwidth.max(c.abs_diff(i));
                    }
                }
            }
            stencils.push(st);
        }
        let source = stencils
            .iter()
            .map(|st| problem.source_at(st.rho.iter().sum()))
            .collect();
        Ok(Self {
            problem,
            stencils,
            fallback,
            position,
            source,
            bandwidth,
        })
    }

    fn eval_node(&self, i: usize, values: &[f64]) -> NodeEval {
        let st = &self.stencils[i];
        let k = self.problem.k;
        let a = eval_matrix(st, values, self.problem.dim());
        let (derivative, lambda) = hessian_derivative_real(&a, k);
        let e = elementary_symmetric(&lambda, k);
        let f = self.source[i];
        let mag = lambda.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let positive = (1..=k)
            .filter(|&j| e[j] > 0.0 || j == k && f <= 0.0)
            .fold(0u32, |m, j| m | 1 << (j - 1));
        let admissible = positive == (1u32 << k) - 1;
        NodeEval {
            residual: e[k] - f,
            scale: (mag.powi(k as i32) + f.abs()).max(f64::MIN_POSITIVE),
            admissible,
            positive,
            derivative,
        }
    }

    fn eval_all(&self, values: &[f64]) -> Vec<NodeEval> {
        (0..self.stencils.len())
            .into_par_iter()
            .map(|i| self.eval_node(i, values))
            .collect()
    }

    /// Nonzeros `(column, value)` of the Jacobian row of unknown `i`.
    fn jacobian_row(&self, i: usize, eval: &NodeEval) -> Vec<(usize, f64)> {
        let n = self.problem.dim();
        let st = &self.stencils[i];
        let mut row: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            for k in j..n {
                let w = if j == k {
                    eval.derivative[(j, j)]
                } else {
                    2.0 * eval.derivative[(j, k)]
                };
                if w == 0.0 {
                    continue;
                }
                for &(q, c) in &st.matrix[j * n + k].terms {
                    if let Some(col) = self.position[q] {
                        row.push((col, w * c));
                    }
                }
            }
        }
        row.sort_by_key(|e| e.0);
        row.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        row
    }

    fn initial_values(&self) -> Vec<f64> {
        self.problem.boundary_extension()
    }

    fn pin(&self, values: &mut [f64]) {
        let grid = &self.problem.grid;
        for (p, v) in values.iter_mut().enumerate() {
            match grid.class(p) {
                NodeClass::InnerBoundary | NodeClass::OuterBoundary => {
                    *v = self.problem.boundary_value(&grid.rho(p));
                }
                NodeClass::Exterior => *v = f64::NAN,
                _ => {}
            }
        }
    }

    fn field(&self, mut values: Vec<f64>, iterations: usize, history: Vec<f64>) -> Result<ReinhardtField> {
        let grid = &self.problem.grid;
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "{} values for {} grid nodes",
                values.len(),
                grid.len()
            )));
        }
        self.pin(&mut values);
        let n = grid.dim;
        let k = self.problem.k;
        let states: Vec<NodeState> = (0..self.stencils.len())
            .into_par_iter()
            .map(|i| {
                let st = &self.stencils[i];
                let matrix = eval_matrix(st, &values, n);
                let spectrum = symmetric_spectrum(&matrix)?;
                let e = elementary_symmetric(spectrum.values(), k);
                Ok(NodeState {
                    grad: st.grad.iter().map(|l| l.eval(&values)).collect(),
                    hess: DMatrix::from_fn(n, n, |a, b| st.hess[a * n + b].eval(&values)),
                    residual: e[k] - self.source[i],
                    margin: margin_of(spectrum.values(), k),
                    matrix,
                    spectrum,
                })
            })
            .collect::<Result<_>>()?;
        let mut nodes = vec![None; grid.len()];
        let mut residual_norm = 0.0_f64;
        let mut cone_margin_min = f64::INFINITY;
        for (st, state) in self.stencils.iter().zip(states) {
            residual_norm = residual_norm.max(state.residual.abs());
            cone_margin_min = cone_margin_min.min(state.margin);
            nodes[st.node] = Some(state);
        }
        Ok(ReinhardtField {
            grid: grid.clone(),
            k,
            values,
            nodes,
            residual_norm,
            cone_margin_min,
            fallback_stencils: self.fallback,
            iterations,
            history,
        })
    }
}

/// How the grid Newton iteration is started.
#[derive(Clone, Debug)]
pub enum GridGuess {
    /// The Dirichlet data evaluated at every node (the subsolution for the
    /// exterior problem).
    BoundaryExtension,
    Values(Vec<f64>),
}

/// Damped Newton on the grid, started from the subsolution.
///
/// For `k >= 2` the iteration starts from the solution of the linear problem
/// `S_1 = n (f / C(n,k))^{1/k}` with the same boundary data. That start lies in
/// `Γ_1` at every node, and the line search never lets a positive `S_j` turn
/// nonpositive, which keeps the iteration off the branches with `S_1 < 0`.
pub fn solve_reinhardt(problem: &ReinhardtProblem, opts: &NewtonOptions) -> Result<ReinhardtField> {
    if problem.k == 1 {
        return solve_reinhardt_from(problem, opts, &GridGuess::BoundaryExtension);
    }
    let linear = problem.laplacian_companion();
    let start = solve_reinhardt_from(&linear, opts, &GridGuess::BoundaryExtension)?;
    solve_reinhardt_from(problem, opts, &GridGuess::Values(start.values))
}

impl ReinhardtProblem {
    /// The `k = 1` problem whose source matches `S_1` of the matrix `c I` with
    /// `S_k(c I) = f`.
    pub fn laplacian_companion(&self) -> Self {
        let n = self.dim();
        let k = self.k;
        let scale = binomial(n, k);
        let original = self.clone();
        let source = Source::Custom(Arc::new(move |norm_sq: f64| {
            n as f64 * (original.source_at(norm_sq).max(0.0) / scale).powf(1.0 / k as f64)
        }));
        Self {
            k: 1,
            source,
            ..self.clone()
        }
    }
}

pub fn solve_reinhardt_from(
    problem: &ReinhardtProblem,
    opts: &NewtonOptions,
    guess: &GridGuess,
) -> Result<ReinhardtField> {
    let disc = Discretization::new(problem)?;
    let m = disc.stencils.len();
    if m == 0 {
        return Err(Error::Domain("grid has no interior nodes".into()));
    }
    let mut values = match guess {
        GridGuess::BoundaryExtension => disc.initial_values(),
        GridGuess::Values(v) => {
            if v.len() != problem.grid.len() {
                return Err(Error::Domain(format!(
                    "initial guess has {} values for {} nodes",
                    v.len(),
                    problem.grid.len()
                )));
            }
            v.clone()
        }
    };
    disc.pin(&mut values);
    let unknown: Vec<usize> = disc.stencils.iter().map(|s| s.node).collect();

    let merit = |evals: &[NodeEval], weights: &[f64]| -> (f64, f64) {
        let mut sum = 0.0;
        let mut worst = 0.0_f64;
        for (e, w) in evals.iter().zip(weights) {
            let r = e.residual / w;
            sum += r * r;
            worst = worst.max(r.abs());
        }
        (sum, worst)
    };

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut noise = 0.0_f64;
    let mut evals = disc.eval_all(&values);
    for iter in 0..opts.max_iterations {
        iterations = iter;
        let weights: Vec<f64> = evals.iter().map(|e| e.scale).collect();
        let (m0, worst) = merit(&evals, &weights);
        history.push(worst);
        let rows: Vec<Vec<(usize, f64)>> = (0..m)
            .into_par_iter()
            .map(|i| disc.jacobian_row(i, &evals[i]))
            .collect();
        // residual change caused by rounding the nodal values
        let spreads: Vec<f64> = rows
            .iter()
            .map(|row| {
                f64::EPSILON * row.iter().map(|&(c, v)| (v * values[unknown[c]]).abs()).sum::<f64>()
            })
            .collect();
        noise = spreads.iter().copied().fold(0.0, f64::max);
        let floor = spreads
            .iter()
            .zip(&weights)
            .map(|(s, w)| s / w)
            .fold(0.0_f64, f64::max);
        if worst <= opts.rel_tol.max(16.0 * floor) {
            converged = true;
            break;
        }
        let mut band = BandMatrix::zeros(m, disc.bandwidth, disc.bandwidth);
        let mut step: Vec<f64> = evals.iter().map(|e| -e.residual).collect();
        for (i, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                band.add(i, c, v);
            }
        }
        band.solve(&mut step)?;

        let positive_now: Vec<u32> = evals.iter().map(|e| e.positive).collect();
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= opts.min_step {
            let mut trial = values.clone();
            for (i, &p) in unknown.iter().enumerate() {
                trial[p] += alpha * step[i];
            }
            let trial_evals = disc.eval_all(&trial);
            let ok_cone = trial_evals
                .iter()
                .zip(&positive_now)
                .all(|(e, &before)| e.positive & before == before);
            if ok_cone {
                let (m1, _) = merit(&trial_evals, &weights);
                if m1 <= (1.0 - 2.0 * opts.armijo * alpha) * m0 {
                    values = trial;
                    evals = trial_evals;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            if worst <= 1e3 * opts.rel_tol.max(1e-16) {
                converged = true;
                break;
            }
            return Err(Error::Stagnation {
                iteration: iter,
                residual: worst,
            });
        }
        let vmax = unknown
            .iter()
            .fold(0.0_f64, |acc, &p| acc.max(values[p].abs()))
            .max(1.0);
        let smax = step.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if alpha == 1.0 && smax <= opts.step_tol * vmax {
            iterations = iter + 1;
            converged = true;
            break;
        }
    }

    let outside = disc
        .eval_all(&values)
        .iter()
        .position(|e| !e.admissible);
    let field = disc.field(values, iterations, history)?;
    if let Some(i) = outside {
        let state = field.nodes[disc.stencils[i].node].as_ref().expect("unknown node");
        return Err(Error::Cone {
            k: problem.k,
            margins: elementary_symmetric(state.spectrum.values(), problem.k)[1..].to_vec(),
        });
    }
    let fmax = disc.source.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if !converged || field.residual_norm > (opts.abs_tol * (1.0 + fmax)).max(16.0 * noise) {
        return Err(Error::NonConvergence {
            iterations,
            last: field.residual_norm,
            history: field.history,
        });
    }
    Ok(field)
}

/// Regularity of a field across the coordinate hyperplanes `ρ_j = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisReport {
    /// Axis nodes inspected.
    pub nodes_checked: usize,
    /// `max sqrt(ρ_j) |v_jk|` over nodes one step off an axis `ρ_j = 0`.
    pub offaxis_coupling: f64,
    /// Largest change of the sorted spectrum between an axis node and its
    /// neighbour off the axis.
    pub spectral_jump: f64,
    /// `spectral_jump / h`.
    pub jump_modulus: f64,
    pub spacing: f64,
}

pub fn axis_limit_audit(field: &ReinhardtField) -> AxisReport {
    let grid = &field.grid;
    let n = grid.dim;
    let mut checked = 0;
    let mut coupling = 0.0_f64;
    let mut jump = 0.0_f64;
    for (p, state) in field.unknown_nodes() {
        let idx = grid.index(p);
        for j in 0..n {
            if idx[j] != 0 {
                continue;
            }
            let mut off = idx.clone();
            off[j] = 1;
            let q = grid.flat(&off);
            let Some(next) = &field.nodes[q] else {
                continue;
            };
            checked += 1;
            let root = grid.spacing.sqrt();
            for k in 0..n {
                if k != j {
                    coupling = coupling.max(root * next.hess[(j, k)].abs());
                }
            }
            let d = state
                .spectrum
                .values()
                .iter()
                .zip(next.spectrum.values())
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            jump = jump.max(d);
        }
    }
    AxisReport {
        nodes_checked: checked,
        offaxis_coupling: coupling,
        spectral_jump: jump,
        jump_modulus: jump / grid.spacing,
        spacing: grid.spacing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::{green_jet, w_eps};
    use crate::radial::radial_eigs;
    use approx::assert_relative_eq;

    fn ball_grid(n: usize, t: f64, r: f64, per_axis: usize) -> ReinhardtGrid {
        ReinhardtGrid::new(InnerDomain::ball(n, t), r, per_axis).unwrap()
    }

    fn sampled(problem: &ReinhardtProblem, v: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..problem.grid.len())
            .map(|p| match problem.grid.class(p) {
                NodeClass::Exterior => f64::NAN,
                _ => v(&problem.grid.rho(p)),
            })
            .collect()
    }

    #[test]
    fn norm_squared_gives_identity() {
        let grid = ball_grid(2, 0.5, 2.0, 9);
        let pr = ReinhardtProblem::with_boundary(grid, 1, Source::Zero, None, |r| r.iter().sum())
            .unwrap();
        let v = pr.boundary_extension();
        for p in 0..pr.grid.len() {
            if pr.grid.class(p).is_unknown() {
                let (a, _) = assemble_matrix(&pr, &v, p).unwrap();
                assert!((a - DMatrix::identity(2, 2)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn product_field_at_unit_point() {
        // v = ρ1 ρ2 at ρ = (1, 1): v1 = v2 = v12 = 1
        let grid = ball_grid(2, 0.5, 2.0, 9);
        let pr = ReinhardtProblem::with_boundary(grid, 1, Source::Zero, None, |r| r[0] * r[1])
            .unwrap();
        let v = pr.boundary_extension();
        let p = pr.grid.flat(&[2, 2]);
        assert_eq!(pr.grid.rho(p), vec![1.0, 1.0]);
        let (a, spec) = assemble_matrix(&pr, &v, p).unwrap();
        assert!((a - DMatrix::from_element(2, 2, 1.0)).amax() < 1e-12);
        assert_relative_eq!(spec.values()[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(spec.values()[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn radial_field_spectrum_matches_radial_eigs() {
        // a quadratic profile is differentiated exactly by the stencils
        let g = |s: f64| 0.3 * s * s - 0.7 * s;
        let grid = ball_grid(3, 0.5, 2.0, 17);
        let pr = ReinhardtProblem::with_boundary(grid, 2, Source::Zero, None, move |r| {
            g(r.iter().sum())
        })
        .unwrap();
        let v = pr.boundary_extension();
        for p in 0..pr.grid.len() {
            if !pr.grid.class(p).is_unknown() {
                continue;
            }
            let s: f64 = pr.grid.rho(p).iter().sum();
            let (_, spec) = assemble_matrix(&pr, &v, p).unwrap();
            let (g1, g2) = (0.6 * s - 0.7, 0.6);
            let want = radial_eigs(g1, g1 + s * g2, 3);
            for (a, b) in spec.values().iter().zip(want.values()) {
                assert!((a - b).abs() < 1e-10, "node {p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn non_unknown_nodes_rejected() {
        let grid = ball_grid(2, 0.5, 2.0, 9);
        let pr = ReinhardtProblem::with_boundary(grid, 1, Source::Zero, None, |r| r[0]).unwrap();
        let v = pr.boundary_extension();
        let outer = pr.grid.flat(&[8, 0]);
        assert!(assemble_matrix(&pr, &v, outer).is_err());
    }

    #[test]
    fn green_residual_is_second_order() {
        let mut errs = Vec::new();
        for per_axis in [33, 65] {
            let grid = ball_grid(2, 0.75_f64.sqrt(), 2.0, per_axis);
            let pr = ReinhardtProblem::with_boundary(grid, 1, Source::Zero, None, |r| {
                green_jet(r.iter().sum(), -1.0).value
            })
            .unwrap();
            let v = pr.boundary_extension();
            let res = residual_field(&pr, &v).unwrap();
            // a fixed region, so the worst node does not drift toward the hole
            let worst = (0..res.len())
                .filter(|&p| pr.grid.rho(p).iter().sum::<f64>() >= 1.0)
                .fold(0.0_f64, |m, p| m.max(res[p].abs()));
            errs.push(worst);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "errors {errs:?}");
    }

    #[test]
    fn w_eps_restriction_residual_converges() {
        let params = ApproximationParams::new(2, 1, 0.75_f64.sqrt(), 0.5, 0.03, 0.02).unwrap();
        let mut errs = Vec::new();
        for per_axis in [33, 65, 129] {
            let pr = ReinhardtProblem::exterior(&params, InnerDomain::ball(2, params.t), 2.0, per_axis)
                .unwrap();
            let v = sampled(&pr, |r| w_eps(r.iter().sum(), &params));
            let field = ReinhardtField::from_values(&pr, v).unwrap();
            // boundary entries were pinned to the subsolution; compare away from the hole
            let worst = field
                .unknown_nodes()
                .filter(|(p, _)| pr.grid.rho(*p).iter().sum::<f64>() > 1.7)
                .fold(0.0_f64, |m, (_, s)| m.max(s.residual.abs()));
            errs.push(worst);
        }
        assert!((errs[0] / errs[1]).log2() > 1.8, "{errs:?}");
        assert!((errs[1] / errs[2]).log2() > 1.8, "{errs:?}");
    }

    #[test]
    fn identity_field_passes_axis_audit() {
        let grid = ball_grid(2, 0.5, 2.0, 17);
        let pr = ReinhardtProblem::with_boundary(grid, 1, Source::Constant(2.0), None, |r| {
            r.iter().sum()
        })
        .unwrap();
        let field = ReinhardtField::from_values(&pr, pr.boundary_extension()).unwrap();
        let report = axis_limit_audit(&field);
        assert!(report.nodes_checked > 0);
        assert!(report.offaxis_coupling < 1e-12);
        assert!(report.spectral_jump < 1e-12);
        assert!(field.residual_norm < 1e-12);
    }
}
