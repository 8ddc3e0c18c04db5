//! Radially symmetric solutions `u = g(|z|^2)`.
//!
//! With `σ = |z|^2` and `x = log σ`, write `G(x) = g(e^x)`. The complex-Hessian
//! eigenvalues become `G_x/σ` (multiplicity `n-1`) and `G_xx/σ`, so
//! `σ^k (S_k - f) = C(n-1,k) G_x^k + C(n-1,k-1) G_x^{k-1} G_xx - σ^k f`.
//! The unknowns live on a grid uniform in `x`, discretized with three-point
//! centered differences, and Newton uses the exact tridiagonal Jacobian.

mod limit;

pub use limit::{
    extrapolate_in_r, limit_sequence, ordering_row, ring_eps_sequence, CauchyRow, LimitReport,
    LimitStudy, MonotonicityRow,
};

use std::fmt;
use std::sync::Arc;

use crate::barriers::{
    assemble_subsolution, f_eps, ring_subsolution_jet, w_eps, ApproximationParams, RadialJet,
};
use crate::error::{param, Error, Result};
use crate::geometry::{InnerDomain, RadialGrid};
use crate::linalg::BandMatrix;
use crate::symmfunc::{binomial, elementary_symmetric, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Truncated exterior problem with `u = -1` on the hole and `u = w^ε` at `R`.
    Exterior,
    /// Annulus with constant source, `u = 0` inside and `u = 1` outside.
    Ring,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Exterior => "exterior",
            Mode::Ring => "ring",
        }
    }
}

/// Right-hand side of `S_k(∂∂̄u) = f(|z|^2)`.
#[derive(Clone)]
pub enum Source {
    FEps,
    Constant(f64),
    Zero,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::FEps => write!(f, "FEps"),
            Source::Constant(c) => write!(f, "Constant({c})"),
            Source::Zero => write!(f, "Zero"),
            Source::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Source {
    pub fn label(&self) -> String {
        match self {
            Source::FEps => "f_eps".into(),
            Source::Constant(c) => format!("constant:{c}"),
            Source::Zero => "zero".into(),
            Source::Custom(_) => "custom".into(),
        }
    }
}

/// One Dirichlet problem on the annulus `inner_radius < |z| < outer_radius`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub n: usize,
    pub k: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub inner_bc: f64,
    pub outer_bc: f64,
    pub mode: Mode,
    pub source: Source,
    /// Required for the exterior mode; supplies `ε` and the subsolution.
    pub params: Option<ApproximationParams>,
}

impl ProblemSpec {
    /// Truncated exterior problem for a ball-shaped hole of radius `t`.
    pub fn exterior(params: &ApproximationParams, outer_radius: f64) -> Result<Self> {
        params.validate()?;
        let spec = Self {
            n: params.n,
            k: params.k,
            inner_radius: params.t,
            outer_radius,
            inner_bc: -1.0,
            outer_bc: w_eps(outer_radius * outer_radius, params),
            mode: Mode::Exterior,
            source: Source::FEps,
            params: Some(params.clone()),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Ring problem `S_k = source` with `u = 0` at `inner_radius`, `u = 1` at
    /// `outer_radius`.
    pub fn ring(n: usize, k: usize, inner_radius: f64, outer_radius: f64, source: f64) -> Result<Self> {
        let spec = Self {
            n,
            k,
            inner_radius,
            outer_radius,
            inner_bc: 0.0,
            outer_bc: 1.0,
            mode: Mode::Ring,
            source: Source::Constant(source),
            params: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.k && self.k < self.n) {
            return Err(param("k", self.k as f64, format!("need 1 <= k < n = {}", self.n)));
        }
        if !(self.inner_radius > 0.0 && self.outer_radius > self.inner_radius)
            || !self.outer_radius.is_finite()
        {
            return Err(param(
                "R",
                self.outer_radius,
                format!("must exceed the inner radius {}", self.inner_radius),
            ));
        }
        if !(self.inner_bc < self.outer_bc) {
            return Err(param(
                "outer_bc",
                self.outer_bc,
                format!("must exceed the inner value {}", self.inner_bc),
            ));
        }
        if self.mode == Mode::Exterior {
            let p = self
                .params
                .as_ref()
                .ok_or_else(|| Error::Domain("exterior mode needs approximation parameters".into()))?;
            if !(self.outer_radius > 1.0 + p.s) {
                return Err(param(
                    "R",
                    self.outer_radius,
                    format!("must exceed 1 + s = {}", 1.0 + p.s),
                ));
            }
        }
        if let Source::Constant(c) = self.source {
            if !(c >= 0.0) {
                return Err(param("source", c, "must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn eps(&self) -> Option<f64> {
        match (&self.source, &self.params) {
            (Source::Constant(c), _) => Some(*c),
            (_, Some(p)) => Some(p.eps),
            _ => None,
        }
    }

    pub fn source_at(&self, norm_sq: f64) -> f64 {
        match &self.source {
            Source::FEps => f_eps(
                norm_sq,
                self.params.as_ref().expect("validated: f_eps needs parameters"),
            ),
            Source::Constant(c) => *c,
            Source::Zero => 0.0,
            Source::Custom(f) => f(norm_sq),
        }
    }

    pub fn inner_sq(&self) -> f64 {
        self.inner_radius * self.inner_radius
    }

    pub fn outer_sq(&self) -> f64 {
        self.outer_radius * self.outer_radius
    }

    /// Grid with `nodes` points between the two boundary spheres.
    pub fn grid(&self, nodes: usize) -> Result<RadialGrid> {
        RadialGrid::geometric(self.inner_sq(), self.outer_sq(), nodes)
    }

    fn check_grid(&self, grid: &RadialGrid) -> Result<()> {
        let nodes = grid.nodes();
        let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
        let tol = 1e-12 * self.outer_sq();
        if (lo - self.inner_sq()).abs() > tol || (hi - self.outer_sq()).abs() > tol {
            return Err(Error::Domain(format!(
                "grid spans [{lo}, {hi}] but the problem spans [{}, {}]",
                self.inner_sq(),
                self.outer_sq()
            )));
        }
        Ok(())
    }
}

/// Spectrum of the complex Hessian of `g(|z|^2)`: `g'` repeated `n-1` times
/// and `g' + σ g''`.
pub fn radial_eigs(g1: f64, g1_plus_sg2: f64, n: usize) -> Spectrum {
    let mut v = vec![g1; n - 1];
    v.push(g1_plus_sg2);
    Spectrum::new(v).expect("finite radial eigenvalues")
}

/// Fixed metadata carried by a solution and echoed into exports.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionMeta {
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub eps0: f64,
    pub t: f64,
    pub s: f64,
    pub outer_radius: f64,
    pub mode: Mode,
    pub source: String,
}

/// A radial profile on a grid, with derivatives in `σ = |z|^2`.
#[derive(Clone, Debug)]
pub struct RadialSolution {
    pub meta: SolutionMeta,
    pub grid: Vec<f64>,
    pub log_spacing: f64,
    pub g: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    /// `S_k - f` at each node; zero on the two boundary nodes.
    pub residual: Vec<f64>,
    /// `min_j S_j / max|λ|^j` at each node.
    pub margin: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub residual_norm: f64,
    pub cone_margin_min: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl RadialSolution {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Radii `|z|` of the nodes.
    pub fn radii(&self) -> Vec<f64> {
        self.grid.iter().map(|s| s.sqrt()).collect()
    }

    /// Samples an analytic profile, keeping its exact derivatives.
    pub fn from_profile(
        spec: &ProblemSpec,
        grid: &RadialGrid,
        profile: impl Fn(f64) -> RadialJet,
    ) -> Result<Self> {
        spec.check_grid(grid)?;
        let jets: Vec<RadialJet> = grid.nodes().iter().map(|&s| profile(s)).collect();
        let mut sol = Self::empty(spec, grid);
        sol.g = jets.iter().map(|j| j.value).collect();
        sol.g1 = jets.iter().map(|j| j.d1).collect();
        sol.g2 = jets.iter().map(|j| j.d2).collect();
        sol.fill_diagnostics(spec, true);
        Ok(sol)
    }

    fn empty(spec: &ProblemSpec, grid: &RadialGrid) -> Self {
        let p = spec.params.as_ref();
        Self {
            meta: SolutionMeta {
                n: spec.n,
                k: spec.k,
                eps: spec.eps().unwrap_or(0.0),
                eps0: p.map_or(0.0, |p| p.eps0),
                t: spec.inner_radius,
                s: p.map_or(0.0, |p| p.s),
                outer_radius: spec.outer_radius,
                mode: spec.mode,
                source: spec.source.label(),
            },
            grid: grid.nodes().to_vec(),
            log_spacing: grid.log_spacing(),
            g: Vec::new(),
            g1: Vec::new(),
            g2: Vec::new(),
            residual: Vec::new(),
            margin: Vec::new(),
            lambda_min: Vec::new(),
            residual_norm: 0.0,
            cone_margin_min: 0.0,
            iterations: 0,
            history: Vec::new(),
        }
    }

    /// Recomputes residual, spectra and margins from `g1`, `g2`.
    fn fill_diagnostics(&mut self, spec: &ProblemSpec, include_boundary: bool) {
        let (n, k) = (spec.n, spec.k);
        let len = self.grid.len();
        self.residual = vec![0.0; len];
        self.margin = vec![0.0; len];
        self.lambda_min = vec![0.0; len];
        for i in 0..len {
            let s = self.grid[i];
            let (la, lb) = (self.g1[i], self.g1[i] + s * self.g2[i]);
            let mut lambda = vec![la; n - 1];
            lambda.push(lb);
            let e = elementary_symmetric(&lambda, k);
            let mag = la.abs().max(lb.abs()).max(f64::MIN_POSITIVE);
            self.margin[i] = (1..=k)
                .map(|j| e[j] / mag.powi(j as i32))
                .fold(f64::INFINITY, f64::min);
            self.lambda_min[i] = la.min(lb);
            if include_boundary || (i > 0 && i + 1 < len) {
                self.residual[i] = e[k] - spec.source_at(s);
            }
        }
        self.residual_norm = self.residual.iter().fold(0.0, |m, r| m.max(r.abs()));
        self.cone_margin_min = self.margin[1..len - 1]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
    }

    /// Linear interpolation of `g` in `log σ`.
    pub fn interpolate(&self, norm_sq: f64) -> Option<f64> {
        let nodes = &self.grid;
        if norm_sq < nodes[0] || norm_sq > nodes[nodes.len() - 1] {
            return None;
        }
        let x = norm_sq.ln();
        let pos = nodes.partition_point(|&s| s < norm_sq);
        if pos == 0 {
            return Some(self.g[0]);
        }
        let (x0, x1) = (nodes[pos - 1].ln(), nodes[pos].ln());
        let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        Some(self.g[pos - 1] * (1.0 - w) + self.g[pos] * w)
    }
}

/// Per-node residual of a sampled profile together with cone violations.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub residual: Vec<f64>,
    /// Nodes whose radial spectrum is outside the closed cone.
    pub flagged: Vec<usize>,
}

/// `S_k(λ(g)) - f` at every node, from the solution's derivative fields.
pub fn radial_residual(sol: &RadialSolution, spec: &ProblemSpec) -> Result<ResidualReport> {
    if sol.grid.len() < 3 {
        return Err(Error::Domain("solution has fewer than three nodes".into()));
    }
    let (n, k) = (spec.n, spec.k);
    let mut residual = Vec::with_capacity(sol.len());
    let mut flagged = Vec::new();
    for i in 0..sol.len() {
        let s = sol.grid[i];
        let (la, lb) = (sol.g1[i], sol.g1[i] + s * sol.g2[i]);
        let mut lambda = vec![la; n - 1];
        lambda.push(lb);
        let e = elementary_symmetric(&lambda, k);
        let mag = la.abs().max(lb.abs());
        if e[1..].iter().enumerate().any(|(j, &m)| m < -1e-12 * mag.powi(j as i32 + 1)) {
            flagged.push(i);
        }
        residual.push(e[k] - spec.source_at(s));
    }
    Ok(ResidualReport { residual, flagged })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Stop once every node satisfies `|F_i| <= rel_tol * scale_i`.
    pub rel_tol: f64,
    /// Final acceptance: `max|S_k - f| <= abs_tol * (1 + max|f|)`, or the
    /// rounding level of the discrete operator when that is larger.
    pub abs_tol: f64,
    /// Stop when a full step changes the solution by less than this,
    /// relative to its sup norm.
    pub step_tol: f64,
    pub armijo: f64,
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_tol: 1e-13,
            abs_tol: 1e-10,
            step_tol: 1e-14,
            armijo: 1e-4,
            min_step: 1e-10,
        }
    }
}

/// How the Newton iteration is started.
#[derive(Clone, Debug)]
pub enum InitialGuess {
    /// The glued subsolution (exterior) or the quadratic ring subsolution.
    Subsolution,
    /// Affine in `σ` between the two boundary values.
    Affine,
    /// The trapezoid-rule integral of the equation, see [`quadrature_profile`].
    Quadrature,
    /// Given nodal values; boundary entries are overwritten.
    Values(Vec<f64>),
}

struct Discretization<'a> {
    spec: &'a ProblemSpec,
    sigma: Vec<f64>,
    sigma_k: Vec<f64>,
    source: Vec<f64>,
    h: f64,
    c_top: f64,
    c_low: f64,
}

impl<'a> Discretization<'a> {
    fn new(spec: &'a ProblemSpec, grid: &RadialGrid) -> Self {
        let sigma = grid.nodes().to_vec();
        let k = spec.k as i32;
        Self {
            sigma_k: sigma.iter().map(|s| s.powi(k)).collect(),
            source: sigma.iter().map(|&s| spec.source_at(s)).collect(),
            sigma,
            spec,
            h: grid.log_spacing(),
            c_top: binomial(spec.n - 1, spec.k),
            c_low: binomial(spec.n - 1, spec.k - 1),
        }
    }

    fn len(&self) -> usize {
        self.sigma.len()
    }

    fn derivs(&self, g: &[f64], i: usize) -> (f64, f64) {
        let h = self.h;
        (
            (g[i + 1] - g[i - 1]) / (2.0 * h),
            (g[i + 1] - 2.0 * g[i] + g[i - 1]) / (h * h),
        )
    }

    /// `(F_i, scale_i)`: the scaled residual and the size of its terms.
    fn residual(&self, gx: f64, gxx: f64, i: usize) -> (f64, f64) {
        let k = self.spec.k as i32;
        let top = self.c_top * gx.powi(k);
        let low = self.c_low * gx.powi(k - 1) * gxx;
        let rhs = self.sigma_k[i] * self.source[i];
        (top + low - rhs, top.abs() + low.abs() + rhs.abs())
    }

    fn partials(&self, gx: f64, gxx: f64) -> (f64, f64) {
        let k = self.spec.k as i32;
        let d_gx = if k == 1 {
            self.c_top
        } else {
            k as f64 * self.c_top * gx.powi(k - 1)
                + (k - 1) as f64 * self.c_low * gx.powi(k - 2) * gxx
        };
        (d_gx, self.c_low * gx.powi(k - 1))
    }

    /// Whether the scaled spectrum `(G_x, G_xx)` is admissible at node `i`.
    fn admissible(&self, gx: f64, gxx: f64, i: usize) -> bool {
        let n = self.spec.n;
        let k = self.spec.k;
        let mut lambda = vec![gx; n - 1];
        lambda.push(gxx);
        let e = elementary_symmetric(&lambda, k);
        let strict_top = self.source[i] > 0.0;
        (1..=k).all(|j| if j < k || strict_top { e[j] > 0.0 } else { true })
    }

    fn all_admissible(&self, g: &[f64]) -> Vec<bool> {
        (1..self.len() - 1)
            .map(|i| {
                let (gx, gxx) = self.derivs(g, i);
                self.admissible(gx, gxx, i)
            })
            .collect()
    }
}

fn initial_values(spec: &ProblemSpec, grid: &RadialGrid, guess: &InitialGuess) -> Result<Vec<f64>> {
    let nodes = grid.nodes();
    let (lo, hi) = (spec.inner_sq(), spec.outer_sq());
    let affine = |s: f64| spec.inner_bc + (spec.outer_bc - spec.inner_bc) * (s - lo) / (hi - lo);
    let mut g: Vec<f64> = match guess {
        InitialGuess::Affine => nodes.iter().map(|&s| affine(s)).collect(),
        InitialGuess::Quadrature => quadrature_profile(spec, nodes)?,
        InitialGuess::Values(v) => {
            if v.len() != nodes.len() {
                return Err(Error::Domain(format!(
                    "initial guess has {} values for {} nodes",
                    v.len(),
                    nodes.len()
                )));
            }
            v.clone()
        }
        InitialGuess::Subsolution => match spec.mode {
            Mode::Exterior => {
                let p = spec.params.as_ref().expect("validated");
                let field = assemble_subsolution(p, &InnerDomain::ball(p.n, p.t))?;
                nodes.iter().map(|&s| field.eval_radial(s).value).collect()
            }
            Mode::Ring => nodes
                .iter()
                .map(|&s| {
                    spec.inner_bc
                        + (spec.outer_bc - spec.inner_bc) * ring_subsolution_jet(s, lo, hi).value
                })
                .collect(),
        },
    };
    let last = g.len() - 1;
    g[0] = spec.inner_bc;
    g[last] = spec.outer_bc;
    Ok(g)
}

/// Radial profile solving the equation up to quadrature error.
///
/// In divergence form the radial equation reads
/// `(σ^n g'^k)' = k/C(n-1,k-1) σ^{n-1} f`, so `σ^n g'^k = c + F(σ)` with `F`
/// the running integral of the right side. Both integrals use the trapezoid
/// rule in `log σ` on `nodes`, and `c` is found by bisection so that the outer
/// boundary value is met.
pub fn quadrature_profile(spec: &ProblemSpec, nodes: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    let (n, k) = (spec.n, spec.k);
    let len = nodes.len();
    if len < 2 || nodes.windows(2).any(|w| !(w[1] > w[0] && w[0] > 0.0)) {
        return Err(Error::Domain("quadrature needs increasing positive nodes".into()));
    }
    let factor = k as f64 / binomial(n - 1, k - 1);
    let x: Vec<f64> = nodes.iter().map(|s| s.ln()).collect();
    let mut running = vec![0.0; len];
    let integrand = |s: f64| factor * s.powi(n as i32) * spec.source_at(s);
    for i in 1..len {
        let dx = x[i] - x[i - 1];
        running[i] = running[i - 1] + 0.5 * dx * (integrand(nodes[i - 1]) + integrand(nodes[i]));
    }
    let slope = |c: f64, i: usize| {
        let m = (c + running[i]) / nodes[i].powi(n as i32);
        if k == 1 {
            m
        } else {
            m.max(0.0).powf(1.0 / k as f64)
        }
    };
    let profile = |c: f64| {
        let mut g = vec![spec.inner_bc; len];
        for i in 1..len {
            let dx = x[i] - x[i - 1];
            g[i] = g[i - 1]
                + 0.5 * dx * (nodes[i - 1] * slope(c, i - 1) + nodes[i] * slope(c, i));
        }
        g
    };
    let target = spec.outer_bc;
    let end = |c: f64| profile(c)[len - 1];
    let mut lo = if k == 1 { -1.0 } else { 0.0 };
    if end(lo) > target {
        if k > 1 {
            return Err(Error::Domain(format!(
                "no admissible radial profile: the source alone overshoots the outer value {target}"
            )));
        }
        while end(lo) > target {
            lo *= 2.0;
        }
    }
    let mut hi = 1.0;
    while end(hi) < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Domain("quadrature bracket diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if end(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut g = profile(0.5 * (lo + hi));
    g[len - 1] = target;
    Ok(g)
}

/// Solves the radial problem with `nodes` grid points, starting from the
/// quadrature profile and falling back to the subsolution.
pub fn solve_radial(spec: &ProblemSpec, nodes: usize, opts: &NewtonOptions) -> Result<RadialSolution> {
    let grid = spec.grid(nodes)?;
    solve_radial_on(spec, &grid, opts, &InitialGuess::Quadrature)
        .or_else(|_| solve_radial_on(spec, &grid, opts, &InitialGuess::Subsolution))
}

/// Damped Newton on a given grid. Steps are halved until every node stays
/// admissible and the weighted residual decreases by the Armijo factor.
pub fn solve_radial_on(
    spec: &ProblemSpec,
    grid: &RadialGrid,
    opts: &NewtonOptions,
    guess: &InitialGuess,
) -> Result<RadialSolution> {
    spec.validate()?;
    spec.check_grid(grid)?;
    let disc = Discretization::new(spec, grid);
    let len = disc.len();
    let mut g = initial_values(spec, grid, guess)?;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    // rounding level of the unscaled residual `S_k - f` at the last iterate
    let mut noise = 0.0_f64;

    let merit = |g: &[f64], weights: &[f64]| -> (f64, f64) {
        let mut sum = 0.0;
        let mut worst = 0.0_f64;
        for i in 1..len - 1 {
            let (gx, gxx) = disc.derivs(g, i);
            let r = disc.residual(gx, gxx, i).0 / weights[i];
            sum += r * r;
            worst = worst.max(r.abs());
        }
        (sum, worst)
    };

    for iter in 0..opts.max_iterations {
        iterations = iter;
        let mut weights = vec![1.0; len];
        let mut band = BandMatrix::zeros(len - 2, 1, 1);
        let mut rhs = vec![0.0; len - 2];
        // residual change caused by rounding the nodal values
        let mut floor = 0.0_f64;
        noise = 0.0;
        for i in 1..len - 1 {
            let (gx, gxx) = disc.derivs(&g, i);
            let (f, scale) = disc.residual(gx, gxx, i);
            weights[i] = scale.max(f64::MIN_POSITIVE);
            let (dx, dxx) = disc.partials(gx, gxx);
            let h = disc.h;
            let row = i - 1;
            let lower = -dx / (2.0 * h) + dxx / (h * h);
            let upper = dx / (2.0 * h) + dxx / (h * h);
            let spread = lower.abs() * g[i - 1].abs()
                + 2.0 * (dxx / (h * h)).abs() * g[i].abs()
                + upper.abs() * g[i + 1].abs();
            floor = floor.max(f64::EPSILON * spread / weights[i]);
            noise = noise.max(f64::EPSILON * spread / disc.sigma_k[i]);
            band.add(row, row, -2.0 * dxx / (h * h));
            if row > 0 {
                band.add(row, row - 1, lower);
            }
            if row + 1 < len - 2 {
                band.add(row, row + 1, upper);
            }
            rhs[row] = -f;
        }
        let (m0, worst) = merit(&g, &weights);
        history.push(worst);
        if worst <= opts.rel_tol.max(16.0 * floor) {
            converged = true;
            break;
        }
        band.solve(&mut rhs)?;
        let step = rhs;
        let admissible_now = disc.all_admissible(&g);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= opts.min_step {
            let mut trial = g.clone();
            for i in 1..len - 1 {
                trial[i] += alpha * step[i - 1];
            }
            let ok_cone = disc
                .all_admissible(&trial)
                .iter()
                .zip(&admissible_now)
                .all(|(&now, &before)| now || !before);
            if ok_cone {
                let (m1, _) = merit(&trial, &weights);
                if m1 <= (1.0 - 2.0 * opts.armijo * alpha) * m0 {
                    g = trial;
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
        let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        let smax = step.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if alpha == 1.0 && smax <= opts.step_tol * gmax {
            iterations = iter + 1;
            converged = true;
            break;
        }
    }

    let mut sol = RadialSolution::empty(spec, grid);
    sol.g = g;
    let (g1, g2) = derivatives(&sol.g, &disc.sigma, disc.h);
    sol.g1 = g1;
    sol.g2 = g2;
    sol.fill_diagnostics(spec, false);
    sol.iterations = iterations;
    sol.history = history;
    let fmax = disc.source.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !converged || sol.residual_norm > (opts.abs_tol * (1.0 + fmax)).max(16.0 * noise) {
        return Err(Error::NonConvergence {
            iterations,
            last: sol.residual_norm,
            history: sol.history,
        });
    }
    Ok(sol)
}

/// `(g', g'')` in `σ` from nodal values on a log-uniform grid, using centered
/// differences inside and second-order one-sided formulas at the ends.
pub fn derivatives(g: &[f64], sigma: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let len = g.len();
    let mut gx = vec![0.0; len];
    let mut gxx = vec![0.0; len];
    for i in 1..len - 1 {
        gx[i] = (g[i + 1] - g[i - 1]) / (2.0 * h);
        gxx[i] = (g[i + 1] - 2.0 * g[i] + g[i - 1]) / (h * h);
    }
    let e = len - 1;
    gx[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h);
    gx[e] = (3.0 * g[e] - 4.0 * g[e - 1] + g[e - 2]) / (2.0 * h);
    gxx[0] = (2.0 * g[0] - 5.0 * g[1] + 4.0 * g[2] - g[3]) / (h * h);
    gxx[e] = (2.0 * g[e] - 5.0 * g[e - 1] + 4.0 * g[e - 2] - g[e - 3]) / (h * h);
    let g1: Vec<f64> = gx.iter().zip(sigma).map(|(d, s)| d / s).collect();
    let g2: Vec<f64> = gx
        .iter()
        .zip(&gxx)
        .zip(sigma)
        .map(|((d, dd), s)| (dd - d) / (s * s))
        .collect();
    (g1, g2)
}
