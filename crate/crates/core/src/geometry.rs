//! Domains and grids shared by the solvers.
//!
//! Lengths are normalized so that `B_t ⊂ Ω ⊂ B_1 ⊂ B_{1+s}`. The inner domain
//! is a Reinhardt ellipsoid `{Σ a_j |z_j|^2 < t^2}`; equal weights give the ball.

use nalgebra::DMatrix;

use crate::error::{param, Error, Result};

/// `(t, s) = (r0 / R0, S0 / R0 - 1)` for `B_{r0} ⊂ Ω ⊂ B_{R0} ⊂ B_{S0}`.
pub fn normalize_scaling(r0: f64, big_r0: f64, s0: f64) -> Result<(f64, f64)> {
    if !(r0 > 0.0 && r0 < big_r0 && big_r0 < s0) || !s0.is_finite() {
        return Err(Error::Domain(format!(
            "radii must satisfy 0 < r0 < R0 < S0, got ({r0}, {big_r0}, {s0})"
        )));
    }
    Ok((r0 / big_r0, s0 / big_r0 - 1.0))
}

/// The hole `Ω = {Σ a_j ρ_j < level}` with `ρ_j = |z_j|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerDomain {
    pub weights: Vec<f64>,
    pub level: f64,
}

impl InnerDomain {
    pub fn ball(n: usize, t: f64) -> Self {
        Self {
            weights: vec![1.0; n],
            level: t * t,
        }
    }

    pub fn ellipsoid(weights: Vec<f64>, t: f64) -> Result<Self> {
        if let Some(&w) = weights.iter().find(|&&w| !(w > 0.0) || !w.is_finite()) {
            return Err(param("weight", w, "weights must be positive"));
        }
        if !(t > 0.0) {
            return Err(param("t", t, "must be positive"));
        }
        let d = Self {
            weights,
            level: t * t,
        };
        if !(d.circumscribed_radius() < 1.0) {
            return Err(param(
                "t",
                t,
                format!(
                    "the hole must lie inside the unit ball; its outer radius is {}",
                    d.circumscribed_radius()
                ),
            ));
        }
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_ball(&self) -> bool {
        self.weights.iter().all(|&w| w == self.weights[0])
            && (self.weights[0] - 1.0).abs() < 1e-15
    }

    /// Largest `r` with `B_r ⊂ Ω`.
    pub fn inscribed_radius(&self) -> f64 {
        let amax = self.weights.iter().copied().fold(0.0, f64::max);
        (self.level / amax).sqrt()
    }

    /// Smallest `r` with `Ω ⊂ B_r`.
    pub fn circumscribed_radius(&self) -> f64 {
        let amin = self.weights.iter().copied().fold(f64::INFINITY, f64::min);
        (self.level / amin).sqrt()
    }

    /// `Σ a_j ρ_j - level`, negative inside the hole.
    pub fn defining(&self, rho: &[f64]) -> f64 {
        self.weights.iter().zip(rho).map(|(a, r)| a * r).sum::<f64>() - self.level
    }
}

/// Normalized exterior geometry truncated at `|z| = R`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledGeometry {
    pub t: f64,
    pub s: f64,
    pub outer_radius: f64,
    pub inner: InnerDomain,
}

impl ScaledGeometry {
    pub fn new(inner: InnerDomain, s: f64, outer_radius: f64) -> Result<Self> {
        let t = inner.level.sqrt();
        if !(t > 0.0 && t < 1.0) {
            return Err(param("t", t, "must lie in (0, 1)"));
        }
        if !(s > 0.0) {
            return Err(param("s", s, "must be positive"));
        }
        if !(outer_radius > 1.0 + s) || !outer_radius.is_finite() {
            return Err(param(
                "R",
                outer_radius,
                format!("must exceed 1 + s = {}", 1.0 + s),
            ));
        }
        Ok(Self {
            t,
            s,
            outer_radius,
            inner,
        })
    }

    /// `|z|^2 - (1+s)^2`, a plurisubharmonic defining function of `B_{1+s}`.
    pub fn collar_defining(&self, norm_sq: f64) -> f64 {
        norm_sq - (1.0 + self.s).powi(2)
    }
}

/// Nodes in `σ = |z|^2` spaced uniformly in `log σ`, so neighbouring nodes
/// have a fixed ratio and grids with the same spacing share nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    log_spacing: f64,
}

/// Minimum number of radial nodes accepted.
pub const MIN_RADIAL_NODES: usize = 16;

impl RadialGrid {
    pub fn geometric(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || !hi.is_finite() {
            return Err(Error::Domain(format!(
                "radial grid needs 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        if nodes < MIN_RADIAL_NODES {
            return Err(Error::Domain(format!(
                "radial grid needs at least {MIN_RADIAL_NODES} nodes, got {nodes}"
            )));
        }
        let (xl, xh) = (lo.ln(), hi.ln());
        let h = (xh - xl) / (nodes - 1) as f64;
        let mut v: Vec<f64> = (0..nodes).map(|i| (xl + h * i as f64).exp()).collect();
        v[0] = lo;
        v[nodes - 1] = hi;
        Ok(Self {
            nodes: v,
            log_spacing: h,
        })
    }

    /// Grid whose log-spacing is `ln(2) / per_octave`; `hi / lo` must be a
    /// power of two so the endpoints land on nodes.
    pub fn octaves(lo: f64, hi: f64, per_octave: usize) -> Result<Self> {
        let octaves = (hi / lo).log2();
        let whole = octaves.round();
        if (octaves - whole).abs() > 1e-9 || whole < 1.0 || per_octave == 0 {
            return Err(Error::Domain(format!(
                "hi/lo = {} is not a positive power of two",
                hi / lo
            )));
        }
        Self::geometric(lo, hi, whole as usize * per_octave + 1)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn log_spacing(&self) -> f64 {
        self.log_spacing
    }

    /// Halves the log-spacing: the `m` interior nodes become `2m + 1`.
    pub fn refine(&self) -> Self {
        let n = 2 * self.nodes.len() - 1;
        Self::geometric(self.nodes[0], self.nodes[self.nodes.len() - 1], n)
            .expect("refining a valid grid stays valid")
    }
}

/// Reduced complex Hessian of a Reinhardt-invariant `u(z) = v(ρ)`:
/// `A_jk = v_j δ_jk + sqrt(ρ_j ρ_k) v_jk`. It is unitarily equivalent to
/// `u_{z_j \bar z_k}` through the diagonal phases of `z`.
pub fn reinhardt_hessian(rho: &[f64], grad: &[f64], hess: &DMatrix<f64>) -> DMatrix<f64> {
    let n = rho.len();
    DMatrix::from_fn(n, n, |j, k| {
        let cross = (rho[j] * rho[k]).sqrt() * hess[(j, k)];
        if j == k {
            grad[j] + cross
        } else {
            cross
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Interior,
    /// Interior node on a coordinate hyperplane `ρ_j = 0`.
    Axis,
    InnerBoundary,
    OuterBoundary,
    /// Inside the hole or beyond the truncation sphere.
    Exterior,
}

impl NodeClass {
    pub fn is_unknown(self) -> bool {
        matches!(self, NodeClass::Interior | NodeClass::Axis)
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, NodeClass::InnerBoundary | NodeClass::OuterBoundary)
    }

    pub fn label(self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::Axis => "axis",
            NodeClass::InnerBoundary => "inner",
            NodeClass::OuterBoundary => "outer",
            NodeClass::Exterior => "exterior",
        }
    }
}

/// Tensor grid over `[0, R^2]^n` in the variables `ρ_j = |z_j|^2`.
#[derive(Clone, Debug)]
pub struct ReinhardtGrid {
    pub dim: usize,
    pub per_axis: usize,
    pub spacing: f64,
    pub outer_sq: f64,
    pub inner: InnerDomain,
    classes: Vec<NodeClass>,
}

/// Largest node count accepted for three-dimensional grids.
pub const MAX_NODES_3D: usize = 25;

impl ReinhardtGrid {
    pub fn new(inner: InnerDomain, outer_radius: f64, per_axis: usize) -> Result<Self> {
        let dim = inner.dim();
        if !(2..=3).contains(&dim) {
            return Err(Error::Domain(format!(
                "Reinhardt grids support n = 2 or 3, got {dim}"
            )));
        }
        if per_axis < 9 {
            return Err(Error::Domain(format!(
                "need at least 9 nodes per axis, got {per_axis}"
            )));
        }
        if dim == 3 && per_axis > MAX_NODES_3D {
            return Err(Error::Domain(format!(
                "three-dimensional grids are limited to {MAX_NODES_3D} nodes per axis, got {per_axis}"
            )));
        }
        let outer_sq = outer_radius * outer_radius;
        if !(inner.circumscribed_radius() < outer_radius) {
            return Err(param(
                "R",
                outer_radius,
                "the truncation sphere must enclose the hole",
            ));
        }
        let spacing = outer_sq / (per_axis - 1) as f64;
        let mut grid = Self {
            dim,
            per_axis,
            spacing,
            outer_sq,
            inner,
            classes: Vec::new(),
        };
        grid.classes = (0..grid.len()).map(|p| grid.classify(p)).collect();
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of a flat node number; the last axis varies fastest.
    pub fn index(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for j in (0..self.dim).rev() {
            idx[j] = p % self.per_axis;
            p /= self.per_axis;
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.per_axis + i)
    }

    /// Stride of axis `j` in the flat numbering.
    pub fn stride(&self, j: usize) -> usize {
        self.per_axis.pow((self.dim - 1 - j) as u32)
    }

    pub fn rho(&self, p: usize) -> Vec<f64> {
        self.index(p)
            .into_iter()
            .map(|i| i as f64 * self.spacing)
            .collect()
    }

    pub fn class(&self, p: usize) -> NodeClass {
        self.classes[p]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }

    /// Tolerance used to decide that a node sits on a boundary level set.
    pub fn on_level_tol(&self) -> f64 {
        1e-9 * self.spacing
    }

    fn classify(&self, p: usize) -> NodeClass {
        let idx = self.index(p);
        let rho = self.rho(p);
        let tol = self.on_level_tol();
        let sum_idx: usize = idx.iter().sum();
        let outer_gap = (self.per_axis - 1) as isize - sum_idx as isize;
        let inner_gap = self.inner.defining(&rho);
        if inner_gap.abs() <= tol && outer_gap >= 0 {
            NodeClass::InnerBoundary
        } else if outer_gap == 0 {
            NodeClass::OuterBoundary
        } else if inner_gap < 0.0 || outer_gap < 0 {
            NodeClass::Exterior
        } else if idx.contains(&0) {
            NodeClass::Axis
        } else {
            NodeClass::Interior
        }
    }

    pub fn count(&self, class: NodeClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }
}
