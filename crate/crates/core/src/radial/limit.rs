//! The double limit `ε → 0`, `R → ∞` on nested radial grids.

use super::{solve_radial_on, InitialGuess, NewtonOptions, ProblemSpec, RadialSolution};
use crate::barriers::ApproximationParams;
use crate::error::{Error, Result};
use crate::geometry::RadialGrid;

#[derive(Clone, Debug)]
pub struct LimitStudy {
    /// Shared constants; `eps` is replaced by each entry of `eps_list`.
    pub base: ApproximationParams,
    pub eps_list: Vec<f64>,
    pub r_list: Vec<f64>,
    /// Grid nodes per doubling of `|z|^2`; fixes the log-spacing for every `R`.
    pub per_octave: usize,
    /// Radii `[r_lo, r_hi]` on which Cauchy differences are measured.
    pub window: (f64, f64),
    pub newton: NewtonOptions,
    /// Multiplier of `h^2` used as slack in the monotonicity checks.
    pub slack_factor: f64,
}

impl LimitStudy {
    pub fn new(base: ApproximationParams, eps_list: Vec<f64>, r_list: Vec<f64>) -> Self {
        Self {
            base,
            eps_list,
            r_list,
            per_octave: 32,
            window: (2.0, 4.0),
            newton: NewtonOptions::default(),
            slack_factor: 5.0,
        }
    }
}

/// Worst violation of one pairwise ordering at shared nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityRow {
    /// `"R"` or `"eps"`.
    pub kind: &'static str,
    /// The solution expected to be smaller: `(ε, R)`.
    pub lower: (f64, f64),
    /// The solution expected to be larger.
    pub upper: (f64, f64),
    /// `max(lower - upper)`; nonpositive when the ordering holds.
    pub worst: f64,
    /// `|z|^2` where `worst` is attained.
    pub location: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CauchyRow {
    pub eps: f64,
    pub r_a: f64,
    pub r_b: f64,
    /// `sup |u^{R_a} - u^{R_b}|` over the window.
    pub sup_diff: f64,
    /// Ratio to the previous row with the same `ε`.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct LimitReport {
    /// `solutions[i][j]` solves with `r_list[i]` and `eps_list[j]` (input order).
    pub solutions: Vec<Vec<RadialSolution>>,
    pub r_monotonicity: Vec<MonotonicityRow>,
    pub eps_monotonicity: Vec<MonotonicityRow>,
    pub cauchy: Vec<CauchyRow>,
    /// `(|z|^2, u)` from extrapolating the two largest `R` at the smallest `ε`.
    pub extrapolated: Vec<(f64, f64)>,
    pub log_spacing: f64,
}

impl LimitReport {
    pub fn monotone(&self) -> bool {
        self.r_monotonicity
            .iter()
            .chain(&self.eps_monotonicity)
            .all(|r| r.pass)
    }
}

/// `u_∞ = (u_1 R_2^q - u_2 R_1^q)/(R_2^q - R_1^q)` under the model
/// `u_R = u_∞ + c R^q`.
pub fn extrapolate_in_r(u1: f64, r1: f64, u2: f64, r2: f64, q: f64) -> f64 {
    let (a, b) = (r1.powf(q), r2.powf(q));
    (u1 * b - u2 * a) / (b - a)
}

fn same_node(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * a.abs().max(b.abs())
}

/// Ordering check `lower <= upper + slack` over the common prefix of nodes.
pub fn ordering_row(
    kind: &'static str,
    lower: &RadialSolution,
    upper: &RadialSolution,
    slack: f64,
) -> Result<MonotonicityRow> {
    let shared = lower.len().min(upper.len());
    let mut worst = f64::NEG_INFINITY;
    let mut location = lower.grid[0];
    for i in 0..shared {
        if !same_node(lower.grid[i], upper.grid[i]) {
            return Err(Error::Domain(format!(
                "grids diverge at node {i}: {} vs {}",
                lower.grid[i], upper.grid[i]
            )));
        }
        let d = lower.g[i] - upper.g[i];
        if d > worst {
            worst = d;
            location = lower.grid[i];
        }
    }
    Ok(MonotonicityRow {
        kind,
        lower: (lower.meta.eps, lower.meta.outer_radius),
        upper: (upper.meta.eps, upper.meta.outer_radius),
        worst,
        location,
        slack,
        pass: worst <= slack,
    })
}

fn solve_with_fallback(
    spec: &ProblemSpec,
    grid: &RadialGrid,
    opts: &NewtonOptions,
    warm: Option<&RadialSolution>,
) -> Result<RadialSolution> {
    if let Some(prev) = warm {
        if let Ok(sol) = solve_radial_on(spec, grid, opts, &InitialGuess::Values(prev.g.clone())) {
            return Ok(sol);
        }
    }
    solve_radial_on(spec, grid, opts, &InitialGuess::Quadrature)
        .or_else(|_| solve_radial_on(spec, grid, opts, &InitialGuess::Subsolution))
}

/// Solves every `(ε, R)` cell, continuing from the largest `ε` down at each
/// `R`, then tabulates monotonicity in both parameters and Cauchy differences.
pub fn limit_sequence(study: &LimitStudy) -> Result<LimitReport> {
    if study.eps_list.is_empty() || study.r_list.is_empty() {
        return Err(Error::Domain("limit study needs at least one ε and one R".into()));
    }
    let mut r_sorted = study.r_list.clone();
    r_sorted.sort_by(f64::total_cmp);
    if r_sorted != study.r_list {
        return Err(Error::Domain("R list must be increasing".into()));
    }
    let mut eps_order: Vec<usize> = (0..study.eps_list.len()).collect();
    eps_order.sort_by(|&a, &b| study.eps_list[b].total_cmp(&study.eps_list[a]));

    let inner_sq = study.base.t * study.base.t;
    let mut solutions = Vec::with_capacity(study.r_list.len());
    let mut log_spacing = 0.0;
    for &r in &study.r_list {
        let grid = RadialGrid::octaves(inner_sq, r * r, study.per_octave)?;
        log_spacing = grid.log_spacing();
        let mut row: Vec<Option<RadialSolution>> = vec![None; study.eps_list.len()];
        let mut warm: Option<RadialSolution> = None;
        for &j in &eps_order {
            let params = study.base.with_eps(study.eps_list[j])?;
            let spec = ProblemSpec::exterior(&params, r)?;
            let sol = solve_with_fallback(&spec, &grid, &study.newton, warm.as_ref())?;
            warm = Some(sol.clone());
            row[j] = Some(sol);
        }
        solutions.push(row.into_iter().map(|s| s.expect("every ε solved")).collect::<Vec<_>>());
    }

    let slack = study.slack_factor * log_spacing * log_spacing;
    let mut r_monotonicity = Vec::new();
    for j in 0..study.eps_list.len() {
        for i in 1..study.r_list.len() {
            r_monotonicity.push(ordering_row("R", &solutions[i - 1][j], &solutions[i][j], slack)?);
        }
    }
    let mut eps_monotonicity = Vec::new();
    for row in &solutions {
        // larger ε gives the smaller solution
        for w in eps_order.windows(2) {
            eps_monotonicity.push(ordering_row("eps", &row[w[0]], &row[w[1]], slack)?);
        }
    }

    let (lo, hi) = (study.window.0.powi(2), study.window.1.powi(2));
    let mut cauchy = Vec::new();
    for (j, &eps) in study.eps_list.iter().enumerate() {
        let mut prev: Option<f64> = None;
        for i in 1..study.r_list.len() {
            let (a, b) = (&solutions[i - 1][j], &solutions[i][j]);
            let sup = (0..a.len())
                .filter(|&p| a.grid[p] >= lo * (1.0 - 1e-12) && a.grid[p] <= hi * (1.0 + 1e-12))
                .map(|p| (a.g[p] - b.g[p]).abs())
                .fold(0.0, f64::max);
            cauchy.push(CauchyRow {
                eps,
                r_a: study.r_list[i - 1],
                r_b: study.r_list[i],
                sup_diff: sup,
                ratio: prev.map(|p| p / sup),
            });
            prev = Some(sup);
        }
    }

    let mut extrapolated = Vec::new();
    if study.r_list.len() >= 2 {
        let j = *eps_order.last().expect("nonempty");
        let m = study.r_list.len();
        let (a, b) = (&solutions[m - 2][j], &solutions[m - 1][j]);
        let q = study.base.decay_exponent();
        for p in 0..a.len() {
            if a.grid[p] >= lo * (1.0 - 1e-12) && a.grid[p] <= hi * (1.0 + 1e-12) {
                extrapolated.push((
                    a.grid[p],
                    extrapolate_in_r(a.g[p], study.r_list[m - 2], b.g[p], study.r_list[m - 1], q),
                ));
            }
        }
    }

    Ok(LimitReport {
        solutions,
        r_monotonicity,
        eps_monotonicity,
        cauchy,
        extrapolated,
        log_spacing,
    })
}

/// Ring problems `S_k = ε` for each `ε`, all on one grid, with the ordering
/// `u^{ε_1} >= u^{ε_2}` for `ε_1 <= ε_2` tabulated.
pub fn ring_eps_sequence(
    n: usize,
    k: usize,
    inner_radius: f64,
    outer_radius: f64,
    eps_list: &[f64],
    nodes: usize,
    opts: &NewtonOptions,
) -> Result<(Vec<RadialSolution>, Vec<MonotonicityRow>)> {
    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|&a, &b| eps_list[a].total_cmp(&eps_list[b]));
    let mut sols: Vec<Option<RadialSolution>> = vec![None; eps_list.len()];
    let mut warm: Option<RadialSolution> = None;
    let mut h = 0.0;
    for &j in &order {
        let spec = ProblemSpec::ring(n, k, inner_radius, outer_radius, eps_list[j])?;
        let grid = spec.grid(nodes)?;
        h = grid.log_spacing();
        let sol = solve_with_fallback(&spec, &grid, opts, warm.as_ref())?;
        warm = Some(sol.clone());
        sols[j] = Some(sol);
    }
    let sols: Vec<RadialSolution> = sols.into_iter().map(|s| s.expect("solved")).collect();
    let slack = 5.0 * h * h;
    let mut rows = Vec::new();
    for w in order.windows(2) {
        // larger source gives the smaller solution
        rows.push(ordering_row("eps", &sols[w[1]], &sols[w[0]], slack)?);
    }
    Ok((sols, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn extrapolation_recovers_model() {
        let q = -2.0;
        let truth = -0.3;
        let u = |r: f64| truth + 0.7 * r.powf(q);
        assert_relative_eq!(extrapolate_in_r(u(8.0), 8.0, u(16.0), 16.0, q), truth, epsilon = 1e-14);
    }
}
