//! Numerical audits of the a priori estimates on computed solutions.
//!
//! Every audit reads exported nodal data only and reports a signed margin
//! together with the slack it was judged against. A margin `>= 0` passes, a
//! margin in `[-slack, 0)` passes within discretization error, and anything
//! below `-slack` fails. Audits never abort on a failing check.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::barriers::{
    log_f_eps_gradient, lower_envelope, upper_envelope, w_hat_jet, ApproximationParams,
};
use crate::error::{param, Error, Result};
use crate::radial::{Mode, RadialSolution};

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Pass,
    PassWithinDiscretization,
    Fail,
    /// Informational value without a pass criterion.
    Reported,
    Skipped(String),
}

impl Status {
    pub fn label(&self) -> &str {
        match self {
            Status::Pass => "pass",
            Status::PassWithinDiscretization => "pass (within discretization)",
            Status::Fail => "FAIL",
            Status::Reported => "reported",
            Status::Skipped(_) => "skipped",
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, Status::Fail)
    }

    fn judge(margin: f64, slack: f64) -> Self {
        if margin >= 0.0 {
            Status::Pass
        } else if margin >= -slack {
            Status::PassWithinDiscretization
        } else {
            Status::Fail
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    /// The inequality being audited, in words.
    pub statement: String,
    /// Worst signed margin; negative means violated.
    pub margin: f64,
    /// `|z|` (radial data) or node index where the worst margin occurs.
    pub location: f64,
    pub slack: f64,
    pub status: Status,
}

impl Check {
    fn judged(name: &str, statement: &str, margin: f64, location: f64, slack: f64) -> Self {
        Self {
            name: name.into(),
            statement: statement.into(),
            margin,
            location,
            slack,
            status: Status::judge(margin, slack),
        }
    }

    fn reported(name: &str, statement: &str, value: f64, location: f64) -> Self {
        Self {
            name: name.into(),
            statement: statement.into(),
            margin: value,
            location,
            slack: 0.0,
            status: Status::Reported,
        }
    }

    fn skipped(name: &str, statement: &str, reason: String) -> Self {
        Self {
            name: name.into(),
            statement: statement.into(),
            margin: f64::NAN,
            location: f64::NAN,
            slack: 0.0,
            status: Status::Skipped(reason),
        }
    }
}

/// Least-squares line `log y = exponent * log x + intercept`.
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub exponent: f64,
    pub target: f64,
    pub intercept: f64,
    pub points: usize,
}

impl FitResult {
    pub fn relative_error(&self) -> f64 {
        ((self.exponent - self.target) / self.target).abs()
    }
}

/// Fits `log y` against `log x`. Needs at least two distinct abscissae.
pub fn fit_power(x: &[f64], y: &[f64], target: f64) -> Result<FitResult> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Domain(format!(
            "power fit needs two or more matched points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if let Some(bad) = x.iter().chain(y).find(|&&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("power fit needs positive data, got {bad}")));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("power fit needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let exponent = sxy / sxx;
    Ok(FitResult {
        exponent,
        target,
        intercept: my - exponent * mx,
        points: lx.len(),
    })
}

/// Tolerances and windows shared by the audits.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditConfig {
    /// Radii `[lo, hi]` used by the log-log fits.
    pub window: (f64, f64),
    /// Relative tolerances on the fitted exponents of `-u`, `|Du|`, `Δu`.
    pub value_tol: f64,
    pub gradient_tol: f64,
    pub laplacian_tol: f64,
    /// Relative tolerance on the slope of `log Δu` against `log(-u)`.
    pub slope_tol: f64,
    /// Multiplier of `h^2` used as slack.
    pub slack_factor: f64,
    /// Exponent in the second-order test quantity; `None` uses the ceiling.
    pub sigma: Option<f64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            window: (2.0, 8.0),
            value_tol: 0.02,
            gradient_tol: 0.03,
            laplacian_tol: 0.05,
            slope_tol: 0.05,
            slack_factor: 5.0,
            sigma: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct EstimateReport {
    pub checks: Vec<Check>,
    pub fits: BTreeMap<String, FitResult>,
    /// Echo of the configuration and derived constants.
    pub config: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    pub fn passed(&self) -> bool {
        !self.checks.iter().any(|c| c.status.is_failure())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status.is_failure())
    }

    pub fn merge(&mut self, other: EstimateReport) {
        self.checks.extend(other.checks);
        self.fits.extend(other.fits);
        for entry in other.config {
            if !self.config.contains(&entry) {
                self.config.push(entry);
            }
        }
        self.warnings.extend(other.warnings);
    }

    fn echo(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.into(), value.to_string()));
    }

    /// Key/value header followed by the check and fit tables.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("[config]\n");
        for (k, v) in &self.config {
            let _ = writeln!(out, "{k} = {v}");
        }
        out.push_str("\n[checks]\n");
        let _ = writeln!(
            out,
            "{:<28} {:>14} {:>12} {:>12}  status",
            "name", "margin", "location", "slack"
        );
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{:<28} {:>14.6e} {:>12.5} {:>12.3e}  {}",
                c.name,
                c.margin,
                c.location,
                c.slack,
                c.status.label()
            );
            if let Status::Skipped(reason) = &c.status {
                let _ = writeln!(out, "    reason: {reason}");
            }
        }
        if !self.fits.is_empty() {
            out.push_str("\n[fits]\n");
            let _ = writeln!(
                out,
                "{:<28} {:>12} {:>12} {:>10} {:>7}",
                "quantity", "exponent", "target", "rel.err", "points"
            );
            for (name, f) in &self.fits {
                let _ = writeln!(
                    out,
                    "{:<28} {:>12.6} {:>12.6} {:>10.4} {:>7}",
                    name,
                    f.exponent,
                    f.target,
                    f.relative_error(),
                    f.points
                );
            }
        }
        if !self.warnings.is_empty() {
            out.push_str("\n[warnings]\n");
            for w in &self.warnings {
                let _ = writeln!(out, "{w}");
            }
        }
        let _ = writeln!(out, "\n[summary]\npassed = {}", self.passed());
        out
    }

    /// One record per check: name, statement, margin, location, slack, status.
    pub fn records(&self) -> Vec<[String; 6]> {
        self.checks
            .iter()
            .map(|c| {
                [
                    c.name.clone(),
                    c.statement.clone(),
                    format!("{:e}", c.margin),
                    format!("{}", c.location),
                    format!("{:e}", c.slack),
                    c.status.label().to_string(),
                ]
            })
            .collect()
    }
}

/// Nodal fields derived from a radial profile.
#[derive(Clone, Debug)]
pub struct GradientQuantities {
    /// `|Du|^2 (-u)^{-a}`.
    pub p: Vec<f64>,
    /// `λ_max (-u)^{-n/(n-k)} (M - P)^{-σ}`.
    pub h: Vec<f64>,
    /// `Δu (-u)^{1-a}`.
    pub q: Vec<f64>,
    pub a: f64,
    pub sigma: f64,
    pub m: f64,
}

impl GradientQuantities {
    pub fn radial(sol: &RadialSolution, sigma: f64) -> Result<Self> {
        let (n, k) = (sol.meta.n as f64, sol.meta.k as f64);
        let a = (2.0 * n - k) / (n - k);
        let ceiling = (a - 1.0) / (8.0 * a * a);
        if !(sigma > 0.0 && sigma <= ceiling * (1.0 + 1e-12)) {
            return Err(param("sigma", sigma, format!("must lie in (0, {ceiling}]")));
        }
        if let Some(i) = sol.g.iter().position(|&v| !(v < 0.0)) {
            return Err(Error::Domain(format!(
                "gradient quantities need u < 0; u = {} at node {i}",
                sol.g[i]
            )));
        }
        let len = sol.len();
        let p: Vec<f64> = (0..len)
            .map(|i| 4.0 * sol.grid[i] * sol.g1[i].powi(2) * (-sol.g[i]).powf(-a))
            .collect();
        let m = 2.0 * p.iter().copied().fold(0.0, f64::max) + 1.0;
        let h = (0..len)
            .map(|i| {
                let (la, lb) = (sol.g1[i], sol.g1[i] + sol.grid[i] * sol.g2[i]);
                la.max(lb) * (-sol.g[i]).powf(-n / (n - k)) * (m - p[i]).powf(-sigma)
            })
            .collect();
        let q = (0..len)
            .map(|i| laplacian(sol, i) * (-sol.g[i]).powf(1.0 - a))
            .collect();
        Ok(Self {
            p,
            h,
            q,
            a,
            sigma,
            m,
        })
    }
}

/// `Δu = 4(n g' + σ g'')` on `R^{2n}`.
fn laplacian(sol: &RadialSolution, i: usize) -> f64 {
    4.0 * (sol.meta.n as f64 * sol.g1[i] + sol.grid[i] * sol.g2[i])
}

fn slack(sol: &RadialSolution, cfg: &AuditConfig) -> f64 {
    cfg.slack_factor * sol.log_spacing * sol.log_spacing
}

fn require_exterior(sol: &RadialSolution, what: &str) -> Result<()> {
    if sol.meta.mode != Mode::Exterior {
        return Err(Error::Domain(format!("{what} needs an exterior-mode solution")));
    }
    if sol.len() < 4 {
        return Err(Error::Domain(format!("{what} needs at least four nodes")));
    }
    Ok(())
}

/// Nodes whose radius lies in `[lo, hi]`.
fn window_nodes(sol: &RadialSolution, (lo, hi): (f64, f64)) -> Vec<usize> {
    (0..sol.len())
        .filter(|&i| {
            let r = sol.grid[i].sqrt();
            r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12)
        })
        .collect()
}

fn fit_check(report: &mut EstimateReport, name: &str, statement: &str, fit: FitResult, tol: f64) {
    let margin = tol - fit.relative_error();
    report.checks.push(Check {
        name: name.into(),
        statement: statement.into(),
        margin,
        location: f64::NAN,
        slack: 0.0,
        status: if margin >= 0.0 { Status::Pass } else { Status::Fail },
    });
    report.fits.insert(name.into(), fit);
}

/// Log-log fits of `-u`, `|Du|` and `Δu` against `|z|` on the window, plus
/// the two-sided envelope check.
pub fn decay_audit(
    sol: &RadialSolution,
    params: &ApproximationParams,
    cfg: &AuditConfig,
) -> Result<EstimateReport> {
    require_exterior(sol, "decay audit")?;
    let (lo, hi) = cfg.window;
    let (inner, outer) = (1.0 + params.s, sol.meta.outer_radius / 2.0);
    if !(lo > inner && hi < outer && lo < hi) {
        return Err(Error::Domain(format!(
            "fit window [{lo}, {hi}] must lie inside ({inner}, {outer})"
        )));
    }
    let mut report = EstimateReport::default();
    report.echo("n", sol.meta.n);
    report.echo("k", sol.meta.k);
    report.echo("eps", sol.meta.eps);
    report.echo("outer_radius", sol.meta.outer_radius);
    report.echo("window", format!("[{lo}, {hi}]"));
    report.echo("log_spacing", sol.log_spacing);
    if hi / lo < 10.0 {
        report.warnings.push(format!(
            "fit window [{lo}, {hi}] spans less than one decade; exponents are local slopes"
        ));
    }
    let nodes = window_nodes(sol, cfg.window);
    let r: Vec<f64> = nodes.iter().map(|&i| sol.grid[i].sqrt()).collect();
    let q = params.decay_exponent();
    let neg_u: Vec<f64> = nodes.iter().map(|&i| -sol.g[i]).collect();
    let grad: Vec<f64> = nodes
        .iter()
        .map(|&i| 2.0 * sol.grid[i].sqrt() * sol.g1[i].abs())
        .collect();
    let lap: Vec<f64> = nodes.iter().map(|&i| laplacian(sol, i)).collect();

    fit_check(
        &mut report,
        "decay:value",
        "fitted exponent of -u matches 2-2n/k",
        fit_power(&r, &neg_u, q)?,
        cfg.value_tol,
    );
    fit_check(
        &mut report,
        "decay:gradient",
        "fitted exponent of |Du| matches 1-2n/k",
        fit_power(&r, &grad, q - 1.0)?,
        cfg.gradient_tol,
    );
    let lap_statement = "fitted exponent of Δu matches -2n/k";
    match fit_power(&r, &lap, q - 2.0) {
        Ok(fit) => fit_check(&mut report, "decay:laplacian", lap_statement, fit, cfg.laplacian_tol),
        Err(e) => report.checks.push(Check {
            status: Status::Fail,
            ..Check::skipped("decay:laplacian", lap_statement, e.to_string())
        }),
    }
    report.merge(sandwich_audit(sol, params, cfg)?);
    Ok(report)
}

/// Two-sided envelope check at explicit nodes `(|z|^2, u)`.
pub fn sandwich_nodes(
    norm_sq: &[f64],
    values: &[f64],
    inscribed_radius: f64,
    params: &ApproximationParams,
    slack: f64,
) -> Vec<Check> {
    let mut lower = (f64::INFINITY, f64::NAN);
    let mut upper = (f64::INFINITY, f64::NAN);
    for (&s, &u) in norm_sq.iter().zip(values) {
        if !u.is_finite() {
            continue;
        }
        let below = u - lower_envelope(s, params);
        let above = upper_envelope(s, inscribed_radius, params) - u;
        if below < lower.0 {
            lower = (below, s.sqrt());
        }
        if above < upper.0 {
            upper = (above, s.sqrt());
        }
    }
    vec![
        Check::judged(
            "sandwich:lower",
            "u >= -(1+eps0^2)^{n/k-1} |z|^{2-2n/k}",
            lower.0,
            lower.1,
            slack,
        ),
        Check::judged(
            "sandwich:upper",
            "u <= -t^{2n/k-2} |z|^{2-2n/k}",
            upper.0,
            upper.1,
            slack,
        ),
    ]
}

/// Nodewise `lower_envelope <= u <= upper_envelope` with slack `c h^2`.
pub fn sandwich_audit(
    sol: &RadialSolution,
    params: &ApproximationParams,
    cfg: &AuditConfig,
) -> Result<EstimateReport> {
    require_exterior(sol, "sandwich audit")?;
    let mut report = EstimateReport::default();
    report.checks = sandwich_nodes(&sol.grid, &sol.g, params.t, params, slack(sol, cfg));
    Ok(report)
}

/// Interior maximum of `P` against the larger of its boundary maximum and the
/// explicit right-hand side built from `|D log f^ε|`.
pub fn gradient_estimate_audit(
    sol: &RadialSolution,
    params: &ApproximationParams,
    cfg: &AuditConfig,
) -> Result<EstimateReport> {
    require_exterior(sol, "gradient audit")?;
    let gq = GradientQuantities::radial(sol, params.sigma_ceiling())?;
    let (n, k) = (params.n as f64, params.k as f64);
    let len = sol.len();
    let interior = 1..len - 1;
    let (p_int, at) = interior
        .clone()
        .map(|i| (gq.p[i], i))
        .fold((f64::NEG_INFINITY, 0), |m, v| if v.0 > m.0 { v } else { m });
    let p_bnd = gq.p[0].max(gq.p[len - 1]);
    let source_term = interior
        .map(|i| {
            let r = sol.grid[i].sqrt();
            (-sol.g[i]).powf(-k / (n - k)) * log_f_eps_gradient(r, params).powi(2)
        })
        .fold(0.0, f64::max);
    let bound = p_bnd.max(params.gradient_constant() * source_term);
    let mut report = EstimateReport::default();
    report.echo("a", gq.a);
    report.echo("gradient_constant", params.gradient_constant());
    report.checks.push(Check::reported(
        "gradient:interior_max_p",
        "max over interior nodes of |Du|^2 (-u)^{-a}",
        p_int,
        sol.grid[at].sqrt(),
    ));
    report.checks.push(Check::judged(
        "gradient:bound",
        "interior max P <= max(boundary max P, C max (-u)^{-k/(n-k)} |D log f|^2)",
        bound - p_int,
        sol.grid[at].sqrt(),
        slack(sol, cfg) * bound.max(1.0),
    ));
    Ok(report)
}

/// Implied constant of the `H` reduction, the barrier test in four
/// directions, and the slope of `log Δu` against `log(-u)`.
pub fn second_order_audit(
    sol: &RadialSolution,
    params: &ApproximationParams,
    cfg: &AuditConfig,
) -> Result<EstimateReport> {
    require_exterior(sol, "second-order audit")?;
    let sigma = cfg.sigma.unwrap_or_else(|| params.sigma_ceiling());
    let gq = GradientQuantities::radial(sol, sigma)?;
    let len = sol.len();
    let mut report = EstimateReport::default();
    report.echo("sigma", sigma);
    report.echo("sigma_ceiling", params.sigma_ceiling());
    report.echo("M", gq.m);
    report.echo("b", params.b);
    report.echo("mu", params.mu);

    let argmax = |v: &[f64], range: std::ops::Range<usize>| {
        range
            .map(|i| (v[i], i))
            .fold((f64::NEG_INFINITY, 0), |m, x| if x.0 > m.0 { x } else { m })
    };
    let (h_int, h_at) = argmax(&gq.h, 1..len - 1);
    let h_bnd = gq.h[0].max(gq.h[len - 1]);
    report.checks.push(Check::reported(
        "second:h_implied_constant",
        "interior max H minus boundary max H",
        h_int - h_bnd,
        sol.grid[h_at].sqrt(),
    ));
    let (q_max, q_at) = argmax(&gq.q, 0..len);
    report.checks.push(Check::reported(
        "second:q_max",
        "max of Δu (-u)^{1-a}",
        q_max,
        sol.grid[q_at].sqrt(),
    ));

    // u_ξξ for u = g(|x|^2) is 2g' + 4(ξ·x)^2 g''
    let directions: [(&str, f64); 4] = [
        ("radial", 1.0),
        ("tangential", 0.0),
        ("diagonal_plus", 0.5),
        ("diagonal_minus", 0.5),
    ];
    let tol = slack(sol, cfg);
    for (label, c2) in directions {
        let test = |i: usize| {
            let s = sol.grid[i];
            let uxx = 2.0 * sol.g1[i] + 4.0 * c2 * s * sol.g2[i];
            w_hat_jet(s, params).value - sol.g[i] - params.b * uxx
        };
        let (int_max, at) = (1..len - 1)
            .map(|i| (test(i), i))
            .fold((f64::NEG_INFINITY, 0), |m, x| if x.0 > m.0 { x } else { m });
        let bnd_max = test(0).max(test(len - 1));
        report.checks.push(Check::judged(
            &format!("barrier:{label}"),
            "interior max (w_hat - u - b u_xi_xi) <= boundary max",
            bnd_max - int_max,
            sol.grid[at].sqrt(),
            tol,
        ));
    }

    let nodes = window_nodes(sol, cfg.window);
    let neg_u: Vec<f64> = nodes.iter().map(|&i| -sol.g[i]).collect();
    let lap: Vec<f64> = nodes.iter().map(|&i| laplacian(sol, i)).collect();
    let statement = "slope of log Δu against log(-u) matches a-1";
    if nodes.len() < 2 {
        report.checks.push(Check::skipped(
            "second:laplacian_slope",
            statement,
            "fit window holds fewer than two nodes".into(),
        ));
    } else {
        match fit_power(&neg_u, &lap, gq.a - 1.0) {
            Ok(fit) => fit_check(&mut report, "second:laplacian_slope", statement, fit, cfg.slope_tol),
            Err(e) => report.checks.push(Check {
                status: Status::Fail,
                ..Check::skipped("second:laplacian_slope", statement, e.to_string())
            }),
        }
    }
    Ok(report)
}

/// Every radial audit in one report.
pub fn audit_radial(
    sol: &RadialSolution,
    params: &ApproximationParams,
    cfg: &AuditConfig,
) -> Result<EstimateReport> {
    let mut report = decay_audit(sol, params, cfg)?;
    report.merge(gradient_estimate_audit(sol, params, cfg)?);
    report.merge(second_order_audit(sol, params, cfg)?);
    Ok(report)
}

/// Nodal values with the source and boundary flags needed for comparison.
#[derive(Clone, Copy, Debug)]
pub struct NodalData<'a> {
    pub values: &'a [f64],
    pub source: &'a [f64],
    pub boundary: &'a [bool],
}

/// Checks `u <= v` nodewise given `f_u >= f_v` and `u <= v` on the boundary.
/// Unmet preconditions skip the check with the reason.
pub fn comparison_audit(u: NodalData<'_>, v: NodalData<'_>, slack: f64) -> Check {
    const NAME: &str = "comparison";
    const STATEMENT: &str = "u <= v when f_u >= f_v and u <= v on the boundary";
    let len = u.values.len();
    let lengths = [u.source.len(), u.boundary.len(), v.values.len(), v.source.len(), v.boundary.len()];
    if lengths.iter().any(|&l| l != len) {
        return Check::skipped(NAME, STATEMENT, format!("mismatched lengths {len} vs {lengths:?}"));
    }
    if let Some(i) = (0..len).find(|&i| u.boundary[i] != v.boundary[i]) {
        return Check::skipped(NAME, STATEMENT, format!("boundary flags differ at node {i}"));
    }
    let live = |i: usize| u.values[i].is_finite() && v.values[i].is_finite();
    let source_tol = |i: usize| 1e-12 * u.source[i].abs().max(v.source[i].abs()).max(1.0);
    if let Some(i) = (0..len).find(|&i| live(i) && !u.boundary[i] && u.source[i] < v.source[i] - source_tol(i)) {
        return Check::skipped(
            NAME,
            STATEMENT,
            format!("source order fails at node {i}: {} < {}", u.source[i], v.source[i]),
        );
    }
    if let Some(i) = (0..len).find(|&i| live(i) && u.boundary[i] && u.values[i] > v.values[i] + 1e-12) {
        return Check::skipped(
            NAME,
            STATEMENT,
            format!("boundary order fails at node {i}: {} > {}", u.values[i], v.values[i]),
        );
    }
    let (worst, at) = (0..len)
        .filter(|&i| live(i))
        .map(|i| (v.values[i] - u.values[i], i))
        .fold((f64::INFINITY, 0), |m, x| if x.0 < m.0 { x } else { m });
    Check::judged(NAME, STATEMENT, worst, at as f64, slack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::{green_jet, w_eps_jet, HarmonicMajorant};
    use crate::radial::{solve_radial, NewtonOptions, ProblemSpec};
    use approx::assert_relative_eq;

    fn params(n: usize, k: usize) -> ApproximationParams {
        ApproximationParams::new(n, k, 0.5, 1.5, 0.25, 0.1).unwrap()
    }

    fn sampled(p: &ApproximationParams, r: f64, nodes: usize, jet: impl Fn(f64) -> crate::barriers::RadialJet) -> RadialSolution {
        let spec = ProblemSpec::exterior(p, r).unwrap();
        let grid = spec.grid(nodes).unwrap();
        RadialSolution::from_profile(&spec, &grid, jet).unwrap()
    }

    #[test]
    fn constants_for_two_one() {
        let p = params(2, 1);
        assert_relative_eq!(p.gradient_constant(), 4.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(p.gradient_exponent(), 3.0, epsilon = 1e-15);
        assert_relative_eq!(p.sigma_ceiling(), 1.0 / 36.0, epsilon = 1e-15);
    }

    #[test]
    fn fit_recovers_exact_power() {
        let x: Vec<f64> = (1..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-1.7)).collect();
        let fit = fit_power(&x, &y, -1.7).unwrap();
        assert_relative_eq!(fit.exponent, -1.7, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 3.0_f64.ln(), epsilon = 1e-12);
        assert!(fit_power(&[1.0], &[1.0], 0.0).is_err());
        assert!(fit_power(&[1.0, 2.0], &[1.0, -1.0], 0.0).is_err());
    }

    #[test]
    fn green_profile_fits_are_exact() {
        for (n, k) in [(2, 1), (3, 2)] {
            let p = ApproximationParams::new(n, k, 0.5, 0.5, 0.03, 0.02).unwrap();
            let power = p.power();
            let sol = sampled(&p, 32.0, 801, |s| green_jet(s, power));
            let cfg = AuditConfig::default();
            let report = decay_audit(&sol, &p, &cfg).unwrap();
            assert!(report.fits["decay:value"].relative_error() < 1e-12);
            assert!(report.fits["decay:gradient"].relative_error() < 1e-12);
            if k > 1 {
                assert!(report.fits["decay:laplacian"].relative_error() < 1e-12);
            }
            // P is constant, 4 (1-n/k)^2, on the Green function
            let gq = GradientQuantities::radial(&sol, p.sigma_ceiling()).unwrap();
            for v in &gq.p {
                assert_relative_eq!(*v, 4.0 * power * power, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn w_eps_sandwich_and_gradient_hold() {
        for (n, k) in [(2, 1), (3, 1), (3, 2)] {
            let p = params(n, k);
            let sol = sampled(&p, 16.0, 401, |s| w_eps_jet(s, &p));
            let cfg = AuditConfig::default();
            let s = sandwich_audit(&sol, &p, &cfg).unwrap();
            assert!(s.checks.iter().all(|c| c.status == Status::Pass), "{}", s.to_text());
            let g = gradient_estimate_audit(&sol, &p, &cfg).unwrap();
            let bound = g.checks.iter().find(|c| c.name == "gradient:bound").unwrap();
            assert!(bound.margin > 0.0, "{}", g.to_text());
        }
    }

    #[test]
    fn window_outside_range_is_rejected() {
        let p = params(2, 1);
        let sol = sampled(&p, 8.0, 201, |s| w_eps_jet(s, &p));
        let cfg = AuditConfig {
            window: (2.0, 6.0),
            ..AuditConfig::default()
        };
        assert!(decay_audit(&sol, &p, &cfg).is_err());
        let narrow = AuditConfig {
            window: (2.6, 3.5),
            ..AuditConfig::default()
        };
        let report = decay_audit(&sol, &p, &narrow).unwrap();
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn sigma_above_ceiling_is_rejected() {
        let p = params(2, 1);
        let sol = sampled(&p, 8.0, 201, |s| w_eps_jet(s, &p));
        assert!(GradientQuantities::radial(&sol, 0.03).is_err());
        assert!(GradientQuantities::radial(&sol, 1.0 / 36.0).is_ok());
    }

    #[test]
    fn identical_problems_compare_equal() {
        let values = vec![-1.0, -0.5, -0.2, -0.1];
        let source = vec![0.0, 1.0, 1.0, 0.0];
        let boundary = vec![true, false, false, true];
        let d = NodalData {
            values: &values,
            source: &source,
            boundary: &boundary,
        };
        let c = comparison_audit(d, d, 1e-12);
        assert_eq!(c.status, Status::Pass);
        assert_eq!(c.margin, 0.0);
    }

    #[test]
    fn comparison_skips_on_unordered_sources() {
        let (u, v) = (vec![-1.0, -0.5, 0.0], vec![-1.0, -0.4, 0.0]);
        let (fu, fv) = (vec![0.0, 1.0, 0.0], vec![0.0, 2.0, 0.0]);
        let b = vec![true, false, true];
        let c = comparison_audit(
            NodalData { values: &u, source: &fu, boundary: &b },
            NodalData { values: &v, source: &fv, boundary: &b },
            0.0,
        );
        assert!(matches!(c.status, Status::Skipped(_)));
    }

    #[test]
    fn harmonic_majorant_dominates_solution() {
        let p = params(2, 1);
        let spec = ProblemSpec::exterior(&p, 4.0).unwrap();
        let sol = solve_radial(&spec, 401, &NewtonOptions::default()).unwrap();
        let major = HarmonicMajorant::new(p.t, 4.0, spec.inner_bc, spec.outer_bc, 2).unwrap();
        let v: Vec<f64> = sol.radii().iter().map(|&r| major.value(r)).collect();
        // compare Laplacians: the solution is subharmonic, the majorant harmonic
        let fu: Vec<f64> = (0..sol.len()).map(|i| laplacian(&sol, i).max(0.0)).collect();
        let fv = vec![0.0; sol.len()];
        let mut b = vec![false; sol.len()];
        b[0] = true;
        *b.last_mut().unwrap() = true;
        let c = comparison_audit(
            NodalData { values: &sol.g, source: &fu, boundary: &b },
            NodalData { values: &v, source: &fv, boundary: &b },
            5.0 * sol.log_spacing.powi(2),
        );
        assert!(!c.status.is_failure() && !matches!(c.status, Status::Skipped(_)), "{c:?}");
    }
}
