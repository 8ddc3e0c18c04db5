//! Run configuration: TOML schema, validation and the config hash.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use khessian::barriers::ApproximationParams;
use khessian::estimates::AuditConfig;
use khessian::geometry::InnerDomain;
use khessian::radial::NewtonOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    CheckInequalities,
    SolveRadial,
    SolveReinhardt,
    LimitStudy,
    Audit,
    Manufactured,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::CheckInequalities => "check-inequalities",
            Mode::SolveRadial => "solve-radial",
            Mode::SolveReinhardt => "solve-reinhardt",
            Mode::LimitStudy => "limit-study",
            Mode::Audit => "audit",
            Mode::Manufactured => "manufactured",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub problem: Problem,
    pub grid: Grid,
    pub tolerances: Tolerances,
    pub suite: Suite,
    pub audit: Audit,
    pub manufactured: Manufactured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Problem {
    pub n: usize,
    pub k: usize,
    pub t: f64,
    pub s: f64,
    pub eps0: f64,
    pub eps: Vec<f64>,
    #[serde(rename = "R")]
    pub outer_radius: Vec<f64>,
    /// Ellipsoid weights of the hole `Σ a_j |z_j|^2 < t^2`; empty means the ball `B_t`.
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    pub radial_nodes: usize,
    pub per_octave: usize,
    pub per_axis: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub newton_rel: f64,
    pub newton_abs: f64,
    pub max_iterations: usize,
    pub slack_factor: f64,
    /// Fit window `[lo, hi]` in `|z|`; empty picks one inside `(1+s, R/2)`.
    pub window: Vec<f64>,
    pub value_tol: f64,
    pub gradient_tol: f64,
    pub laplacian_tol: f64,
    pub slope_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Suite {
    pub samples: usize,
    pub max_dim: usize,
    pub claim_max_dim: usize,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Audit {
    /// Radial CSV export to audit.
    pub input: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Manufactured {
    /// Coefficient `c` of the exact solution `w^ε + c|z|^2`.
    pub shift: f64,
    pub nodes: Vec<usize>,
    pub min_order: f64,
    pub max_order: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: None,
            seed: 7,
            out: None,
            problem: Problem::default(),
            grid: Grid::default(),
            tolerances: Tolerances::default(),
            suite: Suite::default(),
            audit: Audit::default(),
            manufactured: Manufactured::default(),
        }
    }
}

impl Default for Problem {
    fn default() -> Self {
        Self {
            n: 2,
            k: 1,
            t: 0.5_f64.sqrt(),
            s: 1.5,
            eps0: 0.25,
            eps: vec![0.1],
            outer_radius: vec![8.0],
            weights: Vec::new(),
        }
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            radial_nodes: 801,
            per_octave: 32,
            per_axis: 33,
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        let a = AuditConfig::default();
        let n = NewtonOptions::default();
        Self {
            newton_rel: n.rel_tol,
            newton_abs: n.abs_tol,
            max_iterations: n.max_iterations,
            slack_factor: a.slack_factor,
            window: Vec::new(),
            value_tol: a.value_tol,
            gradient_tol: a.gradient_tol,
            laplacian_tol: a.laplacian_tol,
            slope_tol: a.slope_tol,
        }
    }
}

impl Default for Suite {
    fn default() -> Self {
        let s = khessian::symmfunc::SuiteConfig::default();
        Self {
            samples: s.samples,
            max_dim: s.max_dim,
            claim_max_dim: s.claim_max_dim,
            tolerance: s.tolerance,
        }
    }
}

impl Default for Manufactured {
    fn default() -> Self {
        Self {
            shift: 0.02,
            nodes: vec![201, 401, 801],
            min_order: 1.8,
            max_order: 2.3,
        }
    }
}

/// One violated constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub parameter: String,
    pub value: String,
    pub admissible: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = {}: admissible {}", self.parameter, self.value, self.admissible)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config mode `{found}` does not match subcommand `{expected}`")]
    ModeMismatch { found: &'static str, expected: &'static str },
    #[error("{} invalid parameter(s):\n{}", .0.len(), list(.0))]
    Invalid(Vec<Violation>),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  - {x}")).collect::<Vec<_>>().join("\n")
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.message().to_string(),
    })
}

fn violation(parameter: &str, value: impl ToString, admissible: impl ToString) -> Violation {
    Violation {
        parameter: parameter.into(),
        value: value.to_string(),
        admissible: admissible.to_string(),
    }
}

impl RunConfig {
    /// Every violated constraint for `mode`; an empty list means the config is usable.
    pub fn violations(&self, mode: Mode) -> Vec<Violation> {
        let mut out = Vec::new();
        match mode {
            Mode::CheckInequalities => {
                let s = &self.suite;
                if s.samples == 0 {
                    out.push(violation("suite.samples", s.samples, ">= 1"));
                }
                if !(2..=8).contains(&s.max_dim) {
                    out.push(violation("suite.max_dim", s.max_dim, "2..=8"));
                }
                if !(2..=s.max_dim.max(2)).contains(&s.claim_max_dim) {
                    out.push(violation("suite.claim_max_dim", s.claim_max_dim, "2..=suite.max_dim"));
                }
                if !(s.tolerance > 0.0) {
                    out.push(violation("suite.tolerance", s.tolerance, "> 0"));
                }
                return out;
            }
            Mode::Audit => {
                if self.audit.input.is_none() {
                    out.push(violation("audit.input", "(unset)", "path to a radial CSV export"));
                }
                self.tolerance_violations(&mut out);
                return out;
            }
            _ => {}
        }
        let p = &self.problem;
        let (n, k) = (p.n, p.k);
        if n < 2 {
            out.push(violation("problem.n", n, ">= 2"));
        }
        if !(1 <= k && k < n) {
            out.push(violation("problem.k", k, format!("1 <= k < n = {n}")));
        }
        if !(p.t > 0.0 && p.t < 1.0) {
            out.push(violation("problem.t", p.t, "(0, 1)"));
        }
        if !(p.s > 0.0 && p.s.is_finite()) {
            out.push(violation("problem.s", p.s, "> 0"));
        }
        let ceiling = p.s * p.s / 8.0;
        if !(p.eps0 > 0.0 && p.eps0 < ceiling) {
            out.push(violation("problem.eps0", p.eps0, format!("(0, s^2/8 = {ceiling})")));
        }
        if p.eps.is_empty() {
            out.push(violation("problem.eps", "[]", "at least one value"));
        }
        let mu = p.t / ((n + k).max(2) as f64 - 1.0).sqrt();
        for &e in &p.eps {
            if !(e > 0.0 && e <= p.eps0) {
                out.push(violation("problem.eps", e, format!("(0, eps0 = {}]", p.eps0)));
            } else if !(e < mu) {
                out.push(violation("problem.eps", e, format!("below mu = t/sqrt(n+k-1) = {mu}")));
            }
        }
        if p.outer_radius.is_empty() {
            out.push(violation("problem.R", "[]", "at least one value"));
        }
        for &r in &p.outer_radius {
            if !(r > 1.0 + p.s) {
                out.push(violation("problem.R", r, format!("> 1 + s = {}", 1.0 + p.s)));
            }
        }
        if mode == Mode::LimitStudy && p.outer_radius.windows(2).any(|w| !(w[0] < w[1])) {
            out.push(violation("problem.R", format!("{:?}", p.outer_radius), "strictly increasing"));
        }
        if !p.weights.is_empty() {
            if p.weights.len() != n {
                out.push(violation("problem.weights", format!("{:?}", p.weights), format!("{n} entries")));
            } else if let Err(e) = InnerDomain::ellipsoid(p.weights.clone(), p.t) {
                out.push(violation("problem.weights", format!("{:?}", p.weights), e));
            } else if mode != Mode::SolveReinhardt {
                out.push(violation("problem.weights", format!("{:?}", p.weights), "[] outside solve-reinhardt"));
            }
        }
        match mode {
            Mode::SolveRadial | Mode::Manufactured if self.grid.radial_nodes < 16 => {
                out.push(violation("grid.radial_nodes", self.grid.radial_nodes, ">= 16"));
            }
            Mode::LimitStudy if self.grid.per_octave < 4 => {
                out.push(violation("grid.per_octave", self.grid.per_octave, ">= 4"));
            }
            Mode::SolveReinhardt => {
                let max = if n == 3 { khessian::geometry::MAX_NODES_3D } else { 513 };
                if !(9..=max).contains(&self.grid.per_axis) {
                    out.push(violation("grid.per_axis", self.grid.per_axis, format!("9..={max}")));
                }
                if !(2..=3).contains(&n) {
                    out.push(violation("problem.n", n, "2 or 3 for Reinhardt grids"));
                }
            }
            _ => {}
        }
        if mode == Mode::Manufactured {
            let m = &self.manufactured;
            if m.nodes.len() < 2 || m.nodes.iter().any(|&v| v < 16) {
                out.push(violation("manufactured.nodes", format!("{:?}", m.nodes), "two or more grids of >= 16 nodes"));
            }
            if !(m.min_order < m.max_order) {
                out.push(violation("manufactured.min_order", m.min_order, "below max_order"));
            }
        }
        if out.is_empty() {
            // the library's own checks, with the hole's inscribed radius for ellipsoids
            let t = match InnerDomain::ellipsoid(p.weights.clone(), p.t) {
                Ok(d) if !p.weights.is_empty() => d.inscribed_radius(),
                _ => p.t,
            };
            for &e in &p.eps {
                if let Err(err) = ApproximationParams::new(n, k, t, p.s, p.eps0, e) {
                    out.push(violation("problem", format!("eps = {e}"), err));
                }
            }
        }
        self.tolerance_violations(&mut out);
        if mode == Mode::SolveRadial {
            for &r in &p.outer_radius {
                if let Err(msg) = self.window_for(p.s, r) {
                    out.push(violation("tolerances.window", format!("{:?}", self.tolerances.window), msg));
                }
            }
        }
        out
    }

    fn tolerance_violations(&self, out: &mut Vec<Violation>) {
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.newton_rel", t.newton_rel),
            ("tolerances.newton_abs", t.newton_abs),
            ("tolerances.slack_factor", t.slack_factor),
            ("tolerances.value_tol", t.value_tol),
            ("tolerances.gradient_tol", t.gradient_tol),
            ("tolerances.laplacian_tol", t.laplacian_tol),
            ("tolerances.slope_tol", t.slope_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(violation(name, v, "> 0"));
            }
        }
        if t.max_iterations == 0 {
            out.push(violation("tolerances.max_iterations", 0, ">= 1"));
        }
        if !(t.window.is_empty() || t.window.len() == 2) {
            out.push(violation("tolerances.window", format!("{:?}", t.window), "[] or [lo, hi]"));
        }
    }

    /// Fit window for collar width `s` and truncation radius `r`: the
    /// configured one, or `[1.05 (1+s), 0.95 R/2]`.
    pub fn window_for(&self, s: f64, r: f64) -> Result<(f64, f64), String> {
        let (inner, outer) = (1.0 + s, r / 2.0);
        let (lo, hi) = match self.tolerances.window.as_slice() {
            [lo, hi] => (*lo, *hi),
            _ => (1.05 * inner, 0.95 * outer),
        };
        if lo > inner && hi < outer && lo < hi {
            Ok((lo, hi))
        } else {
            Err(format!("lo < hi inside (1+s, R/2) = ({inner}, {outer}) for R = {r}"))
        }
    }

    pub fn validate(&self, mode: Mode) -> Result<(), ConfigError> {
        if let Some(found) = self.mode {
            if found != mode {
                return Err(ConfigError::ModeMismatch {
                    found: found.label(),
                    expected: mode.label(),
                });
            }
        }
        let v = self.violations(mode);
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    pub fn params(&self, eps: f64) -> khessian::Result<ApproximationParams> {
        let p = &self.problem;
        ApproximationParams::new(p.n, p.k, p.t, p.s, p.eps0, eps)
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            rel_tol: self.tolerances.newton_rel,
            abs_tol: self.tolerances.newton_abs,
            max_iterations: self.tolerances.max_iterations,
            ..NewtonOptions::default()
        }
    }

    pub fn audit_config(&self, window: (f64, f64)) -> AuditConfig {
        let t = &self.tolerances;
        AuditConfig {
            window,
            value_tol: t.value_tol,
            gradient_tol: t.gradient_tol,
            laplacian_tol: t.laplacian_tol,
            slope_tol: t.slope_tol,
            slack_factor: t.slack_factor,
            sigma: None,
        }
    }

    /// SHA-256 of the canonical TOML form with `out` cleared, so the hash
    /// identifies the computation rather than where it was written.
    pub fn hash(&self, mode: Mode) -> String {
        let canonical = RunConfig {
            mode: Some(mode),
            out: None,
            ..self.clone()
        };
        let text = toml::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Derived constants of the problem section, one `key = value` per line.
    pub fn derived(&self) -> String {
        let p = &self.problem;
        let mut out = String::new();
        let (n, k) = (p.n as f64, p.k as f64);
        let _ = writeln!(out, "n = {}", p.n);
        let _ = writeln!(out, "k = {}", p.k);
        if p.k < p.n {
            let a = (2.0 * n - k) / (n - k);
            let _ = writeln!(out, "a = {a}");
            let _ = writeln!(out, "sigma_ceiling = {}", (a - 1.0) / (8.0 * a * a));
            let _ = writeln!(out, "decay_exponent = {}", 2.0 - 2.0 * n / k);
        }
        let _ = writeln!(out, "eps0_ceiling = {}", p.s * p.s / 8.0);
        let _ = writeln!(out, "mu = {}", p.t / (n + k - 1.0).sqrt());
        if let Some(params) = p.eps.first().and_then(|&e| self.params(e).ok()) {
            let _ = writeln!(out, "b = {}", params.b);
            let _ = writeln!(out, "R1 = {}", params.r1());
            let _ = writeln!(out, "R2 = {}", params.r2());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_for_every_problem_mode() {
        let c = RunConfig::default();
        for m in [Mode::SolveRadial, Mode::SolveReinhardt, Mode::LimitStudy, Mode::Manufactured, Mode::CheckInequalities] {
            assert!(c.violations(m).is_empty(), "{m:?}: {:?}", c.violations(m));
        }
    }

    #[test]
    fn k_not_below_n_is_rejected() {
        let mut c = RunConfig::default();
        c.problem.k = 2;
        let v = c.violations(Mode::SolveRadial);
        assert!(v.iter().any(|x| x.parameter == "problem.k" && x.admissible.contains("1 <= k < n")));
    }

    #[test]
    fn eps0_above_ceiling_is_rejected() {
        let mut c = RunConfig::default();
        c.problem.eps0 = 0.3;
        let v = c.violations(Mode::SolveRadial);
        assert!(v.iter().any(|x| x.parameter == "problem.eps0" && x.admissible.contains("s^2/8")));
    }

    #[test]
    fn every_violation_is_listed() {
        let mut c = RunConfig::default();
        c.problem.t = 1.5;
        c.problem.outer_radius = vec![2.0];
        c.grid.radial_nodes = 3;
        assert!(c.violations(Mode::SolveRadial).len() >= 3);
    }

    #[test]
    fn hash_ignores_the_output_directory() {
        let a = RunConfig::default();
        let b = RunConfig {
            out: Some("elsewhere".into()),
            ..a.clone()
        };
        assert_eq!(a.hash(Mode::SolveRadial), b.hash(Mode::SolveRadial));
        assert_ne!(a.hash(Mode::SolveRadial), a.hash(Mode::LimitStudy));
    }

    #[test]
    fn derived_constants_include_the_gradient_exponent() {
        let text = RunConfig::default().derived();
        assert!(text.contains("a = 3\n"), "{text}");
    }
}
