//! Mode pipelines. Each writes its artifacts plus a `manifest.txt` into the
//! output directory and reports whether every audit passed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use khessian::barriers::{radial_sigma, w_eps_jet, ApproximationParams};
use khessian::estimates::{audit_radial, sandwich_nodes, Check, EstimateReport, Status};
use khessian::export::{radial_csv, read_radial_csv, reinhardt_csv, report_csv};
use khessian::geometry::{InnerDomain, NodeClass};
use khessian::radial::{limit_sequence, solve_radial, LimitStudy, Mode as SolveMode, ProblemSpec, Source};
use khessian::reinhardt::{axis_limit_audit, solve_reinhardt, ReinhardtProblem};
use khessian::symmfunc::{run_suite, SuiteConfig};

use crate::config::{Mode, RunConfig};

pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("solver failure in {context}: {source}")]
    Solver {
        context: String,
        source: khessian::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Artifacts(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Artifacts(_) => 2,
            RunError::Solver { .. } => 3,
            RunError::Io { .. } => 3,
        }
    }
}

fn solver(context: impl Into<String>) -> impl FnOnce(khessian::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Solver { context, source }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    AuditFailed,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Passed
        } else {
            Outcome::AuditFailed
        }
    }
}

/// Collects files written under one directory, each tagged with the config hash.
pub struct Output {
    dir: PathBuf,
    hash: String,
    mode: &'static str,
    files: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path, hash: String, mode: &'static str) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash,
            mode,
            files: Vec::new(),
        })
    }

    pub fn hash_entry(&self) -> Vec<(String, String)> {
        vec![("config_hash".into(), self.hash.clone())]
    }

    /// Writes `contents` verbatim; callers put the hash header in themselves.
    pub fn raw(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| RunError::Io { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `contents` after a `# config_hash=` comment line.
    pub fn text(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let tagged = format!("# config_hash={}\n{contents}", self.hash);
        self.raw(name, &tagged)
    }

    pub fn report(&mut self, stem: &str, report: &EstimateReport) -> Result<(), RunError> {
        let mut tagged = report.clone();
        tagged.config.insert(0, ("config_hash".into(), self.hash.clone()));
        self.text(&format!("{stem}.txt"), &report.to_text())?;
        let csv = report_csv(&tagged).map_err(solver(format!("export of {stem}")))?;
        self.raw(&format!("{stem}.csv"), &csv)
    }

    pub fn finish(mut self, outcome: Outcome) -> Result<Vec<String>, RunError> {
        let mut m = String::new();
        let _ = writeln!(m, "mode = {}", self.mode);
        let _ = writeln!(m, "passed = {}", outcome == Outcome::Passed);
        for f in &self.files {
            let _ = writeln!(m, "file = {f}");
        }
        self.text(MANIFEST, &m)?;
        Ok(self.files)
    }
}

pub fn cell_stem(prefix: &str, eps: f64, r: f64) -> String {
    format!("{prefix}_eps{eps}_R{r}")
}

pub fn run(cfg: &RunConfig, mode: Mode, out_dir: &Path) -> Result<Outcome, RunError> {
    cfg.validate(mode)?;
    let mut out = Output::new(out_dir, cfg.hash(mode), mode.label())?;
    let outcome = match mode {
        Mode::CheckInequalities => check_inequalities(cfg, &mut out)?,
        Mode::SolveRadial => solve_radial_cells(cfg, &mut out)?,
        Mode::SolveReinhardt => solve_reinhardt_cells(cfg, &mut out)?,
        Mode::LimitStudy => limit_study(cfg, &mut out)?,
        Mode::Audit => audit(cfg, &mut out)?,
        Mode::Manufactured => manufactured(cfg, &mut out)?,
    };
    out.finish(outcome)?;
    Ok(outcome)
}

fn check_inequalities(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let s = &cfg.suite;
    let suite = SuiteConfig {
        seed: cfg.seed,
        samples: s.samples,
        max_dim: s.max_dim,
        claim_max_dim: s.claim_max_dim,
        tolerance: s.tolerance,
    };
    let report = run_suite(&suite).map_err(solver("inequality suite"))?;
    let mut text = String::new();
    let _ = writeln!(text, "seed = {}\nsamples = {}\ntolerance = {:e}\n", cfg.seed, s.samples, s.tolerance);
    let _ = writeln!(text, "{:<26} {:>8} {:>10} {:>14}", "property", "samples", "violations", "worst");
    let mut csv = format!("# config_hash={}\nproperty,samples,violations,worst\n", out.hash);
    for t in &report.tallies {
        let _ = writeln!(text, "{:<26} {:>8} {:>10} {:>14.6e}", t.name, t.samples, t.violations, t.worst);
        let _ = writeln!(csv, "{},{},{},{:e}", t.name, t.samples, t.violations, t.worst);
    }
    let _ = writeln!(text, "\nequality_defect = {:e}", report.equality_defect);
    let _ = writeln!(text, "violations = {}", report.violations());
    out.text("suite.txt", &text)?;
    out.raw("suite.csv", &csv)?;
    Ok(Outcome::from_pass(report.violations() == 0))
}

fn cells(cfg: &RunConfig) -> Vec<(f64, f64)> {
    let p = &cfg.problem;
    p.outer_radius
        .iter()
        .flat_map(|&r| p.eps.iter().map(move |&e| (e, r)))
        .collect()
}

fn solve_radial_cells(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let opts = cfg.newton();
    let results: Vec<_> = cells(cfg)
        .into_par_iter()
        .map(|(eps, r)| {
            let context = format!("radial cell eps={eps}, R={r}");
            let params = cfg.params(eps).map_err(solver(&context))?;
            let spec = ProblemSpec::exterior(&params, r).map_err(solver(&context))?;
            let sol = solve_radial(&spec, cfg.grid.radial_nodes, &opts).map_err(solver(&context))?;
            let window = cfg.window_for(cfg.problem.s, r).map_err(RunError::Artifacts)?;
            let report = audit_radial(&sol, &params, &cfg.audit_config(window)).map_err(solver(&context))?;
            Ok((eps, r, sol, report))
        })
        .collect::<Result<_, RunError>>()?;
    let mut summary = String::new();
    let mut pass = true;
    for (eps, r, sol, report) in &results {
        let stem = cell_stem("radial", *eps, *r);
        let csv = radial_csv(sol, &out.hash_entry()).map_err(solver("radial export"))?;
        out.raw(&format!("{stem}.csv"), &csv)?;
        out.report(&format!("{}_report", stem), report)?;
        pass &= report.passed();
        let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        let _ = writeln!(
            summary,
            "eps = {eps}  R = {r}  iterations = {}  residual = {:e}  passed = {}{}",
            sol.iterations,
            sol.residual_norm,
            report.passed(),
            if failed.is_empty() { String::new() } else { format!("  failed = {}", failed.join(",")) }
        );
    }
    out.text("summary.txt", &summary)?;
    Ok(Outcome::from_pass(pass))
}

fn reinhardt_report(
    cfg: &RunConfig,
    params: &ApproximationParams,
    problem: &ReinhardtProblem,
    field: &khessian::reinhardt::ReinhardtField,
) -> EstimateReport {
    let grid = &problem.grid;
    let live: Vec<usize> = (0..field.len()).filter(|&q| grid.class(q) != NodeClass::Exterior).collect();
    let s: Vec<f64> = live.iter().map(|&q| grid.rho(q).iter().sum()).collect();
    let v: Vec<f64> = live.iter().map(|&q| field.values[q]).collect();
    let h = grid.spacing;
    let mut report = EstimateReport::default();
    for (key, value) in [
        ("n", params.n.to_string()),
        ("k", params.k.to_string()),
        ("eps", params.eps.to_string()),
        ("outer_radius", grid.outer_sq.sqrt().to_string()),
        ("per_axis", grid.per_axis.to_string()),
        ("spacing", h.to_string()),
        ("residual_norm", format!("{:e}", field.residual_norm)),
        ("iterations", field.iterations.to_string()),
    ] {
        report.config.push((key.into(), value));
    }
    report.checks = sandwich_nodes(&s, &v, params.t, params, cfg.tolerances.slack_factor * h * h);
    report.checks.push(Check {
        name: "cone:margin".into(),
        statement: "smallest normalized S_j over unknown nodes is positive".into(),
        margin: field.cone_margin_min,
        location: f64::NAN,
        slack: 0.0,
        status: if field.cone_margin_min > 0.0 { Status::Pass } else { Status::Fail },
    });
    let axis = axis_limit_audit(field);
    for (name, statement, value) in [
        ("axis:coupling", "max sqrt(rho_j)|v_jk| one step off an axis", axis.offaxis_coupling),
        ("axis:jump_modulus", "spectral jump across an axis divided by h", axis.jump_modulus),
    ] {
        report.checks.push(Check {
            name: name.into(),
            statement: statement.into(),
            margin: value,
            location: f64::NAN,
            slack: 0.0,
            status: Status::Reported,
        });
    }
    if field.fallback_stencils > 0 {
        report
            .warnings
            .push(format!("{} nodes use fallback mixed stencils", field.fallback_stencils));
    }
    report
}

fn inner_domain(cfg: &RunConfig) -> khessian::Result<InnerDomain> {
    let p = &cfg.problem;
    if p.weights.is_empty() {
        Ok(InnerDomain::ball(p.n, p.t))
    } else {
        InnerDomain::ellipsoid(p.weights.clone(), p.t)
    }
}

fn solve_reinhardt_cells(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let opts = cfg.newton();
    let mut pass = true;
    let mut summary = String::new();
    for (eps, r) in cells(cfg) {
        let context = format!("Reinhardt cell eps={eps}, R={r}");
        let inner = inner_domain(cfg).map_err(solver(&context))?;
        let p = &cfg.problem;
        let params = ApproximationParams::new(p.n, p.k, inner.inscribed_radius(), p.s, p.eps0, eps)
            .map_err(solver(&context))?;
        let problem =
            ReinhardtProblem::exterior(&params, inner, r, cfg.grid.per_axis).map_err(solver(&context))?;
        let field = solve_reinhardt(&problem, &opts).map_err(solver(&context))?;
        let report = reinhardt_report(cfg, &params, &problem, &field);
        let stem = cell_stem("reinhardt", eps, r);
        let csv = reinhardt_csv(&field, &out.hash_entry()).map_err(solver("Reinhardt export"))?;
        out.raw(&format!("{stem}.csv"), &csv)?;
        out.report(&format!("{stem}_report"), &report)?;
        pass &= report.passed();
        let _ = writeln!(
            summary,
            "eps = {eps}  R = {r}  iterations = {}  residual = {:e}  passed = {}",
            field.iterations,
            field.residual_norm,
            report.passed()
        );
    }
    out.text("summary.txt", &summary)?;
    Ok(Outcome::from_pass(pass))
}

fn limit_study(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let p = &cfg.problem;
    let base = cfg.params(p.eps[0]).map_err(solver("limit study"))?;
    let mut study = LimitStudy::new(base, p.eps.clone(), p.outer_radius.clone());
    study.per_octave = cfg.grid.per_octave;
    study.newton = cfg.newton();
    study.slack_factor = cfg.tolerances.slack_factor;
    let report = limit_sequence(&study).map_err(solver("limit study"))?;

    let mut mono = format!(
        "# config_hash={}\nkind,lower_eps,lower_R,upper_eps,upper_R,worst,location,slack,pass\n",
        out.hash
    );
    for row in report.r_monotonicity.iter().chain(&report.eps_monotonicity) {
        let _ = writeln!(
            mono,
            "{},{},{},{},{},{:e},{:e},{:e},{}",
            row.kind, row.lower.0, row.lower.1, row.upper.0, row.upper.1, row.worst, row.location, row.slack, row.pass
        );
    }
    out.raw("monotonicity.csv", &mono)?;
    let mut cauchy = format!("# config_hash={}\neps,R_a,R_b,sup_diff,ratio\n", out.hash);
    for c in &report.cauchy {
        let ratio = c.ratio.map(|v| format!("{v:e}")).unwrap_or_default();
        let _ = writeln!(cauchy, "{},{},{},{:e},{}", c.eps, c.r_a, c.r_b, c.sup_diff, ratio);
    }
    out.raw("cauchy.csv", &cauchy)?;
    let mut extra = format!("# config_hash={}\ns,u\n", out.hash);
    for (s, u) in &report.extrapolated {
        let _ = writeln!(extra, "{s:e},{u:e}");
    }
    out.raw("extrapolated.csv", &extra)?;
    for (i, &r) in p.outer_radius.iter().enumerate() {
        for (j, &eps) in p.eps.iter().enumerate() {
            let csv = radial_csv(&report.solutions[i][j], &out.hash_entry()).map_err(solver("radial export"))?;
            out.raw(&format!("{}.csv", cell_stem("radial", eps, r)), &csv)?;
        }
    }
    let mut text = String::new();
    let _ = writeln!(text, "log_spacing = {:e}", report.log_spacing);
    let _ = writeln!(text, "monotone = {}", report.monotone());
    let bad = report
        .r_monotonicity
        .iter()
        .chain(&report.eps_monotonicity)
        .filter(|r| !r.pass)
        .count();
    let _ = writeln!(text, "ordering_failures = {bad}");
    let _ = writeln!(text, "cauchy_rows = {}", report.cauchy.len());
    out.text("limit.txt", &text)?;
    Ok(Outcome::from_pass(report.monotone()))
}

fn audit(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let input = cfg.audit.input.as_ref().expect("validated");
    let sol = read_radial_csv(input).map_err(|e| match e {
        khessian::Error::Io(source) => RunError::Io {
            path: input.clone(),
            source,
        },
        other => RunError::Artifacts(format!("{}: {other}", input.display())),
    })?;
    if sol.meta.mode != SolveMode::Exterior {
        return Err(RunError::Artifacts(format!(
            "{}: audits need an exterior solution, found mode `{}`",
            input.display(),
            sol.meta.mode.label()
        )));
    }
    let m = &sol.meta;
    let params = ApproximationParams::new(m.n, m.k, m.t, m.s, m.eps0, m.eps)
        .map_err(|e| RunError::Artifacts(format!("{}: {e}", input.display())))?;
    let window = cfg.window_for(m.s, m.outer_radius).map_err(RunError::Artifacts)?;
    let report = audit_radial(&sol, &params, &cfg.audit_config(window)).map_err(solver("audit"))?;
    out.report("audit_report", &report)?;
    Ok(Outcome::from_pass(report.passed()))
}

fn manufactured(cfg: &RunConfig, out: &mut Output) -> Result<Outcome, RunError> {
    let m = &cfg.manufactured;
    let opts = cfg.newton();
    let mut table = format!("# config_hash={}\neps,R,nodes,log_spacing,sup_error,order\n", out.hash);
    let mut pass = true;
    for (eps, r) in cells(cfg) {
        let context = format!("manufactured cell eps={eps}, R={r}");
        let params = cfg.params(eps).map_err(solver(&context))?;
        let (n, k, c) = (params.n, params.k, m.shift);
        let exact = {
            let p = params.clone();
            move |s: f64| {
                let j = w_eps_jet(s, &p);
                (j.value + c * s, j.d1 + c, j.d2)
            }
        };
        let src = exact.clone();
        let source = Source::Custom(Arc::new(move |s| {
            let (_, d1, d2) = src(s);
            radial_sigma(n, k, d1, d1 + s * d2)
        }));
        let mut spec = ProblemSpec::exterior(&params, r).map_err(solver(&context))?.with_source(source);
        spec.inner_bc = exact(spec.inner_sq()).0;
        spec.outer_bc = exact(spec.outer_sq()).0;
        let mut prev: Option<(f64, f64)> = None;
        for &nodes in &m.nodes {
            let sol = solve_radial(&spec, nodes, &opts).map_err(solver(&context))?;
            let err = sol
                .grid
                .iter()
                .zip(&sol.g)
                .map(|(&s, &g)| (g - exact(s).0).abs())
                .fold(0.0, f64::max);
            let order = prev.map(|(h0, e0)| (e0 / err).ln() / (h0 / sol.log_spacing).ln());
            if let Some(o) = order {
                pass &= o >= m.min_order && o <= m.max_order;
            }
            let _ = writeln!(
                table,
                "{eps},{r},{nodes},{:e},{err:e},{}",
                sol.log_spacing,
                order.map(|o| format!("{o:.4}")).unwrap_or_default()
            );
            prev = Some((sol.log_spacing, err));
        }
    }
    out.raw("convergence.csv", &table)?;
    Ok(Outcome::from_pass(pass))
}
