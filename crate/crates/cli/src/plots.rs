//! Plot data from a finished run: two-column ASCII files plus gnuplot scripts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use khessian::export::{decay_series, plot_columns, read_radial_csv};
use khessian::radial::{Mode as SolveMode, RadialSolution};

use crate::run::{Outcome, Output, RunError, MANIFEST};

const EXPECTED: &str = "manifest.txt from a finished run, with radial_*.csv snapshots \
     (solve-radial, limit-study) or convergence.csv (manufactured)";

struct Manifest {
    hash: String,
    files: Vec<String>,
}

fn read_manifest(dir: &Path) -> Result<Manifest, RunError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|_| {
        RunError::Artifacts(format!("no run artifacts in {}; expected {EXPECTED}", dir.display()))
    })?;
    let mut hash = None;
    let mut files = Vec::new();
    for line in text.lines() {
        if let Some(h) = line.strip_prefix("# config_hash=") {
            hash = Some(h.to_string());
        } else if let Some(f) = line.strip_prefix("file = ") {
            files.push(f.to_string());
        }
    }
    let hash = hash.ok_or_else(|| RunError::Artifacts(format!("{} has no config_hash line", path.display())))?;
    let missing: Vec<&String> = files.iter().filter(|f| !dir.join(f).is_file()).collect();
    if !missing.is_empty() {
        return Err(RunError::Artifacts(format!(
            "{} lists files that are missing: {}",
            path.display(),
            missing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(Manifest { hash, files })
}

/// Point near the geometric middle of a series, used to anchor reference lines.
fn anchor(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let good: Vec<&(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).collect();
    good.get(good.len() / 2).map(|p| **p)
}

fn loglog_script(title: &str, data: &str, xlabel: &str, ylabel: &str, reference: Option<(f64, (f64, f64))>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    match reference {
        Some((slope, (x0, y0))) => {
            let _ = writeln!(s, "ref(x) = {y0:e} * (x / {x0:e})**({slope})");
            let _ = writeln!(
                s,
                "plot '{data}' using 1:2 with lines title 'computed', ref(x) with lines dashtype 2 title 'slope {slope}'"
            );
        }
        None => {
            let _ = writeln!(s, "plot '{data}' using 1:2 with lines title 'computed'");
        }
    }
    s
}

fn radial_plots(out: &mut Output, stem: &str, sol: &RadialSolution, comments: &[String]) -> Result<(), RunError> {
    let q = 2.0 - 2.0 * sol.meta.n as f64 / sol.meta.k as f64;
    let slopes = [q, q - 1.0, q - 2.0];
    let labels = ["-u", "|Du|", "Laplacian of u"];
    for (((name, points), slope), label) in decay_series(sol).into_iter().zip(slopes).zip(labels) {
        let data = format!("{stem}_{name}.dat");
        out.raw(&data, &plot_columns(comments, &points))?;
        let script = loglog_script(&format!("{stem}: {label}"), &data, "|z|", label, anchor(&points).map(|a| (slope, a)));
        out.text(&format!("{stem}_{name}.gp"), &script)?;
    }
    let margin: Vec<(f64, f64)> = sol.grid.iter().zip(&sol.margin).map(|(s, m)| (s.sqrt(), *m)).collect();
    let data = format!("{stem}_margin.dat");
    out.raw(&data, &plot_columns(comments, &margin))?;
    let mut script = String::new();
    let _ = writeln!(script, "set logscale x");
    let _ = writeln!(script, "set title '{stem}: cone margin'");
    let _ = writeln!(script, "set xlabel '|z|'");
    let _ = writeln!(script, "plot '{data}' using 1:2 with lines title 'min_j S_j / max|lambda|^j'");
    out.text(&format!("{stem}_margin.gp"), &script)?;
    Ok(())
}

/// `(eps, R, h, error, order)`.
type ConvergenceRow = (String, String, f64, f64, Option<f64>);

fn convergence_rows(text: &str) -> Result<Vec<ConvergenceRow>, String> {
    let mut rows = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(format!("malformed row `{line}`"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
        let order = if f[5].is_empty() { None } else { Some(num(f[5])?) };
        rows.push((f[0].to_string(), f[1].to_string(), num(f[3])?, num(f[4])?, order));
    }
    Ok(rows)
}

fn convergence_plots(out: &mut Output, text: &str, comments: &[String]) -> Result<(), RunError> {
    let rows = convergence_rows(text).map_err(|e| RunError::Artifacts(format!("convergence.csv: {e}")))?;
    let mut table = String::new();
    let _ = writeln!(table, "{:>8} {:>8} {:>14} {:>14} {:>8}", "eps", "R", "log_spacing", "sup_error", "order");
    let mut groups: Vec<(String, String)> = Vec::new();
    for (eps, r, h, e, o) in &rows {
        let o = o.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(table, "{eps:>8} {r:>8} {h:>14.6e} {e:>14.6e} {o:>8}");
        if !groups.contains(&(eps.clone(), r.clone())) {
            groups.push((eps.clone(), r.clone()));
        }
    }
    out.text("order_table.txt", &table)?;
    for (eps, r) in groups {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|row| row.0 == eps && row.1 == r)
            .map(|row| (row.2, row.3))
            .collect();
        let stem = format!("convergence_eps{eps}_R{r}");
        let data = format!("{stem}.dat");
        out.raw(&data, &plot_columns(comments, &points))?;
        let script = loglog_script(&stem, &data, "log spacing", "sup error", anchor(&points).map(|a| (2.0, a)));
        out.text(&format!("{stem}.gp"), &script)?;
    }
    Ok(())
}

/// Writes plot files under `<dir>/plots`. Returns the files written; an empty
/// list means the run had nothing to plot and no directory was created.
pub fn export_plots(dir: &Path) -> Result<Vec<String>, RunError> {
    let manifest = read_manifest(dir)?;
    let comments = vec![format!("config_hash={}", manifest.hash)];
    let mut radial = Vec::new();
    let mut convergence = None;
    for f in &manifest.files {
        let path = dir.join(f);
        if f.starts_with("radial_") && f.ends_with(".csv") {
            let sol = read_radial_csv(&path).map_err(|e| RunError::Artifacts(format!("{}: {e}", path.display())))?;
            if sol.meta.mode == SolveMode::Exterior {
                radial.push((f.trim_end_matches(".csv").to_string(), sol));
            }
        } else if f == "convergence.csv" {
            convergence = Some(fs::read_to_string(&path).map_err(|source| RunError::Io { path, source })?);
        }
    }
    if radial.is_empty() && convergence.is_none() {
        return Ok(Vec::new());
    }
    let mut out = Output::new(&dir.join("plots"), manifest.hash.clone(), "plots")?;
    for (stem, sol) in &radial {
        radial_plots(&mut out, stem, sol, &comments)?;
    }
    if let Some(text) = convergence {
        convergence_plots(&mut out, &text, &comments)?;
    }
    out.finish(Outcome::Passed)
}
