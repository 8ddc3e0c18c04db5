//! CSV snapshots and plot data.
//!
//! Every file opens with `# key=value` comment lines followed by a CSV table.
//! Floats are written in shortest round-trip scientific notation, so equal
//! inputs give byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimates::EstimateReport;
use crate::radial::{Mode, RadialSolution, SolutionMeta};
use crate::reinhardt::ReinhardtField;

pub const RADIAL_COLUMNS: [&str; 8] = [
    "s",
    "r",
    "g",
    "g1",
    "g2",
    "lambda_min",
    "cone_margin",
    "residual",
];

/// Ordered `key=value` header entries.
pub type Header = Vec<(String, String)>;

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn write_header(out: &mut Vec<u8>, header: &[(String, String)]) -> Result<()> {
    for (k, v) in header {
        if k.contains('=') || k.contains('\n') || v.contains('\n') {
            return Err(Error::Format(format!("header entry {k:?} cannot be written")));
        }
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

/// Header entries describing a radial solution.
pub fn radial_header(sol: &RadialSolution) -> Header {
    let m = &sol.meta;
    [
        ("n", m.n.to_string()),
        ("k", m.k.to_string()),
        ("eps", num(m.eps)),
        ("eps0", num(m.eps0)),
        ("t", num(m.t)),
        ("s", num(m.s)),
        ("R", num(m.outer_radius)),
        ("mode", m.mode.label().to_string()),
        ("source", m.source.clone()),
        ("residual_norm", num(sol.residual_norm)),
        ("iterations", sol.iterations.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Radial snapshot as text; `extra` entries (a config hash, say) follow the
/// solution header.
pub fn radial_csv(sol: &RadialSolution, extra: &[(String, String)]) -> Result<String> {
    let mut out = Vec::new();
    write_header(&mut out, &radial_header(sol))?;
    write_header(&mut out, extra)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(RADIAL_COLUMNS)?;
        for i in 0..sol.len() {
            let s = sol.grid[i];
            w.write_record([
                num(s),
                num(s.sqrt()),
                num(sol.g[i]),
                num(sol.g1[i]),
                num(sol.g2[i]),
                num(sol.lambda_min[i]),
                num(sol.margin[i]),
                num(sol.residual[i]),
            ])?;
        }
        w.flush()?;
    }
    String::from_utf8(out).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_radial_csv(path: &Path, sol: &RadialSolution, extra: &[(String, String)]) -> Result<()> {
    fs::write(path, radial_csv(sol, extra)?)?;
    Ok(())
}

/// Splits leading `# key=value` lines from the table body.
pub fn split_header(text: &str) -> Result<(Header, &str)> {
    let mut header = Vec::new();
    let mut rest = text;
    while let Some(line) = rest.strip_prefix('#') {
        let (entry, tail) = line.split_once('\n').unwrap_or((line, ""));
        let (k, v) = entry
            .trim()
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("header line without '=': {entry:?}")))?;
        header.push((k.trim().to_string(), v.trim().to_string()));
        rest = tail;
    }
    Ok((header, rest))
}

fn lookup<'a>(header: &'a [(String, String)], key: &str) -> Result<&'a str> {
    header
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Format(format!("missing header key `{key}`")))
}

fn parse<T: std::str::FromStr>(header: &[(String, String)], key: &str) -> Result<T> {
    let v = lookup(header, key)?;
    v.parse()
        .map_err(|_| Error::Format(format!("header `{key}` has unreadable value {v:?}")))
}

/// Reads a snapshot written by [`radial_csv`].
pub fn parse_radial_csv(text: &str) -> Result<RadialSolution> {
    let (header, body) = split_header(text)?;
    let mode = match lookup(&header, "mode")? {
        "exterior" => Mode::Exterior,
        "ring" => Mode::Ring,
        other => return Err(Error::Format(format!("unknown mode {other:?}"))),
    };
    let meta = SolutionMeta {
        n: parse(&header, "n")?,
        k: parse(&header, "k")?,
        eps: parse(&header, "eps")?,
        eps0: parse(&header, "eps0")?,
        t: parse(&header, "t")?,
        s: parse(&header, "s")?,
        outer_radius: parse(&header, "R")?,
        mode,
        source: lookup(&header, "source")?.to_string(),
    };
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if columns != RADIAL_COLUMNS {
        return Err(Error::Format(format!("unexpected columns {columns:?}")));
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); RADIAL_COLUMNS.len()];
    for record in reader.records() {
        let record = record?;
        for (j, field) in record.iter().enumerate() {
            let v = field
                .parse()
                .map_err(|_| Error::Format(format!("unreadable number {field:?}")))?;
            cols[j].push(v);
        }
    }
    let len = cols[0].len();
    if len < 3 {
        return Err(Error::Format(format!("snapshot has only {len} rows")));
    }
    let grid = cols[0].clone();
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Format("grid is not strictly increasing".into()));
    }
    let log_spacing = (grid[len - 1] / grid[0]).ln() / (len - 1) as f64;
    let margin = cols[6].clone();
    let residual = cols[7].clone();
    Ok(RadialSolution {
        residual_norm: residual.iter().fold(0.0, |m, r| m.max(r.abs())),
        cone_margin_min: margin[1..len - 1].iter().copied().fold(f64::INFINITY, f64::min),
        iterations: parse(&header, "iterations").unwrap_or(0),
        history: Vec::new(),
        meta,
        grid,
        log_spacing,
        g: cols[2].clone(),
        g1: cols[3].clone(),
        g2: cols[4].clone(),
        lambda_min: cols[5].clone(),
        margin,
        residual,
    })
}

pub fn read_radial_csv(path: &Path) -> Result<RadialSolution> {
    parse_radial_csv(&fs::read_to_string(path)?)
}

/// Reinhardt snapshot: one row per non-exterior node with `ρ`, `v`, the
/// spectrum, cone margin, residual and node class.
pub fn reinhardt_csv(field: &ReinhardtField, extra: &[(String, String)]) -> Result<String> {
    let grid = &field.grid;
    let n = grid.dim;
    let mut header: Header = vec![
        ("n".into(), n.to_string()),
        ("k".into(), field.k.to_string()),
        ("per_axis".into(), grid.per_axis.to_string()),
        ("spacing".into(), num(grid.spacing)),
        ("R".into(), num(grid.outer_sq.sqrt())),
        (
            "hole_weights".into(),
            grid.inner
                .weights
                .iter()
                .map(|w| num(*w))
                .collect::<Vec<_>>()
                .join(" "),
        ),
        ("hole_level".into(), num(grid.inner.level)),
        ("residual_norm".into(), num(field.residual_norm)),
        ("cone_margin_min".into(), num(field.cone_margin_min)),
        ("fallback_stencils".into(), field.fallback_stencils.to_string()),
        ("iterations".into(), field.iterations.to_string()),
    ];
    header.extend_from_slice(extra);
    let mut out = Vec::new();
    write_header(&mut out, &header)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut cols: Vec<String> = (0..n).map(|j| format!("rho{j}")).collect();
        cols.push("v".into());
        cols.extend((0..n).map(|j| format!("lambda{j}")));
        cols.extend(["cone_margin".into(), "residual".into(), "class".into()]);
        w.write_record(&cols)?;
        for p in 0..field.len() {
            let class = grid.class(p);
            if !field.values[p].is_finite() {
                continue;
            }
            let mut row: Vec<String> = grid.rho(p).into_iter().map(num).collect();
            row.push(num(field.values[p]));
            match &field.nodes[p] {
                Some(state) => {
                    row.extend(state.spectrum.values().iter().map(|v| num(*v)));
                    row.push(num(state.margin));
                    row.push(num(state.residual));
                }
                None => row.extend(std::iter::repeat_n(String::new(), n + 2)),
            }
            row.push(class.label().to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    String::from_utf8(out).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_reinhardt_csv(path: &Path, field: &ReinhardtField, extra: &[(String, String)]) -> Result<()> {
    fs::write(path, reinhardt_csv(field, extra)?)?;
    Ok(())
}

/// Two-column ASCII data with `#` comment lines, readable by gnuplot.
pub fn plot_columns(comments: &[String], points: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    for (x, y) in points {
        out.push_str(&format!("{} {}\n", num(*x), num(*y)));
    }
    out
}

/// `(|z|, -u)`, `(|z|, |Du|)` and `(|z|, Δu)` for log-log decay plots.
pub fn decay_series(sol: &RadialSolution) -> [(String, Vec<(f64, f64)>); 3] {
    let n = sol.meta.n as f64;
    let mut value = Vec::new();
    let mut grad = Vec::new();
    let mut lap = Vec::new();
    for i in 0..sol.len() {
        let s = sol.grid[i];
        let r = s.sqrt();
        value.push((r, -sol.g[i]));
        grad.push((r, 2.0 * r * sol.g1[i].abs()));
        lap.push((r, 4.0 * (n * sol.g1[i] + s * sol.g2[i])));
    }
    [
        ("value".into(), value),
        ("gradient".into(), grad),
        ("laplacian".into(), lap),
    ]
}

/// Machine-readable check records of a report.
pub fn report_csv(report: &EstimateReport) -> Result<String> {
    let mut out = Vec::new();
    write_header(&mut out, &report.config)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["name", "statement", "margin", "location", "slack", "status"])?;
        for r in report.records() {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    String::from_utf8(out).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::ApproximationParams;
    use crate::radial::{solve_radial, NewtonOptions, ProblemSpec};

    fn solution() -> RadialSolution {
        let p = ApproximationParams::new(2, 1, 0.5, 1.5, 0.25, 0.1).unwrap();
        let spec = ProblemSpec::exterior(&p, 4.0).unwrap();
        solve_radial(&spec, 64, &NewtonOptions::default()).unwrap()
    }

    #[test]
    fn radial_snapshot_reads_back_exactly() {
        let sol = solution();
        let extra = vec![("config_hash".to_string(), "abc123".to_string())];
        let text = radial_csv(&sol, &extra).unwrap();
        assert!(text.starts_with("# n=2\n# k=1\n"));
        assert!(text.contains("# config_hash=abc123\n"));
        let back = parse_radial_csv(&text).unwrap();
        assert_eq!(back.g, sol.g);
        assert_eq!(back.grid, sol.grid);
        assert_eq!(back.g2, sol.g2);
        assert_eq!(back.meta, sol.meta);
        assert_eq!(radial_csv(&back, &extra).unwrap(), text);
    }

    #[test]
    fn malformed_snapshots_are_rejected() {
        assert!(parse_radial_csv("# n=2\ns,r\n1,1\n").is_err());
        assert!(parse_radial_csv("# n\n").is_err());
        let text = radial_csv(&solution(), &[]).unwrap();
        assert!(parse_radial_csv(&text.replace("mode=exterior", "mode=annulus")).is_err());
    }

    #[test]
    fn header_values_cannot_inject_lines() {
        let bad = vec![("note".to_string(), "a\nb".to_string())];
        assert!(radial_csv(&solution(), &bad).is_err());
    }

    #[test]
    fn plot_columns_layout() {
        let text = plot_columns(&["slope -2".into()], &[(1.0, 2.0), (2.0, 0.5)]);
        assert_eq!(text, "# slope -2\n1e0 2e0\n2e0 5e-1\n");
    }
}
