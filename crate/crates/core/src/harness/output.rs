//! Output files of a tails experiment: `tails.csv`, `report.txt` and
//! `manifest.txt`.
//!
//! Everything is rendered in memory first and then written through
//! temporary files renamed into place, so a failure never leaves a partial
//! `tails.csv` behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::bounds::TailCurve;
use crate::{Error, Result};

use super::config::{ExperimentConfig, GapSource};
use super::experiment::{derived_seeds, TailSummary};

pub const TAILS_FILE: &str = "tails.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub const TAILS_HEADER: &str = "t,L_hat,cheb_log,bern_log,bern_one_sided_log,normal_log";

fn curve_value(curve: Option<&TailCurve>, i: usize) -> String {
    curve.map(|c| c.log_probabilities[i].to_string()).unwrap_or_default()
}

/// One row per grid point; undefined cells are empty.
pub fn render_tails_csv(summary: &TailSummary) -> String {
    let cheb = summary.curve("chebyshev");
    let bern = summary
        .curves
        .iter()
        .find(|c| c.formula_id.starts_with("bernstein_") && !c.formula_id.contains("one_sided"));
    let one = summary.curve("bernstein_one_sided");
    let normal = summary.curve("normal");
    let mut out = String::from(TAILS_HEADER);
    out.push('\n');
    for (i, t) in summary.grid.iter().enumerate() {
        let l_hat = summary.tail.l_hat[i].map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{t},{l_hat},{},{},{},{}",
            curve_value(cheb, i),
            curve_value(bern, i),
            curve_value(one, i),
            curve_value(normal, i)
        );
    }
    out
}

/// Parsed `tails.csv`: rows of `t` followed by the five optional columns.
pub type TailsTable = Vec<(f64, [Option<f64>; 5])>;

pub fn parse_tails_csv(text: &str) -> Result<TailsTable> {
    let mut lines = text.lines();
    if lines.next() != Some(TAILS_HEADER) {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "unexpected tails.csv header".into(),
        });
    }
    lines
        .enumerate()
        .map(|(r, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 6 {
                return Err(Error::Parse {
                    row: r + 2,
                    column: cells.len().min(6),
                    message: format!("expected 6 cells, found {}", cells.len()),
                });
            }
            let num = |c: usize| -> Result<f64> {
                cells[c].parse().map_err(|_| Error::Parse {
                    row: r + 2,
                    column: c + 1,
                    message: format!("not a number: {:?}", cells[c]),
                })
            };
            let mut rest = [None; 5];
            for (c, slot) in rest.iter_mut().enumerate() {
                if !cells[c + 1].is_empty() {
                    *slot = Some(num(c + 1)?);
                }
            }
            Ok((num(0)?, rest))
        })
        .collect()
}

/// Caption-style summary line followed by the resolved parameters and the
/// estimator record. Mixing times are shown floored.
pub fn render_report(summary: &TailSummary, cfg: &ExperimentConfig) -> String {
    let p = &summary.params;
    let gap_label = if p.reversible { "gamma" } else { "gamma_ps" };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} = {:.2e}, t_mix = {}, sigma2 = {}, V_f = {}, t0 = {}, N = {}, C = {}, runs = {}",
        gap_label,
        p.gamma,
        p.tmix.floor(),
        round_sig(p.sigma2, 5),
        round_sig(p.v_f, 4),
        p.t0,
        p.n,
        p.c,
        p.runs
    );
    out.push('\n');
    out.push_str("[parameters]\n");
    let _ = writeln!(out, "observable={}", summary.observable);
    let _ = writeln!(
        out,
        "gap_source={}",
        match p.gap_source {
            GapSource::Analytic => "analytic",
            GapSource::Estimated => "estimated",
        }
    );
    let _ = writeln!(out, "reversible={}", p.reversible);
    let _ = writeln!(out, "gamma={}", p.gamma);
    let _ = writeln!(out, "tmix={}", p.tmix);
    let _ = writeln!(out, "sigma2={}", p.sigma2);
    let _ = writeln!(out, "v_f={}", p.v_f);
    let _ = writeln!(out, "c={}", p.c);
    let _ = writeln!(out, "n={}", p.n);
    let _ = writeln!(out, "t0={}", p.t0);
    let _ = writeln!(out, "e_t0={}", p.e_t0);
    let _ = writeln!(out, "runs={}", p.runs);
    let _ = writeln!(out, "pooled_mean={}", summary.tail.pooled_mean);
    let _ = writeln!(out, "config_sha256={}", cfg.hash());
    if let Some(r) = &summary.report {
        out.push_str("\n[estimator]\n");
        out.push_str(&r.to_record());
    }
    out
}

/// Round to `digits` significant figures for display.
fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

pub fn render_manifest(cfg: &ExperimentConfig) -> String {
    let (est, eval) = derived_seeds(cfg.base_seed);
    let mut out = String::new();
    let _ = writeln!(out, "tool_version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "config_sha256={}", cfg.hash());
    let _ = writeln!(out, "base_seed={}", cfg.base_seed);
    let _ = writeln!(out, "estimation_seed={est}");
    let _ = writeln!(out, "evaluation_seed={eval}");
    let _ = writeln!(out, "runs={}", cfg.runs);
    out.push_str("\n[config]\n");
    out.push_str(&cfg.canonical());
    out
}

/// Write `name → contents` pairs into `dir` via temp files and renames.
pub fn write_atomically(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, contents) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(Error::Io(e));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, target) in &staged {
        fs::rename(tmp, target)?;
    }
    Ok(staged.into_iter().map(|(_, t)| t).collect())
}

/// Write `tails.csv`, `report.txt` and `manifest.txt` into `dir`.
pub fn emit_outputs(summary: &TailSummary, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = [
        (TAILS_FILE, render_tails_csv(summary)),
        (REPORT_FILE, render_report(summary, cfg)),
        (MANIFEST_FILE, render_manifest(cfg)),
    ];
    write_atomically(dir, &files)
}
