//! Plot data (gnuplot-ready whitespace columns) and a text summary for a
//! finished run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use super::config::Experiment;
use super::persist::{load, write_atomic};
use super::pipelines::{CoupleResult, EdgeLawResult, EnergyResult, Relation};
use super::run::RunManifest;
use crate::error::{Error, Result};
use crate::stats::{ecdf, EdgeSampleSet};

pub const REPORT_DIR: &str = "report";

fn load_raw<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn ecdf_files(set: &EdgeSampleSet, tag: &str, out: &mut Vec<(String, String)>) -> Result<()> {
    for j in 0..set.width() {
        out.push((format!("ecdf_{tag}_j{j}.dat"), ecdf(&set.coordinate(j))?.to_steps()));
    }
    Ok(())
}

fn columns(x: &[f64], y: &[f64]) -> String {
    x.iter().zip(y).map(|(a, b)| format!("{a:.10e} {b:.10e}\n")).collect()
}

/// Writes plot files and `summary.txt` under `dir/report` for the run whose
/// outputs live in `dir`; returns the written paths.
pub fn render_report(manifest: &RunManifest, dir: &Path) -> Result<Vec<PathBuf>> {
    if !manifest.complete {
        return Err(Error::Config("cannot render an incomplete run".into()));
    }
    let mut files: Vec<(String, String)> = Vec::new();
    let mut extra = String::new();
    match manifest.experiment {
        Experiment::Simulate => ecdf_files(&load(&dir.join("samples.json"))?, "sample", &mut files)?,
        Experiment::Universality => {
            ecdf_files(&load(&dir.join("samples_a.json"))?, "a", &mut files)?;
            ecdf_files(&load(&dir.join("samples_b.json"))?, "goe", &mut files)?;
        }
        Experiment::EdgeLaw => {
            let r: EdgeLawResult = load_raw(&dir.join("edge_law.json"))?;
            files.push(("density.dat".into(), columns(&r.density.e, &r.density.rho)));
            for row in &r.rows {
                let _ = writeln!(extra, "t = {:e}: E_- = {:.12}, xi_- = {:.12}, gamma_0 = {:.10}", row.t, row.e_minus, row.xi_minus, row.gamma0);
            }
            let _ = writeln!(extra, "density mass (trapezoid) = {:.6}", r.density_mass);
        }
        Experiment::Couple => {
            let r: CoupleResult = load_raw(&dir.join("couple.json"))?;
            files.push(("coupled_median.dat".into(), columns(&r.times, &r.medians)));
            let _ = writeln!(extra, "t_1 = {:e}, median ratio at t_1 = {:.4}", r.t1, r.ratio);
        }
        Experiment::ProbeEnergy => {
            let r: EnergyResult = load_raw(&dir.join("energy.json"))?;
            files.push(("decay.dat".into(), columns(&r.times, &r.mean_curve)));
            let (x, y): (Vec<f64>, Vec<f64>) = r
                .times
                .iter()
                .filter(|t| **t >= r.window.0 * (1.0 - 1e-12) && **t <= r.window.1 * (1.0 + 1e-12))
                .map(|t| (*t, (r.intercept + r.slope * t.ln()).exp()))
                .unzip();
            files.push(("decay_fit.dat".into(), columns(&x, &y)));
            let _ = writeln!(extra, "decay slope = {:.4} (95% bootstrap CI [{:.4}, {:.4}]), bound {:.4}", r.slope, r.slope_ci.0, r.slope_ci.1, r.bound);
            let _ = writeln!(extra, "slope over [t_1/8, t_1] = {:.4}", r.short_window_slope);
        }
        _ => {}
    }
    let mut summary = String::new();
    let _ = writeln!(summary, "experiment: {}", manifest.experiment);
    let _ = writeln!(summary, "master seed: {}", manifest.master_seed);
    let _ = writeln!(summary, "wall clock: {:.2} s", manifest.wall_clock_seconds);
    let _ = writeln!(summary, "result: {}", if manifest.passed { "PASS" } else { "FAIL" });
    for v in &manifest.verdicts {
        let rel = match v.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
        };
        let _ = writeln!(summary, "  [{}] {}: {:.6e} {rel} {:.6e}", if v.pass { "pass" } else { "FAIL" }, v.name, v.value, v.threshold);
    }
    for w in &manifest.warnings {
        let _ = writeln!(summary, "warning: {w}");
    }
    summary.push_str(&extra);
    for o in &manifest.outputs {
        let _ = writeln!(summary, "output {} sha256 {}", o.name, o.sha256);
    }
    files.push(("summary.txt".into(), summary));
    let out = dir.join(REPORT_DIR);
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let p = out.join(name);
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}
