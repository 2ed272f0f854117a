//! Experiment orchestration: run a pipeline, write its outputs atomically and
//! keep a manifest that is marked incomplete until every output is on disk.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{Experiment, RunConfig};
use super::persist::{persist, sha256_hex, to_json, write_atomic};
use super::pipelines::{self, stream_ranges, StreamRange, Verdict};
use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Canonical config text; `RunConfig::parse` restores the run.
    pub config: String,
    pub code_version: String,
    pub experiment: Experiment,
    pub master_seed: u64,
    pub streams: Vec<StreamRange>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputDigest>,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub passed: bool,
    pub complete: bool,
}

impl RunManifest {
    pub fn config(&self) -> Result<RunConfig> {
        RunConfig::parse(&self.config)
    }

    pub fn output(&self, name: &str) -> Option<&OutputDigest> {
        self.outputs.iter().find(|o| o.name == name)
    }
}

/// Files and verdicts produced by one pipeline.
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub verdicts: Vec<Verdict>,
}

fn json<T: super::persist::Artifact>(name: &str, value: &T) -> Result<(String, Vec<u8>)> {
    Ok((name.to_string(), to_json(value)?.into_bytes()))
}

fn raw<T: Serialize>(name: &str, value: &T) -> Result<(String, Vec<u8>)> {
    Ok((name.to_string(), serde_json::to_string_pretty(value)?.into_bytes()))
}

/// Runs the configured pipeline without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let (files, verdicts) = match cfg.experiment {
        Experiment::EdgeLaw => {
            let r = pipelines::edge_law(cfg)?;
            (vec![raw("edge_law.json", &r)?, ("density.csv".into(), r.density.to_csv().into_bytes())], r.verdicts())
        }
        Experiment::Regularity => {
            let r = pipelines::regularity(cfg)?;
            (vec![raw("regularity.json", &r)?], pipelines::regularity_verdicts(&r))
        }
        Experiment::Simulate => {
            let s = pipelines::simulate(cfg)?;
            (vec![json("samples.json", &s)?, ("samples.csv".into(), s.to_csv().into_bytes())], Vec::new())
        }
        Experiment::Universality => {
            let run = pipelines::universality(cfg)?;
            let files = vec![
                raw("universality.json", &run.result)?,
                json("comparison.json", &run.result.report)?,
                json("samples_a.json", &run.a)?,
                json("samples_b.json", &run.b)?,
                ("samples_a.csv".into(), run.a.to_csv().into_bytes()),
                ("samples_b.csv".into(), run.b.to_csv().into_bytes()),
            ];
            (files, run.result.verdicts())
        }
        Experiment::Couple => {
            let r = pipelines::couple(cfg)?;
            (vec![raw("couple.json", &r)?], r.verdicts())
        }
        Experiment::Rigidity => {
            let r = pipelines::rigidity(cfg)?;
            (vec![raw("rigidity.json", &r)?, json("rigidity_report.json", &r.report)?], r.verdicts())
        }
        Experiment::LocalLaw => {
            let r = pipelines::local_law(cfg)?;
            (vec![raw("local_law.json", &r)?, json("local_law_report.json", &r.report)?], r.verdicts())
        }
        Experiment::ProbeFiniteSpeed => {
            let r = pipelines::probe_finite_speed(cfg)?;
            (vec![raw("finite_speed.json", &r)?], r.verdicts())
        }
        Experiment::ProbeEnergy => {
            let r = pipelines::probe_energy(cfg)?;
            (vec![raw("energy.json", &r)?], r.verdicts())
        }
    };
    Ok(Outcome { files, verdicts })
}

/// Output directory: `override_dir` when given, else the config's.
pub fn output_dir(cfg: &RunConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir.map_or_else(|| cfg.out_dir.clone(), Path::to_path_buf)
}

/// Runs `cfg`, writing outputs and `manifest.json` into `cfg.out_dir`.
///
/// The manifest is written first with `complete = false` and rewritten once
/// every output is in place; on failure it records the error and stays
/// incomplete.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunManifest> {
    let warnings = cfg.validate()?;
    let dir = cfg.out_dir.clone();
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut manifest = RunManifest {
        config: cfg.to_text(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment,
        master_seed: cfg.master_seed,
        streams: stream_ranges(cfg),
        wall_clock_seconds: 0.0,
        outputs: Vec::new(),
        verdicts: Vec::new(),
        warnings,
        error: None,
        passed: false,
        complete: false,
    };
    persist(&manifest, &manifest_path)?;
    let start = Instant::now();
    let result = execute(cfg).and_then(|outcome| {
        for (name, bytes) in &outcome.files {
            write_atomic(&dir.join(name), bytes)?;
            manifest.outputs.push(OutputDigest { name: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        }
        Ok(outcome.verdicts)
    });
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(verdicts) => {
            manifest.passed = verdicts.iter().all(|v| v.pass);
            manifest.verdicts = verdicts;
            manifest.complete = true;
            persist(&manifest, &manifest_path)?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            persist(&manifest, &manifest_path)?;
            Err(e)
        }
    }
}

/// Re-runs the config stored in `manifest` into `dir` and reports whether
/// every output digest matches.
pub fn replay(manifest: &RunManifest, dir: &Path) -> Result<bool> {
    let mut cfg = manifest.config()?;
    cfg.out_dir = dir.to_path_buf();
    let again = run_experiment(&cfg)?;
    Ok(again.outputs == manifest.outputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::persist::load;

    fn edge_cfg(dir: &Path) -> RunConfig {
        let mut cfg = RunConfig::new(Experiment::EdgeLaw);
        cfg.n = 40;
        cfg.t = Some(1.0);
        cfg.initial = "point-mass:0".parse().unwrap();
        cfg.out_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn manifest_records_digests_and_completion() {
        let dir = tempfile::tempdir().unwrap();
        let m = run_experiment(&edge_cfg(dir.path())).unwrap();
        assert!(m.complete && m.passed && m.error.is_none());
        let on_disk: RunManifest = load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(on_disk, m);
        for o in &m.outputs {
            let bytes = std::fs::read(dir.path().join(&o.name)).unwrap();
            assert_eq!(sha256_hex(&bytes), o.sha256);
        }
        assert!(m.output("density.csv").is_some());
    }

    #[test]
    fn failed_pipeline_leaves_incomplete_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = edge_cfg(dir.path());
        cfg.initial = "file:/nonexistent/v.txt".parse().unwrap();
        assert!(run_experiment(&cfg).is_err());
        let m: RunManifest = load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(!m.complete && m.error.is_some() && m.outputs.is_empty());
    }

    #[test]
    fn replay_reproduces_outputs() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let m = run_experiment(&edge_cfg(a.path())).unwrap();
        assert!(replay(&m, b.path()).unwrap());
    }
}
