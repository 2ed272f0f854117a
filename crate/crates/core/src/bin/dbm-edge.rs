use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dbm_edge::harness::{render_report, run_experiment, Experiment, RunConfig};
use dbm_edge::{Error, Result};

/// Run one edge-statistics experiment and write its outputs, manifest and
/// plot data. Exit status: 0 when every verdict passes, 2 when the run
/// completed with failed verdicts, 1 on errors.
#[derive(Parser, Debug)]
#[command(name = "dbm-edge", version)]
struct Cli {
    /// edge-law, regularity, simulate, universality, couple, rigidity,
    /// local-law, probe-finite-speed or probe-energy
    experiment: Experiment,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, env = "DBM_EDGE_OUT")]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Skip the plot-data bundle.
    #[arg(long)]
    no_report: bool,
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let has_experiment = text.lines().any(|l| l.split('#').next().unwrap_or("").trim_start().starts_with("experiment"));
            let text = if has_experiment { text } else { format!("experiment = {}\n{text}", cli.experiment) };
            RunConfig::parse(&text)?
        }
        None => RunConfig::new(cli.experiment),
    };
    if cfg.experiment != cli.experiment {
        return Err(Error::Config(format!("config is for {}, command line asks for {}", cfg.experiment, cli.experiment)));
    }
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set {kv:?} is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(dir) = &cli.out {
        cfg.out_dir = dir.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = build_config(cli)?;
    let manifest = run_experiment(&cfg)?;
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    for v in &manifest.verdicts {
        println!("{} {}: {:.6e} (threshold {:.6e})", if v.pass { "PASS" } else { "FAIL" }, v.name, v.value, v.threshold);
    }
    if !cli.no_report {
        render_report(&manifest, &cfg.out_dir)?;
    }
    println!("{} in {:.2} s -> {}", if manifest.passed { "passed" } else { "failed" }, manifest.wall_clock_seconds, cfg.out_dir.display());
    Ok(manifest.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
