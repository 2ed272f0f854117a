//! Configuration, orchestration, persistence and report emission.

pub mod config;
pub mod persist;
pub mod pipelines;
pub mod report;
pub mod run;

pub use config::{Experiment, InitialSpec, Route, RunConfig};
pub use persist::{load, persist, Artifact};
pub use pipelines::{Relation, Verdict};
pub use report::render_report;
pub use run::{execute, replay, run_experiment, RunManifest};
