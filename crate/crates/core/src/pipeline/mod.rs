//! Config-driven orchestration. Every stage reads its inputs from files
//! and writes its outputs under the run's output directory, so any stage
//! can be rerun on its own from the intermediates of the previous one.

mod config;
mod fixture;
mod stages;

use std::time::Instant;

use crate::error::Result;
use crate::hazard::HazardId;

pub use config::{parse_hazard_list, LineAggregateChoice, NetworkPaths, RunConfig};
pub use fixture::{coverage_scan, generate_fixture, FixtureParams};
pub use stages::{
    assess, check_rate_discipline, econ, ingest, input_checksums, report, sample, selected_hazards,
    FailureReport, HazardSummary, Layout, RunSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Sample,
    Assess,
    Econ,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Ingest, Stage::Sample, Stage::Assess, Stage::Econ, Stage::Report];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Sample => "sample",
            Stage::Assess => "assess",
            Stage::Econ => "econ",
            Stage::Report => "report",
        }
    }
}

/// Run one stage; errors carry the stage name.
pub fn run_stage(stage: Stage, cfg: &RunConfig, hazards: &[HazardId]) -> Result<Option<RunSummary>> {
    let out = Layout::new(cfg.out_dir());
    let r = match stage {
        Stage::Ingest => ingest(cfg, &out).map(|_| None),
        Stage::Sample => sample(cfg, hazards, &out).map(|_| None),
        Stage::Assess => assess(cfg, hazards, &out).map(|_| None),
        Stage::Econ => econ(cfg, hazards, &out).map(|_| None),
        Stage::Report => report(cfg, hazards, &out).map(Some),
    };
    r.map_err(|e| e.in_stage(stage.name()))
}

/// All stages in order.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let start = Instant::now();
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let hazards = selected_hazards(cfg).map_err(|e| e.in_stage("config"))?;
    let mut summary = None;
    for stage in Stage::ALL {
        summary = run_stage(stage, cfg, &hazards)?;
    }
    let mut summary = summary.expect("report stage returns a summary");
    summary.wall_time_s = start.elapsed().as_secs_f64();
    Ok(summary)
}
