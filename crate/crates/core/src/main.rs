use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use gridrisk::pipeline::{self, parse_hazard_list, FixtureParams, RunConfig, RunSummary, Stage};

#[derive(Parser)]
#[command(name = "gridrisk", version, about = "Multi-hazard risk engine for transmission networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic input set and its config.json
    Fixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 25)]
        substations: usize,
        #[arg(long, default_value_t = 40)]
        lines: usize,
        /// Raster cells per side
        #[arg(long, default_value_t = 50)]
        grid: usize,
    },
    /// Build the network model
    Ingest(RunArgs),
    /// Sample hazard layers at every asset
    Sample(RunArgs),
    /// Damage, loss and failure classification
    Assess(RunArgs),
    /// Service areas and Leontief propagation
    Econ(RunArgs),
    /// Ranking, failure and sector tables plus the run summary
    Report(RunArgs),
    /// All stages in order
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated hazard ids, overriding the config
    #[arg(long)]
    hazards: Option<String>,
    /// Output directory, overriding the config
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(h) = &self.hazards {
            cfg.hazards = parse_hazard_list(h)?;
        }
        if let Some(o) = &self.out {
            // relative to the working directory, not the config
            cfg.output_dir = std::env::current_dir().context("working directory")?.join(o);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_summary(s: &RunSummary) {
    println!("{:<12} {:>18} {:>8} {:>8} {:>14} {:>10}", "hazard", "EAD (USD/day)", "failed", "lines", "L_pop", "m");
    for h in &s.hazards {
        println!(
            "{:<12} {:>18.2} {:>8} {:>8} {:>14} {:>10}",
            h.hazard_id.as_str(),
            h.total_ead_cents as f64 / 100.0,
            h.failed_substations,
            h.failed_lines,
            h.l_pop,
            h.multiplier.map(|m| format!("{m:.4}")).unwrap_or_else(|| "-".into()),
        );
    }
    println!("total EAD: {:.2} USD/day", s.total_ead_cents as f64 / 100.0);
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let (stage, args) = match cli.command {
        Command::Fixture { out, seed, substations, lines, grid } => {
            let cfg = pipeline::generate_fixture(
                &out,
                FixtureParams { seed, n_substations: substations, n_lines: lines, grid },
            )?;
            println!("{}", cfg.display());
            return Ok(());
        }
        Command::Run(a) => {
            let cfg = a.load()?;
            let s = pipeline::run(&cfg)?;
            print_summary(&s);
            println!("wall time: {:.3} s", s.wall_time_s);
            return Ok(());
        }
        Command::Ingest(a) => (Stage::Ingest, a),
        Command::Sample(a) => (Stage::Sample, a),
        Command::Assess(a) => (Stage::Assess, a),
        Command::Econ(a) => (Stage::Econ, a),
        Command::Report(a) => (Stage::Report, a),
    };
    let cfg = args.load()?;
    let hazards = pipeline::selected_hazards(&cfg)?;
    if let Some(s) = pipeline::run_stage(stage, &cfg, &hazards)? {
        print_summary(&s);
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<gridrisk::Error>().map_or(2, gridrisk::Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
