use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vfc_place::experiments::{
    hop_experiment, penalty_experiment, run_cases, sensitivity_lambda, traffic_report, write_hops,
    write_penalty, write_results, write_sensitivity, ExperimentError, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "vfc", version, about = "Service chain placement experiments on vehicular fog clusters")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Exact solver vs naive baseline over cases A, B and C -> results.csv
    RunCases(Common),
    /// Link/node weight sweep -> sensitivity.csv
    Sensitivity(Common),
    /// Cohesion penalty per mobility kind -> penalty.csv
    Penalty(Common),
    /// Best and worst hop totals per stream count -> hops.csv
    Hops(Common),
    /// Interval-count regressions, LOS and capacity -> traffic_report.csv
    Traffic {
        #[command(flatten)]
        common: Common,
        /// counts CSV; overrides traffic.counts_csv from the config
        #[arg(long)]
        counts: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML scenario file; built-in defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory; overrides `output` from the config
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
}

impl Common {
    fn load(&self) -> Result<(ScenarioConfig, PathBuf), ExperimentError> {
        let cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        let out = self.out.clone().unwrap_or_else(|| cfg.output.clone());
        Ok((cfg, out))
    }
}

/// Ok(false) means every solve came back without a plan.
fn run(verb: Verb) -> Result<bool, ExperimentError> {
    match verb {
        Verb::RunCases(c) => {
            let (cfg, out) = c.load()?;
            let rows = run_cases(&cfg, c.seed_offset)?;
            write_results(&rows, &out.join("results.csv"), cfg.record_elapsed)?;
            log::info!("{} rows", rows.len());
            Ok(rows.iter().any(|r| r.status.has_plan()))
        }
        Verb::Sensitivity(c) => {
            let (cfg, out) = c.load()?;
            let rows = sensitivity_lambda(&cfg, c.seed_offset)?;
            write_sensitivity(&rows, &out.join("sensitivity.csv"))?;
            Ok(rows.iter().any(|r| r.status.has_plan()))
        }
        Verb::Penalty(c) => {
            let (cfg, out) = c.load()?;
            let rows = penalty_experiment(&cfg, c.seed_offset)?;
            write_penalty(&rows, &out.join("penalty.csv"))?;
            Ok(rows.iter().any(|r| r.status.has_plan()))
        }
        Verb::Hops(c) => {
            let (cfg, out) = c.load()?;
            let rows = hop_experiment(&cfg, c.seed_offset)?;
            write_hops(&rows, &out.join("hops.csv"))?;
            Ok(rows.iter().any(|r| r.best_hops.is_some()))
        }
        Verb::Traffic { common, counts } => {
            let (cfg, out) = common.load()?;
            let Some(input) = counts.or(cfg.traffic.counts_csv.clone()) else {
                return Err(ExperimentError::ConfigInvalid("no counts CSV given".into()));
            };
            let r = traffic_report(&input, &cfg.traffic, &out)?;
            log::info!("{} flows, {} malformed rows", r.flows.len(), r.malformed_rows);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().verb) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("no feasible placement in any scenario");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
