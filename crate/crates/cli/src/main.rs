use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tacgrip::harness::{self, Experiment, Overrides, RunReport};

/// Seeded simulator for a tactile gripper: grasp control, rubbing
/// singulation, scoop statics and card insertion.
#[derive(Parser, Debug)]
#[command(name = "tacgrip", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the scenario described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run a canned experiment and compare it with the published results.
    Reproduce {
        #[arg(value_enum)]
        experiment: ExperimentArg,
        #[command(flatten)]
        flags: Flags,
    },
    /// Evaluate only the [sweep] grid of a config.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Top-level seed (below 2^63).
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per object or configuration.
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory for traces and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            output_dir: self.out.clone(),
            jobs: self.jobs,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ExperimentArg {
    Singulation,
    Insertion,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::Singulation => Experiment::Singulation,
            ExperimentArg::Insertion => Experiment::Insertion,
        }
    }
}

fn configured(path: &Path, flags: &Flags) -> Result<harness::ScenarioConfig> {
    let mut cfg = harness::load_config(path)?;
    flags
        .overrides()
        .apply(&mut cfg)
        .with_context(|| format!("applying command-line overrides to {}", path.display()))?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<RunReport> {
    let report = match cli.command {
        Command::Run { config, flags } => {
            let cfg = configured(&config, &flags)?;
            harness::run(&cfg, flags.jobs)?
        }
        Command::Sweep { config, flags } => {
            let mut cfg = configured(&config, &flags)?;
            cfg.scenario = harness::Scenario::Sweep;
            cfg.validate()?;
            harness::run(&cfg, flags.jobs)?
        }
        Command::Reproduce { experiment, flags } => harness::reproduce(experiment.into(), &flags.overrides())?,
    };
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(report) => {
            print!("{}", summary(&report));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

// Console view: everything but the per-trial rows and the config echo,
// which stay in report.txt.
fn summary(report: &RunReport) -> String {
    let mut out = format!(
        "scenario: {}\nseed: {}\ntrials: {}\nwall_time_s: {:.3}\n",
        report.scenario, report.seed, report.trials, report.wall_time_s
    );
    for (k, v) in &report.aggregates {
        out.push_str(&format!("{k}: {v}\n"));
    }
    for line in &report.comparison {
        out.push_str(line);
        out.push('\n');
    }
    if let Some(path) = report.artifacts.last() {
        out.push_str(&format!("report: {}\n", path.display()));
    }
    out
}
