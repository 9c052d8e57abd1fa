use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use photocount_scenarios::{output_dir, run, Scenario, ScenarioConfig, ScenarioError};

#[derive(Parser)]
#[command(name = "photocount", version, about = "Photon-counting simulations of a multiplexed cavity readout")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its tables and Wigner grids.
    Run {
        scenario: String,
        /// Config file; the scenario's canonical config when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; defaults to $PHOTOCOUNT_OUT/<scenario>.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Dotted `key=value` override, e.g. `drive.beta=-1.2`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List scenarios with descriptions and runtime budgets.
    ListScenarios,
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn load(path: Option<&PathBuf>, scenario: Option<Scenario>, overrides: &[String]) -> Result<ScenarioConfig, ScenarioError> {
    let base = match (path, scenario) {
        (Some(p), _) => ScenarioConfig::load(p)?,
        (None, Some(s)) => s.canonical_config(),
        (None, None) => return Err(ScenarioError::Config("no config given".into())),
    };
    if let Some(s) = scenario {
        if base.scenario != s {
            return Err(ScenarioError::Config(format!("config is for `{}`, not `{s}`", base.scenario)));
        }
    }
    base.with_overrides(overrides)
}

fn execute(cli: Cli) -> Result<(), ScenarioError> {
    match cli.command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<26} {:<8} {}", s.name(), s.runtime_budget(), s.description());
            }
        }
        Command::Validate { config, overrides } => {
            let cfg = load(Some(&config), None, &overrides)?;
            cfg.resolve()?;
            println!("{}: ok ({})", config.display(), cfg.scenario);
        }
        Command::Run { scenario, config, out, workers, overrides } => {
            let scenario: Scenario = scenario.parse()?;
            let cfg = load(config.as_ref(), Some(scenario), &overrides)?;
            let dir = output_dir(out, &cfg);
            let result = run(&cfg, workers)?;
            let manifest = result.write(&dir)?;
            for note in &result.notes {
                eprintln!("note: {note}");
            }
            println!("{} finished in {:.1} s; wrote {}", scenario, result.provenance.wall_time, manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
