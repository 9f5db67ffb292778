use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use clusterd2d_cli::{exit, run_scenario, CliError, RunOptions, Scenario, Task};

#[derive(Parser)]
#[command(name = "clusterd2d", version, about = "Caching, offloading and delay in clustered D2D networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check every analytic coverage quantity against simulation at the reference parameters.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Print the reference scenario as TOML.
    PrintDefaultConfig,
}

#[derive(clap::Args)]
struct Common {
    /// Master seed for every simulation and random restart.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo trials per validation check.
    #[arg(long)]
    mc_trials: Option<usize>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn apply(&self, scenario: &mut Scenario) {
        if let Some(seed) = self.seed {
            scenario.seed = seed;
        }
        if let Some(out) = &self.out {
            scenario.output_dir = out.clone();
        }
        if let Some(trials) = self.mc_trials {
            scenario.mc_trials = trials;
        }
    }
}

fn execute(mut scenario: Scenario, common: &Common) -> Result<i32, CliError> {
    common.apply(&mut scenario);
    let report = run_scenario(&scenario, &RunOptions { jobs: common.jobs })?;
    for path in &report.csv_files {
        println!("{}", path.display());
    }
    println!("{}", report.summary_file.display());
    if report.numeric_failures > 0 {
        eprintln!("{} point(s) failed numerically", report.numeric_failures);
    }
    if report.failed_checks > 0 {
        eprintln!("{} validation check(s) failed", report.failed_checks);
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, common } => Scenario::load(&scenario).and_then(|s| execute(s, &common)),
        Command::Validate { common } => {
            let scenario = Scenario {
                name: "validate".into(),
                tasks: vec![Task::Validate],
                ..Scenario::reference()
            };
            execute(scenario, &common)
        }
        Command::PrintDefaultConfig => {
            print!("{}", Scenario::reference().to_toml());
            Ok(exit::OK)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::CONFIG as u8)
        }
    }
}
