use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpda::problems::reference_solution;
use dpda_harness::experiment::{check_steps, resolve_bound, run_experiment, setup};
use dpda_harness::output::write_outputs;
use dpda_harness::{ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "dpda-exp", version, about = "Run distributed primal-dual experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all replications and write CSVs and a manifest.
    Run(Target),
    /// Parse the config and check the step sizes of replication 0.
    Validate(Target),
    /// Print the dual bound B for each replication.
    Bound(Target),
}

#[derive(Args)]
struct Target {
    config: PathBuf,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Target {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(r) = self.reps {
            cfg.run.replications = r;
        }
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.run.output = d.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run(t) => {
            let cfg = t.load()?;
            check_steps(&cfg)?;
            let reps = run_experiment(&cfg)?;
            write_outputs(&cfg.run.output, &cfg, &reps)?;
            println!("wrote {} replications to {}", reps.len(), cfg.run.output.display());
        }
        Command::Validate(t) => {
            let cfg = t.load()?;
            check_steps(&cfg)?;
            println!("ok");
        }
        Command::Bound(t) => {
            let cfg = t.load()?;
            for rep in 0..cfg.run.replications {
                let s = setup(&cfg, rep)?;
                let reference = reference_solution(&s.problem, cfg.run.reference_tolerance)?;
                println!("{rep} {}", resolve_bound(&cfg, &s, &reference)?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
