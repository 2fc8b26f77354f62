use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sfsearch::config::ExperimentConfig;
use sfsearch::error::Error;
use sfsearch::experiment::{
    brute_force_oracle, evaluator_for, log_file_name, report, run_experiment, run_search,
    write_atomic, write_oracle_csv,
};
use sfsearch::search::{Algorithm, RunStatus};

/// Search a discretized rear-end scenario space for safety-critical cases.
#[derive(Parser)]
#[command(name = "sfsearch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every scenario in the grid and write oracle.csv.
    Enumerate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (overrides SF_WORKERS and the config file).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run one search and write its evaluation log.
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        algo: Algorithm,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every configured algorithm and seed and write the comparison bundle.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the comparison table of a bundle.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 1 } else { 2 })
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::load(path)
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Enumerate {
            config,
            out,
            workers,
        } => {
            let cfg = load(&config)?;
            let workers = cfg.resolved_workers(workers)?;
            create_dir(&out)?;
            let oracle = brute_force_oracle(&cfg.space, &evaluator_for(&cfg), workers)?;
            write_atomic(&out.join("oracle.csv"), |w| {
                write_oracle_csv(&cfg.space, &oracle, w)
            })?;
            println!("{} scenarios", oracle.len());
            let mut counts = [0usize; 5];
            for r in &oracle {
                counts[r.class.ordinal()] += 1;
            }
            for class in sfsearch::risk::ScenarioClass::ALL {
                println!("{:<10} {}", class.as_str(), counts[class.ordinal()]);
            }
            Ok(())
        }
        Command::Search {
            config,
            algo,
            seed,
            out,
        } => {
            let cfg = load(&config)?;
            create_dir(&out)?;
            let run = run_search(&cfg, algo, seed, &evaluator_for(&cfg))?;
            write_atomic(&out.join(log_file_name(algo, seed)), |w| {
                run.write_log_csv(w)
            })?;
            println!("{algo} seed {seed}: {} evaluations", run.n_evals());
            match run.status {
                RunStatus::Failed(msg) => Err(Error::Simulation(msg)),
                _ => Ok(()),
            }
        }
        Command::Compare {
            config,
            out,
            workers,
        } => {
            let cfg = load(&config)?;
            let workers = cfg.resolved_workers(workers)?;
            let outcome = run_experiment(&cfg, &out, workers)?;
            let failures = outcome.failures();
            if failures.is_empty() {
                print!("{}", report(&out)?);
                Ok(())
            } else {
                Err(Error::Simulation(failures.join("; ")))
            }
        }
        Command::Report { input } => {
            print!("{}", report(&input)?);
            Ok(())
        }
    }
}
