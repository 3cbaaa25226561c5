#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use paralens_cli::run::{self, CheckOptions};
use paralens_cli::{CliError, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "paralens", version, about = "Gradient learning with parametric lenses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Supervised parameter learning.
    Train(RunArgs),
    /// Move the model input toward a target output with parameters frozen.
    Dream(RunArgs),
    /// Generator/discriminator training by descent-ascent.
    Gan(RunArgs),
    /// Gradient checks, reverse-derivative axioms, coherence and the
    /// circuit oracle, as a pass/fail table.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random instances per axiom and for the coherence law.
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 100)]
        composites: usize,
        #[arg(long, default_value_t = 100)]
        circuits: usize,
    },
    /// Time training steps; defaults to a 784-128-10 network.
    Bench {
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            seed: self.seed,
            epochs: self.epochs,
            batch_size: self.batch_size,
            output_dir: self.output_dir.clone(),
        });
        Ok(cfg)
    }
}

fn print_json(v: &impl serde::Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("summaries serialise")
    );
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Train(a) => print_json(&run::train(&a.load()?)?),
        Command::Dream(a) => print_json(&run::dream(&a.load()?)?),
        Command::Gan(a) => print_json(&run::gan(&a.load()?)?),
        Command::Check {
            seed,
            instances,
            composites,
            circuits,
        } => {
            let rows = run::check_rows(&CheckOptions {
                seed,
                instances,
                composites,
                circuits,
            })?;
            print!("{}", run::render_checks(&rows));
            let failed = rows.iter().filter(|r| !r.passed()).count();
            if failed > 0 {
                return Err(CliError::ChecksFailed { failed });
            }
        }
        Command::Bench {
            config,
            steps,
            batch_size,
            seed,
        } => {
            let cfg = config.map(|p| ExperimentConfig::load(&p)).transpose()?;
            print_json(&run::bench(cfg.as_ref(), steps, batch_size, seed)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // usage errors are configuration errors
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
