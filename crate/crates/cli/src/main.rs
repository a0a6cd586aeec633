//! `gridflc` - transient-stability simulation and federated training of
//! distributed neural controllers, driven by one config file.

use clap::{Parser, Subcommand};
use gridflc_cli::commands::{self, CmdError};
use gridflc_cli::schema;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gridflc",
    about = "Swing-equation transient stability with federated Chebyshev-KAN control",
    version
)]
struct Cli {
    /// Print the authoritative config schema and exit.
    #[arg(long, global = true)]
    print_schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trajectory.csv + summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Fault id from the config; omit for a fault-free run.
        #[arg(long)]
        fault: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// FLC model checkpoint (overrides control.checkpoint).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Generate per-generator training shards from a 100% CPFL run.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        fault: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Federated training over previously generated shards.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Directory containing manifest.json and shard files.
        #[arg(long)]
        shards: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override training.master_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Penetration sweep: faults x modes x levels -> results.csv.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Max concurrent sweep cells.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print parameter and FLOP counts for the configured architecture.
    Info {
        #[arg(long)]
        config: PathBuf,
        /// Inspect a trained checkpoint instead of the config architecture.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write the edge-function interpretability report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_schema {
        print!("{}", schema::SCHEMA);
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (see --help)");
        return ExitCode::from(2);
    };
    match run(command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::json!({
                "error": { "kind": err.kind(), "message": err.message() }
            });
            eprintln!("{payload}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<(), CmdError> {
    match command {
        Command::Simulate { config, fault, out, checkpoint } => {
            let loaded = commands::load_config(&config)?;
            commands::cmd_simulate(&loaded, fault.as_deref(), out.as_deref(), checkpoint.as_deref())
        }
        Command::GenData { config, fault, out } => {
            let loaded = commands::load_config(&config)?;
            commands::cmd_gen_data(&loaded, &fault, out.as_deref())
        }
        Command::Train { config, shards, out, seed } => {
            let loaded = commands::load_config(&config)?;
            commands::cmd_train(&loaded, &shards, out.as_deref(), seed)
        }
        Command::Evaluate { config, checkpoint, out, jobs } => {
            let loaded = commands::load_config(&config)?;
            commands::cmd_evaluate(&loaded, &checkpoint, out.as_deref(), jobs)
        }
        Command::Info { config, checkpoint, out } => {
            let loaded = commands::load_config(&config)?;
            commands::cmd_info(&loaded, checkpoint.as_deref(), out.as_deref())
        }
    }
}
