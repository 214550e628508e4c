use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use zeno_histories_cli::{run_file, validate_file, EXIT_INVALID, EXIT_OK};

#[derive(Parser)]
#[command(
    name = "zeno-histories",
    version,
    about = "Run direct-integral history and Zeno experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and run an experiment config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List every problem in a config without running it.
    Validate { config: PathBuf },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => match run_file(&config, out.as_deref()) {
            Ok(written) => {
                println!("wrote {}", written.records.display());
                println!("wrote {}", written.summary.display());
                code(EXIT_OK)
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(e.exit_code())
            }
        },
        Command::Validate { config } => match validate_file(&config) {
            Ok(diags) if diags.is_empty() => {
                println!("ok");
                code(EXIT_OK)
            }
            Ok(diags) => {
                for d in &diags {
                    println!("{d}");
                }
                code(EXIT_INVALID)
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(EXIT_INVALID)
            }
        },
    }
}
