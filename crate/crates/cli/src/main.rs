use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use repcascade_cli::{load_config, run_command, CliError, Command, Format, Overrides};

/// Solve, simulate and report on the reputation-cascade model.
#[derive(Debug, Parser)]
#[command(name = "repcascade", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,

    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Simulation seed; overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn run(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let overrides = Overrides {
        out: args.out.clone(),
        seed: args.seed,
        format: args.format,
    };
    let cfg = load_config(&args.config, &overrides)?;
    run_command(&cfg, args.command)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let record = serde_json::to_string(&err.record()).unwrap_or_else(|_| err.to_string());
            eprintln!("{record}");
            if let Some(dir) = &args.out {
                if std::fs::create_dir_all(dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.json"), format!("{record}\n"));
                }
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
