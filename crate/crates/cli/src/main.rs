use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ntklab_cli::config::{ExperimentConfig, ExperimentKind};

/// Kernel-spectrum and training-scaling experiments, config file in,
/// CSV/JSON artifacts out.
#[derive(Parser)]
#[command(name = "ntklab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run {
        config: PathBuf,
        /// Override the output directory (else config, $NTKLAB_OUT, or
        /// ./ntklab-artifacts).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statically validate a config without running it.
    Validate { config: PathBuf },
    /// List the available experiment kinds.
    ListKinds,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match cli.command {
        Command::ListKinds => {
            for (name, blurb) in ExperimentKind::all() {
                println!("{name:-18} {blurb}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ExperimentConfig::from_path(&config) {
            Err(err) => {
                eprintln!("invalid: {err:#}");
                ExitCode::from(1)
            }
            Ok((parsed, _)) => {
                let report = parsed.validate();
                if report.is_empty() {
                    println!("ok");
                    ExitCode::SUCCESS
                } else {
                    for line in &report {
                        println!("{line}");
                    }
                    if report.iter().all(|l| l.starts_with("warning:")) {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
            }
        },
        Command::Run { config, out } => {
            let (mut parsed, dir) = match ExperimentConfig::from_path(&config) {
                Ok(v) => v,
                Err(err) => {
                    eprintln!("invalid config: {err:#}");
                    return ExitCode::from(1);
                }
            };
            if let Some(out) = out {
                parsed.output_dir = Some(out);
            }
            let hard_errors: Vec<String> = parsed
                .validate()
                .into_iter()
                .filter(|l| !l.starts_with("warning:"))
                .collect();
            if !hard_errors.is_empty() {
                for line in &hard_errors {
                    eprintln!("invalid config: {line}");
                }
                return ExitCode::from(1);
            }
            match ntklab_cli::run(&parsed, &dir) {
                Ok(output) => {
                    for f in &output.files {
                        println!("wrote {}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(err) => {
                    eprintln!("run failed: {err:#}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
