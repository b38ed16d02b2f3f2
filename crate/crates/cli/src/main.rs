use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mas_cli::{simulate, write_bounds, CliError, RunStatus};

#[derive(Parser)]
#[command(name = "mas", version, about = "Adaptive moving-mesh experiments and theory tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write snapshots, the TV series and a manifest.
    Simulate { config: PathBuf, outdir: PathBuf },
    /// Tabulate extreme magnitudes and bounds with every increase at `C M`.
    Theory {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        m: f64,
        #[arg(long)]
        kmax: usize,
        /// Output file, or a directory to receive `bounds.csv`.
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, outdir } => simulate(&config, &outdir).and_then(|summary| {
            match summary.status {
                RunStatus::Completed => {
                    println!("{} steps, final TV {:.6}", summary.steps, summary.final_tv);
                    Ok(())
                }
                RunStatus::BlowUp { step } => Err(CliError::BlowUp { step }),
                RunStatus::Failed(msg) => Err(CliError::Solver(mas_core::MasError::Config(msg))),
            }
        }),
        Command::Theory { lambda, c, m, kmax, out } => {
            let path = if out.is_dir() { out.join("bounds.csv") } else { out };
            write_bounds(lambda, c, m, kmax, &path).map(|rows| println!("{rows} rows written to {}", path.display()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
