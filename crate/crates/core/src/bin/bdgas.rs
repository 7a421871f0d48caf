use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bdgas::experiments::{self, ProfileKind};
use bdgas::interval::HeatKernelConfig;
use bdgas::types::ReservoirParams;

#[derive(Parser)]
#[command(name = "bdgas", version, about = "Boundary driven gases: simulation and duality checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Intensity,
    Stationary,
    Kernel,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `mc.seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads. Results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
        /// Add the must-fail comparisons to every check family.
        #[arg(long)]
        negative_control: bool,
    },
    /// Write plot data for an intensity, stationary or kernel profile.
    Profile {
        #[arg(long, value_enum)]
        kind: Profile,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda_left: f64,
        #[arg(long, default_value_t = 2.0)]
        lambda_right: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Starting point of the kernel row.
        #[arg(long, default_value_t = 0.5)]
        x0: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> bdgas::Result<bool> {
    match command {
        Command::Run { config, out, seed, threads, negative_control } => {
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| bdgas::Error::Config(format!("--threads: {e}")))?;
            }
            let pass = experiments::run(&config, &out, seed, negative_control)?;
            if !pass {
                eprintln!("some checks failed; see {}", out.join("checks.csv").display());
            }
            Ok(pass)
        }
        Command::Profile { kind, out, points, lambda_left, lambda_right, t, x0 } => {
            let kind = match kind {
                Profile::Intensity => ProfileKind::Intensity,
                Profile::Stationary => ProfileKind::Stationary,
                Profile::Kernel => ProfileKind::Kernel,
            };
            let p = ReservoirParams::new(lambda_left, lambda_right)?;
            let table = experiments::emit_profile(kind, points, &p, t, x0, &HeatKernelConfig::default())?;
            experiments::write_table_to(&out, &table)?;
            Ok(true)
        }
    }
}
