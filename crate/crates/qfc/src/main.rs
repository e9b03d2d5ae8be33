use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qfc::cli;
use qfc::PdfSpec;

#[derive(Parser)]
#[command(name = "qfc", version, about = "Quantized-feedback control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a quantizer for a source density and print it
    Quantize(QuantizeArgs),
    /// Run an experiment config and write CSV reports plus a manifest
    Simulate {
        /// TOML config file (see docs/config.md; presets live in presets/)
        config: PathBuf,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the instantaneous-cost bounds for the variable-rate relaxation
    Bounds {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 30)]
        horizon: usize,
    },
    /// Print the high-rate distortion approximation for a source density
    Bennett {
        /// Source density, e.g. gaussian:0,1
        pdf: PdfSpec,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = qfc::density::DEFAULT_TAIL_MASS)]
        tail_mass: f64,
        #[arg(long, default_value_t = qfc::density::DEFAULT_GRID_POINTS)]
        grid_points: usize,
    },
}

#[derive(Args)]
struct QuantizeArgs {
    /// Source density, e.g. gaussian:0,1 | uniform:0,1 | laplace:0,1 | exponential:1
    pdf: PdfSpec,
    /// Rate in bits (2^rate cells)
    #[arg(long, default_value_t = 1)]
    rate: u32,
    /// Design a three-cell silent quantizer with this minimum silent-cell mass
    #[arg(long)]
    delta: Option<f64>,
    /// Per-stage rates of a multi-resolution design, e.g. 1,1
    #[arg(long, value_delimiter = ',')]
    mrsq: Option<Vec<u32>>,
    /// Per-stage weights matching --mrsq, e.g. 1,1
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = qfc::density::DEFAULT_TAIL_MASS)]
    tail_mass: f64,
    #[arg(long, default_value_t = qfc::density::DEFAULT_GRID_POINTS)]
    grid_points: usize,
}

fn run() -> qfc::Result<()> {
    match Cli::parse().command {
        Command::Quantize(args) => {
            let out = cli::cmd_quantize(
                &args.pdf,
                args.rate,
                args.delta,
                args.mrsq.as_deref(),
                args.weights.as_deref(),
                args.tail_mass,
                args.grid_points,
            )?;
            print!("{out}");
        }
        Command::Simulate { config, out } => {
            let manifest = cli::cmd_simulate(&config, &out)?;
            for file in &manifest.outputs {
                println!("{}", out.join(&file.path).display());
            }
            println!("{}", out.join("manifest.json").display());
        }
        Command::Bounds { a, rate, sigma2, horizon } => {
            print!("{}", cli::cmd_bounds(a, rate, sigma2, horizon));
        }
        Command::Bennett { pdf, rate, tail_mass, grid_points } => {
            print!("{}", cli::cmd_bennett(&pdf, rate, tail_mass, grid_points)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
