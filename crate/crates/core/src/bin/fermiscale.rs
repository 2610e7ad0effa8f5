use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fermiscale::experiment::{oracle_deviation, run_experiment, ComputePath, RunOptions};
use fermiscale::{validate_config, Error, ExperimentConfig};

/// Spatial scaling of noise, response and entanglement in free-fermion lattices.
#[derive(Parser)]
#[command(name = "fermiscale", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory (overrides the config's `output_dir`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 lets the runtime decide
    #[arg(long, env = "FERMISCALE_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    no_plots: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts
    Run(RunArgs),
    /// Check a config without running it
    Validate { config: PathBuf },
    /// Run with the literal site-sum structure factor and compare to the fast path
    Oracle(RunArgs),
}

const OK: u8 = 0;
const INVALID: u8 = 1;
const RUNTIME: u8 = 2;

const ORACLE_TOLERANCE: f64 = 1e-10;

fn load(path: &PathBuf) -> Result<ExperimentConfig, u8> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        INVALID
    })?;
    validate_config(&text).map_err(|e| {
        eprintln!("error: {e}");
        INVALID
    })
}

fn set_threads(threads: Option<usize>) -> Result<(), u8> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| {
                eprintln!("error: thread pool: {e}");
                RUNTIME
            })?;
    }
    Ok(())
}

fn run(args: &RunArgs, path: ComputePath) -> Result<(), u8> {
    let config = load(&args.config)?;
    set_threads(args.threads)?;
    let options = RunOptions {
        path,
        plots: !args.no_plots,
        out_dir: args.out.clone(),
    };
    if path == ComputePath::Naive {
        let mut worst: f64 = 0.0;
        for (dims, dev) in oracle_deviation(&config).map_err(runtime)? {
            println!("oracle {dims:?}: max |fast - naive| = {dev:e}");
            worst = worst.max(dev);
        }
        if worst > ORACLE_TOLERANCE {
            eprintln!("error: fast and naive spectra differ by {worst:e} (tolerance {ORACLE_TOLERANCE:e})");
            return Err(RUNTIME);
        }
    }
    let record = run_experiment(&config, &options).map_err(runtime)?;
    println!(
        "{}: {} sizes, Δω = {}, written to {} in {:.2} s",
        record.name,
        record.sizes.len(),
        record.delta_omega.unwrap_or(f64::NAN),
        record.output_dir.display(),
        record.wall_time_s
    );
    if let Some(report) = &record.scaling_report {
        println!("scaling report: {}", report.display());
    }
    Ok(())
}

fn runtime(e: Error) -> u8 {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) => INVALID,
        _ => RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage mistakes count as invalid input, not runtime failures
            return ExitCode::from(if e.use_stderr() { INVALID } else { OK });
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run(args, ComputePath::Fast),
        Command::Oracle(args) => run(args, ComputePath::Naive),
        Command::Validate { config } => load(config).map(|c| {
            println!("{}: ok ({} sizes, hash {})", c.name, c.sizes.len(), c.hash);
        }),
    };
    ExitCode::from(result.err().unwrap_or(OK))
}
