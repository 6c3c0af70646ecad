use std::path::PathBuf;
use std::process::ExitCode;

use asycomp::cli::{cmd_correlations, cmd_solve, cmd_sweep, exit_code, RunConfig};
use asycomp::Result;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Sparse asymptotic compression of 2D Helmholtz BEM systems")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dense solve at one wavenumber, optionally compressed.
    Solve(RunArgs),
    /// Recompression sweep from `k` to `k_max`.
    Sweep(RunArgs),
    /// Dense solve and the full correlation grid.
    Correlations(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    config: PathBuf,
    /// Overrides the `output` key.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the file.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn load(args: &RunArgs) -> Result<RunConfig> {
    let mut text = std::fs::read_to_string(&args.config).map_err(|e| asycomp::Error::Config {
        key: "config".into(),
        reason: format!("cannot read {}: {e}", args.config.display()),
    })?;
    for s in &args.set {
        text.push('\n');
        text.push_str(s);
    }
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(out) = &args.output {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn run(args: Args) -> Result<()> {
    match args.command {
        Command::Solve(a) => {
            let out = cmd_solve(&load(&a)?)?;
            out.metrics.write(std::io::stdout())?;
        }
        Command::Sweep(a) => {
            let mut cfg = load(&a)?;
            cfg.method = asycomp::cli::Method::Sweep;
            let records: Vec<_> = cmd_sweep(&cfg)?.into_iter().map(|o| o.metrics).collect();
            asycomp::analysis::MetricsRecord::write_all(&records, std::io::stdout())?;
        }
        Command::Correlations(a) => {
            let r = cmd_correlations(&load(&a)?)?;
            println!("correlation grid {} x {}", r.rows(), r.cols());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
