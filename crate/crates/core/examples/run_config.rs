//! Drives a run from a flat configuration, as the `asycomp` binary does.
//!
//! Usage: `cargo run --example run_config -- [output-dir]`

use asycomp::cli::{cmd_solve, RunConfig};

const CONFIG: &str = "
# two circles under a point source, compressed with correlation windows
scene = two_circles
wave = point
source_x = 1
source_y = 1
k = 48
method = correlate
xi = 0.003
field_nx = 80
field_ny = 80
";

fn main() -> asycomp::Result<()> {
    let mut cfg = RunConfig::parse(CONFIG)?;
    if let Some(dir) = std::env::args().nth(1) {
        cfg.output = dir.into();
    }
    let out = cmd_solve(&cfg)?;
    out.metrics.write(std::io::stdout())?;
    println!("artifacts in {}", cfg.output.display());
    Ok(())
}
