//! Smooth windows against plain truncation to the same pattern.
//!
//! Usage: `cargo run --example block_truncation -- [k]`

use std::sync::Arc;

use asycomp::analysis::boundary_residual;
use asycomp::compression::{block_window_truncation, compress, correlation_windows, solve_sparse, CorrelationConfig};
use asycomp::discretization::{assemble_system, Degree, Discretization};
use asycomp::geometry::{preset_scene, IncidentWave, Preset, PresetParams, Vec2};
use asycomp::kernel::Wavenumber;
use asycomp::solve::{dense_solve, SolveMethod};
use num_complex::Complex64;

fn main() -> asycomp::Result<()> {
    let k: f64 = std::env::args().nth(1).map_or(128.0, |s| s.parse().expect("k must be a number"));
    let scene = Arc::new(preset_scene(Preset::NearInclusion, &PresetParams::new())?);
    let wave = IncidentWave::plane(Vec2::new(1.0, 0.0), Complex64::new(1.0, 0.0))?;
    let disc = Discretization::new(scene, Wavenumber::new(k)?, 10.0, Degree::Linear)?;
    let sys = assemble_system(&disc, &wave)?;
    let c = dense_solve(&sys.a, &sys.b)?.x;
    let (_, ws) = correlation_windows(&sys.a, &c, &disc, &CorrelationConfig::default())?;

    println!("dense  residual {:.3e}", boundary_residual(&disc, &c, &wave, 1)?);
    for (name, m) in [
        ("smooth", compress(&sys.a, &ws, &disc)?),
        ("block", block_window_truncation(&sys.a, &ws, &disc)?),
    ] {
        let x = solve_sparse(&m, &sys.b, SolveMethod::Direct, 0.0)?.x;
        println!(
            "{name:<6} residual {:.3e}  nnz {:.3}",
            boundary_residual(&disc, &x, &wave, 1)?,
            m.nnz_fraction()
        );
    }
    Ok(())
}
