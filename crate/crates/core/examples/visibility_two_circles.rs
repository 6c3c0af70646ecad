//! Windows from geometric visibility on two circles.
//!
//! Usage: `cargo run --example visibility_two_circles -- [k]`

use std::sync::Arc;

use asycomp::analysis::boundary_residual;
use asycomp::compression::{compress, solve_sparse};
use asycomp::discretization::{assemble_system, Degree, Discretization};
use asycomp::geometry::{preset_scene, IncidentWave, Preset, PresetParams, Vec2};
use asycomp::kernel::Wavenumber;
use asycomp::solve::{dense_solve, SolveMethod};
use asycomp::visibility::{visibility_windows, VisibilityConfig};
use num_complex::Complex64;

fn main() -> asycomp::Result<()> {
    let k: f64 = std::env::args().nth(1).map_or(64.0, |s| s.parse().expect("k must be a number"));
    let scene = Arc::new(preset_scene(Preset::TwoCircles, &PresetParams::new())?);
    let wave = IncidentWave::plane(Vec2::new(1.0, 0.0), Complex64::new(1.0, 0.0))?;
    let disc = Discretization::new(Arc::clone(&scene), Wavenumber::new(k)?, 10.0, Degree::Linear)?;
    let sys = assemble_system(&disc, &wave)?;
    let c = dense_solve(&sys.a, &sys.b)?.x;

    let ws = visibility_windows(&scene, &wave, &disc, &VisibilityConfig::default())?;
    let m = compress(&sys.a, &ws, &disc)?;
    let ct = solve_sparse(&m, &sys.b, SolveMethod::Direct, 0.0)?.x;

    let n0 = disc.basis().count(0);
    let blocks = [(0, 0), (0, 1), (1, 0), (1, 1)];
    for (p, q) in blocks {
        let (r0, c0) = (disc.basis().offset(p), disc.basis().offset(q));
        let nnz: usize = (r0..r0 + n0)
            .map(|i| m.row(i).filter(|&(j, _)| j >= c0 && j < c0 + disc.basis().count(q)).count())
            .sum();
        println!("block ({p},{q}): {:.3} of entries kept", nnz as f64 / (n0 * disc.basis().count(q)) as f64);
    }
    println!("nnz fraction: {:.3}", m.nnz_fraction());
    println!("residual dense:      {:.3e}", boundary_residual(&disc, &c, &wave, 1)?);
    println!("residual visibility: {:.3e}", boundary_residual(&disc, &ct, &wave, 1)?);
    Ok(())
}
