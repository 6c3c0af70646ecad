//! Unpreconditioned GMRES on the dense and compressed matrices.
//!
//! Usage: `cargo run --example gmres_iterations -- [k] [tol]`

use std::sync::Arc;

use asycomp::compression::{compress, correlation_windows, CorrelationConfig};
use asycomp::discretization::{assemble_system, Degree, Discretization};
use asycomp::geometry::{preset_scene, IncidentWave, Preset, PresetParams, Vec2};
use asycomp::kernel::Wavenumber;
use asycomp::solve::{dense_solve, gmres};
use num_complex::Complex64;

fn main() -> asycomp::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: f64 = args.next().map_or(64.0, |s| s.parse().expect("k must be a number"));
    let tol: f64 = args.next().map_or(1e-5, |s| s.parse().expect("tol must be a number"));
    let scene = Arc::new(preset_scene(Preset::Circle, &PresetParams::new())?);
    let wave = IncidentWave::plane(Vec2::new(1.0, 0.0), Complex64::new(1.0, 0.0))?;
    let disc = Discretization::new(scene, Wavenumber::new(k)?, 10.0, Degree::Linear)?;
    let sys = assemble_system(&disc, &wave)?;
    let c = dense_solve(&sys.a, &sys.b)?.x;
    let (_, ws) = correlation_windows(&sys.a, &c, &disc, &CorrelationConfig::default())?;
    let m = compress(&sys.a, &ws, &disc)?;

    let n = disc.n();
    let dense = gmres(|x| sys.a.matvec(x), &sys.b, tol, n)?;
    let sparse = gmres(|x| m.matvec(x), &sys.b, tol, n)?;
    println!("N = {n}, tolerance {tol:e}");
    println!("A : {:>5} iterations (converged: {})", dense.iterations, dense.converged);
    println!("A~: {:>5} iterations (converged: {}), nnz {:.3}", sparse.iterations, sparse.converged, m.nnz_fraction());
    Ok(())
}
