//! Condition numbers near an interior Dirichlet resonance.
//!
//! A circle of radius 1/2 resonates when `k/2` is a zero of `J_n`. The
//! windows computed at `k/2` and re-thresholded at `k` cut off the
//! resonant mode and the compressed matrix stays well conditioned.
//!
//! Usage: `cargo run --example resonance_conditioning -- [n]`

use std::sync::Arc;

use asycomp::compression::{recompression_sweep, CorrelationConfig, DiscSettings, SolverPolicy, SweepPlan};
use asycomp::discretization::{assemble_matrix, Discretization};
use asycomp::geometry::{preset_scene, IncidentWave, Preset, PresetParams, Vec2};
use asycomp::kernel::{bessel, BesselKind, Wavenumber};
use asycomp::solve::{cond_estimate, cond_estimate_sparse};
use num_complex::Complex64;

fn first_zero(n: u32) -> f64 {
    let j = |x: f64| bessel(BesselKind::J, n, x).unwrap();
    let mut a = n as f64;
    while j(a) * j(a + 0.05) > 0.0 {
        a += 0.05;
    }
    let mut b = a + 0.05;
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if j(a) * j(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

fn main() -> asycomp::Result<()> {
    let order: u32 = std::env::args().nth(1).map_or(30, |s| s.parse().expect("order must be an integer"));
    let k = 2.0 * first_zero(order);
    let mut params = PresetParams::new();
    params.insert("radius".into(), 0.5);
    let scene = Arc::new(preset_scene(Preset::Circle, &params)?);
    let wave = IncidentWave::point_source(&scene, Vec2::new(1.0, 1.0), Complex64::new(1.0, 0.0))?;

    let mut plan = SweepPlan::new(vec![0.5 * k, k])?;
    plan.solver = SolverPolicy::Direct;
    plan.keep_matrices = true;
    let out = recompression_sweep(&plan, Arc::clone(&scene), &wave, DiscSettings::default(), &CorrelationConfig::default(), 1)?;
    if let Some(e) = out.error {
        return Err(e);
    }
    let last = out.steps.last().expect("two steps");
    let disc = Discretization::new(scene, Wavenumber::new(k)?, 10.0, asycomp::discretization::Degree::Linear)?;
    let a = assemble_matrix(&disc)?;
    println!("k = 2 j_{{{order},1}} = {k:.8}, N = {}", disc.n());
    println!("cond(A)  = {:.3e}", cond_estimate(&a)?);
    println!("cond(A~) = {:.3e}", cond_estimate_sparse(last.matrix.as_ref().expect("kept"))?);
    println!("nnz fraction = {:.3}", last.stats.fraction);
    Ok(())
}
