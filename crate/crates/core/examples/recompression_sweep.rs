//! Frequency sweep with recompression at every doubling.
//!
//! Usage: `cargo run --example recompression_sweep -- [k1] [k_max]`

use std::sync::Arc;

use asycomp::compression::{recompression_sweep, CorrelationConfig, DiscSettings, SweepPlan};
use asycomp::geometry::{preset_scene, IncidentWave, Preset, PresetParams, Vec2};
use num_complex::Complex64;

fn main() -> asycomp::Result<()> {
    let mut args = std::env::args().skip(1);
    let k1: f64 = args.next().map_or(64.0, |s| s.parse().expect("k1 must be a number"));
    let k_max: f64 = args.next().map_or(256.0, |s| s.parse().expect("k_max must be a number"));
    let scene = Arc::new(preset_scene(Preset::Circle, &PresetParams::new())?);
    let wave = IncidentWave::plane(Vec2::new(1.0, 0.0), Complex64::new(1.0, 0.0))?;

    let mut plan = SweepPlan::doublings(k1, k_max)?;
    plan.dense_reference_max = 2000;
    let out = recompression_sweep(&plan, scene, &wave, DiscSettings::default(), &CorrelationConfig::default(), 1)?;

    println!("{:>6} {:>6} {:>8} {:>12} {:>12} {:>8}", "k", "N", "nnz", "res(c~)", "res(c)", "time");
    for s in &out.steps {
        let m = &s.metrics;
        let dense = m.residual_dense.map_or("-".to_string(), |r| format!("{r:.3e}"));
        println!(
            "{:>6} {:>6} {:>8.4} {:>12.3e} {:>12} {:>7.1}s",
            s.k,
            s.n,
            s.stats.fraction,
            m.residual_compressed.unwrap_or(f64::NAN),
            dense,
            m.timings["total"]
        );
    }
    if let Some(e) = out.error {
        eprintln!("sweep stopped early: {e}");
    }
    Ok(())
}
