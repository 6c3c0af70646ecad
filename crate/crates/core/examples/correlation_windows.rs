//! Correlations of a dense solution and the windows they produce.
//!
//! Prints, for a few rows on the circle, where the correlations peak and
//! which parameter intervals survive thresholding.
//!
//! Usage: `cargo run --example correlation_windows -- [k] [xi]`

use std::sync::Arc;

use asycomp::compression::{correlation_windows, compress, CorrelationConfig};
use asycomp::discretization::{assemble_system, Degree, Discretization};
use asycomp::geometry::{periodic_diff, preset_scene, IncidentWave, Preset, PresetParams, Vec2};
use asycomp::kernel::Wavenumber;
use asycomp::solve::dense_solve;
use num_complex::Complex64;

fn main() -> asycomp::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: f64 = args.next().map_or(64.0, |s| s.parse().expect("k must be a number"));
    let xi: f64 = args.next().map_or(0.003, |s| s.parse().expect("xi must be a number"));
    let scene = Arc::new(preset_scene(Preset::Circle, &PresetParams::new())?);
    let wave = IncidentWave::plane(Vec2::new(1.0, 0.0), Complex64::new(1.0, 0.0))?;
    let disc = Discretization::new(scene, Wavenumber::new(k)?, 10.0, Degree::Linear)?;
    let sys = assemble_system(&disc, &wave)?;
    let c = dense_solve(&sys.a, &sys.b)?.x;

    let cfg = CorrelationConfig {
        xi,
        ..CorrelationConfig::default()
    };
    let (r, ws) = correlation_windows(&sys.a, &c, &disc, &cfg)?;
    println!("N = {}, Q = {}", r.rows(), r.cols());

    // the wave comes from the left, so t near 0 is in the shadow
    for t in [0.0, 0.05, 0.25, 0.4, 0.5] {
        let row = ws.match_row(asycomp::geometry::GlobalParam::new(0, t));
        let t_row = ws.row_param(row).t;
        let (peak, _) = r
            .row(row)
            .filter(|&(q, _)| periodic_diff(r.center(q).t, t_row).abs() > 0.1)
            .fold((0, 0.0), |best, (q, v)| if v.norm() > best.1 { (q, v.norm()) } else { best });
        let parts: Vec<String> = ws
            .window(row, 0)
            .parts()
            .iter()
            .map(|p| format!("[{:.3}, {:.3}]", p.l(), p.r()))
            .collect();
        println!(
            "t = {t_row:.3}: off-diagonal peak at {:.3}, plateaus {}",
            r.center(peak).t,
            if ws.window(row, 0).is_full() { "full".to_string() } else { parts.join(" ") }
        );
    }
    let m = compress(&sys.a, &ws, &disc)?;
    println!("nnz fraction at xi = {xi}: {:.3}", m.nnz_fraction());
    Ok(())
}
