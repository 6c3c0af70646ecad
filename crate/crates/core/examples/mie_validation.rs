//! Dense BEM density on the unit circle against the Mie series.
//!
//! Usage: `cargo run --example mie_validation -- [k]`

use std::sync::Arc;

use asycomp::analysis::{density_error, MieDensity};
use asycomp::discretization::{assemble_system, Degree, Discretization};
use asycomp::geometry::{preset_scene, IncidentWave, Preset, PresetParams, Vec2};
use asycomp::kernel::Wavenumber;
use asycomp::solve::dense_solve;
use num_complex::Complex64;

fn main() -> asycomp::Result<()> {
    let k: f64 = std::env::args().nth(1).map_or(16.0, |s| s.parse().expect("k must be a number"));
    let scene = Arc::new(preset_scene(Preset::Circle, &PresetParams::new())?);
    let wave = IncidentWave::plane(Vec2::new(1.0, 0.0), Complex64::new(1.0, 0.0))?;
    let kw = Wavenumber::new(k)?;
    let mie = MieDensity::new(Vec2::new(0.0, 0.0), 1.0, kw, &wave, (k as usize) + 30)?;

    println!("{:>5} {:>6} {:>8} {:>12}", "ppw", "N", "degree", "L2 error");
    for degree in [Degree::Constant, Degree::Linear, Degree::Cubic] {
        for ppw in [5.0, 10.0, 20.0] {
            let disc = Discretization::new(Arc::clone(&scene), kw, ppw, degree)?;
            let sys = assemble_system(&disc, &wave)?;
            let c = dense_solve(&sys.a, &sys.b)?.x;
            let err = density_error(&disc, &c, |t| mie.eval_param(t))?;
            println!("{ppw:>5} {:>6} {:>8} {err:>12.3e}", disc.n(), degree.as_int());
        }
    }
    Ok(())
}
