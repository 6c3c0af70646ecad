//! Total field around the nonconvex polygon, written as a text grid.
//!
//! Usage: `cargo run --example field_grid -- [k] [out.txt]`

use std::fs::File;
use std::io::BufWriter;
use std::sync::Arc;

use asycomp::analysis::FieldGrid;
use asycomp::discretization::{assemble_system, Degree, Discretization};
use asycomp::geometry::{preset_scene, IncidentWave, Preset, PresetParams, Vec2};
use asycomp::kernel::Wavenumber;
use asycomp::solve::dense_solve;
use num_complex::Complex64;

fn main() -> asycomp::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: f64 = args.next().map_or(20.0, |s| s.parse().expect("k must be a number"));
    let path = args.next().unwrap_or_else(|| "field.txt".into());
    let scene = Arc::new(preset_scene(Preset::NonconvexPolygon, &PresetParams::new())?);
    let wave = IncidentWave::plane(Vec2::new(1.0, -0.5), Complex64::new(1.0, 0.0))?;
    let disc = Discretization::new(Arc::clone(&scene), Wavenumber::new(k)?, 10.0, Degree::Linear)?;
    let sys = assemble_system(&disc, &wave)?;
    let c = dense_solve(&sys.a, &sys.b)?.x;

    let (lo, hi) = scene.bounding_box();
    let grid = FieldGrid::compute(&disc, &c, &wave, 120, 120, (lo.x - 1.0, hi.x + 1.0), (lo.y - 1.0, hi.y + 1.0))?;
    grid.write(BufWriter::new(File::create(&path)?))?;

    // crude picture: '#' inside or too close to evaluate, then |u| in four shades
    let shades = [' ', '.', ':', '*', '@'];
    for j in (0..grid.ny).rev().step_by(4) {
        let line: String = (0..grid.nx)
            .step_by(2)
            .map(|i| {
                let v = grid.values[j * grid.nx + i];
                if v.re.is_nan() {
                    '#'
                } else {
                    shades[((v.norm() / 2.0 * 4.0) as usize).min(4)]
                }
            })
            .collect();
        println!("{line}");
    }
    println!("wrote {}x{} grid to {path}", grid.nx, grid.ny);
    Ok(())
}
