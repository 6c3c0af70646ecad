//! Post-processing: fields, residuals, the circle series solution and
//! per-run metrics.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::discretization::Discretization;
use crate::error::{invalid, Error, Result};
use crate::geometry::{GlobalParam, IncidentWave, Scene, Vec2};
use crate::kernel::{hankel1, Wavenumber, MAX_ORDER};
use crate::matrix::SparseComplexMatrix;

/// Number of random boundary points used by [`boundary_residual`].
pub const RESIDUAL_POINTS: usize = 100;

fn check_len(disc: &Discretization, c: &[Complex64]) -> Result<()> {
    if c.len() != disc.n() {
        return Err(Error::DimensionMismatch {
            expected: disc.n(),
            got: c.len(),
        });
    }
    Ok(())
}

fn row_dot(disc: &Discretization, target: &crate::discretization::Target, c: &[Complex64]) -> Complex64 {
    let mut row = vec![Complex64::new(0.0, 0.0); disc.n()];
    disc.dense_row(target, &mut row);
    row.iter().zip(c).map(|(a, b)| a * b).sum()
}

/// Single-layer potential `u^s(x)` of the density with coefficients `c`.
///
/// Points closer than one element to the boundary are rejected.
pub fn scattered_field(disc: &Discretization, c: &[Complex64], points: &[Vec2]) -> Result<Vec<Complex64>> {
    check_len(disc, c)?;
    points
        .par_iter()
        .map(|&x| Ok(row_dot(disc, &disc.field_target(x)?, c)))
        .collect()
}

/// `u^s` at a boundary parameter, with the singular split used in assembly.
pub fn boundary_field(disc: &Discretization, c: &[Complex64], g: GlobalParam) -> Result<Complex64> {
    check_len(disc, c)?;
    Ok(row_dot(disc, &disc.boundary_target(g), c))
}

/// Seeded boundary points, uniform in the global parameter.
pub fn residual_points(scene: &Scene, seed: u64) -> Vec<GlobalParam> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = scene.len() as f64;
    (0..RESIDUAL_POINTS)
        .map(|_| GlobalParam::from_global(rng.gen_range(0.0..m)))
        .collect()
}

/// `Σ |u^s + u^inc| / Σ |u^inc|` over 100 seeded random boundary points.
pub fn boundary_residual(disc: &Discretization, c: &[Complex64], wave: &IncidentWave, seed: u64) -> Result<f64> {
    check_len(disc, c)?;
    let k = disc.wavenumber();
    let pts = residual_points(disc.scene(), seed);
    let terms: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|&g| {
            let us = boundary_field(disc, c, g)?;
            let ui = wave.eval(k, disc.scene().point(g))?;
            Ok(((us + ui).norm(), ui.norm()))
        })
        .collect::<Result<_>>()?;
    let (num, den): (f64, f64) = terms.iter().fold((0.0, 0.0), |a, t| (a.0 + t.0, a.1 + t.1));
    if den == 0.0 {
        return Ok(num);
    }
    Ok(num / den)
}

/// Seeded points strictly inside the obstacles, at least `margin` from the boundary.
pub fn interior_points(scene: &Scene, count: usize, margin: f64, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boxes: Vec<(Vec2, Vec2)> = scene
        .obstacles()
        .iter()
        .map(|c| {
            let poly = c.polyline(512);
            let lo = poly.iter().fold(Vec2::new(f64::INFINITY, f64::INFINITY), |a, p| {
                Vec2::new(a.x.min(p.x), a.y.min(p.y))
            });
            let hi = poly.iter().fold(Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| {
                Vec2::new(a.x.max(p.x), a.y.max(p.y))
            });
            (lo, hi)
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 10_000 * count.max(1) {
        attempts += 1;
        let (lo, hi) = boxes[rng.gen_range(0..boxes.len())];
        let x = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if scene.contains(x) && scene.distance_to_boundary(x, 1024) > margin {
            out.push(x);
        }
    }
    out
}

/// Mean `|u^s + u^inc|` over `points`, relative to the largest `|u^inc|` on
/// the collocation points. Vanishes for an exact solution.
pub fn interior_extinction(
    disc: &Discretization,
    c: &[Complex64],
    wave: &IncidentWave,
    points: &[Vec2],
) -> Result<f64> {
    if points.is_empty() {
        return Err(invalid("points", "need at least one interior point"));
    }
    let k = disc.wavenumber();
    let us = scattered_field(disc, c, points)?;
    let mut total = 0.0;
    for (x, u) in points.iter().zip(&us) {
        total += (u + wave.eval(k, *x)?).norm();
    }
    let mut scale: f64 = 0.0;
    for i in 0..disc.n() {
        scale = scale.max(wave.eval(k, disc.collocation_point(i))?.norm());
    }
    Ok(total / points.len() as f64 / scale)
}

/// Density `v = −∂u^tot/∂n` of a sound-soft circle under a plane wave,
/// from the separation-of-variables series.
#[derive(Clone, Debug)]
pub struct MieDensity {
    center: Vec2,
    radius: f64,
    /// Polar angle of the incident direction.
    angle: f64,
    /// Common prefactor, including amplitude and centre phase.
    scale: Complex64,
    /// `i^n / H_n(ka)` for `n = 0..=M`.
    terms: Vec<Complex64>,
}

impl MieDensity {
    /// `truncation` must be at least `ka + 20`.
    pub fn new(center: Vec2, radius: f64, k: Wavenumber, wave: &IncidentWave, truncation: usize) -> Result<Self> {
        let (direction, amplitude) = match wave {
            IncidentWave::Plane { direction, amplitude } => (*direction, *amplitude),
            _ => return Err(invalid("wave", "the series solution needs a single plane wave")),
        };
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", "must be positive"));
        }
        let ka = k.get() * radius;
        if (truncation as f64) < ka + 20.0 {
            return Err(invalid("truncation", format!("need at least ka + 20 = {:.1} terms", ka + 20.0)));
        }
        if truncation > MAX_ORDER as usize {
            return Err(invalid("truncation", format!("orders above {MAX_ORDER} are not supported")));
        }
        let mut terms = Vec::with_capacity(truncation + 1);
        let mut ipow = Complex64::new(1.0, 0.0);
        for n in 0..=truncation {
            terms.push(ipow / hankel1(n as u32, ka)?);
            ipow *= Complex64::i();
        }
        let phase = Complex64::new(0.0, k.get() * direction.dot(center)).exp();
        Ok(Self {
            center,
            radius,
            angle: direction.y.atan2(direction.x),
            scale: Complex64::new(0.0, 2.0 / (PI * radius)) * amplitude * phase,
            terms,
        })
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Magnitude of the last retained term.
    pub fn tail_magnitude(&self) -> f64 {
        2.0 * self.terms.last().unwrap().norm()
    }

    /// `v` at polar angle `theta` about the centre.
    pub fn eval_angle(&self, theta: f64) -> Complex64 {
        let phi = theta - self.angle;
        let mut sum = self.terms[0];
        for (n, t) in self.terms.iter().enumerate().skip(1) {
            sum += t * (2.0 * (n as f64 * phi).cos());
        }
        self.scale * sum
    }

    /// `v(κ(t))` for the standard circle parameterisation `θ = 2πt`.
    pub fn eval_param(&self, t: f64) -> Complex64 {
        self.eval_angle(2.0 * PI * t)
    }
}

/// Relative discrete L2 distance between the BEM density and `exact` on
/// `4N` uniform parameter points of obstacle 0.
pub fn density_error(disc: &Discretization, c: &[Complex64], exact: impl Fn(f64) -> Complex64) -> Result<f64> {
    check_len(disc, c)?;
    let m = 4 * disc.basis().count(0);
    let (mut num, mut den) = (0.0, 0.0);
    for q in 0..m {
        let t = (q as f64 + 0.5) / m as f64;
        let v = disc.evaluate_density(c, GlobalParam::new(0, t))?;
        let e = exact(t);
        num += (v - e).norm_sqr();
        den += e.norm_sqr();
    }
    Ok((num / den).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparsityStats {
    pub n: usize,
    pub nnz: usize,
    pub fraction: f64,
    pub min_row: usize,
    pub max_row: usize,
}

pub fn sparsity_stats(m: &SparseComplexMatrix) -> SparsityStats {
    let rows = (0..m.rows()).map(|i| m.row_nnz(i));
    let (min_row, max_row) = rows.fold((usize::MAX, 0), |(lo, hi), r| (lo.min(r), hi.max(r)));
    SparsityStats {
        n: m.rows(),
        nnz: m.nnz(),
        fraction: m.nnz_fraction(),
        min_row: if m.rows() == 0 { 0 } else { min_row },
        max_row,
    }
}

/// Results of one run at one wavenumber.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsRecord {
    pub k: f64,
    pub n: usize,
    pub method: String,
    pub nnz_fraction: f64,
    pub residual_dense: Option<f64>,
    pub residual_compressed: Option<f64>,
    /// `‖c̃ − c‖ / ‖c‖`.
    pub coeff_error: Option<f64>,
    pub interior_error: Option<f64>,
    pub cond_dense: Option<f64>,
    pub cond_compressed: Option<f64>,
    pub gmres_iterations_dense: Option<usize>,
    pub gmres_iterations_compressed: Option<usize>,
    /// Whether windows were recomputed at this wavenumber.
    pub recorrelated: bool,
    /// Seconds per phase.
    pub timings: BTreeMap<String, f64>,
}

impl MetricsRecord {
    /// One `key=value` per line; floats use the shortest round-trip form.
    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "k={}", self.k)?;
        writeln!(w, "n={}", self.n)?;
        writeln!(w, "method={}", self.method)?;
        writeln!(w, "nnz_fraction={}", self.nnz_fraction)?;
        let opt = |w: &mut dyn Write, key: &str, v: Option<f64>| -> std::io::Result<()> {
            if let Some(v) = v {
                writeln!(w, "{key}={v}")?;
            }
            Ok(())
        };
        opt(&mut w, "residual_dense", self.residual_dense)?;
        opt(&mut w, "residual_compressed", self.residual_compressed)?;
        opt(&mut w, "coeff_error", self.coeff_error)?;
        opt(&mut w, "interior_error", self.interior_error)?;
        opt(&mut w, "cond_dense", self.cond_dense)?;
        opt(&mut w, "cond_compressed", self.cond_compressed)?;
        if let Some(v) = self.gmres_iterations_dense {
            writeln!(w, "gmres_iterations_dense={v}")?;
        }
        if let Some(v) = self.gmres_iterations_compressed {
            writeln!(w, "gmres_iterations_compressed={v}")?;
        }
        writeln!(w, "recorrelated={}", self.recorrelated)?;
        for (name, t) in &self.timings {
            writeln!(w, "time_{name}={t}")?;
        }
        Ok(())
    }

    /// Records separated by blank lines.
    pub fn write_all(records: &[MetricsRecord], mut w: impl Write) -> std::io::Result<()> {
        for (i, r) in records.iter().enumerate() {
            if i > 0 {
                writeln!(w)?;
            }
            r.write(&mut w)?;
        }
        Ok(())
    }

    pub fn read_all(r: impl BufRead) -> Result<Vec<MetricsRecord>> {
        let mut out = Vec::new();
        let mut cur: Option<MetricsRecord> = None;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                if let Some(rec) = cur.take() {
                    out.push(rec);
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                reason: "expected key=value".into(),
            })?;
            cur.get_or_insert_with(MetricsRecord::default).set(key, value)?;
        }
        if let Some(rec) = cur {
            out.push(rec);
        }
        Ok(out)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config {
            key: key.to_string(),
            reason: format!("cannot parse `{value}`"),
        };
        let f = || value.parse::<f64>().map_err(|_| bad());
        let u = || value.parse::<usize>().map_err(|_| bad());
        match key {
            "k" => self.k = f()?,
            "n" => self.n = u()?,
            "method" => self.method = value.to_string(),
            "nnz_fraction" => self.nnz_fraction = f()?,
            "residual_dense" => self.residual_dense = Some(f()?),
            "residual_compressed" => self.residual_compressed = Some(f()?),
            "coeff_error" => self.coeff_error = Some(f()?),
            "interior_error" => self.interior_error = Some(f()?),
            "cond_dense" => self.cond_dense = Some(f()?),
            "cond_compressed" => self.cond_compressed = Some(f()?),
            "gmres_iterations_dense" => self.gmres_iterations_dense = Some(u()?),
            "gmres_iterations_compressed" => self.gmres_iterations_compressed = Some(u()?),
            "recorrelated" => self.recorrelated = value.parse().map_err(|_| bad())?,
            _ => match key.strip_prefix("time_") {
                Some(name) => {
                    self.timings.insert(name.to_string(), f()?);
                }
                None => {
                    return Err(Error::Config {
                        key: key.to_string(),
                        reason: "unknown metrics key".into(),
                    })
                }
            },
        }
        Ok(())
    }
}

/// Total field on a regular grid; points within one element of the boundary are NaN.
#[derive(Clone, Debug)]
pub struct FieldGrid {
    pub nx: usize,
    pub ny: usize,
    pub x: (f64, f64),
    pub y: (f64, f64),
    /// Row-major, `y` outer.
    pub values: Vec<Complex64>,
}

impl FieldGrid {
    pub fn compute(
        disc: &Discretization,
        c: &[Complex64],
        wave: &IncidentWave,
        nx: usize,
        ny: usize,
        x: (f64, f64),
        y: (f64, f64),
    ) -> Result<Self> {
        check_len(disc, c)?;
        if nx < 2 || ny < 2 {
            return Err(invalid("grid", "need at least 2×2 points"));
        }
        let k = disc.wavenumber();
        let pts: Vec<Vec2> = (0..ny)
            .flat_map(|j| {
                (0..nx).map(move |i| {
                    Vec2::new(
                        x.0 + (x.1 - x.0) * i as f64 / (nx - 1) as f64,
                        y.0 + (y.1 - y.0) * j as f64 / (ny - 1) as f64,
                    )
                })
            })
            .collect();
        let values = pts
            .par_iter()
            .map(|&p| match disc.field_target(p) {
                Ok(t) => Ok(row_dot(disc, &t, c) + wave.eval(k, p)?),
                Err(Error::NearBoundary { .. }) => Ok(Complex64::new(f64::NAN, f64::NAN)),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nx, ny, x, y, values })
    }

    /// Header `nx ny x0 x1 y0 y1`, then `re im` per point.
    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{} {} {} {} {} {}", self.nx, self.ny, self.x.0, self.x.1, self.y.0, self.y.1)?;
        for v in &self.values {
            writeln!(w, "{} {}", v.re, v.im)?;
        }
        Ok(())
    }
}
