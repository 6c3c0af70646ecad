//! Run configuration and the `solve`, `sweep` and `correlations` drivers.
//!
//! A configuration is a flat text file of `key = value` lines. Blank lines
//! and lines starting with `#` are ignored. Every run writes its artifacts
//! into one output directory.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

use crate::analysis::{
    boundary_residual, interior_extinction, interior_points, sparsity_stats, FieldGrid, MetricsRecord,
};
use crate::compression::{
    block_window_truncation, compress, compute_correlations, correlation_windows, recompression_sweep,
    solve_sparse, window_mask, CorrelationConfig, CorrelationMatrix, DiscSettings, SlidingWindow, SolverPolicy,
    SweepPlan,
};
use crate::discretization::{assemble_system, Degree, Discretization};
use crate::error::{Error, Result};
use crate::geometry::{preset_scene, IncidentWave, Preset, PresetParams, Scene, Vec2};
use crate::kernel::Wavenumber;
use crate::matrix::{norm2, DenseMatrix, SparseComplexMatrix};
use crate::solve::{cond_estimate, cond_estimate_sparse, dense_solve, gmres, SolveMethod, SolveReport};
use crate::visibility::{visibility_windows, VisibilityConfig};
use crate::windows::WindowSet;

pub const METRICS_FILE: &str = "metrics.txt";
pub const PATTERN_FILE: &str = "pattern.txt";
pub const WINDOWS_FILE: &str = "windows.txt";
pub const CORR_FILE: &str = "corr.txt";
pub const FIELD_FILE: &str = "field.txt";

const INTERIOR_MARGIN: f64 = 0.05;

/// How `cmd_solve` treats the system after the dense solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Dense,
    Correlate,
    Visibility,
    Sweep,
    BlockTruncate,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dense" => Method::Dense,
            "correlate" => Method::Correlate,
            "visibility" => Method::Visibility,
            "sweep" => Method::Sweep,
            "block_truncate" => Method::BlockTruncate,
            _ => return Err(config_err("method", format!("unknown method `{s}`"))),
        })
    }
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dense => "dense",
            Method::Correlate => "correlate",
            Method::Visibility => "visibility",
            Method::Sweep => "sweep",
            Method::BlockTruncate => "block_truncate",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WaveSpec {
    Plane { direction: Vec2 },
    Point { source: Vec2 },
    /// Three plane waves at `angle + 2πm/3`.
    ThreePlane { angle: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepRule {
    Doubling,
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scene: Preset,
    pub scene_params: PresetParams,
    pub wave: WaveSpec,
    pub amplitude: Complex64,
    pub k: f64,
    /// Last wavenumber of a sweep; a sweep without it runs at `k` only.
    pub k_max: Option<f64>,
    pub step_rule: StepRule,
    pub k_step: f64,
    pub ppw: f64,
    pub degree: Degree,
    pub xi: f64,
    pub t: f64,
    pub t_vis: f64,
    pub method: Method,
    pub solver: SolveMethod,
    pub gmres_tol: f64,
    pub seed: u64,
    pub output: PathBuf,
    pub field_nx: usize,
    pub field_ny: usize,
    /// `x0 x1 y0 y1`; `None` uses the scene bounding box grown by one unit.
    pub field_box: Option<[f64; 4]>,
    pub interior_points: usize,
    pub condition: bool,
    pub dense_reference_max: usize,
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: Preset::Circle,
            scene_params: PresetParams::new(),
            wave: WaveSpec::Plane {
                direction: Vec2::new(1.0, 0.0),
            },
            amplitude: Complex64::new(1.0, 0.0),
            k: 16.0,
            k_max: None,
            step_rule: StepRule::Doubling,
            k_step: 16.0,
            ppw: 10.0,
            degree: Degree::Linear,
            xi: 0.003,
            t: 0.02,
            t_vis: 0.15,
            method: Method::Dense,
            solver: SolveMethod::Direct,
            gmres_tol: 1e-8,
            seed: 1,
            output: PathBuf::from("out"),
            field_nx: 64,
            field_ny: 64,
            field_box: None,
            interior_points: 100,
            condition: false,
            dense_reference_max: 2000,
            timings: false,
        }
    }
}

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut pairs = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("line {}: expected key = value", no + 1)))?;
            let key = key.trim();
            if !seen.insert(key) {
                return Err(config_err(key, "given twice"));
            }
            pairs.push((key, value.trim()));
        }
        Self::from_pairs(pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = Self::default();
        let mut pairs: Vec<_> = pairs.into_iter().collect();
        // the wave kind decides which of its parameter keys are valid
        pairs.sort_by_key(|(k, _)| *k != "wave");
        for (key, value) in pairs {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key = value`; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let f = || -> Result<f64> {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| config_err(key, format!("`{value}` is not a finite number")))
        };
        let u = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| config_err(key, format!("`{value}` is not a non-negative integer")))
        };
        let b = || -> Result<bool> {
            value
                .parse::<bool>()
                .map_err(|_| config_err(key, format!("`{value}` is not true or false")))
        };
        match key {
            "scene" => self.scene = value.parse().map_err(|_| config_err(key, format!("unknown preset `{value}`")))?,
            "wave" => {
                self.wave = match value {
                    "plane" => WaveSpec::Plane {
                        direction: Vec2::new(1.0, 0.0),
                    },
                    "point" => WaveSpec::Point {
                        source: Vec2::new(1.0, 1.0),
                    },
                    "three_plane" => WaveSpec::ThreePlane { angle: 0.0 },
                    _ => return Err(config_err(key, format!("unknown wave `{value}`"))),
                }
            }
            "direction_x" | "direction_y" => match &mut self.wave {
                WaveSpec::Plane { direction } => {
                    if key == "direction_x" {
                        direction.x = f()?
                    } else {
                        direction.y = f()?
                    }
                }
                _ => return Err(config_err(key, "only valid for wave = plane")),
            },
            "source_x" | "source_y" => match &mut self.wave {
                WaveSpec::Point { source } => {
                    if key == "source_x" {
                        source.x = f()?
                    } else {
                        source.y = f()?
                    }
                }
                _ => return Err(config_err(key, "only valid for wave = point")),
            },
            "wave_angle" => match &mut self.wave {
                WaveSpec::ThreePlane { angle } => *angle = f()?,
                _ => return Err(config_err(key, "only valid for wave = three_plane")),
            },
            "amplitude_re" => self.amplitude.re = f()?,
            "amplitude_im" => self.amplitude.im = f()?,
            "k" => self.k = f()?,
            "k_max" => self.k_max = Some(f()?),
            "k_step_rule" => {
                self.step_rule = match value {
                    "doubling" => StepRule::Doubling,
                    "linear" => StepRule::Linear,
                    _ => return Err(config_err(key, format!("unknown step rule `{value}`"))),
                }
            }
            "k_step" => self.k_step = f()?,
            "ppw" => self.ppw = f()?,
            "degree" => {
                let d = value
                    .parse::<u32>()
                    .map_err(|_| config_err(key, format!("`{value}` is not an integer")))?;
                self.degree = Degree::from_int(d).map_err(|e| config_err(key, e.to_string()))?;
            }
            "xi" => self.xi = f()?,
            "t" => self.t = f()?,
            "t_vis" => self.t_vis = f()?,
            "method" => self.method = value.parse()?,
            "solver" => {
                self.solver = value
                    .parse()
                    .map_err(|_| config_err(key, format!("unknown solver `{value}`")))?
            }
            "gmres_tol" => self.gmres_tol = f()?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| config_err(key, format!("`{value}` is not a non-negative integer")))?
            }
            "output" => self.output = PathBuf::from(value),
            "field_nx" => self.field_nx = u()?,
            "field_ny" => self.field_ny = u()?,
            "field_box" => {
                let v: Vec<f64> = value
                    .split_whitespace()
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| config_err(key, "expected four numbers x0 x1 y0 y1"))?;
                let v: [f64; 4] = v
                    .try_into()
                    .map_err(|_| config_err(key, "expected four numbers x0 x1 y0 y1"))?;
                self.field_box = Some(v);
            }
            "interior_points" => self.interior_points = u()?,
            "condition" => self.condition = b()?,
            "dense_reference_max" => self.dense_reference_max = u()?,
            "timings" => self.timings = b()?,
            _ => match key.strip_prefix("scene.") {
                Some(name) => {
                    self.scene_params.insert(name.to_string(), f()?);
                }
                None => return Err(config_err(key, "unknown key")),
            },
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for name in self.scene_params.keys() {
            if !self.scene.defaults().iter().any(|(d, _)| d == name) {
                return Err(config_err(
                    &format!("scene.{name}"),
                    format!("not a parameter of {}", self.scene.name()),
                ));
            }
        }
        if !(self.k > 0.0) {
            return Err(config_err("k", "must be positive"));
        }
        if let Some(k_max) = self.k_max {
            if k_max < self.k {
                return Err(config_err("k_max", "must be at least k"));
            }
        }
        if !(self.k_step > 0.0) {
            return Err(config_err("k_step", "must be positive"));
        }
        if !(self.ppw > 0.0) {
            return Err(config_err("ppw", "must be positive"));
        }
        self.correlation_config()
            .validate()
            .map_err(|e| config_err("xi/t", e.to_string()))?;
        self.visibility_config()
            .validate()
            .map_err(|e| config_err("t_vis", e.to_string()))?;
        if !(self.gmres_tol > 0.0 && self.gmres_tol < 1.0) {
            return Err(config_err("gmres_tol", "must lie in (0, 1)"));
        }
        if self.field_nx < 2 || self.field_ny < 2 {
            return Err(config_err("field_nx/field_ny", "need at least 2 points per side"));
        }
        if let Some([x0, x1, y0, y1]) = self.field_box {
            if !(x1 > x0 && y1 > y0) {
                return Err(config_err("field_box", "need x0 < x1 and y0 < y1"));
            }
        }
        Ok(())
    }

    pub fn correlation_config(&self) -> CorrelationConfig {
        CorrelationConfig {
            t: self.t,
            xi: self.xi,
            ..CorrelationConfig::default()
        }
    }

    pub fn visibility_config(&self) -> VisibilityConfig {
        VisibilityConfig {
            t_vis: self.t_vis,
            ..VisibilityConfig::default()
        }
    }

    pub fn build_scene(&self) -> Result<Scene> {
        preset_scene(self.scene, &self.scene_params).map_err(|e| config_err("scene", e.to_string()))
    }

    pub fn build_wave(&self, scene: &Scene) -> Result<IncidentWave> {
        match &self.wave {
            WaveSpec::Plane { direction } => {
                IncidentWave::plane(*direction, self.amplitude).map_err(|e| config_err("direction_x", e.to_string()))
            }
            WaveSpec::Point { source } => IncidentWave::point_source(scene, *source, self.amplitude)
                .map_err(|e| config_err("source_x", e.to_string())),
            WaveSpec::ThreePlane { angle } => Ok(IncidentWave::three_plane_waves(*angle, self.amplitude)),
        }
    }

    pub fn sweep_plan(&self) -> Result<SweepPlan> {
        let k_max = self.k_max.unwrap_or(self.k);
        let plan = match self.step_rule {
            StepRule::Doubling => SweepPlan::doublings(self.k, k_max),
            StepRule::Linear => SweepPlan::linear(self.k, k_max, self.k_step),
        };
        let mut plan = plan.map_err(|e| config_err("k_max", e.to_string()))?;
        plan.solver = match self.solver {
            SolveMethod::Direct => SolverPolicy::Direct,
            SolveMethod::Gmres => SolverPolicy::Gmres,
        };
        plan.gmres_tol = self.gmres_tol;
        plan.dense_reference_max = self.dense_reference_max;
        plan.keep_matrices = true;
        Ok(plan)
    }

    fn field_box_for(&self, scene: &Scene) -> [f64; 4] {
        self.field_box.unwrap_or_else(|| {
            let (lo, hi) = scene.bounding_box();
            [lo.x - 1.0, hi.x + 1.0, lo.y - 1.0, hi.y + 1.0]
        })
    }
}

/// Process exit code for an error: 2 for configuration, 3 for solver failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidParameter { .. } | Error::UnknownPreset(_) => 2,
        Error::Solver(_) | Error::Singular(_) | Error::Quadrature { .. } => 3,
        _ => 1,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_with(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(dir, name)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn solve_with(a: &DenseMatrix, b: &[Complex64], method: SolveMethod, tol: f64) -> Result<SolveReport> {
    match method {
        SolveMethod::Direct => dense_solve(a, b),
        SolveMethod::Gmres => {
            let r = gmres(|x| a.matvec(x), b, tol, a.rows())?;
            if !r.converged {
                return Err(Error::Solver(format!(
                    "GMRES stopped after {} iterations at residual {:e}",
                    r.iterations, r.residual
                )));
            }
            Ok(r)
        }
    }
}

fn write_field(cfg: &RunConfig, dir: &Path, disc: &Discretization, c: &[Complex64], wave: &IncidentWave) -> Result<()> {
    let [x0, x1, y0, y1] = cfg.field_box_for(disc.scene());
    let grid = FieldGrid::compute(disc, c, wave, cfg.field_nx, cfg.field_ny, (x0, x1), (y0, y1))?;
    write_with(dir, FIELD_FILE, |w| grid.write(w))
}

fn write_metrics(dir: &Path, records: &[MetricsRecord]) -> Result<()> {
    write_with(dir, METRICS_FILE, |w| MetricsRecord::write_all(records, w))
}

fn finish_record(cfg: &RunConfig, mut m: MetricsRecord) -> MetricsRecord {
    if !cfg.timings {
        m.timings.clear();
    }
    m
}

/// Everything a single-wavenumber run produces.
#[derive(Debug)]
pub struct SolveOutput {
    pub metrics: MetricsRecord,
    pub dense_solution: Vec<Complex64>,
    /// Solution of the compressed system, if one was built.
    pub solution: Option<Vec<Complex64>>,
    pub windows: WindowSet,
    pub correlations: CorrelationMatrix,
}

/// Dense solve at `k`, then optional compression, writing all five artifact files.
pub fn cmd_solve(cfg: &RunConfig) -> Result<SolveOutput> {
    cfg.validate()?;
    if cfg.method == Method::Sweep {
        let mut one = cfg.clone();
        one.k_max = None;
        let steps = cmd_sweep(&one)?;
        let first = steps.into_iter().next().expect("a one-point sweep has one step");
        return Ok(first);
    }
    let scene = Arc::new(cfg.build_scene()?);
    let wave = cfg.build_wave(&scene)?;
    let disc = Discretization::new(Arc::clone(&scene), Wavenumber::new(cfg.k)?, cfg.ppw, cfg.degree)?;
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir)?;
    let t0 = Instant::now();
    let mut metrics = MetricsRecord {
        k: cfg.k,
        n: disc.n(),
        method: cfg.method.name().into(),
        ..Default::default()
    };

    let t = Instant::now();
    let sys = assemble_system(&disc, &wave)?;
    metrics.timings.insert("assemble".into(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let dense = solve_with(&sys.a, &sys.b, cfg.solver, cfg.gmres_tol)?;
    metrics.timings.insert("solve_dense".into(), t.elapsed().as_secs_f64());
    if cfg.solver == SolveMethod::Gmres {
        metrics.gmres_iterations_dense = Some(dense.iterations);
    }
    let ccfg = cfg.correlation_config();
    let t = Instant::now();
    let (corr, corr_windows) = correlation_windows(&sys.a, &dense.x, &disc, &ccfg)?;
    metrics.timings.insert("correlate".into(), t.elapsed().as_secs_f64());

    let (windows, matrix) = match cfg.method {
        Method::Dense => (WindowSet::all_full(disc.basis().clone()), None),
        Method::Correlate => {
            let m = compress(&sys.a, &corr_windows, &disc)?;
            (corr_windows, Some(m))
        }
        Method::BlockTruncate => {
            let m = block_window_truncation(&sys.a, &corr_windows, &disc)?;
            (corr_windows, Some(m))
        }
        Method::Visibility => {
            let t = Instant::now();
            let ws = visibility_windows(&scene, &wave, &disc, &cfg.visibility_config())?;
            metrics.timings.insert("visibility".into(), t.elapsed().as_secs_f64());
            let m = compress(&sys.a, &ws, &disc)?;
            (ws, Some(m))
        }
        Method::Sweep => unreachable!(),
    };

    metrics.residual_dense = Some(boundary_residual(&disc, &dense.x, &wave, cfg.seed)?);
    let margin = INTERIOR_MARGIN.max(2.0 * disc.max_cell_arc());
    let points = interior_points(&scene, cfg.interior_points, margin, cfg.seed);
    let interior_c;
    let solution = match &matrix {
        Some(m) => {
            let t = Instant::now();
            let rep = solve_sparse(m, &sys.b, cfg.solver, cfg.gmres_tol)?;
            metrics.timings.insert("solve".into(), t.elapsed().as_secs_f64());
            if cfg.solver == SolveMethod::Gmres {
                metrics.gmres_iterations_compressed = Some(rep.iterations);
            }
            metrics.nnz_fraction = sparsity_stats(m).fraction;
            metrics.residual_compressed = Some(boundary_residual(&disc, &rep.x, &wave, cfg.seed)?);
            metrics.coeff_error = Some(rel_diff(&rep.x, &dense.x));
            if cfg.condition {
                metrics.cond_compressed = Some(cond_estimate_sparse(m)?);
            }
            interior_c = rep.x.clone();
            Some(rep.x)
        }
        None => {
            metrics.nnz_fraction = 1.0;
            interior_c = dense.x.clone();
            None
        }
    };
    if !points.is_empty() {
        metrics.interior_error = Some(interior_extinction(&disc, &interior_c, &wave, &points)?);
    }
    if cfg.condition {
        metrics.cond_dense = Some(cond_estimate(&sys.a)?);
    }

    let pattern = matrix.unwrap_or_else(|| SparseComplexMatrix::from_dense(&sys.a));
    write_with(dir, PATTERN_FILE, |w| pattern.write_triplets(w))?;
    write_with(dir, WINDOWS_FILE, |w| windows.write_text(w))?;
    write_with(dir, CORR_FILE, |w| corr.write_grid(w))?;
    write_field(cfg, dir, &disc, &interior_c, &wave)?;
    metrics.timings.insert("total".into(), t0.elapsed().as_secs_f64());
    let metrics = finish_record(cfg, metrics);
    write_metrics(dir, std::slice::from_ref(&metrics))?;
    Ok(SolveOutput {
        metrics,
        dense_solution: dense.x,
        solution,
        windows,
        correlations: corr,
    })
}

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let den = norm2(b);
    if den == 0.0 {
        norm2(&d)
    } else {
        norm2(&d) / den
    }
}

/// Recompression sweep from `k` to `k_max`.
///
/// `metrics.txt` gets one record per wavenumber and is rewritten after the
/// sweep even when it stops early. The other files describe the last
/// completed wavenumber.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<SolveOutput>> {
    cfg.validate()?;
    let scene = Arc::new(cfg.build_scene()?);
    let wave = cfg.build_wave(&scene)?;
    let plan = cfg.sweep_plan()?;
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir)?;
    let settings = DiscSettings {
        ppw: cfg.ppw,
        degree: cfg.degree,
    };
    let ccfg = cfg.correlation_config();
    let outcome = recompression_sweep(&plan, Arc::clone(&scene), &wave, settings, &ccfg, cfg.seed)?;
    let records: Vec<MetricsRecord> = outcome
        .steps
        .iter()
        .map(|s| finish_record(cfg, s.metrics.clone()))
        .collect();
    write_metrics(dir, &records)?;

    let mut outputs = Vec::with_capacity(outcome.steps.len());
    let last = outcome.steps.len().saturating_sub(1);
    for (i, (step, metrics)) in outcome.steps.into_iter().zip(records).enumerate() {
        let disc = Discretization::new(Arc::clone(&scene), Wavenumber::new(step.k)?, cfg.ppw, cfg.degree)?;
        let matrix = step.matrix.expect("sweep plan keeps matrices");
        // correlations of the compressed system, restricted to its own windows
        let corr = {
            let mask = window_mask(&step.windows, &disc);
            compute_correlations(&matrix, &step.solution, &disc, &ccfg, SlidingWindow::Bump(ccfg.t), Some(&mask))?
        };
        if i == last {
            write_with(dir, PATTERN_FILE, |w| matrix.write_triplets(w))?;
            write_with(dir, WINDOWS_FILE, |w| step.windows.write_text(w))?;
            write_with(dir, CORR_FILE, |w| corr.write_grid(w))?;
            write_field(cfg, dir, &disc, &step.solution, &wave)?;
        }
        outputs.push(SolveOutput {
            metrics,
            dense_solution: step.dense_solution.unwrap_or_default(),
            solution: Some(step.solution),
            windows: step.windows,
            correlations: corr,
        });
    }
    match outcome.error {
        Some(e) => Err(e),
        None => Ok(outputs),
    }
}

/// Dense solve and the full correlation matrix, written to `corr.txt`.
pub fn cmd_correlations(cfg: &RunConfig) -> Result<CorrelationMatrix> {
    cfg.validate()?;
    let scene = Arc::new(cfg.build_scene()?);
    let wave = cfg.build_wave(&scene)?;
    let disc = Discretization::new(Arc::clone(&scene), Wavenumber::new(cfg.k)?, cfg.ppw, cfg.degree)?;
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir)?;
    let sys = assemble_system(&disc, &wave)?;
    let dense = solve_with(&sys.a, &sys.b, cfg.solver, cfg.gmres_tol)?;
    let ccfg = cfg.correlation_config();
    let corr = compute_correlations(&sys.a, &dense.x, &disc, &ccfg, SlidingWindow::Bump(ccfg.t), None)?;
    write_with(dir, CORR_FILE, |w| corr.write_grid(w))?;
    Ok(corr)
}
