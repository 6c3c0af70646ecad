//! Correlation-driven windows, the compressed matrix `Ã` and the adaptive
//! recompression sweep over increasing wavenumbers.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::{boundary_residual, sparsity_stats, MetricsRecord, SparsityStats};
use crate::discretization::{assemble_matrix, assemble_rhs, assemble_rows, Basis, Degree, Discretization};
use crate::error::{invalid, Error, Result};
use crate::geometry::{periodic_diff, GlobalParam, IncidentWave, Scene};
use crate::kernel::Wavenumber;
use crate::matrix::{norm2, DenseMatrix, MatrixRows, SparseComplexMatrix};
use crate::solve::{dense_solve, gmres, SolveMethod, SolveReport};
use crate::windows::{eval_chi, merge_windows, run_windows, CompoundWindow, ElementaryWindow, WindowSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationConfig {
    /// Half-width `T` of the sliding window, also the decay length of the
    /// synthesised windows.
    pub t: f64,
    /// Row-wise threshold fraction `ξ`.
    pub xi: f64,
    /// Centres per basis function, `Q_p = ⌈factor · N_p⌉`.
    pub center_factor: f64,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            t: 0.02,
            xi: 0.003,
            center_factor: 1.5,
        }
    }
}

impl CorrelationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t < 0.25) {
            return Err(invalid("T", "sliding window half-width must lie in (0, 0.25)"));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(invalid("xi", "threshold fraction must lie in (0, 1)"));
        }
        if !(self.center_factor > 1.0 && self.center_factor.is_finite()) {
            return Err(invalid("center_factor", "need more centres than basis functions"));
        }
        Ok(())
    }

    pub fn centers_for(&self, n: usize) -> usize {
        (self.center_factor * n as f64).ceil() as usize
    }

    /// Windows closer than this are merged.
    pub fn merge_eps(&self) -> f64 {
        0.5 * self.t
    }
}

/// Weight function `ζ` localising the correlation sums.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlidingWindow {
    /// `ζ(x) = χ(x, −T, 0, 0, T)` on the centre's obstacle.
    Bump(f64),
    /// `ζ ≡ 1` over the whole boundary.
    Unit,
}

/// `ζ(τ − σ)` for the bump of half-width `t`, with periodic distance.
pub fn sliding_window(tau: f64, sigma: f64, t: f64) -> f64 {
    eval_chi(periodic_diff(tau, sigma), -t, 0.0, 0.0, t)
}

/// Correlations `R_{n,q}`; only computed entries are stored, the rest are
/// masked out (read as exactly zero).
#[derive(Clone, Debug)]
pub struct CorrelationMatrix {
    k: Wavenumber,
    centers: Vec<usize>,
    center_offsets: Vec<usize>,
    /// Per row: sorted `(global centre index, R)`.
    rows: Vec<Vec<(u32, Complex64)>>,
}

impl CorrelationMatrix {
    pub fn wavenumber(&self) -> Wavenumber {
        self.k
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    /// Total number of centres `Q`.
    pub fn cols(&self) -> usize {
        *self.center_offsets.last().unwrap()
    }

    pub fn centers_on(&self, p: usize) -> usize {
        self.centers[p]
    }

    /// `σ_q` as a boundary parameter.
    pub fn center(&self, q: usize) -> GlobalParam {
        let p = self.center_offsets.partition_point(|&o| o <= q) - 1;
        GlobalParam::new(p, (q - self.center_offsets[p]) as f64 / self.centers[p] as f64)
    }

    pub fn get(&self, n: usize, q: usize) -> Complex64 {
        let row = &self.rows[n];
        match row.binary_search_by_key(&(q as u32), |e| e.0) {
            Ok(pos) => row[pos].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn is_computed(&self, n: usize, q: usize) -> bool {
        self.rows[n].binary_search_by_key(&(q as u32), |e| e.0).is_ok()
    }

    /// Stored entries of row `n`.
    pub fn row(&self, n: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.rows[n].iter().map(|&(q, v)| (q as usize, v))
    }

    pub fn computed_count(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn masked_count(&self) -> usize {
        self.rows() * self.cols() - self.computed_count()
    }

    /// Magnitudes as a dense grid: one line per collocation row, one column
    /// per centre; masked entries are written as 0.
    pub fn write_grid(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut line = String::new();
        for n in 0..self.rows() {
            line.clear();
            let mut it = self.rows[n].iter().peekable();
            for q in 0..self.cols() {
                let v = match it.peek() {
                    Some(&&(qq, v)) if qq as usize == q => {
                        it.next();
                        v.norm()
                    }
                    _ => 0.0,
                };
                if q > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{v:e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Column weights of the bump around each centre, per obstacle.
fn zeta_table(disc: &Discretization, centers: &[usize], t: f64) -> Vec<Vec<Vec<(usize, f64)>>> {
    let basis = disc.basis();
    let shift = match basis.degree() {
        Degree::Constant => 0.5,
        _ => 0.0,
    };
    (0..centers.len())
        .map(|p| {
            let n = basis.count(p);
            (0..centers[p])
                .map(|q| {
                    let sigma = q as f64 / centers[p] as f64;
                    let lo = ((sigma - t) * n as f64 - shift).floor() as i64;
                    let hi = ((sigma + t) * n as f64 - shift).ceil() as i64;
                    let mut out: Vec<(usize, f64)> = (lo..=hi)
                        .filter_map(|l| {
                            let l = l.rem_euclid(n as i64) as usize;
                            let z = sliding_window(basis.center(basis.offset(p) + l).t, sigma, t);
                            (z > 0.0).then_some((l, z))
                        })
                        .collect();
                    out.sort_unstable_by_key(|e| e.0);
                    out.dedup_by_key(|e| e.0);
                    out
                })
                .collect()
        })
        .collect()
}

/// `R_{n,q} = Σ_l ζ(τ_l − σ_q) M_{n,l} c_l` over the stored entries of `m`.
///
/// With a mask, only centres `σ_q` for which `mask(n, σ_q)` holds are computed.
pub fn compute_correlations(
    m: &dyn MatrixRows,
    c: &[Complex64],
    disc: &Discretization,
    cfg: &CorrelationConfig,
    window: SlidingWindow,
    mask: Option<&(dyn Fn(usize, GlobalParam) -> bool + Sync)>,
) -> Result<CorrelationMatrix> {
    cfg.validate()?;
    let n = disc.n();
    if m.n_rows() != n || m.n_cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.n_rows(),
        });
    }
    if c.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.len(),
        });
    }
    let basis = disc.basis();
    let obstacles = basis.counts().len();
    let centers: Vec<usize> = (0..obstacles).map(|p| cfg.centers_for(basis.count(p))).collect();
    let mut center_offsets = vec![0];
    for &q in &centers {
        center_offsets.push(center_offsets.last().unwrap() + q);
    }
    let table = match window {
        SlidingWindow::Bump(t) => {
            if !(t > 0.0 && t < 0.25) {
                return Err(invalid("T", "sliding window half-width must lie in (0, 0.25)"));
            }
            Some(zeta_table(disc, &centers, t))
        }
        SlidingWindow::Unit => None,
    };
    let zero = Complex64::new(0.0, 0.0);
    let rows: Vec<Vec<(u32, Complex64)>> = (0..n)
        .into_par_iter()
        .map(|row| {
            let mut y = vec![zero; n];
            m.for_each_in_row(row, &mut |j, v| y[j] = v * c[j]);
            let total: Complex64 = y.iter().sum();
            let mut out = Vec::new();
            for p in 0..obstacles {
                let off = basis.offset(p);
                for q in 0..centers[p] {
                    let sigma = GlobalParam::new(p, q as f64 / centers[p] as f64);
                    if let Some(mask) = mask {
                        if !mask(row, sigma) {
                            continue;
                        }
                    }
                    let r = match &table {
                        Some(tab) => tab[p][q].iter().map(|&(l, z)| y[off + l] * z).sum(),
                        None => total,
                    };
                    out.push(((center_offsets[p] + q) as u32, r));
                }
            }
            out
        })
        .collect();
    Ok(CorrelationMatrix {
        k: disc.wavenumber(),
        centers,
        center_offsets,
        rows,
    })
}

/// Window set from row-wise thresholding of `r`.
///
/// Each row keeps the centres with `|R| ≥ ξ · max |R_row|`; maximal runs of
/// kept centres become plateaus with decay `T`, the singularity window
/// `{t−2T, t−T, t+T, t+2T}` is always added, and overlapping windows merge.
pub fn windows_from_correlations(r: &CorrelationMatrix, cfg: &CorrelationConfig, basis: &Basis) -> Result<WindowSet> {
    cfg.validate()?;
    if r.rows() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: r.rows(),
        });
    }
    let obstacles = basis.counts().len();
    let t = cfg.t;
    let rows: Vec<Vec<CompoundWindow>> = (0..r.rows())
        .into_par_iter()
        .map(|n| {
            let max = r.row(n).map(|(_, v)| v.norm()).fold(0.0, f64::max);
            let thr = cfg.xi * max;
            let mut marks: Vec<Vec<bool>> = (0..obstacles).map(|p| vec![false; r.centers_on(p)]).collect();
            if max > 0.0 {
                for (q, v) in r.row(n) {
                    if v.norm() >= thr {
                        let s = r.center(q);
                        let local = q - r.center_offsets[s.obstacle];
                        marks[s.obstacle][local] = true;
                    }
                }
            }
            let own = basis.center(n);
            (0..obstacles)
                .map(|p| {
                    let Some(mut ws) = run_windows(0.0, &marks[p], t) else {
                        return CompoundWindow::full();
                    };
                    if p == own.obstacle {
                        match ElementaryWindow::around(own.t, t, t) {
                            Ok(w) => ws.push(w),
                            Err(_) => return CompoundWindow::full(),
                        }
                    }
                    merge_windows(&ws, cfg.merge_eps())
                })
                .collect()
        })
        .collect();
    WindowSet::new(basis.clone(), rows)
}

/// Shrinks `new` so that each of its windows lies inside the support of the
/// window of the matched row in `old`.
pub fn nest_within(new: &WindowSet, old: &WindowSet, eps: f64) -> Result<WindowSet> {
    let obstacles = new.basis().counts().len();
    let rows: Vec<Vec<CompoundWindow>> = (0..new.rows())
        .into_par_iter()
        .map(|i| {
            let m = old.match_row(new.row_param(i));
            (0..obstacles)
                .map(|p| {
                    let (nw, ow) = (new.window(i, p), old.window(m, p));
                    if ow.is_full() {
                        return nw.clone();
                    }
                    if nw.is_full() {
                        return ow.clone();
                    }
                    let mut parts = Vec::with_capacity(nw.parts().len());
                    for w in nw.parts() {
                        let mid = 0.5 * (w.l() + w.r());
                        let Some(outer) = ow.part_at(mid) else {
                            continue;
                        };
                        parts.push(w.clip_to(outer).unwrap_or(*outer));
                    }
                    merge_windows(&parts, eps)
                })
                .collect()
        })
        .collect();
    WindowSet::new(new.basis().clone(), rows)
}

/// Column indices and weights `w(t_i, τ_j) > 0` of every row, sorted by column.
pub fn window_pattern(ws: &WindowSet, disc: &Discretization) -> Vec<Vec<(usize, f64)>> {
    let basis = disc.basis();
    let shift = match basis.degree() {
        Degree::Constant => 0.5,
        _ => 0.0,
    };
    let same = ws.basis() == basis;
    (0..disc.n())
        .into_par_iter()
        .map(|i| {
            let m = if same { i } else { ws.match_row(disc.collocation()[i]) };
            let mut out = Vec::new();
            for (p, cw) in ws.row_windows(m).iter().enumerate() {
                let n = basis.count(p);
                let off = basis.offset(p);
                if cw.is_full() {
                    out.extend((0..n).map(|l| (off + l, 1.0)));
                    continue;
                }
                for w in cw.parts() {
                    let lo = (w.lambda() * n as f64 - shift).floor() as i64;
                    let hi = (w.rho() * n as f64 - shift).ceil() as i64;
                    for l in lo..=hi {
                        let l = l.rem_euclid(n as i64) as usize;
                        let v = w.eval(basis.center(off + l).t);
                        if v > 0.0 {
                            out.push((off + l, v));
                        }
                    }
                }
            }
            out.sort_unstable_by_key(|e| e.0);
            out.dedup_by_key(|e| e.0);
            out
        })
        .collect()
}

fn check_rank_guard(pattern: &[Vec<(usize, f64)>], n: usize) -> Result<()> {
    let mut col_hit = vec![false; n];
    for (i, row) in pattern.iter().enumerate() {
        if row.is_empty() {
            return Err(Error::Solver(format!("window set leaves row {i} empty")));
        }
        for &(j, _) in row {
            col_hit[j] = true;
        }
    }
    if let Some(j) = col_hit.iter().position(|h| !h) {
        return Err(Error::Solver(format!("window set leaves column {j} empty")));
    }
    Ok(())
}

fn weighted(pattern: &[Vec<(usize, f64)>], n: usize, value: impl Fn(usize, usize, usize) -> Complex64, block: bool) -> Result<SparseComplexMatrix> {
    let rows = pattern
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(pos, &(j, w))| {
                    let a = value(i, pos, j);
                    (j, if block { a } else { a * w })
                })
                .collect()
        })
        .collect();
    SparseComplexMatrix::from_rows(n, rows)
}

/// `Ã_ij = w(t_i, τ_j) · A_ij`, storing only entries with `w > 0`.
pub fn compress(a: &DenseMatrix, ws: &WindowSet, disc: &Discretization) -> Result<SparseComplexMatrix> {
    if a.rows() != disc.n() {
        return Err(Error::DimensionMismatch {
            expected: disc.n(),
            got: a.rows(),
        });
    }
    let pattern = window_pattern(ws, disc);
    check_rank_guard(&pattern, disc.n())?;
    weighted(&pattern, disc.n(), |i, _, j| a[(i, j)], false)
}

/// Same sparsity as [`compress`] but with the retained entries of `A`
/// left unscaled (a hard block truncation).
pub fn block_window_truncation(a: &DenseMatrix, ws: &WindowSet, disc: &Discretization) -> Result<SparseComplexMatrix> {
    let pattern = window_pattern(ws, disc);
    check_rank_guard(&pattern, disc.n())?;
    weighted(&pattern, disc.n(), |i, _, j| a[(i, j)], true)
}

/// Raw matrix entries on a window pattern, computed without forming `A`.
pub struct PatternEntries {
    pattern: Vec<Vec<(usize, f64)>>,
    values: Vec<Vec<Complex64>>,
    n: usize,
}

impl PatternEntries {
    pub fn assemble(disc: &Discretization, ws: &WindowSet) -> Result<Self> {
        let pattern = window_pattern(ws, disc);
        check_rank_guard(&pattern, disc.n())?;
        let cols: Vec<Vec<usize>> = pattern.iter().map(|r| r.iter().map(|e| e.0).collect()).collect();
        let values = assemble_rows(disc, &cols)?;
        Ok(Self {
            pattern,
            values,
            n: disc.n(),
        })
    }

    /// `Ã` with smooth weights.
    pub fn compressed(&self) -> Result<SparseComplexMatrix> {
        weighted(&self.pattern, self.n, |i, pos, _| self.values[i][pos], false)
    }

    /// `Ã` with indicator weights.
    pub fn block(&self) -> Result<SparseComplexMatrix> {
        weighted(&self.pattern, self.n, |i, pos, _| self.values[i][pos], true)
    }

    /// `Ã` for a window set whose supports lie inside the assembled pattern.
    pub fn restricted(&self, ws: &WindowSet, disc: &Discretization) -> Result<SparseComplexMatrix> {
        let sub = window_pattern(ws, disc);
        check_rank_guard(&sub, disc.n())?;
        let rows = sub
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let full = &self.pattern[i];
                row.iter()
                    .map(|&(j, w)| {
                        let pos = full
                            .binary_search_by_key(&j, |e| e.0)
                            .map_err(|_| Error::Solver(format!("entry ({i}, {j}) outside the assembled pattern")))?;
                        Ok((j, self.values[i][pos] * w))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        SparseComplexMatrix::from_rows(self.n, rows)
    }
}

/// Assembles `Ã` directly, computing only entries with `w > 0`.
pub fn assemble_compressed(disc: &Discretization, ws: &WindowSet) -> Result<SparseComplexMatrix> {
    PatternEntries::assemble(disc, ws)?.compressed()
}

/// Dense solve, correlations with the bump window, and the resulting windows.
pub fn correlation_windows(
    a: &DenseMatrix,
    c: &[Complex64],
    disc: &Discretization,
    cfg: &CorrelationConfig,
) -> Result<(CorrelationMatrix, WindowSet)> {
    let r = compute_correlations(a, c, disc, cfg, SlidingWindow::Bump(cfg.t), None)?;
    let ws = windows_from_correlations(&r, cfg, disc.basis())?;
    Ok((r, ws))
}

/// Mask for recorrelation: centres inside the matched previous window.
pub fn window_mask<'a>(ws: &'a WindowSet, disc: &'a Discretization) -> impl Fn(usize, GlobalParam) -> bool + Sync + 'a {
    move |row, sigma| {
        let m = ws.match_row(disc.collocation()[row]);
        ws.window(m, sigma.obstacle).supports(sigma.t)
    }
}

/// Which solver handles the compressed systems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolverPolicy {
    Direct,
    Gmres,
    /// Direct up to this many unknowns, GMRES above.
    Auto(usize),
}

impl SolverPolicy {
    pub fn pick(self, n: usize) -> SolveMethod {
        match self {
            SolverPolicy::Direct => SolveMethod::Direct,
            SolverPolicy::Gmres => SolveMethod::Gmres,
            SolverPolicy::Auto(limit) if n <= limit => SolveMethod::Direct,
            SolverPolicy::Auto(_) => SolveMethod::Gmres,
        }
    }
}

/// Solves the sparse system with the chosen method.
pub fn solve_sparse(m: &SparseComplexMatrix, b: &[Complex64], method: SolveMethod, tol: f64) -> Result<SolveReport> {
    match method {
        SolveMethod::Direct => dense_solve(&m.to_dense(), b),
        SolveMethod::Gmres => {
            let r = gmres(|x| m.matvec(x), b, tol, m.rows())?;
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

/// Wavenumbers of a frequency sweep and how each system is solved.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    wavenumbers: Vec<f64>,
    pub solver: SolverPolicy,
    pub gmres_tol: f64,
    /// Also solve the dense system (for reference metrics) when `N` is at most this.
    pub dense_reference_max: usize,
    /// Keep each compressed matrix in the results.
    pub keep_matrices: bool,
}

impl SweepPlan {
    pub fn new(wavenumbers: Vec<f64>) -> Result<Self> {
        if wavenumbers.is_empty() {
            return Err(invalid("k", "sweep needs at least one wavenumber"));
        }
        if wavenumbers.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(invalid("k", "wavenumbers must be positive"));
        }
        if wavenumbers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("k", "wavenumbers must be strictly increasing"));
        }
        Ok(Self {
            wavenumbers,
            solver: SolverPolicy::Auto(3000),
            gmres_tol: 1e-8,
            dense_reference_max: 0,
            keep_matrices: false,
        })
    }

    /// `k1, 2 k1, 4 k1, …` up to and including `k_max`.
    pub fn doublings(k1: f64, k_max: f64) -> Result<Self> {
        let mut ks = vec![k1];
        while *ks.last().unwrap() * 2.0 <= k_max * (1.0 + 1e-12) {
            ks.push(ks.last().unwrap() * 2.0);
        }
        Self::new(ks)
    }

    /// `k1, k1 + step, …` up to and including `k_max`.
    pub fn linear(k1: f64, k_max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(invalid("k_step", "step must be positive"));
        }
        let count = ((k_max - k1) / step + 1e-9).floor() as usize;
        Self::new((0..=count).map(|i| k1 + step * i as f64).collect())
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Whether correlations are recomputed at each wavenumber: at `k1` and
    /// whenever `k` reaches twice the last recorrelation wavenumber.
    pub fn checkpoints(&self) -> Vec<bool> {
        let mut last = self.wavenumbers[0];
        self.wavenumbers
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                if i == 0 {
                    true
                } else if k >= 2.0 * last * (1.0 - 1e-12) {
                    last = k;
                    true
                } else {
                    false
                }
            })
            .collect()
    }
}

/// Discretisation settings shared by all wavenumbers of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscSettings {
    pub ppw: f64,
    pub degree: Degree,
}

impl Default for DiscSettings {
    fn default() -> Self {
        Self {
            ppw: 10.0,
            degree: Degree::Linear,
        }
    }
}

/// Result at one wavenumber of a sweep.
#[derive(Clone, Debug)]
pub struct SweepStep {
    pub k: f64,
    pub n: usize,
    pub recorrelated: bool,
    pub windows: WindowSet,
    pub solution: Vec<Complex64>,
    pub stats: SparsityStats,
    pub metrics: MetricsRecord,
    pub matrix: Option<SparseComplexMatrix>,
    /// Dense solution when the reference solve ran.
    pub dense_solution: Option<Vec<Complex64>>,
}

/// Completed steps, plus the error that stopped the sweep early, if any.
#[derive(Debug)]
pub struct SweepOutcome {
    pub steps: Vec<SweepStep>,
    pub error: Option<Error>,
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b)
}

/// Adaptive recompression over `plan`.
///
/// At `k1` the dense system is solved and full correlations give the first
/// windows. At later wavenumbers only entries inside the current windows
/// are assembled. At every doubling the correlations are recomputed from
/// `Ã` and `c̃` on centres inside the current windows, and the thresholded
/// windows, nested inside the previous ones, replace them.
pub fn recompression_sweep(
    plan: &SweepPlan,
    scene: Arc<Scene>,
    wave: &IncidentWave,
    settings: DiscSettings,
    cfg: &CorrelationConfig,
    seed: u64,
) -> Result<SweepOutcome> {
    cfg.validate()?;
    let checkpoints = plan.checkpoints();
    let mut steps: Vec<SweepStep> = Vec::new();
    let mut windows: Option<WindowSet> = None;
    for (idx, (&k, &recorrelate)) in plan.wavenumbers.iter().zip(&checkpoints).enumerate() {
        let run = || -> Result<SweepStep> {
            let k_w = Wavenumber::new(k)?;
            let disc = Discretization::new(Arc::clone(&scene), k_w, settings.ppw, settings.degree)?;
            if idx == 0 && disc.n() < 64 {
                return Err(invalid("k", format!("first wavenumber gives only {} unknowns; need 64", disc.n())));
            }
            let mut metrics = MetricsRecord {
                k,
                n: disc.n(),
                method: "sweep".into(),
                recorrelated: recorrelate,
                ..Default::default()
            };
            let t0 = Instant::now();
            let b = assemble_rhs(&disc, wave)?;
            let method = plan.solver.pick(disc.n());
            let mut dense_c = None;

            let (ws, matrix, report) = if idx == 0 {
                let t = Instant::now();
                let a = assemble_matrix(&disc)?;
                metrics.timings.insert("assemble".into(), secs(t));
                let t = Instant::now();
                let dense = dense_solve(&a, &b)?;
                metrics.timings.insert("solve_dense".into(), secs(t));
                let t = Instant::now();
                let (_, ws) = correlation_windows(&a, &dense.x, &disc, cfg)?;
                metrics.timings.insert("correlate".into(), secs(t));
                let m = compress(&a, &ws, &disc)?;
                let t = Instant::now();
                let rep = solve_sparse(&m, &b, method, plan.gmres_tol)?;
                metrics.timings.insert("solve".into(), secs(t));
                dense_c = Some(dense.x);
                (ws, m, rep)
            } else {
                let old = windows.as_ref().expect("windows exist after the first step");
                let t = Instant::now();
                let entries = PatternEntries::assemble(&disc, old)?;
                let m_old = entries.compressed()?;
                metrics.timings.insert("assemble".into(), secs(t));
                let t = Instant::now();
                let rep = solve_sparse(&m_old, &b, method, plan.gmres_tol)?;
                metrics.timings.insert("solve".into(), secs(t));
                if recorrelate {
                    let t = Instant::now();
                    let mask = window_mask(old, &disc);
                    let r = compute_correlations(&m_old, &rep.x, &disc, cfg, SlidingWindow::Bump(cfg.t), Some(&mask))?;
                    let fresh = windows_from_correlations(&r, cfg, disc.basis())?;
                    let ws = nest_within(&fresh, old, cfg.merge_eps())?;
                    let m_new = entries.restricted(&ws, &disc)?;
                    metrics.timings.insert("correlate".into(), secs(t));
                    let t = Instant::now();
                    let rep = solve_sparse(&m_new, &b, method, plan.gmres_tol)?;
                    metrics.timings.insert("solve_recompressed".into(), secs(t));
                    (ws, m_new, rep)
                } else {
                    // keep the previous windows, re-expressed on this grid
                    let ws = rebase(old, disc.basis())?;
                    (ws, m_old, rep)
                }
            };
            if method == SolveMethod::Gmres {
                metrics.gmres_iterations_compressed = Some(report.iterations);
            }
            let stats = sparsity_stats(&matrix);
            metrics.nnz_fraction = stats.fraction;
            if dense_c.is_none() && disc.n() <= plan.dense_reference_max {
                let t = Instant::now();
                let a = assemble_matrix(&disc)?;
                dense_c = Some(dense_solve(&a, &b)?.x);
                metrics.timings.insert("dense_reference".into(), secs(t));
            }
            let t = Instant::now();
            metrics.residual_compressed = Some(boundary_residual(&disc, &report.x, wave, seed)?);
            if let Some(c) = &dense_c {
                metrics.residual_dense = Some(boundary_residual(&disc, c, wave, seed)?);
                metrics.coeff_error = Some(rel_diff(&report.x, c));
            }
            metrics.timings.insert("residual".into(), secs(t));
            metrics.timings.insert("total".into(), secs(t0));
            Ok(SweepStep {
                k,
                n: disc.n(),
                recorrelated: recorrelate,
                windows: ws,
                solution: report.x,
                stats,
                metrics,
                matrix: plan.keep_matrices.then_some(matrix),
                dense_solution: dense_c,
            })
        };
        match run() {
            Ok(step) => {
                windows = Some(step.windows.clone());
                steps.push(step);
            }
            Err(e) => {
                return Ok(SweepOutcome { steps, error: Some(e) });
            }
        }
    }
    Ok(SweepOutcome { steps, error: None })
}

/// Window set on the rows of `basis`, copying each row's matched window.
pub fn rebase(ws: &WindowSet, basis: &Basis) -> Result<WindowSet> {
    if ws.basis() == basis {
        return Ok(ws.clone());
    }
    let rows = (0..basis.len())
        .map(|i| ws.row_windows(ws.match_row(basis.center(i))).to_vec())
        .collect();
    WindowSet::new(basis.clone(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::assemble_system;
    use crate::geometry::{preset_scene, Preset, PresetParams, Vec2};

    fn setup(p: Preset, k: f64) -> (Discretization, DenseMatrix, Vec<Complex64>, IncidentWave) {
        let scene = Arc::new(preset_scene(p, &PresetParams::new()).unwrap());
        let d = Discretization::new(scene, Wavenumber::new(k).unwrap(), 10.0, Degree::Linear).unwrap();
        let wave = IncidentWave::plane(Vec2::new(1.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        let sys = assemble_system(&d, &wave).unwrap();
        let c = dense_solve(&sys.a, &sys.b).unwrap().x;
        (d, sys.a, c, wave)
    }

    #[test]
    fn sliding_window_examples() {
        assert_eq!(sliding_window(0.3, 0.3, 0.02), 1.0);
        assert_eq!(sliding_window(0.33, 0.3, 0.02), 0.0);
        assert_eq!(sliding_window(0.99, 0.01, 0.02), 0.0);
        let v = sliding_window(0.31, 0.3, 0.02);
        assert!((v - eval_chi(0.5, 0.0, 1.0, 2.0, 3.0)).abs() < 1e-12);
    }

    #[test]
    fn unit_window_collapses_to_product() {
        let (d, a, c, _) = setup(Preset::Ellipse, 6.0);
        let cfg = CorrelationConfig::default();
        let r = compute_correlations(&a, &c, &d, &cfg, SlidingWindow::Unit, None).unwrap();
        let ac = a.matvec(&c).unwrap();
        assert_eq!(r.cols(), cfg.centers_for(d.n()));
        for n in 0..d.n() {
            for q in [0, 7, r.cols() - 1] {
                assert!((r.get(n, q) - ac[n]).norm() <= 1e-12 * ac[n].norm());
            }
        }
        let zero = vec![Complex64::new(0.0, 0.0); d.n()];
        let r0 = compute_correlations(&a, &zero, &d, &cfg, SlidingWindow::Bump(0.02), None).unwrap();
        assert!((0..d.n()).all(|n| r0.row(n).all(|(_, v)| v.norm() == 0.0)));
    }

    #[test]
    fn bump_correlations_match_direct_sum() {
        let (d, a, c, _) = setup(Preset::TwoCircles, 6.0);
        let cfg = CorrelationConfig::default();
        let r = compute_correlations(&a, &c, &d, &cfg, SlidingWindow::Bump(0.05), None).unwrap();
        for (n, q) in [(0, 0), (5, 30), (40, 60), (d.n() - 1, r.cols() - 1)] {
            let s = r.center(q);
            let direct: Complex64 = (0..d.n())
                .map(|l| {
                    let tau = d.basis().center(l);
                    let z = if tau.obstacle == s.obstacle { sliding_window(tau.t, s.t, 0.05) } else { 0.0 };
                    a[(n, l)] * c[l] * z
                })
                .sum();
            assert!((r.get(n, q) - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn thresholding_examples() {
        let basis = Basis::new(Degree::Linear, vec![40]);
        let cfg = CorrelationConfig::default();
        let q = cfg.centers_for(40);
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        // a single retained centre far from the row gives two windows
        let mut rows = vec![vec![]; 40];
        for (n, row) in rows.iter_mut().enumerate() {
            *row = (0..q as u32).map(|qq| (qq, if qq == 30 { one } else { zero })).collect();
            if n == 1 {
                *row = (0..q as u32).map(|qq| (qq, one)).collect();
            }
        }
        let r = CorrelationMatrix {
            k: Wavenumber::new(1.0).unwrap(),
            centers: vec![q],
            center_offsets: vec![0, q],
            rows,
        };
        let ws = windows_from_correlations(&r, &cfg, &basis).unwrap();
        assert_eq!(ws.window(0, 0).parts().len(), 2);
        assert!(ws.window(0, 0).eval(0.5) == 1.0 && ws.window(0, 0).eval(0.0) == 1.0);
        assert!(ws.window(1, 0).is_full());
    }

    #[test]
    fn compression_keeps_plateau_entries_exactly() {
        let (d, a, c, _) = setup(Preset::Circle, 12.0);
        let cfg = CorrelationConfig::default();
        let (_, ws) = correlation_windows(&a, &c, &d, &cfg).unwrap();
        let m = compress(&a, &ws, &d).unwrap();
        let direct = assemble_compressed(&d, &ws).unwrap();
        for i in 0..d.n() {
            for j in 0..d.n() {
                let w = ws.weight(i, d.basis().center(j));
                if w == 0.0 {
                    assert!(!m.contains(i, j));
                } else if w == 1.0 {
                    assert_eq!(m.get(i, j), a[(i, j)]);
                } else {
                    assert_eq!(m.get(i, j), a[(i, j)] * w);
                }
                assert_eq!(m.get(i, j), direct.get(i, j));
            }
        }
        assert!(m.nnz() < d.n() * d.n());
        let b = block_window_truncation(&a, &ws, &d).unwrap();
        assert_eq!(b.nnz(), m.nnz());
        for i in 0..d.n() {
            for (j, v) in b.row(i) {
                assert!(m.contains(i, j));
                assert_eq!(v, a[(i, j)]);
            }
        }
    }

    #[test]
    fn full_windows_reproduce_dense() {
        let (d, a, c, wave) = setup(Preset::Ellipse, 8.0);
        let ws = WindowSet::all_full(d.basis().clone());
        let m = compress(&a, &ws, &d).unwrap();
        assert_eq!(m.nnz(), d.n() * d.n());
        let b = assemble_rhs(&d, &wave).unwrap();
        let ct = solve_sparse(&m, &b, SolveMethod::Direct, 0.0).unwrap().x;
        assert!(rel_diff(&ct, &c) <= 1e-12);
    }

    #[test]
    fn masked_entries_are_counted() {
        let (d, a, c, _) = setup(Preset::Circle, 12.0);
        let cfg = CorrelationConfig::default();
        let (_, ws) = correlation_windows(&a, &c, &d, &cfg).unwrap();
        let m = compress(&a, &ws, &d).unwrap();
        let mask = window_mask(&ws, &d);
        let r = compute_correlations(&m, &c, &d, &cfg, SlidingWindow::Bump(cfg.t), Some(&mask)).unwrap();
        let mut covered = 0;
        for n in 0..d.n() {
            for q in 0..r.cols() {
                let s = r.center(q);
                let inside = ws.window(n, s.obstacle).supports(s.t);
                covered += inside as usize;
                assert_eq!(r.is_computed(n, q), inside);
                if !inside {
                    assert_eq!(r.get(n, q), Complex64::new(0.0, 0.0));
                }
            }
        }
        assert_eq!(r.masked_count(), d.n() * r.cols() - covered);
    }

    #[test]
    fn nesting_never_grows_windows() {
        let (d, a, c, _) = setup(Preset::Ellipse, 8.0);
        let cfg = CorrelationConfig { xi: 0.05, ..Default::default() };
        let (_, old) = correlation_windows(&a, &c, &d, &cfg).unwrap();
        let wide = CorrelationConfig { t: 0.08, xi: 0.001, ..Default::default() };
        let (_, fresh) = correlation_windows(&a, &c, &d, &wide).unwrap();
        let nested = nest_within(&fresh, &old, cfg.merge_eps()).unwrap();
        for i in 0..d.n() {
            for q in 0..400 {
                let tau = q as f64 / 400.0;
                if nested.window(i, 0).supports(tau) {
                    assert!(old.window(i, 0).supports(tau));
                }
            }
            // the singularity is still covered
            assert!(nested.window(i, 0).eval(d.collocation()[i].t) == 1.0);
        }
    }

    #[test]
    fn plan_checkpoints() {
        let p = SweepPlan::doublings(64.0, 512.0).unwrap();
        assert_eq!(p.wavenumbers(), &[64.0, 128.0, 256.0, 512.0]);
        assert_eq!(p.checkpoints(), vec![true; 4]);
        let p = SweepPlan::linear(16.0, 80.0, 16.0).unwrap();
        assert_eq!(p.wavenumbers(), &[16.0, 32.0, 48.0, 64.0, 80.0]);
        assert_eq!(p.checkpoints(), vec![true, true, false, true, false]);
        assert!(SweepPlan::new(vec![2.0, 1.0]).is_err());
        assert!(SweepPlan::new(vec![]).is_err());
    }

    #[test]
    fn single_step_sweep_is_one_compression_pass() {
        let scene = Arc::new(preset_scene(Preset::Circle, &PresetParams::new()).unwrap());
        let wave = IncidentWave::plane(Vec2::new(1.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        let plan = SweepPlan::new(vec![12.0]).unwrap();
        let cfg = CorrelationConfig::default();
        let out = recompression_sweep(&plan, scene.clone(), &wave, DiscSettings::default(), &cfg, 1).unwrap();
        assert!(out.error.is_none());
        let step = &out.steps[0];
        let (d, a, c, _) = setup(Preset::Circle, 12.0);
        let (_, ws) = correlation_windows(&a, &c, &d, &cfg).unwrap();
        assert_eq!(step.windows, ws);
        let m = compress(&a, &ws, &d).unwrap();
        assert_eq!(step.stats.nnz, m.nnz());
        let b = assemble_rhs(&d, &wave).unwrap();
        let ct = dense_solve(&m.to_dense(), &b).unwrap().x;
        assert_eq!(step.solution, ct);
    }

    #[test]
    fn sweep_preserves_partial_results() {
        let scene = Arc::new(preset_scene(Preset::Circle, &PresetParams::new()).unwrap());
        let wave = IncidentWave::plane(Vec2::new(1.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        // the first wavenumber is too small to be a valid starting point
        let plan = SweepPlan::new(vec![2.0, 4.0]).unwrap();
        let out = recompression_sweep(&plan, scene, &wave, DiscSettings::default(), &CorrelationConfig::default(), 1).unwrap();
        assert!(out.steps.is_empty());
        assert!(out.error.is_some());
    }
}
