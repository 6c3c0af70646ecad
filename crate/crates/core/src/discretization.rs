//! Collocation discretisation of the first-kind single-layer equation.
//!
//! Each obstacle `p` carries a uniform periodic mesh of `N_p` cells of
//! parameter width `1/N_p`. Matrix entries
//! `A_ij = ∫_{S_j} K_κ(t_i, τ) φ_j(τ) dτ` are accumulated cell by cell: for a
//! target point the integral of the kernel against every local shape piece
//! of a cell is computed once and scattered into the columns of the basis
//! functions that own those pieces.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{periodic_diff, wrap01, GlobalParam, IncidentWave, Scene, Vec2};
use crate::kernel::{green_at_distance, Wavenumber};
use crate::matrix::{DenseMatrix, SparseComplexMatrix};
use crate::quadrature::{gauss_legendre, graded_nodes};

/// Polynomial degree of the basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Degree {
    /// Piecewise constants, collocated at cell midpoints.
    Constant,
    /// Periodic hat functions, collocated at nodes.
    Linear,
    /// Uniform periodic cubic B-splines, collocated at nodes.
    Cubic,
}

impl Degree {
    pub fn from_int(d: u32) -> Result<Self> {
        match d {
            0 => Ok(Degree::Constant),
            1 => Ok(Degree::Linear),
            3 => Ok(Degree::Cubic),
            _ => Err(invalid("degree", format!("unsupported basis degree {d}; use 0, 1 or 3"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Degree::Constant => 0,
            Degree::Linear => 1,
            Degree::Cubic => 3,
        }
    }

    /// Number of basis pieces living on one cell.
    pub fn pieces(self) -> usize {
        match self {
            Degree::Constant => 1,
            Degree::Linear => 2,
            Degree::Cubic => 4,
        }
    }

    /// Support length in cells.
    pub fn support_cells(self) -> usize {
        match self {
            Degree::Constant => 1,
            Degree::Linear => 2,
            Degree::Cubic => 4,
        }
    }

    /// Offset (in cells) of the first basis index touching cell `c`:
    /// pieces on cell `c` belong to `c + first_offset + r`.
    fn first_offset(self) -> isize {
        match self {
            Degree::Constant | Degree::Linear => 0,
            Degree::Cubic => -1,
        }
    }

    /// Values of the local pieces at local coordinate `s ∈ [0,1]`.
    #[inline]
    fn shape(self, s: f64) -> [f64; 4] {
        match self {
            Degree::Constant => [1.0, 0.0, 0.0, 0.0],
            Degree::Linear => [1.0 - s, s, 0.0, 0.0],
            Degree::Cubic => {
                let s2 = s * s;
                let s3 = s2 * s;
                let u = 1.0 - s;
                [
                    u * u * u / 6.0,
                    (3.0 * s3 - 6.0 * s2 + 4.0) / 6.0,
                    (-3.0 * s3 + 3.0 * s2 + 3.0 * s + 1.0) / 6.0,
                    s3 / 6.0,
                ]
            }
        }
    }
}

/// Basis bookkeeping over all obstacles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    degree: Degree,
    counts: Vec<usize>,
    offsets: Vec<usize>,
}

impl Basis {
    pub fn new(degree: Degree, counts: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        let mut acc = 0;
        for &n in &counts {
            offsets.push(acc);
            acc += n;
        }
        offsets.push(acc);
        Self {
            degree,
            counts,
            offsets,
        }
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    /// Total number of basis functions `N`.
    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, p: usize) -> usize {
        self.counts[p]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn offset(&self, p: usize) -> usize {
        self.offsets[p]
    }

    /// Obstacle and local index of global basis index `j`.
    pub fn locate(&self, j: usize) -> (usize, usize) {
        let p = self.offsets.partition_point(|&o| o <= j) - 1;
        (p, j - self.offsets[p])
    }

    /// Centre `τ_j` of the support of `φ_j`.
    pub fn center(&self, j: usize) -> GlobalParam {
        let (p, l) = self.locate(j);
        let n = self.counts[p] as f64;
        let t = match self.degree {
            Degree::Constant => (l as f64 + 0.5) / n,
            _ => l as f64 / n,
        };
        GlobalParam::new(p, t)
    }

    /// Support length of `φ_j` in parameter units on obstacle `p`.
    pub fn support_len(&self, p: usize) -> f64 {
        self.degree.support_cells() as f64 / self.counts[p] as f64
    }

    /// Local basis index of piece `r` on cell `c` of obstacle `p`.
    #[inline]
    pub(crate) fn piece_owner(&self, p: usize, c: usize, r: usize) -> usize {
        let n = self.counts[p] as isize;
        (c as isize + self.degree.first_offset() + r as isize).rem_euclid(n) as usize
    }

    /// Cells (local indices) forming the support of local basis `l` on obstacle `p`.
    pub(crate) fn support_cells(&self, p: usize, l: usize) -> impl Iterator<Item = usize> {
        let n = self.counts[p] as isize;
        let first = match self.degree {
            Degree::Constant => l as isize,
            Degree::Linear => l as isize - 1,
            Degree::Cubic => l as isize - 2,
        };
        (0..self.degree.support_cells() as isize).map(move |d| (first + d).rem_euclid(n) as usize)
    }

    /// Cell index and local coordinate of `t` on obstacle `p`.
    fn cell_of(&self, p: usize, t: f64) -> (usize, f64) {
        let n = self.counts[p];
        let x = wrap01(t) * n as f64;
        let c = (x.floor() as usize).min(n - 1);
        (c, x - c as f64)
    }

    /// `φ_j(τ)`.
    pub fn eval(&self, j: usize, tau: GlobalParam) -> f64 {
        let (p, l) = self.locate(j);
        if tau.obstacle != p {
            return 0.0;
        }
        let (c, s) = self.cell_of(p, tau.t);
        let shape = self.degree.shape(s);
        (0..self.degree.pieces())
            .filter(|&r| self.piece_owner(p, c, r) == l)
            .map(|r| shape[r])
            .sum()
    }
}

/// One precomputed quadrature node of a cell.
#[derive(Clone, Copy, Debug)]
struct QuadNode {
    point: Vec2,
    /// Gauss weight × parameter Jacobian × speed.
    weight: f64,
    shape: [f64; 4],
}

/// A point at which the single-layer potential is integrated.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Target {
    pub x: Vec2,
    /// Boundary parameter of `x` when it lies on the boundary.
    pub on: Option<GlobalParam>,
}

/// Discretisation of a scene at one wavenumber.
#[derive(Clone, Debug)]
pub struct Discretization {
    scene: Arc<Scene>,
    k: Wavenumber,
    ppw: f64,
    basis: Basis,
    collocation: Vec<GlobalParam>,
    /// `cells[p][c]` holds the regular quadrature nodes of cell `c`.
    cells: Vec<Vec<Vec<QuadNode>>>,
    cell_arc: Vec<Vec<f64>>,
}

/// Cells within this many cell widths of a boundary target use graded quadrature.
const NEAR_CELLS: f64 = 0.75;

impl Discretization {
    /// Builds the discretisation with `N_p = ⌈ppw · L_p · k / 2π⌉` per obstacle.
    pub fn new(scene: Arc<Scene>, k: Wavenumber, ppw: f64, degree: Degree) -> Result<Self> {
        if !(ppw > 0.0 && ppw.is_finite()) {
            return Err(invalid("ppw", "points per wavelength must be positive"));
        }
        let counts: Vec<usize> = scene
            .obstacles()
            .iter()
            .map(|c| {
                let x = ppw * c.length() * k.get() / (2.0 * std::f64::consts::PI);
                // absorb round-off so that exact products are not bumped up
                ((x * (1.0 - 1e-12)).ceil() as usize).max(8)
            })
            .collect();
        Self::with_counts(scene, k, ppw, degree, counts)
    }

    /// Builds the discretisation with explicit per-obstacle counts.
    pub fn with_counts(
        scene: Arc<Scene>,
        k: Wavenumber,
        ppw: f64,
        degree: Degree,
        counts: Vec<usize>,
    ) -> Result<Self> {
        if counts.len() != scene.len() {
            return Err(Error::DimensionMismatch {
                expected: scene.len(),
                got: counts.len(),
            });
        }
        if counts.iter().any(|&n| n < 4) {
            return Err(invalid("counts", "need at least four cells per obstacle"));
        }
        let basis = Basis::new(degree, counts);
        let collocation = (0..basis.len()).map(|i| basis.center(i)).collect();
        let mut cells = Vec::with_capacity(scene.len());
        let mut cell_arc = Vec::with_capacity(scene.len());
        for (p, curve) in scene.obstacles().iter().enumerate() {
            let n = basis.count(p);
            let h = 1.0 / n as f64;
            let per: Vec<(Vec<QuadNode>, f64)> = (0..n)
                .into_par_iter()
                .map(|c| {
                    let a = c as f64 * h;
                    let arc = curve.arc_length(a, a + h);
                    let nq = ((3.0 * k.get() * arc).ceil() as usize).max(8);
                    let (x, w) = gauss_legendre(nq);
                    let nodes = x
                        .iter()
                        .zip(w)
                        .map(|(xi, wi)| {
                            let s = 0.5 * (xi + 1.0);
                            let (pt, d) = curve.point_deriv(a + s * h);
                            QuadNode {
                                point: pt,
                                weight: wi * 0.5 * h * d.norm(),
                                shape: degree.shape(s),
                            }
                        })
                        .collect();
                    (nodes, arc)
                })
                .collect();
            let (nodes, arcs): (Vec<_>, Vec<_>) = per.into_iter().unzip();
            cells.push(nodes);
            cell_arc.push(arcs);
        }
        Ok(Self {
            scene,
            k,
            ppw,
            basis,
            collocation,
            cells,
            cell_arc,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn scene_arc(&self) -> Arc<Scene> {
        Arc::clone(&self.scene)
    }

    pub fn wavenumber(&self) -> Wavenumber {
        self.k
    }

    pub fn ppw(&self) -> f64 {
        self.ppw
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn degree(&self) -> Degree {
        self.basis.degree
    }

    /// Number of unknowns (and collocation points).
    pub fn n(&self) -> usize {
        self.basis.len()
    }

    pub fn collocation(&self) -> &[GlobalParam] {
        &self.collocation
    }

    pub fn collocation_point(&self, i: usize) -> Vec2 {
        self.scene.point(self.collocation[i])
    }

    /// Largest cell arc length over all obstacles.
    pub fn max_cell_arc(&self) -> f64 {
        self.cell_arc.iter().flatten().copied().fold(0.0, f64::max)
    }

    fn is_near(&self, on: GlobalParam, p: usize, c: usize) -> Option<f64> {
        if on.obstacle != p {
            return None;
        }
        let n = self.basis.count(p) as f64;
        let mid = (c as f64 + 0.5) / n;
        let d = periodic_diff(on.t, mid);
        if d.abs() <= (0.5 + NEAR_CELLS) / n {
            Some(mid + d)
        } else {
            None
        }
    }

    /// Integrals of the kernel against the local pieces of cell `c` on obstacle `p`.
    #[inline]
    pub(crate) fn cell_moments(&self, target: &Target, p: usize, c: usize) -> [Complex64; 4] {
        let k = self.k.get();
        let mut m = [Complex64::new(0.0, 0.0); 4];
        let pieces = self.basis.degree.pieces();
        let singular = target.on.and_then(|on| self.is_near(on, p, c));
        match singular {
            None => {
                for node in &self.cells[p][c] {
                    let g = green_at_distance(k, target.x.dist(node.point)) * node.weight;
                    for r in 0..pieces {
                        m[r] += g * node.shape[r];
                    }
                }
            }
            Some(s) => {
                let n = self.basis.count(p) as f64;
                let h = 1.0 / n;
                let mid = (c as f64 + 0.5) * h;
                // Frame unwrapped around the cell so that `s` is comparable.
                let (a, b) = (mid - 0.5 * h, mid + 0.5 * h);
                let curve = self.scene.curve(p);
                let mut nodes = Vec::with_capacity(400);
                graded_nodes(a, b, s, &mut nodes);
                for (tau, w) in nodes {
                    let (y, d) = curve.point_deriv(tau);
                    let r = target.x.dist(y);
                    if r == 0.0 {
                        continue;
                    }
                    let shape = self.basis.degree.shape(((tau - a) * n).clamp(0.0, 1.0));
                    let g = green_at_distance(k, r) * (w * d.norm());
                    for r in 0..pieces {
                        m[r] += g * shape[r];
                    }
                }
            }
        }
        m
    }

    /// Full row `∫ K(x, κ(τ)) ‖κ'(τ)‖ φ_j(τ) dτ` for every `j`, written into `out`.
    pub(crate) fn dense_row(&self, target: &Target, out: &mut [Complex64]) {
        out.fill(Complex64::new(0.0, 0.0));
        let pieces = self.basis.degree.pieces();
        for p in 0..self.scene.len() {
            let off = self.basis.offset(p);
            for c in 0..self.basis.count(p) {
                let m = self.cell_moments(target, p, c);
                for (r, v) in m.iter().enumerate().take(pieces) {
                    out[off + self.basis.piece_owner(p, c, r)] += v;
                }
            }
        }
    }

    /// Row entries restricted to the sorted global columns `cols`.
    ///
    /// Accumulation order matches [`Self::dense_row`], so entries agree bitwise.
    pub(crate) fn sparse_row(&self, target: &Target, cols: &[usize]) -> Vec<Complex64> {
        let mut vals = vec![Complex64::new(0.0, 0.0); cols.len()];
        let pieces = self.basis.degree.pieces();
        let mut start = 0;
        for p in 0..self.scene.len() {
            let off = self.basis.offset(p);
            let end = start + cols[start..].partition_point(|&j| j < off + self.basis.count(p));
            let local = &cols[start..end];
            if !local.is_empty() {
                let mut needed: Vec<usize> = local
                    .iter()
                    .flat_map(|&j| self.basis.support_cells(p, j - off))
                    .collect();
                needed.sort_unstable();
                needed.dedup();
                for c in needed {
                    let m = self.cell_moments(target, p, c);
                    for (r, v) in m.iter().enumerate().take(pieces) {
                        let j = off + self.basis.piece_owner(p, c, r);
                        if let Ok(pos) = local.binary_search(&j) {
                            vals[start + pos] += v;
                        }
                    }
                }
            }
            start = end;
        }
        vals
    }

    /// Collocation target for row `i`.
    pub(crate) fn row_target(&self, i: usize) -> Target {
        Target {
            x: self.collocation_point(i),
            on: Some(self.collocation[i]),
        }
    }

    /// Boundary target at an arbitrary parameter.
    pub(crate) fn boundary_target(&self, g: GlobalParam) -> Target {
        Target {
            x: self.scene.point(g),
            on: Some(g),
        }
    }

    /// Off-boundary target; errors when `x` is within one element of the boundary.
    pub(crate) fn field_target(&self, x: Vec2) -> Result<Target> {
        for (p, cells) in self.cells.iter().enumerate() {
            for (c, nodes) in cells.iter().enumerate() {
                let h = self.cell_arc[p][c];
                if nodes.iter().any(|q| q.point.dist(x) < h) {
                    return Err(Error::NearBoundary { x: x.x, y: x.y });
                }
            }
        }
        Ok(Target { x, on: None })
    }

    /// `v_N(τ) = Σ_j c_j φ_j(τ)`.
    pub fn evaluate_density(&self, c: &[Complex64], tau: GlobalParam) -> Result<Complex64> {
        if c.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: c.len(),
            });
        }
        let p = tau.obstacle;
        let (cell, s) = self.basis.cell_of(p, tau.t);
        let shape = self.basis.degree.shape(s);
        let off = self.basis.offset(p);
        Ok((0..self.basis.degree.pieces())
            .map(|r| c[off + self.basis.piece_owner(p, cell, r)] * shape[r])
            .sum())
    }
}

/// Dense collocation matrix `A` and right-hand side `b`.
#[derive(Clone, Debug)]
pub struct DenseSystem {
    pub a: DenseMatrix,
    pub b: Vec<Complex64>,
}

/// Assembles the dense matrix `A_ij = ∫_{S_j} K_κ(t_i, τ) φ_j(τ) dτ`, row-parallel.
pub fn assemble_matrix(disc: &Discretization) -> Result<DenseMatrix> {
    let n = disc.n();
    let mut a = DenseMatrix::zeros(n, n);
    a.rows_mut_par()
        .enumerate()
        .for_each(|(i, row)| disc.dense_row(&disc.row_target(i), row));
    for i in 0..n {
        if let Some(j) = a.row(i).iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Quadrature { row: i, col: j });
        }
    }
    Ok(a)
}

/// Assembles only the listed entries of each row (sorted columns per row).
pub fn assemble_rows(disc: &Discretization, pattern: &[Vec<usize>]) -> Result<Vec<Vec<Complex64>>> {
    if pattern.len() != disc.n() {
        return Err(Error::DimensionMismatch {
            expected: disc.n(),
            got: pattern.len(),
        });
    }
    let rows: Vec<Vec<Complex64>> = pattern
        .par_iter()
        .enumerate()
        .map(|(i, cols)| disc.sparse_row(&disc.row_target(i), cols))
        .collect();
    for (i, (row, cols)) in rows.iter().zip(pattern).enumerate() {
        if let Some(pos) = row.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Quadrature { row: i, col: cols[pos] });
        }
    }
    Ok(rows)
}

/// `b_i = −u^inc(κ(t_i))`.
pub fn assemble_rhs(disc: &Discretization, wave: &IncidentWave) -> Result<Vec<Complex64>> {
    (0..disc.n())
        .map(|i| Ok(-wave.eval(disc.wavenumber(), disc.collocation_point(i))?))
        .collect()
}

pub fn assemble_system(disc: &Discretization, wave: &IncidentWave) -> Result<DenseSystem> {
    Ok(DenseSystem {
        a: assemble_matrix(disc)?,
        b: assemble_rhs(disc, wave)?,
    })
}

/// Sparse matrix holding exactly the entries selected by `pattern`.
pub fn assemble_sparse(disc: &Discretization, pattern: &[Vec<usize>]) -> Result<SparseComplexMatrix> {
    let rows = assemble_rows(disc, pattern)?;
    let rows = pattern
        .iter()
        .zip(rows)
        .map(|(cols, vals)| cols.iter().copied().zip(vals).collect())
        .collect();
    SparseComplexMatrix::from_rows(disc.n(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{preset_scene, Preset, PresetParams};
    use crate::kernel::greens_function;
    use crate::quadrature::gauss_legendre;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scene(p: Preset) -> Arc<Scene> {
        Arc::new(preset_scene(p, &PresetParams::new()).unwrap())
    }

    fn disc(p: Preset, k: f64, degree: Degree) -> Discretization {
        Discretization::new(scene(p), Wavenumber::new(k).unwrap(), 10.0, degree).unwrap()
    }

    /// Brute-force reference for `∫ K(x, κ(τ)) ‖κ'(τ)‖ f(τ) dτ` over `[a, b]`:
    /// many Gauss panels, split at and geometrically graded toward `s`.
    fn reference_integral(
        d: &Discretization,
        p: usize,
        x: Vec2,
        a: f64,
        b: f64,
        s: Option<f64>,
        f: &dyn Fn(f64) -> f64,
    ) -> Complex64 {
        let curve = d.scene().curve(p);
        let k = d.wavenumber();
        let (gx, gw) = gauss_legendre(30);
        let mut total = Complex64::new(0.0, 0.0);
        let mut panel = |lo: f64, hi: f64| {
            let (m, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for (xi, wi) in gx.iter().zip(gw) {
                let tau = m + h * xi;
                let (y, dy) = curve.point_deriv(tau);
                total += greens_function(k, x, y).unwrap() * (wi * h * dy.norm() * f(tau));
            }
        };
        let mut breaks = vec![a, b];
        if let Some(s) = s {
            let s = s.clamp(a, b);
            breaks.push(s);
            for l in 1..40 {
                let e = (b - a) * 0.5f64.powi(l);
                for v in [s - e, s + e] {
                    if v > a && v < b {
                        breaks.push(v);
                    }
                }
            }
        }
        // mesh nodes, where the basis has kinks
        let n = d.basis().count(p) as f64;
        let mut m = (a * n).ceil();
        while m < b * n {
            breaks.push(m / n);
            m += 1.0;
        }
        breaks.sort_by(|u, v| u.partial_cmp(v).unwrap());
        breaks.dedup();
        for w in breaks.windows(2) {
            if w[1] > w[0] {
                panel(w[0], w[1]);
            }
        }
        total
    }

    #[test]
    fn partition_of_unity_and_support() {
        for degree in [Degree::Constant, Degree::Linear, Degree::Cubic] {
            let b = Basis::new(degree, vec![12, 9]);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..200 {
                let tau = GlobalParam::new(rng.gen_range(0..2), rng.gen());
                let sum: f64 = (0..b.len()).map(|j| b.eval(j, tau)).sum();
                assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
            }
            // support length
            for j in [0, 5, 11, 14] {
                let (p, _) = b.locate(j);
                let n = b.count(p);
                let nonzero = (0..10 * n)
                    .filter(|&m| b.eval(j, GlobalParam::new(p, (m as f64 + 0.5) / (10 * n) as f64)) > 0.0)
                    .count();
                assert_relative_eq!(nonzero as f64 / (10 * n) as f64, b.support_len(p), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn unknowns_scale_with_wavenumber() {
        let d = disc(Preset::Circle, 16.0, Degree::Linear);
        assert_eq!(d.n(), 160);
        assert_eq!(d.collocation().len(), d.n());
        let d2 = disc(Preset::Circle, 32.0, Degree::Linear);
        assert_eq!(d2.n(), 320);
    }

    #[test]
    fn far_entry_matches_brute_force_quadrature() {
        let d = disc(Preset::Circle, 16.0, Degree::Linear);
        let a = assemble_matrix(&d).unwrap();
        let n = d.n();
        let h = 1.0 / n as f64;
        for i in [0, 17, 80] {
            let j = (i + n / 2) % n;
            let x = d.collocation_point(i);
            let tj = j as f64 * h;
            let reference = reference_integral(&d, 0, x, tj - h, tj + h, None, &|tau| {
                (1.0 - ((tau - tj) / h).abs()).max(0.0)
            });
            let got = a[(i, j)];
            assert!((got - reference).norm() <= 1e-8 * reference.norm(), "{got} vs {reference}");
        }
    }

    #[test]
    fn singular_entries_match_brute_force_quadrature() {
        for degree in [Degree::Constant, Degree::Linear, Degree::Cubic] {
            let d = disc(Preset::Ellipse, 8.0, degree);
            let a = assemble_matrix(&d).unwrap();
            let n = d.n();
            let h = 1.0 / n as f64;
            let i = 7;
            let ti = d.collocation()[i].t;
            for j in [i, i + 1] {
                let tj = d.basis().center(j).t;
                let half = 0.5 * d.basis().support_len(0);
                let f = |tau: f64| d.basis().eval(j, GlobalParam::new(0, tau));
                let reference =
                    reference_integral(&d, 0, d.collocation_point(i), tj - half, tj + half, Some(ti), &f);
                let got = a[(i, j)];
                assert!(
                    (got - reference).norm() <= 1e-6 * reference.norm(),
                    "{degree:?} ({i},{j}): {got} vs {reference}"
                );
            }
            let _ = h;
        }
    }

    #[test]
    fn row_sum_equals_kernel_integral() {
        let d = disc(Preset::Ellipse, 12.0, Degree::Linear);
        let a = assemble_matrix(&d).unwrap();
        for i in [0, 33, 70] {
            let ti = d.collocation()[i].t;
            let x = d.collocation_point(i);
            let reference = reference_integral(&d, 0, x, ti - 0.5, ti + 0.5, Some(ti), &|_| 1.0);
            let sum: Complex64 = a.row(i).iter().sum();
            assert!((sum - reference).norm() <= 1e-6 * reference.norm());
        }
    }

    #[test]
    fn circle_matrix_is_circulant() {
        let d = disc(Preset::Circle, 8.0, Degree::Linear);
        let a = assemble_matrix(&d).unwrap();
        let n = d.n();
        let scale = a.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d0 = a[(0, (j + n - i) % n)];
                worst = worst.max((a[(i, j)] - d0).norm() / scale);
            }
        }
        assert!(worst <= 1e-8, "{worst}");
    }

    #[test]
    fn sparse_rows_are_bitwise_dense_entries() {
        for degree in [Degree::Linear, Degree::Cubic] {
            let d = disc(Preset::TwoCircles, 6.0, degree);
            let a = assemble_matrix(&d).unwrap();
            let n = d.n();
            let pattern: Vec<Vec<usize>> = (0..n)
                .map(|i| (0..n).filter(|j| (i * 7 + j * 3) % 5 != 0 || *j == 0).collect())
                .collect();
            let rows = assemble_rows(&d, &pattern).unwrap();
            for (i, (cols, vals)) in pattern.iter().zip(&rows).enumerate() {
                for (j, v) in cols.iter().zip(vals) {
                    assert_eq!(*v, a[(i, *j)]);
                }
            }
        }
    }

    #[test]
    fn discrete_product_is_oscillatory_integral() {
        let d = disc(Preset::AlmostConvex, 6.0, Degree::Linear);
        let a = assemble_matrix(&d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c: Vec<Complex64> = (0..d.n()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let ac = a.matvec(&c).unwrap();
        for _ in 0..10 {
            let i = rng.gen_range(0..d.n());
            let ti = d.collocation()[i].t;
            let f_re = |tau: f64| d.evaluate_density(&c, GlobalParam::new(0, tau)).unwrap().re;
            let f_im = |tau: f64| d.evaluate_density(&c, GlobalParam::new(0, tau)).unwrap().im;
            let x = d.collocation_point(i);
            let reference = reference_integral(&d, 0, x, ti - 0.5, ti + 0.5, Some(ti), &f_re)
                + reference_integral(&d, 0, x, ti - 0.5, ti + 0.5, Some(ti), &f_im) * Complex64::i();
            assert!((ac[i] - reference).norm() <= 1e-6 * reference.norm());
        }
    }

    #[test]
    fn density_evaluation() {
        let d = disc(Preset::TwoCircles, 4.0, Degree::Linear);
        let ones = vec![Complex64::new(1.0, 0.0); d.n()];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let tau = GlobalParam::new(rng.gen_range(0..2), rng.gen());
            assert_relative_eq!(d.evaluate_density(&ones, tau).unwrap().re, 1.0, epsilon = 1e-12);
        }
        let j = 5;
        let mut e = vec![Complex64::new(0.0, 0.0); d.n()];
        e[j] = Complex64::new(1.0, 0.0);
        assert_relative_eq!(d.evaluate_density(&e, d.basis().center(j)).unwrap().re, 1.0, epsilon = 1e-12);

        for degree in [Degree::Constant, Degree::Linear, Degree::Cubic] {
            let d = disc(Preset::TwoCircles, 4.0, degree);
            let c: Vec<Complex64> = (0..d.n()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
            for _ in 0..20 {
                let tau = GlobalParam::new(rng.gen_range(0..2), rng.gen());
                let brute: Complex64 = (0..d.n()).map(|j| c[j] * d.basis().eval(j, tau)).sum();
                let v = d.evaluate_density(&c, tau).unwrap();
                assert!((v - brute).norm() < 1e-12);
            }
        }
        assert!(d.evaluate_density(&[], GlobalParam::new(0, 0.1)).is_err());
    }

    #[test]
    fn rhs_examples() {
        let d = disc(Preset::Circle, 4.0, Degree::Linear);
        let k = d.wavenumber();
        let plane = IncidentWave::plane(Vec2::new(1.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        let b = assemble_rhs(&d, &plane).unwrap();
        let top = d.n() / 4;
        assert_relative_eq!(d.collocation()[top].t, 0.25);
        assert_relative_eq!(b[top].re, -1.0, epsilon = 1e-12);
        let zero = IncidentWave::plane(Vec2::new(0.0, 1.0), Complex64::new(0.0, 0.0)).unwrap();
        assert!(assemble_rhs(&d, &zero).unwrap().iter().all(|v| v.norm() == 0.0));
        let other = IncidentWave::plane(Vec2::new(0.3, 1.0), Complex64::new(0.5, 1.0)).unwrap();
        let both = IncidentWave::Superposition(vec![plane.clone(), other.clone()]);
        let sum = assemble_rhs(&d, &both).unwrap();
        let b2 = assemble_rhs(&d, &other).unwrap();
        for i in 0..d.n() {
            assert!((sum[i] - b[i] - b2[i]).norm() < 1e-14);
        }
        let _ = k;
    }

    #[test]
    fn far_entries_shrink_under_refinement() {
        let k = Wavenumber::new(8.0).unwrap();
        let mut last = f64::INFINITY;
        for ppw in [10.0, 20.0, 40.0] {
            let d = Discretization::new(scene(Preset::Circle), k, ppw, Degree::Linear).unwrap();
            let a = assemble_matrix(&d).unwrap();
            let v = a[(0, d.n() / 2)].norm();
            assert!(v < last);
            last = v;
        }
    }
}
