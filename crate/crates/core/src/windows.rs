//! Smooth windows on the periodic parameter domain.
//!
//! The elementary window `χ(τ; λ, l, r, ρ)` vanishes outside `[λ, ρ]`, equals
//! one on `[l, r]` and rises/falls smoothly on the decay intervals. Compound
//! windows are sums of elementary windows with disjoint supports and describe
//! `w(t_i, ·)` on one obstacle; a [`WindowSet`] holds one compound window per
//! collocation row and obstacle.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::discretization::{Basis, Degree};
use crate::error::{invalid, Error, Result};
use crate::geometry::{periodic_diff, wrap01, GlobalParam};

/// Exponents beyond this magnitude under/overflow in double precision.
const EXP_LIMIT: f64 = 745.0;

/// Elementary window `χ(τ, λ, l, r, ρ)` with `τ` already unwrapped into the
/// window's frame.
pub fn eval_chi(tau: f64, lambda: f64, l: f64, r: f64, rho: f64) -> f64 {
    if tau <= lambda || tau >= rho {
        0.0
    } else if tau >= l && tau <= r {
        1.0
    } else if tau < l {
        edge(tau, lambda, l)
    } else {
        edge(tau, rho, r)
    }
}

/// `exp(2 e^{(l−λ)/(τ−l)} / ((τ−l)/(λ−l) − 1))`, the decay from `l` (value 1)
/// to `λ` (value 0); also used mirrored with `(ρ, r)`.
fn edge(tau: f64, lambda: f64, l: f64) -> f64 {
    let inner = (l - lambda) / (tau - l);
    if inner < -EXP_LIMIT {
        return 1.0;
    }
    // (τ−l)/(λ−l) − 1 written without cancellation
    let denom = (tau - lambda) / (lambda - l);
    if denom >= 0.0 {
        return 0.0;
    }
    let arg = 2.0 * inner.exp() / denom;
    if arg < -EXP_LIMIT {
        0.0
    } else {
        arg.exp()
    }
}

/// A single window on one obstacle, stored with `λ ∈ [0,1)` and the other
/// parameters unwrapped so that `λ < l ≤ r < ρ < λ + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementaryWindow {
    lambda: f64,
    l: f64,
    r: f64,
    rho: f64,
}

impl ElementaryWindow {
    pub fn new(lambda: f64, l: f64, r: f64, rho: f64) -> Result<Self> {
        if ![lambda, l, r, rho].iter().all(|v| v.is_finite()) {
            return Err(invalid("window", "parameters must be finite"));
        }
        if !(lambda < l && l <= r && r < rho) {
            return Err(invalid(
                "window",
                format!("need λ < l ≤ r < ρ, got ({lambda}, {l}, {r}, {rho})"),
            ));
        }
        if rho - lambda >= 1.0 {
            return Err(invalid("window", "support must be shorter than one period"));
        }
        let shift = lambda - wrap01(lambda);
        Ok(Self {
            lambda: lambda - shift,
            l: l - shift,
            r: r - shift,
            rho: rho - shift,
        })
    }

    /// Window with plateau `[center − half, center + half]` and decay `decay`.
    pub fn around(center: f64, half: f64, decay: f64) -> Result<Self> {
        Self::new(center - half - decay, center - half, center + half, center + half + decay)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn params(&self) -> [f64; 4] {
        [self.lambda, self.l, self.r, self.rho]
    }

    /// Unwraps `tau` into `[λ, λ + 1)`.
    #[inline]
    fn frame(&self, tau: f64) -> f64 {
        self.lambda + wrap01(tau - self.lambda)
    }

    pub fn eval(&self, tau: f64) -> f64 {
        eval_chi(self.frame(tau), self.lambda, self.l, self.r, self.rho)
    }

    /// Whether `tau` lies in the open support `(λ, ρ)`.
    pub fn supports(&self, tau: f64) -> bool {
        let x = self.frame(tau);
        x > self.lambda && x < self.rho
    }

    /// Whether `tau` lies on the plateau `[l, r]`.
    pub fn on_plateau(&self, tau: f64) -> bool {
        let x = self.frame(tau);
        x >= self.l && x <= self.r
    }

    fn shifted(&self, by: f64) -> Self {
        Self {
            lambda: self.lambda + by,
            l: self.l + by,
            r: self.r + by,
            rho: self.rho + by,
        }
    }

    /// Shrinks the decay intervals so that the support fits into `outer`.
    /// The plateau must already lie inside the support of `outer`.
    pub fn clip_to(&self, outer: &ElementaryWindow) -> Result<Self> {
        // express `outer` in a frame where it contains our plateau start
        let mid = 0.5 * (self.l + self.r);
        let o = outer.shifted((mid - outer.frame(mid)).round());
        let lambda = self.lambda.max(o.lambda);
        let rho = self.rho.min(o.rho);
        if !(lambda < self.l && self.r < rho) {
            return Err(invalid("window", "plateau is not inside the enclosing window"));
        }
        Self::new(lambda, self.l, self.r, rho)
    }
}

/// Sum of elementary windows with pairwise disjoint supports, or the trivial
/// window `w ≡ 1`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CompoundWindow {
    full: bool,
    parts: Vec<ElementaryWindow>,
}

impl CompoundWindow {
    /// `w ≡ 0`.
    pub fn empty() -> Self {
        Self::default()
    }

    /// `w ≡ 1`.
    pub fn full() -> Self {
        Self {
            full: true,
            parts: Vec::new(),
        }
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    pub fn is_empty(&self) -> bool {
        !self.full && self.parts.is_empty()
    }

    pub fn parts(&self) -> &[ElementaryWindow] {
        &self.parts
    }

    pub fn eval(&self, tau: f64) -> f64 {
        eval_compound(self, tau)
    }

    /// Whether `w(tau) > 0`.
    pub fn supports(&self, tau: f64) -> bool {
        self.full || self.parts.iter().any(|w| w.supports(tau))
    }

    /// The elementary window whose support contains `tau`.
    pub fn part_at(&self, tau: f64) -> Option<&ElementaryWindow> {
        self.parts.iter().find(|w| w.supports(tau))
    }

    /// Total parameter length of the support.
    pub fn support_len(&self) -> f64 {
        if self.full {
            1.0
        } else {
            self.parts.iter().map(|w| w.rho - w.lambda).sum()
        }
    }
}

/// `Σ χ` over the parts of `cw`.
pub fn eval_compound(cw: &CompoundWindow, tau: f64) -> f64 {
    if cw.full {
        return 1.0;
    }
    cw.parts.iter().map(|w| w.eval(tau)).sum::<f64>().min(1.0)
}

fn join(a: &ElementaryWindow, b: &ElementaryWindow) -> ElementaryWindow {
    ElementaryWindow {
        lambda: a.lambda,
        l: a.l.min(b.l),
        r: a.r.max(b.r),
        rho: a.rho.max(b.rho),
    }
}

/// Merges windows whose supports overlap or lie closer than `eps`.
///
/// Joined windows take the form `χ(·, λ_first, l, r, ρ_last)`; a result whose
/// support covers the whole period becomes the trivial window.
pub fn merge_windows(list: &[ElementaryWindow], eps: f64) -> CompoundWindow {
    let mut ws: Vec<ElementaryWindow> = list.to_vec();
    ws.sort_by(|a, b| a.params().partial_cmp(&b.params()).unwrap());
    let mut out: Vec<ElementaryWindow> = Vec::with_capacity(ws.len());
    for w in ws {
        match out.last_mut() {
            Some(cur) if w.lambda - cur.rho < eps => *cur = join(cur, &w),
            _ => out.push(w),
        }
    }
    // across the periodic seam
    while out.len() > 1 {
        let first = out[0].shifted(1.0);
        let last = *out.last().unwrap();
        if first.lambda - last.rho < eps {
            out.pop();
            out[0] = join(&last, &first);
            let w = out.remove(0);
            out.push(w);
        } else {
            break;
        }
    }
    if out.iter().any(|w| w.rho - w.lambda + eps > 1.0) {
        return CompoundWindow::full();
    }
    out.sort_by(|a, b| a.params().partial_cmp(&b.params()).unwrap());
    CompoundWindow {
        full: false,
        parts: out,
    }
}

/// Windows with plateaus over the maximal periodic runs of marked grid
/// points `(q + offset)/n` and decay `decay` on each side. Returns `None`
/// when the windows would cover the whole period.
pub fn run_windows(offset: f64, marks: &[bool], decay: f64) -> Option<Vec<ElementaryWindow>> {
    let n = marks.len();
    let Some(gap) = marks.iter().position(|m| !m) else {
        return None;
    };
    let mut out = Vec::new();
    let mut q = gap + 1;
    let end = gap + n;
    while q <= end {
        if !marks[q % n] {
            q += 1;
            continue;
        }
        let start = q;
        while q < end && marks[(q + 1) % n] {
            q += 1;
        }
        let pl = (start as f64 + offset) / n as f64;
        let pr = (q as f64 + offset) / n as f64;
        match ElementaryWindow::new(pl - decay, pl, pr, pr + decay) {
            Ok(w) => out.push(w),
            Err(_) => return None,
        }
        q += 1;
    }
    Some(out)
}

/// Compound windows for every collocation row and every obstacle.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSet {
    basis: Basis,
    /// `windows[i][p]` is `w(t_i, ·)` restricted to obstacle `p`.
    windows: Vec<Vec<CompoundWindow>>,
}

impl WindowSet {
    /// `basis` fixes the row parameters `t_i`.
    pub fn new(basis: Basis, windows: Vec<Vec<CompoundWindow>>) -> Result<Self> {
        if windows.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: windows.len(),
            });
        }
        let m = basis.counts().len();
        if let Some(bad) = windows.iter().find(|w| w.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: bad.len(),
            });
        }
        Ok(Self { basis, windows })
    }

    /// Every row sees `w ≡ 1`.
    pub fn all_full(basis: Basis) -> Self {
        let m = basis.counts().len();
        let windows = vec![vec![CompoundWindow::full(); m]; basis.len()];
        Self { basis, windows }
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn rows(&self) -> usize {
        self.windows.len()
    }

    pub fn row_param(&self, i: usize) -> GlobalParam {
        self.basis.center(i)
    }

    pub fn window(&self, row: usize, obstacle: usize) -> &CompoundWindow {
        &self.windows[row][obstacle]
    }

    pub fn row_windows(&self, row: usize) -> &[CompoundWindow] {
        &self.windows[row]
    }

    /// Row whose parameter is closest (periodically, same obstacle) to `g`;
    /// ties go to the smaller index.
    pub fn match_row(&self, g: GlobalParam) -> usize {
        let p = g.obstacle;
        let n = self.basis.count(p);
        let off = self.basis.offset(p);
        let shift = match self.basis.degree() {
            Degree::Constant => 0.5,
            _ => 0.0,
        };
        let x = g.t * n as f64 - shift;
        let lo = x.floor();
        let mut best = (f64::INFINITY, usize::MAX);
        for cand in [lo - 1.0, lo, lo + 1.0, lo + 2.0] {
            let l = (cand as i64).rem_euclid(n as i64) as usize;
            let d = periodic_diff(g.t, self.basis.center(off + l).t).abs();
            let key = (d, off + l);
            if key.0 < best.0 || (key.0 == best.0 && key.1 < best.1) {
                best = key;
            }
        }
        best.1
    }

    /// `w(t_row, τ)`.
    pub fn weight(&self, row: usize, tau: GlobalParam) -> f64 {
        self.windows[row][tau.obstacle].eval(tau.t)
    }

    /// Fraction of rows whose window is trivial on every obstacle.
    pub fn full_row_fraction(&self) -> f64 {
        let full = self
            .windows
            .iter()
            .filter(|r| r.iter().all(|w| w.is_full()))
            .count();
        full as f64 / self.rows().max(1) as f64
    }

    /// Text form: a header `degree d counts n_1 … n_P`, then one line
    /// `row obstacle λ l r ρ` per elementary window. Trivial windows are
    /// written as `row obstacle 0 0 1 1`.
    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut header = format!("degree {} counts", self.basis.degree().as_int());
        for n in self.basis.counts() {
            write!(header, " {n}").unwrap();
        }
        writeln!(w, "{header}")?;
        for (i, row) in self.windows.iter().enumerate() {
            for (p, cw) in row.iter().enumerate() {
                if cw.full {
                    writeln!(w, "{i} {p} 0 0 1 1")?;
                }
                for e in &cw.parts {
                    writeln!(w, "{i} {p} {:e} {:e} {:e} {:e}", e.lambda, e.l, e.r, e.rho)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Self> {
        let bad = |line: usize, why: &str| Error::Config {
            key: format!("line {line}"),
            reason: why.to_string(),
        };
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let header = header?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() < 4 || toks[0] != "degree" || toks[2] != "counts" {
            return Err(bad(1, "expected `degree d counts n...`"));
        }
        let degree = Degree::from_int(toks[1].parse().map_err(|_| bad(1, "bad degree"))?)?;
        let counts = toks[3..]
            .iter()
            .map(|t| t.parse::<usize>().map_err(|_| bad(1, "bad count")))
            .collect::<Result<Vec<_>>>()?;
        let basis = Basis::new(degree, counts);
        let m = basis.counts().len();
        let mut windows = vec![vec![CompoundWindow::empty(); m]; basis.len()];
        for (no, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 6 {
                return Err(bad(no + 1, "expected six fields"));
            }
            let i: usize = t[0].parse().map_err(|_| bad(no + 1, "bad row"))?;
            let p: usize = t[1].parse().map_err(|_| bad(no + 1, "bad obstacle"))?;
            if i >= basis.len() || p >= m {
                return Err(bad(no + 1, "index out of range"));
            }
            let v = t[2..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| bad(no + 1, "bad number")))
                .collect::<Result<Vec<_>>>()?;
            if v == [0.0, 0.0, 1.0, 1.0] {
                windows[i][p].full = true;
            } else {
                // stored parameters are already normalised
                let e = ElementaryWindow::new(v[0], v[1], v[2], v[3])?;
                windows[i][p].parts.push(e);
            }
        }
        Self::new(basis, windows)
    }
}
