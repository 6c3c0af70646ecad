//! Gauss–Legendre rules on `[-1, 1]` and geometrically graded panels.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
fn compute_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Cached `n`-point Gauss–Legendre rule.
pub fn gauss_legendre(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Box::leak(Box::new(compute_rule(n))))
}

pub fn gauss_legendre_8() -> (&'static [f64], &'static [f64]) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let r = RULE.get_or_init(|| compute_rule(8));
    (&r.0, &r.1)
}

/// Number of geometric grading levels toward a singular point.
pub const GRADED_LEVELS: usize = 20;

/// Nodes and weights on `[a, b]` graded geometrically (ratio 1/2) toward `s`.
///
/// `s` is clamped into `[a, b]`; the interval is split there and each side
/// is covered by `GRADED_LEVELS` panels plus one innermost panel, each with
/// the 8-point rule.
pub fn graded_nodes(a: f64, b: f64, s: f64, out: &mut Vec<(f64, f64)>) {
    let s = s.clamp(a, b);
    let (x, w) = gauss_legendre_8();
    let panel = |lo: f64, hi: f64, out: &mut Vec<(f64, f64)>| {
        let (m, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (xi, wi) in x.iter().zip(w) {
            out.push((m + h * xi, wi * h));
        }
    };
    for (len, dir) in [(s - a, -1.0), (b - s, 1.0)] {
        if len <= 0.0 {
            continue;
        }
        let mut outer = len;
        for _ in 0..GRADED_LEVELS {
            let inner = 0.5 * outer;
            let (p, q) = (s + dir * inner, s + dir * outer);
            panel(p.min(q), p.max(q), out);
            outer = inner;
        }
        let p = s + dir * outer;
        panel(p.min(s), p.max(s), out);
    }
}
