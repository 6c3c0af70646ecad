//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then asserts.

use std::sync::Arc;

use asycomp::analysis::{boundary_residual, interior_extinction, interior_points, MieDensity, density_error};
use asycomp::compression::{
    block_window_truncation, compress, compute_correlations, correlation_windows, recompression_sweep,
    solve_sparse, CorrelationConfig, DiscSettings, SlidingWindow, SweepPlan,
};
use asycomp::discretization::{assemble_system, Degree, Discretization};
use asycomp::geometry::{periodic_diff, preset_scene, IncidentWave, Preset, PresetParams, Scene, Vec2};
use asycomp::kernel::{bessel, greens_function, BesselKind, Wavenumber};
use asycomp::solve::{cond_estimate, cond_estimate_sparse, dense_solve, gmres, SolveMethod};
use asycomp::visibility::{visibility_windows, VisibilityConfig};
use asycomp::windows::eval_chi;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20240607;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {id:>2} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn scene(p: Preset) -> Arc<Scene> {
    Arc::new(preset_scene(p, &PresetParams::new()).unwrap())
}

fn plane_from_left() -> IncidentWave {
    IncidentWave::plane(Vec2::new(1.0, 0.0), one()).unwrap()
}

fn disc(s: &Arc<Scene>, k: f64, ppw: f64, degree: Degree) -> Discretization {
    Discretization::new(Arc::clone(s), Wavenumber::new(k).unwrap(), ppw, degree).unwrap()
}

struct Solved {
    disc: Discretization,
    a: asycomp::matrix::DenseMatrix,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
}

fn solve_dense(s: &Arc<Scene>, wave: &IncidentWave, k: f64, degree: Degree) -> Solved {
    let d = disc(s, k, 10.0, degree);
    let sys = assemble_system(&d, wave).unwrap();
    let c = dense_solve(&sys.a, &sys.b).unwrap().x;
    Solved {
        disc: d,
        a: sys.a,
        b: sys.b,
        c,
    }
}

#[test]
fn criterion_01_unit_oracles() {
    // rising edge on (0, 1) at τ = 0.5: exp(2e^{1/(0.5 − 1)} / (0.5 − 1))
    let chi_exact = (2.0 * (-2.0f64).exp() / (0.5 - 1.0)).exp();
    let chi = eval_chi(0.5, 0.0, 1.0, 2.0, 3.0);
    let chi_ok = (chi - chi_exact).abs() <= 1e-9;

    // (i/4)(J0(1) + i Y0(1)) with tabulated J0(1), Y0(1)
    let j0 = 0.765_197_686_557_966_6;
    let y0 = 0.088_256_964_215_676_96;
    let g_exact = Complex64::new(-0.25 * y0, 0.25 * j0);
    let g = greens_function(Wavenumber::new(1.0).unwrap(), Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
    let g_ok = (g - g_exact).norm() <= 1e-9 && (g - Complex64::new(-0.0220642, 0.1912994)).norm() <= 1e-7;

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n: u32 = rng.gen_range(0..60);
        let x: f64 = rng.gen_range(0.5..150.0);
        let jn = bessel(BesselKind::J, n, x).unwrap();
        let jn1 = bessel(BesselKind::J, n + 1, x).unwrap();
        let yn = bessel(BesselKind::Y, n, x).unwrap();
        let yn1 = bessel(BesselKind::Y, n + 1, x).unwrap();
        let w = jn1 * yn - jn * yn1;
        let exact = 2.0 / (std::f64::consts::PI * x);
        worst = worst.max((w - exact).abs() / exact);
    }
    let w_ok = worst <= 1e-9;
    report(
        1,
        "window and kernel oracles",
        chi_ok && g_ok && w_ok,
        format!("chi={chi:.16} G={g:.10} wronskian_rel={worst:.2e}"),
    );
}

#[test]
fn criterion_02_mie_validation() {
    let s = scene(Preset::Circle);
    let wave = plane_from_left();
    let k = Wavenumber::new(16.0).unwrap();
    let mie = MieDensity::new(Vec2::new(0.0, 0.0), 1.0, k, &wave, 40).unwrap();
    let err = |ppw: f64| {
        let d = disc(&s, 16.0, ppw, Degree::Linear);
        let sys = assemble_system(&d, &wave).unwrap();
        let c = dense_solve(&sys.a, &sys.b).unwrap().x;
        density_error(&d, &c, |t| mie.eval_param(t)).unwrap()
    };
    let (e10, e20) = (err(10.0), err(20.0));
    report(
        2,
        "Mie density",
        e10 <= 2e-2 && e20 <= 0.5 * e10,
        format!("err(ppw=10)={e10:.3e} err(ppw=20)={e20:.3e}"),
    );
}

#[test]
fn criterion_03_unit_window_correlations() {
    let s = scene(Preset::ThreeEllipses);
    let wave = plane_from_left();
    let sol = solve_dense(&s, &wave, 8.0, Degree::Linear);
    let cfg = CorrelationConfig::default();
    let r = compute_correlations(&sol.a, &sol.c, &sol.disc, &cfg, SlidingWindow::Unit, None).unwrap();
    let ac = sol.a.matvec(&sol.c).unwrap();
    let mut worst: f64 = 0.0;
    for (n, acn) in ac.iter().enumerate() {
        for (_, v) in r.row(n) {
            worst = worst.max((v - acn).norm() / acn.norm());
        }
    }
    let complete = r.masked_count() == 0;
    report(
        3,
        "unit window gives (Ac)_n",
        complete && worst <= 1e-12,
        format!("max_rel={worst:.2e} entries={}", r.computed_count()),
    );
}

#[test]
fn criterion_04_shadow_stationary_point() {
    let s = scene(Preset::Circle);
    let wave = plane_from_left();
    let sol = solve_dense(&s, &wave, 128.0, Degree::Linear);
    let cfg = CorrelationConfig::default();
    let r = compute_correlations(&sol.a, &sol.c, &sol.disc, &cfg, SlidingWindow::Bump(cfg.t), None).unwrap();
    let n = sol.disc.n();
    let mut worst: f64 = 0.0;
    // the wave travels along +x, so the deep shadow surrounds t = 0
    for m in 0..10 {
        let t = -0.09 + 0.02 * m as f64;
        let row = ((t * n as f64).round() as i64).rem_euclid(n as i64) as usize;
        let tr = sol.disc.collocation()[row].t;
        let (best, _) = r
            .row(row)
            .map(|(q, v)| (r.center(q).t, v.norm()))
            .filter(|(sigma, _)| periodic_diff(*sigma, tr).abs() > 0.1)
            .fold((f64::NAN, -1.0), |acc, (sigma, v)| if v > acc.1 { (sigma, v) } else { acc });
        worst = worst.max(periodic_diff(best, 0.5 - tr).abs());
    }
    report(
        4,
        "shadow correlation peak at 1/2 - t",
        worst <= 0.05,
        format!("max |peak - (1/2 - t)| = {worst:.4}"),
    );
}

#[test]
fn criterion_05_compression_accuracy() {
    let s = scene(Preset::TwoCircles);
    let wave = IncidentWave::point_source(&s, Vec2::new(1.0, 1.0), one()).unwrap();
    let mut plan = SweepPlan::new(vec![128.0, 256.0]).unwrap();
    plan.dense_reference_max = usize::MAX;
    let out = recompression_sweep(&plan, s, &wave, DiscSettings::default(), &CorrelationConfig::default(), SEED).unwrap();
    assert!(out.error.is_none(), "{:?}", out.error);
    let mut pass = true;
    let mut detail = String::new();
    for step in &out.steps {
        let rd = step.metrics.residual_dense.unwrap();
        let rc = step.metrics.residual_compressed.unwrap();
        pass &= rc <= 1.5 * rd;
        detail.push_str(&format!(
            "k={} res(c)={rd:.4e} res(c~)={rc:.4e} nnz={:.3}; ",
            step.k, step.stats.fraction
        ));
    }
    report(5, "compressed residual within 1.5x", pass, detail);
}

#[test]
fn criterion_06_sparsity_trend() {
    let s = scene(Preset::Circle);
    let wave = plane_from_left();
    let plan = SweepPlan::doublings(64.0, 512.0).unwrap();
    let out = recompression_sweep(&plan, s, &wave, DiscSettings::default(), &CorrelationConfig::default(), SEED).unwrap();
    assert!(out.error.is_none(), "{:?}", out.error);
    let f: Vec<f64> = out.steps.iter().map(|s| s.stats.fraction).collect();
    let strictly = f.windows(2).all(|w| w[1] < w[0]);
    let ratio = f[3] / f[1];
    report(
        6,
        "nnz fraction decreases under recompression",
        out.steps.iter().all(|s| s.recorrelated) && strictly && ratio <= 0.75,
        format!("fractions={f:.4?} f(512)/f(128)={ratio:.3}"),
    );
}

/// First positive zero of `J_n`, by scanning for a sign change and bisecting.
fn first_bessel_zero(n: u32) -> f64 {
    let j = |x: f64| bessel(BesselKind::J, n, x).unwrap();
    let mut a = n as f64;
    let step = 0.05;
    while j(a) * j(a + step) > 0.0 {
        a += step;
    }
    let mut b = a + step;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if j(a) * j(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn criterion_07_resonance_conditioning() {
    let j50 = first_bessel_zero(50);
    let k = 2.0 * j50;
    let mut params = PresetParams::new();
    params.insert("radius".into(), 0.5);
    let s = Arc::new(preset_scene(Preset::Circle, &params).unwrap());
    let wave = IncidentWave::point_source(&s, Vec2::new(1.0, 1.0), one()).unwrap();
    let mut plan = SweepPlan::new(vec![0.5 * k, k]).unwrap();
    plan.solver = asycomp::compression::SolverPolicy::Direct;
    plan.keep_matrices = true;
    let out = recompression_sweep(&plan, Arc::clone(&s), &wave, DiscSettings::default(), &CorrelationConfig::default(), SEED)
        .unwrap();
    assert!(out.error.is_none(), "{:?}", out.error);
    let last = out.steps.last().unwrap();
    let d = disc(&s, k, 10.0, Degree::Linear);
    let a = asycomp::discretization::assemble_matrix(&d).unwrap();
    let cond_a = cond_estimate(&a).unwrap();
    let cond_c = cond_estimate_sparse(last.matrix.as_ref().unwrap()).unwrap();
    report(
        7,
        "resonance conditioning",
        cond_a >= 10.0 * cond_c,
        format!(
            "j50={j50:.10} N={} cond(A)={cond_a:.4e} cond(A~)={cond_c:.4e} nnz={:.3}",
            d.n(),
            last.stats.fraction
        ),
    );
}

#[test]
fn criterion_08_gmres_iterations() {
    let s = scene(Preset::Circle);
    let wave = plane_from_left();
    let sol = solve_dense(&s, &wave, 128.0, Degree::Linear);
    let cfg = CorrelationConfig::default();
    let (_, ws) = correlation_windows(&sol.a, &sol.c, &sol.disc, &cfg).unwrap();
    let m = compress(&sol.a, &ws, &sol.disc).unwrap();
    let n = sol.disc.n();
    let dense = gmres(|x| sol.a.matvec(x), &sol.b, 1e-5, n).unwrap();
    let sparse = gmres(|x| m.matvec(x), &sol.b, 1e-5, n).unwrap();
    report(
        8,
        "GMRES iterations on compressed matrix",
        dense.converged && sparse.converged && sparse.iterations <= dense.iterations,
        format!("iters(A)={} iters(A~)={}", dense.iterations, sparse.iterations),
    );
}

#[test]
fn criterion_09_interior_extinction() {
    let s = scene(Preset::Circle);
    let wave = plane_from_left();
    let sol = solve_dense(&s, &wave, 64.0, Degree::Linear);
    let pts = interior_points(&s, 100, 0.05, SEED);
    assert_eq!(pts.len(), 100);
    let e = interior_extinction(&sol.disc, &sol.c, &wave, &pts).unwrap();
    report(9, "interior extinction", e <= 1e-3, format!("mean |u| / max |u_inc| = {e:.3e}"));
}

#[test]
fn criterion_10_block_truncation() {
    let s = scene(Preset::NearInclusion);
    let wave = plane_from_left();
    let sol = solve_dense(&s, &wave, 128.0, Degree::Linear);
    let cfg = CorrelationConfig::default();
    let (_, ws) = correlation_windows(&sol.a, &sol.c, &sol.disc, &cfg).unwrap();
    let smooth = compress(&sol.a, &ws, &sol.disc).unwrap();
    let block = block_window_truncation(&sol.a, &ws, &sol.disc).unwrap();
    let cs = solve_sparse(&smooth, &sol.b, SolveMethod::Direct, 0.0).unwrap().x;
    let cb = solve_sparse(&block, &sol.b, SolveMethod::Direct, 0.0).unwrap().x;
    let rs = boundary_residual(&sol.disc, &cs, &wave, SEED).unwrap();
    let rb = boundary_residual(&sol.disc, &cb, &wave, SEED).unwrap();
    let rd = boundary_residual(&sol.disc, &sol.c, &wave, SEED).unwrap();
    report(
        10,
        "block truncation degrades accuracy",
        rb > rs && rb <= 10.0 * rs,
        format!("res(dense)={rd:.4e} res(smooth)={rs:.4e} res(block)={rb:.4e} nnz={:.3}", smooth.nnz_fraction()),
    );
}

#[test]
fn criterion_11_visibility() {
    let cfg = VisibilityConfig::default();
    let wave = plane_from_left();

    let s = scene(Preset::TwoCircles);
    let sol = solve_dense(&s, &wave, 128.0, Degree::Linear);
    let ws = visibility_windows(&s, &wave, &sol.disc, &cfg).unwrap();
    let m = compress(&sol.a, &ws, &sol.disc).unwrap();
    let ct = solve_sparse(&m, &sol.b, SolveMethod::Direct, 0.0).unwrap().x;
    let rd = boundary_residual(&sol.disc, &sol.c, &wave, SEED).unwrap();
    let rc = boundary_residual(&sol.disc, &ct, &wave, SEED).unwrap();
    let two_ok = m.nnz_fraction() <= 0.9 && rc <= 1.5 * rd;

    let s1 = scene(Preset::Circle);
    let sol1 = solve_dense(&s1, &wave, 128.0, Degree::Linear);
    let ws1 = visibility_windows(&s1, &wave, &sol1.disc, &cfg).unwrap();
    let m1 = compress(&sol1.a, &ws1, &sol1.disc).unwrap();
    let n1 = sol1.disc.n();
    let bound = 4.0 * cfg.t_vis * n1 as f64 + Degree::Linear.support_cells() as f64;
    let mut lit_rows = 0;
    let mut widest = 0;
    for i in 0..n1 {
        if ws1.window(i, 0).is_full() {
            continue;
        }
        lit_rows += 1;
        widest = widest.max(m1.row_nnz(i));
    }
    let one_ok = lit_rows > 0 && widest as f64 <= bound;
    report(
        11,
        "visibility windows",
        two_ok && one_ok,
        format!(
            "two circles: nnz={:.3} res(c)={rd:.4e} res(c~)={rc:.4e}; circle: {lit_rows} banded rows, widest {widest} <= {bound:.1}",
            m.nnz_fraction()
        ),
    );
}

#[test]
fn criterion_12_cubic_basis() {
    let s = scene(Preset::NearInclusion);
    let wave = plane_from_left();
    let sol = solve_dense(&s, &wave, 64.0, Degree::Cubic);
    let cfg = CorrelationConfig::default();
    let (_, ws) = correlation_windows(&sol.a, &sol.c, &sol.disc, &cfg).unwrap();
    let m = compress(&sol.a, &ws, &sol.disc).unwrap();
    let ct = solve_sparse(&m, &sol.b, SolveMethod::Direct, 0.0).unwrap().x;
    let rd = boundary_residual(&sol.disc, &sol.c, &wave, SEED).unwrap();
    let rc = boundary_residual(&sol.disc, &ct, &wave, SEED).unwrap();
    report(
        12,
        "cubic basis compression",
        rc <= 2.0 * rd,
        format!("res(c)={rd:.4e} res(c~)={rc:.4e} nnz={:.3}", m.nnz_fraction()),
    );
}
