//! Closed parameterised boundary curves, preset scenes and incident waves.
//!
//! Every obstacle is a closed curve `κ: [0,1) → ℝ²` traversed counterclockwise,
//! so the outward normal is the tangent rotated clockwise. Multi-obstacle
//! scenes use a global parameter `p + t`, where `p` is the obstacle index and
//! `t ∈ [0,1)` the local parameter.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::kernel::{greens_function, Wavenumber};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps a parameter into `[0, 1)`.
#[inline]
pub fn wrap01(t: f64) -> f64 {
    let w = t - t.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Signed periodic difference `a - b` mapped into `[-1/2, 1/2)`.
#[inline]
pub fn periodic_diff(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - (d + 0.5).floor()
}

/// Radius function `r(θ)` of a star-shaped curve, with its derivative.
#[derive(Clone, Debug)]
enum Radial {
    /// `R (1 + ε cos 3θ)`
    Trefoil { radius: f64, eps: f64 },
    /// `a₀ + Σ aₘ cos mθ + bₘ sin mθ`
    Fourier { a0: f64, cos: Vec<f64>, sin: Vec<f64> },
    /// `R (1 − D exp(−((θ−θ₀)/w)⁴))`, the notch centred at `θ₀`.
    Notch {
        radius: f64,
        depth: f64,
        width: f64,
        center: f64,
    },
}

impl Radial {
    fn eval(&self, theta: f64) -> (f64, f64) {
        match self {
            Radial::Trefoil { radius, eps } => {
                let (s, c) = (3.0 * theta).sin_cos();
                (radius * (1.0 + eps * c), -3.0 * radius * eps * s)
            }
            Radial::Fourier { a0, cos, sin } => {
                let mut r = *a0;
                let mut dr = 0.0;
                for (m, (a, b)) in cos.iter().zip(sin).enumerate() {
                    let m = (m + 1) as f64;
                    let (s, c) = (m * theta).sin_cos();
                    r += a * c + b * s;
                    dr += m * (b * c - a * s);
                }
                (r, dr)
            }
            Radial::Notch {
                radius,
                depth,
                width,
                center,
            } => {
                let mut d = theta - center;
                d -= 2.0 * PI * ((d + PI) / (2.0 * PI)).floor();
                let u = d / width;
                let e = (-u.powi(4)).exp();
                let r = radius * (1.0 - depth * e);
                let dr = radius * depth * e * 4.0 * u.powi(3) / width;
                (r, dr)
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Ellipse { a: f64, b: f64 },
    Radial(Radial),
}

/// A closed, smooth, counterclockwise parameterised curve on `[0, 1)`.
#[derive(Clone, Debug)]
pub struct ParamCurve {
    shape: Shape,
    center: Vec2,
    rotation: f64,
    length: f64,
}

impl ParamCurve {
    fn build(shape: Shape, center: Vec2, rotation: f64) -> Self {
        let mut c = Self {
            shape,
            center,
            rotation,
            length: 0.0,
        };
        c.length = c.arc_length(0.0, 1.0);
        c
    }

    pub fn circle(center: Vec2, radius: f64) -> Result<Self> {
        Self::ellipse(center, radius, radius, 0.0)
    }

    pub fn ellipse(center: Vec2, a: f64, b: f64, rotation: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(invalid("radius", "semi-axes must be positive and finite"));
        }
        Ok(Self::build(Shape::Ellipse { a, b }, center, rotation))
    }

    fn local(&self, t: f64) -> (Vec2, Vec2) {
        let theta = 2.0 * PI * t;
        let (s, c) = theta.sin_cos();
        match &self.shape {
            Shape::Ellipse { a, b } => (
                Vec2::new(a * c, b * s),
                Vec2::new(-a * s, b * c) * (2.0 * PI),
            ),
            Shape::Radial(rad) => {
                let (r, dr) = rad.eval(theta);
                (
                    Vec2::new(r * c, r * s),
                    Vec2::new(dr * c - r * s, dr * s + r * c) * (2.0 * PI),
                )
            }
        }
    }

    /// Position `κ(t)`; `t` is wrapped.
    pub fn point(&self, t: f64) -> Vec2 {
        let (p, _) = self.local(wrap01(t));
        self.center + p.rotate(self.rotation)
    }

    /// Derivative `κ'(t)`.
    pub fn deriv(&self, t: f64) -> Vec2 {
        let (_, d) = self.local(wrap01(t));
        d.rotate(self.rotation)
    }

    /// Position and derivative together.
    pub fn point_deriv(&self, t: f64) -> (Vec2, Vec2) {
        let (p, d) = self.local(wrap01(t));
        (self.center + p.rotate(self.rotation), d.rotate(self.rotation))
    }

    /// Speed `‖κ'(t)‖`.
    pub fn speed(&self, t: f64) -> f64 {
        self.deriv(t).norm()
    }

    /// Outward unit normal.
    pub fn normal(&self, t: f64) -> Vec2 {
        let d = self.deriv(t);
        Vec2::new(d.y, -d.x) * (1.0 / d.norm())
    }

    /// Total arc length.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Arc length between parameters `a < b` by adaptive Gauss–Legendre.
    pub fn arc_length(&self, a: f64, b: f64) -> f64 {
        adaptive_gauss(&|t| self.speed(t), a, b, 1e-13, 30)
    }

    /// `m` equispaced samples `κ(i/m)`.
    pub fn polyline(&self, m: usize) -> Vec<Vec2> {
        (0..m).map(|i| self.point(i as f64 / m as f64)).collect()
    }
}

/// Adaptive 8-point Gauss–Legendre with interval bisection.
pub(crate) fn adaptive_gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn gl8(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let (x, w) = crate::quadrature::gauss_legendre_8();
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        x.iter().zip(w).map(|(xi, wi)| wi * f(m + h * xi)).sum::<f64>() * h
    }
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (gl8(f, a, m), gl8(f, m, b));
        if depth == 0 || (l + r - whole).abs() <= tol * (l + r).abs().max(1e-300) {
            l + r
        } else {
            rec(f, a, m, l, tol, depth - 1) + rec(f, m, b, r, tol, depth - 1)
        }
    }
    let whole = gl8(f, a, b);
    rec(f, a, b, whole, tol, depth)
}

/// Global boundary parameter: obstacle index plus local `t ∈ [0,1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlobalParam {
    pub obstacle: usize,
    pub t: f64,
}

impl GlobalParam {
    pub fn new(obstacle: usize, t: f64) -> Self {
        Self {
            obstacle,
            t: wrap01(t),
        }
    }

    /// Flat representation `obstacle + t`.
    pub fn to_global(self) -> f64 {
        self.obstacle as f64 + self.t
    }

    pub fn from_global(g: f64) -> Self {
        let p = g.floor();
        Self::new(p as usize, g - p)
    }
}

/// An ordered collection of pairwise disjoint obstacles.
#[derive(Clone, Debug)]
pub struct Scene {
    obstacles: Vec<ParamCurve>,
}

const CHECK_SAMPLES: usize = 1024;

impl Scene {
    /// Builds a scene, rejecting self-intersecting curves and overlapping obstacles.
    pub fn new(obstacles: Vec<ParamCurve>) -> Result<Self> {
        if obstacles.is_empty() {
            return Err(invalid("obstacles", "scene needs at least one obstacle"));
        }
        let polys: Vec<Vec<Vec2>> = obstacles.iter().map(|c| c.polyline(CHECK_SAMPLES)).collect();
        for (p, (curve, poly)) in obstacles.iter().zip(&polys).enumerate() {
            let min_speed = (0..CHECK_SAMPLES)
                .map(|i| curve.speed(i as f64 / CHECK_SAMPLES as f64))
                .fold(f64::INFINITY, f64::min);
            if !(min_speed > 0.0) {
                return Err(Error::SelfIntersection(format!("obstacle {p} is not regular")));
            }
            if polyline_self_intersects(poly) {
                return Err(Error::SelfIntersection(format!("obstacle {p}")));
            }
        }
        for a in 0..polys.len() {
            for b in a + 1..polys.len() {
                if polylines_cross(&polys[a], &polys[b])
                    || point_in_polygon(polys[a][0], &polys[b])
                    || point_in_polygon(polys[b][0], &polys[a])
                {
                    return Err(Error::SelfIntersection(format!("obstacles {a} and {b} overlap")));
                }
            }
        }
        Ok(Self { obstacles })
    }

    pub fn obstacles(&self) -> &[ParamCurve] {
        &self.obstacles
    }

    pub fn len(&self) -> usize {
        self.obstacles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    pub fn curve(&self, p: usize) -> &ParamCurve {
        &self.obstacles[p]
    }

    pub fn point(&self, g: GlobalParam) -> Vec2 {
        self.obstacles[g.obstacle].point(g.t)
    }

    /// Whether `x` lies strictly inside any obstacle (polyline test).
    pub fn contains(&self, x: Vec2) -> bool {
        self.obstacles
            .iter()
            .any(|c| point_in_polygon(x, &c.polyline(CHECK_SAMPLES)))
    }

    /// Minimum distance from `x` to the sampled boundary.
    pub fn distance_to_boundary(&self, x: Vec2, samples: usize) -> f64 {
        self.obstacles
            .iter()
            .flat_map(|c| c.polyline(samples))
            .map(|p| p.dist(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Minimum sampled distance between two different obstacles.
    pub fn min_separation(&self, samples: usize) -> f64 {
        let polys: Vec<Vec<Vec2>> = self.obstacles.iter().map(|c| c.polyline(samples)).collect();
        let mut best = f64::INFINITY;
        for a in 0..polys.len() {
            for b in a + 1..polys.len() {
                for pa in &polys[a] {
                    for pb in &polys[b] {
                        best = best.min(pa.dist(*pb));
                    }
                }
            }
        }
        best
    }

    /// Axis-aligned bounding box `(min, max)` of all sampled boundaries.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in &self.obstacles {
            for p in c.polyline(CHECK_SAMPLES) {
                lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        (lo, hi)
    }
}

/// Proper intersection of the closed segments `[a,b]` and `[c,d]`.
pub(crate) fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    (o1 > 0.0) != (o2 > 0.0) && (o3 > 0.0) != (o4 > 0.0) && o1 != 0.0 && o2 != 0.0 && o3 != 0.0 && o4 != 0.0
}

fn polyline_self_intersects(poly: &[Vec2]) -> bool {
    let m = poly.len();
    for i in 0..m {
        let (a, b) = (poly[i], poly[(i + 1) % m]);
        for j in i + 2..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            if segments_intersect(a, b, poly[j], poly[(j + 1) % m]) {
                return true;
            }
        }
    }
    false
}

fn polylines_cross(p: &[Vec2], q: &[Vec2]) -> bool {
    let (m, n) = (p.len(), q.len());
    (0..m).any(|i| (0..n).any(|j| segments_intersect(p[i], p[(i + 1) % m], q[j], q[(j + 1) % n])))
}

/// Even–odd point-in-polygon test.
pub fn point_in_polygon(x: Vec2, poly: &[Vec2]) -> bool {
    let m = poly.len();
    let mut inside = false;
    for i in 0..m {
        let (a, b) = (poly[i], poly[(i + 1) % m]);
        if (a.y > x.y) != (b.y > x.y) {
            let xc = a.x + (x.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if x.x < xc {
                inside = !inside;
            }
        }
    }
    inside
}

/// Named preset scenes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Circle,
    Ellipse,
    AlmostConvex,
    NonconvexPolygon,
    NearInclusion,
    TwoCircles,
    ThreeEllipses,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "circle" => Preset::Circle,
            "ellipse" => Preset::Ellipse,
            "almost_convex" => Preset::AlmostConvex,
            "nonconvex_polygon" => Preset::NonconvexPolygon,
            "near_inclusion" => Preset::NearInclusion,
            "two_circles" => Preset::TwoCircles,
            "three_ellipses" => Preset::ThreeEllipses,
            other => return Err(Error::UnknownPreset(other.to_string())),
        })
    }
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Circle,
        Preset::Ellipse,
        Preset::AlmostConvex,
        Preset::NonconvexPolygon,
        Preset::NearInclusion,
        Preset::TwoCircles,
        Preset::ThreeEllipses,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Circle => "circle",
            Preset::Ellipse => "ellipse",
            Preset::AlmostConvex => "almost_convex",
            Preset::NonconvexPolygon => "nonconvex_polygon",
            Preset::NearInclusion => "near_inclusion",
            Preset::TwoCircles => "two_circles",
            Preset::ThreeEllipses => "three_ellipses",
        }
    }

    /// Parameter names accepted by the preset, with their defaults.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Preset::Circle => &[("center_x", 0.0), ("center_y", 0.0), ("radius", 1.0)],
            Preset::Ellipse => &[
                ("center_x", 0.0),
                ("center_y", 0.0),
                ("a", 1.0),
                ("b", 0.5),
                ("angle", 0.0),
            ],
            Preset::AlmostConvex => &[("radius", 1.0), ("eps", 0.12)],
            Preset::NonconvexPolygon => &[("scale", 1.0)],
            Preset::NearInclusion => &[("radius", 1.0), ("depth", 0.65), ("width", 0.6)],
            Preset::TwoCircles => &[("radius", 0.5), ("separation", 2.0)],
            Preset::ThreeEllipses => &[("scale", 1.0)],
        }
    }
}

/// Preset parameter record: name → value. Missing keys take defaults.
pub type PresetParams = BTreeMap<String, f64>;

/// Builds a named preset scene.
pub fn preset_scene(preset: Preset, params: &PresetParams) -> Result<Scene> {
    let defaults = preset.defaults();
    for key in params.keys() {
        if !defaults.iter().any(|(k, _)| k == key) {
            return Err(invalid(key, format!("not a parameter of preset `{}`", preset.name())));
        }
    }
    let get = |name: &str| -> f64 {
        params
            .get(name)
            .copied()
            .unwrap_or_else(|| defaults.iter().find(|(k, _)| *k == name).map(|(_, v)| *v).unwrap())
    };
    let positive = |name: &str| -> Result<f64> {
        let v = get(name);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(invalid(name, "must be positive"))
        }
    };
    let radial = |r: Radial| ParamCurve::build(Shape::Radial(r), Vec2::default(), 0.0);

    let curves = match preset {
        Preset::Circle => vec![ParamCurve::circle(
            Vec2::new(get("center_x"), get("center_y")),
            positive("radius")?,
        )?],
        Preset::Ellipse => vec![ParamCurve::ellipse(
            Vec2::new(get("center_x"), get("center_y")),
            positive("a")?,
            positive("b")?,
            get("angle"),
        )?],
        Preset::AlmostConvex => {
            let eps = get("eps");
            if !(0.0..1.0).contains(&eps) {
                return Err(invalid("eps", "must lie in [0, 1)"));
            }
            vec![radial(Radial::Trefoil {
                radius: positive("radius")?,
                eps,
            })]
        }
        Preset::NonconvexPolygon => {
            let scale = positive("scale")?;
            let (a0, cos, sin) = smoothed_polygon_series(&CHEVRON, POLYGON_HARMONICS);
            vec![radial(Radial::Fourier {
                a0: a0 * scale,
                cos: cos.into_iter().map(|c| c * scale).collect(),
                sin: sin.into_iter().map(|s| s * scale).collect(),
            })]
        }
        Preset::NearInclusion => {
            let depth = get("depth");
            if !(0.0..1.0).contains(&depth) {
                return Err(Error::SelfIntersection(format!(
                    "near_inclusion depth {depth} must lie in [0, 1)"
                )));
            }
            vec![radial(Radial::Notch {
                radius: positive("radius")?,
                depth,
                width: positive("width")?,
                center: PI,
            })]
        }
        Preset::TwoCircles => {
            let r = positive("radius")?;
            let sep = positive("separation")?;
            vec![
                ParamCurve::circle(Vec2::new(0.0, -0.5 * sep), r)?,
                ParamCurve::circle(Vec2::new(0.0, 0.5 * sep), r)?,
            ]
        }
        Preset::ThreeEllipses => {
            let s = positive("scale")?;
            vec![
                ParamCurve::ellipse(Vec2::new(-1.0, 0.8) * s, 0.5 * s, 0.3 * s, 0.3)?,
                ParamCurve::ellipse(Vec2::new(-1.0, -0.8) * s, 0.5 * s, 0.3 * s, -0.3)?,
                ParamCurve::ellipse(Vec2::new(1.2, 0.5) * s, 0.35 * s, 0.6 * s, 0.0)?,
            ]
        }
    };
    Scene::new(curves)
}

/// Vertices of a star-shaped chevron with one reflex vertex facing `-x`.
const CHEVRON: [Vec2; 4] = [
    Vec2::new(1.0, 0.0),
    Vec2::new(-0.6, 0.8),
    Vec2::new(-0.2, 0.0),
    Vec2::new(-0.6, -0.8),
];
const POLYGON_HARMONICS: usize = 16;
const POLYGON_SAMPLES: usize = 4096;

/// Fourier series of the polygon's radius function about the origin,
/// truncated to `harmonics` terms with Lanczos σ-factors.
fn smoothed_polygon_series(verts: &[Vec2], harmonics: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let radius_at = |theta: f64| -> f64 {
        let dir = Vec2::new(theta.cos(), theta.sin());
        let n = verts.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let (a, b) = (verts[i], verts[(i + 1) % n]);
            let e = b - a;
            let denom = dir.cross(e);
            if denom.abs() < 1e-14 {
                continue;
            }
            // Solve s·dir = a + u·e.
            let s = a.cross(e) / denom;
            let u = a.cross(dir) / denom;
            if s > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
                best = best.min(s);
            }
        }
        best
    };
    let m = POLYGON_SAMPLES;
    let samples: Vec<f64> = (0..m).map(|i| radius_at(2.0 * PI * i as f64 / m as f64)).collect();
    let a0 = samples.iter().sum::<f64>() / m as f64;
    let mut cos = Vec::with_capacity(harmonics);
    let mut sin = Vec::with_capacity(harmonics);
    for h in 1..=harmonics {
        let (mut a, mut b) = (0.0, 0.0);
        for (i, r) in samples.iter().enumerate() {
            let (s, c) = (2.0 * PI * (h * i) as f64 / m as f64).sin_cos();
            a += r * c;
            b += r * s;
        }
        let x = PI * h as f64 / (harmonics + 1) as f64;
        let sigma = x.sin() / x;
        cos.push(2.0 * a / m as f64 * sigma);
        sin.push(2.0 * b / m as f64 * sigma);
    }
    (a0, cos, sin)
}

/// An incoming wave field `u^inc`.
#[derive(Clone, Debug)]
pub enum IncidentWave {
    /// `A e^{i k d·x}` with unit direction `d`.
    Plane { direction: Vec2, amplitude: Complex64 },
    /// `A G_k(s, x)`.
    PointSource { source: Vec2, amplitude: Complex64 },
    Superposition(Vec<IncidentWave>),
}

impl IncidentWave {
    /// Plane wave travelling along `direction` (normalised here).
    pub fn plane(direction: Vec2, amplitude: Complex64) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(invalid("direction", "must be a nonzero finite vector"));
        }
        Ok(IncidentWave::Plane {
            direction: direction * (1.0 / n),
            amplitude,
        })
    }

    /// Point source at `source`, which must lie strictly outside every obstacle.
    pub fn point_source(scene: &Scene, source: Vec2, amplitude: Complex64) -> Result<Self> {
        if scene.contains(source) || scene.distance_to_boundary(source, CHECK_SAMPLES) <= 1e-9 {
            return Err(invalid("source", "point source must lie outside all obstacles"));
        }
        Ok(IncidentWave::PointSource { source, amplitude })
    }

    /// Three unit plane waves with directions `angle0 + 2πm/3`.
    pub fn three_plane_waves(angle0: f64, amplitude: Complex64) -> Self {
        IncidentWave::Superposition(
            (0..3)
                .map(|m| {
                    let a = angle0 + 2.0 * PI * m as f64 / 3.0;
                    IncidentWave::Plane {
                        direction: Vec2::new(a.cos(), a.sin()),
                        amplitude,
                    }
                })
                .collect(),
        )
    }

    /// Evaluates `u^inc(x)` at wavenumber `k`.
    pub fn eval(&self, k: Wavenumber, x: Vec2) -> Result<Complex64> {
        match self {
            IncidentWave::Plane {
                direction,
                amplitude,
            } => Ok(amplitude * Complex64::new(0.0, k.get() * direction.dot(x)).exp()),
            IncidentWave::PointSource { source, amplitude } => {
                Ok(amplitude * greens_function(k, *source, x)?)
            }
            IncidentWave::Superposition(parts) => parts.iter().map(|w| w.eval(k, x)).sum(),
        }
    }

    /// Flattens superpositions into their plane / point-source components.
    pub fn components(&self) -> Vec<&IncidentWave> {
        match self {
            IncidentWave::Superposition(parts) => parts.iter().flat_map(|p| p.components()).collect(),
            w => vec![w],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_scene(p: Preset) -> Scene {
        preset_scene(p, &PresetParams::new()).unwrap()
    }

    #[test]
    fn unit_circle_parameterisation() {
        let s = default_scene(Preset::Circle);
        let c = s.curve(0);
        let p = c.point(0.25);
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(p.y, 1.0, epsilon = 1e-15);
        assert_relative_eq!(c.speed(0.3), 2.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(c.length(), 2.0 * PI, max_relative = 1e-12);
        let mut params = PresetParams::new();
        params.insert("radius".into(), 0.5);
        let half = preset_scene(Preset::Circle, &params).unwrap();
        assert_relative_eq!(half.curve(0).length(), PI, max_relative = 1e-12);
    }

    #[test]
    fn ellipse_length_matches_series() {
        // Gauss–Kummer series for the ellipse perimeter, summed to convergence.
        let (a, b) = (1.0f64, 0.5f64);
        let h = ((a - b) / (a + b)).powi(2);
        let mut sum = 1.0;
        let mut coef = 1.0f64; // binomial(1/2, n)^2
        for n in 1..200 {
            let nf = n as f64;
            coef *= ((0.5 - (nf - 1.0)) / nf).powi(2);
            sum += coef * h.powi(n);
        }
        let exact = PI * (a + b) * sum;
        let s = default_scene(Preset::Ellipse);
        assert_relative_eq!(s.curve(0).length(), exact, max_relative = 1e-8);
    }

    #[test]
    fn curve_invariants_hold_for_every_preset() {
        for preset in Preset::ALL {
            let scene = default_scene(preset);
            for curve in scene.obstacles() {
                for i in 0..1000 {
                    let t = i as f64 / 1000.0;
                    assert!(curve.point(t).dist(curve.point(t + 1.0)) < 1e-12);
                    assert!(curve.speed(t) > 0.0);
                    assert_relative_eq!(curve.normal(t).norm(), 1.0, epsilon = 1e-12);
                    let h = 1e-4;
                    let fd = (curve.point(t + h) - curve.point(t - h)) * (0.5 / h);
                    let err = (fd - curve.deriv(t)).norm();
                    assert!(err < 1e3 * h * h * curve.speed(t).max(1.0), "{preset:?} t={t} err={err}");
                }
            }
        }
    }

    #[test]
    fn circle_normal_is_radial() {
        let mut params = PresetParams::new();
        params.insert("radius".into(), 2.0);
        let s = preset_scene(Preset::Circle, &params).unwrap();
        for i in 0..100 {
            let t = i as f64 / 100.0;
            assert_relative_eq!(s.curve(0).normal(t).dot(s.curve(0).point(t)), 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn two_circles_are_disjoint() {
        let s = default_scene(Preset::TwoCircles);
        // 100 x 100 sample pairs
        let d = s.min_separation(100);
        assert!(d > 0.0);
        assert_relative_eq!(d, 1.0, max_relative = 1e-3);
    }

    #[test]
    fn rejects_bad_presets() {
        assert!(matches!("blob".parse::<Preset>(), Err(Error::UnknownPreset(_))));
        let mut params = PresetParams::new();
        params.insert("depth".into(), 1.5);
        assert!(matches!(
            preset_scene(Preset::NearInclusion, &params),
            Err(Error::SelfIntersection(_))
        ));
        let mut params = PresetParams::new();
        params.insert("separation".into(), 0.5);
        assert!(preset_scene(Preset::TwoCircles, &params).is_err());
        let mut params = PresetParams::new();
        params.insert("bogus".into(), 0.5);
        assert!(preset_scene(Preset::Circle, &params).is_err());
    }

    #[test]
    fn global_param_round_trip() {
        for g in [0.0, 0.25, 1.5, 2.999] {
            let p = GlobalParam::from_global(g);
            assert_relative_eq!(p.to_global(), g, epsilon = 1e-15);
        }
        assert_eq!(GlobalParam::new(1, 1.25).t, 0.25);
    }

    #[test]
    fn plane_wave_examples() {
        let k = Wavenumber::new(PI).unwrap();
        let w = IncidentWave::plane(Vec2::new(1.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
        let v = w.eval(k, Vec2::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(v.re, -1.0, epsilon = 1e-15);
        assert_relative_eq!(v.im, 0.0, epsilon = 1e-15);
        for y in [-3.0, 0.0, 7.5] {
            let v = w.eval(Wavenumber::new(17.0).unwrap(), Vec2::new(0.0, y)).unwrap();
            assert_relative_eq!(v.re, 1.0, epsilon = 1e-15);
        }
        let amp = Complex64::new(0.3, -0.4);
        let w = IncidentWave::plane(Vec2::new(1.0, 2.0), amp).unwrap();
        for x in [Vec2::new(0.3, 0.1), Vec2::new(-5.0, 2.0)] {
            assert_relative_eq!(w.eval(k, x).unwrap().norm(), 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn point_source_matches_greens_function() {
        let scene = default_scene(Preset::TwoCircles);
        let k = Wavenumber::new(128.0).unwrap();
        let s = Vec2::new(1.0, 1.0);
        let w = IncidentWave::point_source(&scene, s, Complex64::new(1.0, 0.0)).unwrap();
        let x = scene.curve(0).point(0.1);
        assert_eq!(w.eval(k, x).unwrap(), greens_function(k, s, x).unwrap());
        assert!(w.eval(k, s).is_err());
        assert!(IncidentWave::point_source(&scene, Vec2::new(0.0, 1.0), Complex64::new(1.0, 0.0)).is_err());
    }
}
