//! Geometric visibility between boundary points and the window sets it
//! induces.
//!
//! A point that is not directly visible from the collocation point cannot be
//! a direct stationary point of the oscillatory integral, so its coupling can
//! be windowed away without looking at a solution.

use rayon::prelude::*;

use crate::discretization::{Degree, Discretization};
use crate::error::{invalid, Result};
use crate::geometry::{periodic_diff, segments_intersect, GlobalParam, IncidentWave, Scene, Vec2};
use crate::windows::{merge_windows, run_windows, CompoundWindow, ElementaryWindow, WindowSet};

/// Segments per bounding-box chunk in the occlusion test.
const CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisibilityConfig {
    /// Decay length of the windows, in parameter units.
    pub t_vis: f64,
    /// Polyline points per obstacle; `None` means `max(1024, 8N)`.
    pub resolution: Option<usize>,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self {
            t_vis: 0.15,
            resolution: None,
        }
    }
}

impl VisibilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_vis > 0.0 && self.t_vis < 0.25) {
            return Err(invalid("t_vis", "decay length must lie in (0, 0.25)"));
        }
        if let Some(m) = self.resolution {
            if m < 256 {
                return Err(invalid("resolution", "need at least 256 polyline points"));
            }
        }
        Ok(())
    }

    pub fn resolution_for(&self, n: usize) -> usize {
        self.resolution.unwrap_or_else(|| (8 * n).max(1024))
    }
}

#[derive(Clone, Debug)]
struct Chunk {
    lo: Vec2,
    hi: Vec2,
    first: usize,
    last: usize,
}

/// Sampled obstacle polylines with per-obstacle and per-chunk bounding boxes.
#[derive(Clone, Debug)]
pub struct Occluders {
    m: usize,
    polys: Vec<Vec<Vec2>>,
    boxes: Vec<(Vec2, Vec2)>,
    chunks: Vec<Vec<Chunk>>,
}

fn bbox(pts: impl Iterator<Item = Vec2>) -> (Vec2, Vec2) {
    pts.fold(
        (
            Vec2::new(f64::INFINITY, f64::INFINITY),
            Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        ),
        |(lo, hi), p| (Vec2::new(lo.x.min(p.x), lo.y.min(p.y)), Vec2::new(hi.x.max(p.x), hi.y.max(p.y))),
    )
}

fn boxes_overlap(a: (Vec2, Vec2), b: (Vec2, Vec2)) -> bool {
    a.0.x <= b.1.x && b.0.x <= a.1.x && a.0.y <= b.1.y && b.0.y <= a.1.y
}

impl Occluders {
    pub fn new(scene: &Scene, m: usize) -> Self {
        let polys: Vec<Vec<Vec2>> = scene.obstacles().iter().map(|c| c.polyline(m)).collect();
        let boxes = polys.iter().map(|p| bbox(p.iter().copied())).collect();
        let chunks = polys
            .iter()
            .map(|p| {
                (0..m)
                    .step_by(CHUNK)
                    .map(|first| {
                        let last = (first + CHUNK).min(m);
                        let (lo, hi) = bbox((first..=last).map(|s| p[s % m]));
                        Chunk { lo, hi, first, last }
                    })
                    .collect()
            })
            .collect();
        Self { m, polys, boxes, chunks }
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    /// Bounding box of all polylines.
    pub fn extent(&self) -> (Vec2, Vec2) {
        bbox(self.boxes.iter().flat_map(|b| [b.0, b.1]))
    }

    /// Index of the polyline segment containing parameter `t`.
    fn segment_of(&self, t: f64) -> usize {
        ((t * self.m as f64).floor() as usize).min(self.m - 1)
    }

    /// Whether the open segment `a → b` misses every polyline segment, except
    /// the segments next to the boundary parameters in `skip`.
    pub fn segment_clear(&self, a: Vec2, b: Vec2, skip: &[GlobalParam]) -> bool {
        let sb = bbox([a, b].into_iter());
        let excluded = |p: usize, s: usize| {
            skip.iter().any(|g| {
                if g.obstacle != p {
                    return false;
                }
                let c = self.segment_of(g.t);
                let d = (s as isize - c as isize).rem_euclid(self.m as isize) as usize;
                d <= 1 || d >= self.m - 1
            })
        };
        for (p, poly) in self.polys.iter().enumerate() {
            if !boxes_overlap(sb, self.boxes[p]) {
                continue;
            }
            for ch in &self.chunks[p] {
                if !boxes_overlap(sb, (ch.lo, ch.hi)) {
                    continue;
                }
                for s in ch.first..ch.last {
                    if excluded(p, s) {
                        continue;
                    }
                    if segments_intersect(a, b, poly[s], poly[(s + 1) % self.m]) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

impl Occluders {
    /// Whether the segment `a → b` crosses the polyline of obstacle `p`.
    pub fn segment_hits(&self, a: Vec2, b: Vec2, p: usize) -> bool {
        let sb = bbox([a, b].into_iter());
        if !boxes_overlap(sb, self.boxes[p]) {
            return false;
        }
        let poly = &self.polys[p];
        self.chunks[p].iter().any(|ch| {
            boxes_overlap(sb, (ch.lo, ch.hi))
                && (ch.first..ch.last).any(|s| segments_intersect(a, b, poly[s], poly[(s + 1) % self.m]))
        })
    }
}

/// Visibility test bound to one scene and polyline resolution.
#[derive(Clone, Debug)]
pub struct Visibility<'a> {
    scene: &'a Scene,
    occ: Occluders,
}

impl<'a> Visibility<'a> {
    pub fn new(scene: &'a Scene, m: usize) -> Self {
        Self {
            scene,
            occ: Occluders::new(scene, m),
        }
    }

    pub fn occluders(&self) -> &Occluders {
        &self.occ
    }

    /// Whether `κ(t)` and `κ(τ)` see each other along an exterior segment.
    ///
    /// Both endpoints must face the other point (outward normals), and the
    /// open segment must cross no polyline. Points on the same obstacle that
    /// are closer than one polyline segment count as visible.
    pub fn visible(&self, t: GlobalParam, tau: GlobalParam) -> bool {
        if t.obstacle == tau.obstacle && periodic_diff(t.t, tau.t).abs() * self.occ.m as f64 <= 1.0 {
            return true;
        }
        let ct = self.scene.curve(t.obstacle);
        let cs = self.scene.curve(tau.obstacle);
        let (a, b) = (ct.point(t.t), cs.point(tau.t));
        let d = b - a;
        if ct.normal(t.t).dot(d) <= 0.0 || cs.normal(tau.t).dot(d) >= 0.0 {
            return false;
        }
        self.occ.segment_clear(a, b, &[t, tau])
    }

    /// Whether `κ(t)` receives a direct ray from `wave`; a superposition
    /// illuminates a point when any component does.
    pub fn illuminated(&self, wave: &IncidentWave, t: GlobalParam) -> bool {
        let curve = self.scene.curve(t.obstacle);
        let x = curve.point(t.t);
        let n = curve.normal(t.t);
        match wave {
            IncidentWave::Plane { direction, .. } => {
                if n.dot(*direction) >= 0.0 {
                    return false;
                }
                let (lo, hi) = self.occ.extent();
                let reach = (hi - lo).norm() + (x - lo).norm() + 1.0;
                self.occ.segment_clear(x, x - *direction * reach, &[t])
            }
            IncidentWave::PointSource { source, .. } => {
                n.dot(x - *source) < 0.0 && self.occ.segment_clear(x, *source, &[t])
            }
            IncidentWave::Superposition(parts) => parts.iter().any(|w| self.illuminated(w, t)),
        }
    }
}

/// Sets `marks[l]` when column `l` of obstacle `q` is visible from `t`.
fn visible_columns(vis: &Visibility, disc: &Discretization, t: GlobalParam, q: usize) -> Vec<bool> {
    let basis = disc.basis();
    let off = basis.offset(q);
    (0..basis.count(q))
        .map(|l| vis.visible(t, basis.center(off + l)))
        .collect()
}

fn sees_any(vis: &Visibility, disc: &Discretization, t: GlobalParam, q: usize) -> bool {
    let basis = disc.basis();
    let off = basis.offset(q);
    (0..basis.count(q)).any(|l| vis.visible(t, basis.center(off + l)))
}

/// Directions in which `wave` leaves the lit point `y`, one per lighting component.
fn transmitted_directions(vis: &Visibility, wave: &IncidentWave, y: GlobalParam, out: &mut Vec<Vec2>) {
    match wave {
        IncidentWave::Plane { direction, .. } => {
            if vis.illuminated(wave, y) {
                out.push(*direction);
            }
        }
        IncidentWave::PointSource { source, .. } => {
            if vis.illuminated(wave, y) {
                let d = vis.scene.point(y) - *source;
                out.push(d * (1.0 / d.norm()));
            }
        }
        IncidentWave::Superposition(parts) => {
            for w in parts {
                transmitted_directions(vis, w, y, out);
            }
        }
    }
}

/// Marks the columns of obstacle `q` that can carry a stationary point for
/// rows on obstacle `p`: those that see `p`, and lit points whose incident
/// ray, continued through `q`, lands on `p`.
fn coupling_columns(vis: &Visibility, wave: &IncidentWave, disc: &Discretization, p: usize, q: usize) -> Vec<bool> {
    let basis = disc.basis();
    let off = basis.offset(q);
    let (lo, hi) = vis.occ.extent();
    let reach = 2.0 * (hi - lo).norm() + 1.0;
    (0..basis.count(q))
        .into_par_iter()
        .map(|l| {
            let y = basis.center(off + l);
            if sees_any(vis, disc, y, p) {
                return true;
            }
            let mut dirs = Vec::new();
            transmitted_directions(vis, wave, y, &mut dirs);
            let x = vis.scene.point(y);
            dirs.iter().any(|d| vis.occ.segment_hits(x, x + *d * reach, p))
        })
        .collect()
}

/// Window set from the visibility criterion.
///
/// The block on a row's own obstacle keeps the visible columns, dilated by
/// `T_vis`, plus the singularity window, but only for rows lit by the wave
/// and by every other obstacle; other rows keep it whole. A block coupling
/// obstacle `p` to obstacle `q` keeps, for every row on `p`, the columns of
/// `q` that see `p` or pass the incident wave on to `p`, dilated by `T_vis`.
pub fn visibility_windows(
    scene: &Scene,
    wave: &IncidentWave,
    disc: &Discretization,
    cfg: &VisibilityConfig,
) -> Result<WindowSet> {
    cfg.validate()?;
    let vis = Visibility::new(scene, cfg.resolution_for(disc.n()));
    let basis = disc.basis();
    let offset = match basis.degree() {
        Degree::Constant => 0.5,
        _ => 0.0,
    };
    let t_vis = cfg.t_vis;
    let eps = 0.5 * t_vis;
    let obstacles = scene.len();
    let to_window = |marks: &[bool]| match run_windows(offset, marks, t_vis) {
        Some(ws) => merge_windows(&ws, eps),
        None => CompoundWindow::full(),
    };
    let coupling: Vec<Vec<CompoundWindow>> = (0..obstacles)
        .map(|p| {
            (0..obstacles)
                .map(|q| {
                    if p == q {
                        CompoundWindow::full()
                    } else {
                        to_window(&coupling_columns(&vis, wave, disc, p, q))
                    }
                })
                .collect()
        })
        .collect();
    let rows: Vec<Vec<CompoundWindow>> = (0..disc.n())
        .into_par_iter()
        .map(|i| {
            let t = disc.collocation()[i];
            let p = t.obstacle;
            let lit = vis.illuminated(wave, t) && (0..obstacles).all(|q| q == p || sees_any(&vis, disc, t, q));
            let mut row = coupling[p].clone();
            if lit {
                let marks = visible_columns(&vis, disc, t, p);
                row[p] = match run_windows(offset, &marks, t_vis) {
                    None => CompoundWindow::full(),
                    Some(mut ws) => match ElementaryWindow::around(t.t, t_vis, t_vis) {
                        Ok(w) => {
                            ws.push(w);
                            merge_windows(&ws, eps)
                        }
                        Err(_) => CompoundWindow::full(),
                    },
                };
            }
            row
        })
        .collect();
    WindowSet::new(basis.clone(), rows)
}
