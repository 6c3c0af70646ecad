//! Cylindrical Bessel functions and the 2D Helmholtz Green's function.
//!
//! The Green's function is the outgoing fundamental solution
//! `G_k(x, y) = (i/4) H₀⁽¹⁾(k‖x − y‖)` (time convention `e^{−iωt}`).

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::geometry::{GlobalParam, Scene, Vec2};

/// Largest supported Bessel order.
pub const MAX_ORDER: u32 = 200;

/// A positive, finite wavenumber in radians per length unit.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Wavenumber(f64);

impl Wavenumber {
    pub fn new(k: f64) -> Result<Self> {
        if k > 0.0 && k.is_finite() {
            Ok(Self(k))
        } else {
            Err(invalid("k", format!("wavenumber must be positive and finite, got {k}")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BesselKind {
    J,
    Y,
}

/// `J_n(x)` or `Y_n(x)` for integer order `n ≤ MAX_ORDER`.
pub fn bessel(kind: BesselKind, order: u32, x: f64) -> Result<f64> {
    if order > MAX_ORDER {
        return Err(invalid("order", format!("order {order} exceeds {MAX_ORDER}")));
    }
    if !x.is_finite() {
        return Err(invalid("x", "argument must be finite"));
    }
    match kind {
        BesselKind::J => {
            if x < 0.0 {
                return Err(invalid("x", "J is evaluated for x >= 0 only"));
            }
            Ok(match order {
                0 => libm::j0(x),
                1 => libm::j1(x),
                n => libm::jn(n as i32, x),
            })
        }
        BesselKind::Y => {
            if x <= 0.0 {
                return Err(Error::Singular(format!("Y_{order} at x = {x}")));
            }
            Ok(match order {
                0 => libm::y0(x),
                1 => libm::y1(x),
                n => libm::yn(n as i32, x),
            })
        }
    }
}

/// Hankel function of the first kind `H_n⁽¹⁾(x) = J_n(x) + i Y_n(x)`.
pub fn hankel1(order: u32, x: f64) -> Result<Complex64> {
    Ok(Complex64::new(
        bessel(BesselKind::J, order, x)?,
        bessel(BesselKind::Y, order, x)?,
    ))
}

/// `(i/4) H₀⁽¹⁾(k r)` for `r > 0`, without argument checks.
#[inline]
pub(crate) fn green_at_distance(k: f64, r: f64) -> Complex64 {
    let kr = k * r;
    Complex64::new(-0.25 * libm::y0(kr), 0.25 * libm::j0(kr))
}

/// The 2D Helmholtz Green's function between two distinct points.
pub fn greens_function(k: Wavenumber, x: Vec2, y: Vec2) -> Result<Complex64> {
    let r = x.dist(y);
    if r == 0.0 {
        return Err(Error::Singular(format!(
            "coincident points ({}, {}) in the Green's function",
            x.x, x.y
        )));
    }
    Ok(green_at_distance(k.get(), r))
}

/// Green's function pulled back to the boundary parameter domain:
/// `K_κ(t, τ) = G_k(κ(t), κ(τ)) ‖κ'(τ)‖`.
#[derive(Clone, Copy, Debug)]
pub struct KernelEval<'a> {
    scene: &'a Scene,
    k: Wavenumber,
}

impl<'a> KernelEval<'a> {
    pub fn new(scene: &'a Scene, k: Wavenumber) -> Self {
        Self { scene, k }
    }

    pub fn param_kernel(&self, t: GlobalParam, tau: GlobalParam) -> Result<Complex64> {
        let x = self.scene.point(t);
        let curve = self.scene.curve(tau.obstacle);
        let (y, dy) = curve.point_deriv(tau.t);
        if t.obstacle == tau.obstacle && t.t == tau.t {
            return Err(Error::Singular(format!("diagonal t = τ = {}", t.t)));
        }
        Ok(greens_function(self.k, x, y)? * dy.norm())
    }
}
