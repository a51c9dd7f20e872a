//! Gyrovector calculus on the κ-stereographic model.
//!
//! The model is `{x ∈ ℝ^d : −κ‖x‖² < 1}` with conformal factor
//! `λ_x = 2 / (1 + κ‖x‖²)`. It is a Poincaré ball of radius `1/√−κ` for
//! κ < 0, a stereographic chart of the sphere for κ > 0, and plain
//! Euclidean space at κ = 0. All routines are generic over [`Real`] so the
//! training code can differentiate through them.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{dot, norm_sq, scale, Real};

/// Curvatures with magnitude below this use the Euclidean formulas.
pub const FLAT_THRESHOLD: f64 = 1e-12;

/// Relative margin kept from the κ < 0 boundary by [`project_to_domain`].
pub const BOUNDARY_EPS: f64 = 1e-5;

const MOBIUS_SINGULAR: f64 = 1e-15;
const DEGENERATE_NORM: f64 = 1e-15;

/// Sectional curvature κ of the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Curvature(f64);

impl Curvature {
    pub const FLAT: Curvature = Curvature(0.0);
    pub const UNIT_HYPERBOLIC: Curvature = Curvature(-1.0);
    pub const UNIT_SPHERICAL: Curvature = Curvature(1.0);

    pub fn new(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::domain(format!("curvature must be finite, got {kappa}")));
        }
        Ok(Self(kappa))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_flat(self) -> bool {
        self.0.abs() < FLAT_THRESHOLD
    }

    /// `√|κ|`.
    #[inline]
    pub fn sqrt_abs(self) -> f64 {
        self.0.abs().sqrt()
    }

    /// Radius of the κ < 0 ball, `None` when the domain is all of ℝ^d.
    pub fn ball_radius(self) -> Option<f64> {
        (self.0 < 0.0 && !self.is_flat()).then(|| 1.0 / self.sqrt_abs())
    }
}

impl TryFrom<f64> for Curvature {
    type Error = Error;
    fn try_from(k: f64) -> Result<Self> {
        Curvature::new(k)
    }
}

impl From<Curvature> for f64 {
    fn from(k: Curvature) -> f64 {
        k.0
    }
}

/// A point of the κ-stereographic model.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldPoint<T = f64> {
    coords: Vec<T>,
}

impl<T: Real> ManifoldPoint<T> {
    /// Validated constructor: rejects `d < 2`, non-finite entries and
    /// points outside the domain.
    pub fn new(coords: Vec<T>, kappa: Curvature) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::domain(format!(
                "manifold dimension must be at least 2, got {}",
                coords.len()
            )));
        }
        check_finite(&coords)?;
        let s = norm_sq(&coords).value();
        if -kappa.value() * s >= 1.0 {
            return Err(Error::domain(format!(
                "point with squared norm {s} lies outside the model for kappa = {}",
                kappa.value()
            )));
        }
        Ok(Self { coords })
    }

    pub fn origin(dim: usize) -> Self {
        Self {
            coords: vec![T::zero(); dim],
        }
    }

    /// Wraps coordinates produced by an operation that is closed on the model.
    pub(crate) fn from_raw(coords: Vec<T>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm_sq(&self) -> T {
        norm_sq(&self.coords)
    }

    /// `−κ‖x‖² < 1`.
    pub fn in_domain(&self, kappa: Curvature) -> bool {
        -kappa.value() * self.norm_sq().value() < 1.0
    }

    pub fn neg(&self) -> Self {
        Self {
            coords: self.coords.iter().map(|&c| -c).collect(),
        }
    }

    pub fn to_f64(&self) -> ManifoldPoint<f64> {
        ManifoldPoint {
            coords: self.coords.iter().map(|c| c.value()).collect(),
        }
    }
}

/// A tangent vector together with its base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector<T = f64> {
    coords: Vec<T>,
    base: ManifoldPoint<T>,
}

impl<T: Real> TangentVector<T> {
    pub fn new(coords: Vec<T>, base: ManifoldPoint<T>) -> Result<Self> {
        if coords.len() != base.dim() {
            return Err(Error::Shape(format!(
                "tangent vector of length {} at a point of dimension {}",
                coords.len(),
                base.dim()
            )));
        }
        check_finite(&coords)?;
        Ok(Self { coords, base })
    }

    /// Tangent vector at the origin.
    pub fn at_origin(coords: Vec<T>) -> Self {
        let d = coords.len();
        Self {
            coords,
            base: ManifoldPoint::origin(d),
        }
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    pub fn base(&self) -> &ManifoldPoint<T> {
        &self.base
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.coords).value().sqrt()
    }
}

/// A point of the Lorentz (κ < 0) or spherical (κ > 0) model
/// `{(t, s) : sgn(κ)·t² + ‖s‖² = 1/κ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LorentzPoint {
    pub time_coord: f64,
    pub space_coords: Vec<f64>,
}

impl LorentzPoint {
    /// `sgn(κ)·t² + ‖s‖² − 1/κ`; zero on the model.
    pub fn residual(&self, kappa: Curvature) -> f64 {
        let k = kappa.value();
        k.signum() * self.time_coord * self.time_coord + norm_sq(&self.space_coords) - 1.0 / k
    }

    pub fn satisfies_manifold_equation(&self, kappa: Curvature, tol: f64) -> bool {
        self.residual(kappa).abs() <= tol
    }
}

fn check_finite<T: Real>(v: &[T]) -> Result<()> {
    if v.iter().all(|x| x.value().is_finite()) {
        Ok(())
    } else {
        Err(Error::domain("non-finite coordinate"))
    }
}

fn check_same_dim<T: Real>(x: &ManifoldPoint<T>, y: &ManifoldPoint<T>) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::Shape(format!(
            "points of dimension {} and {}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

/// Curvature-scaled tangent: `tan(√κx)/√κ`, `tanh(√−κx)/√−κ`, or `x`.
pub fn tan_kappa<T: Real>(x: T, kappa: Curvature) -> Result<T> {
    if !x.value().is_finite() {
        return Err(Error::domain("tan_kappa of a non-finite value"));
    }
    Ok(tan_k(x, kappa))
}

/// Inverse of [`tan_kappa`].
pub fn arctan_kappa<T: Real>(x: T, kappa: Curvature) -> Result<T> {
    if !x.value().is_finite() {
        return Err(Error::domain("arctan_kappa of a non-finite value"));
    }
    if kappa.value() < 0.0 && !kappa.is_flat() && (kappa.sqrt_abs() * x.value()).abs() >= 1.0 {
        return Err(Error::domain(format!(
            "arctan_kappa argument {} outside (-1/sqrt(-kappa), 1/sqrt(-kappa))",
            x.value()
        )));
    }
    Ok(artan_k(x, kappa))
}

#[inline]
pub(crate) fn tan_k<T: Real>(x: T, kappa: Curvature) -> T {
    if kappa.is_flat() {
        return x;
    }
    let sk = kappa.sqrt_abs();
    if kappa.value() > 0.0 {
        (x * sk).tan() / sk
    } else {
        (x * sk).tanh() / sk
    }
}

#[inline]
pub(crate) fn artan_k<T: Real>(x: T, kappa: Curvature) -> T {
    if kappa.is_flat() {
        return x;
    }
    let sk = kappa.sqrt_abs();
    if kappa.value() > 0.0 {
        (x * sk).atan() / sk
    } else {
        let arg = x * sk;
        // round-off can push a boundary point onto the pole of atanh
        let limit = 1.0 - 1e-16;
        let arg = if arg.value() >= limit {
            T::cst(limit)
        } else if arg.value() <= -limit {
            T::cst(-limit)
        } else {
            arg
        };
        arg.atanh() / sk
    }
}

/// `λ_x = 2 / (1 + κ‖x‖²)`.
pub fn conformal_factor<T: Real>(x: &ManifoldPoint<T>, kappa: Curvature) -> Result<T> {
    let den = x.norm_sq() * kappa.value() + 1.0;
    if den.value() <= 0.0 {
        return Err(Error::domain("conformal factor undefined outside the model"));
    }
    Ok(den.recip_scaled(2.0))
}

#[inline]
fn lambda_of_sq<T: Real>(s: T, kappa: Curvature) -> T {
    (s * kappa.value() + 1.0).recip_scaled(2.0)
}

/// Rescales κ < 0 points that reach within `BOUNDARY_EPS` of the boundary.
fn clamp_vec<T: Real>(x: Vec<T>, kappa: Curvature) -> Vec<T> {
    let Some(radius) = kappa.ball_radius() else {
        return x;
    };
    let max_r = (1.0 - BOUNDARY_EPS) * radius;
    let n = norm_sq(&x).value().sqrt();
    if n >= max_r {
        let s = norm_sq(&x).sqrt();
        scale(&x, s.recip_scaled(max_r))
    } else {
        x
    }
}

/// Float-safety clamp into the model. Identity unless κ < 0 and
/// `‖x‖ ≥ (1 − ε)/√−κ`, in which case `x` is rescaled onto that radius.
pub fn project_to_domain<T: Real>(x: Vec<T>, kappa: Curvature) -> Result<ManifoldPoint<T>> {
    check_finite(&x)?;
    Ok(ManifoldPoint::from_raw(clamp_vec(x, kappa)))
}

/// Möbius addition `x ⊕_κ y`.
pub fn mobius_add<T: Real>(
    x: &ManifoldPoint<T>,
    y: &ManifoldPoint<T>,
    kappa: Curvature,
) -> Result<ManifoldPoint<T>> {
    check_same_dim(x, y)?;
    mobius_add_raw(x.coords(), y.coords(), kappa).map(ManifoldPoint::from_raw)
}

pub(crate) fn mobius_add_raw<T: Real>(x: &[T], y: &[T], kappa: Curvature) -> Result<Vec<T>> {
    let k = kappa.value();
    if kappa.is_flat() {
        return Ok(x.iter().zip(y).map(|(&a, &b)| a + b).collect());
    }
    let xy = dot(x, y);
    let xx = norm_sq(x);
    let yy = norm_sq(y);
    let den = T::one() - xy * (2.0 * k) + xx * yy * (k * k);
    if den.value().abs() < MOBIUS_SINGULAR {
        return Err(Error::Singularity(format!(
            "Möbius denominator {:e}",
            den.value()
        )));
    }
    let cx = T::one() - xy * (2.0 * k) - yy * k;
    let cy = xx * k + 1.0;
    let out = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (cx * a + cy * b) / den)
        .collect();
    Ok(clamp_vec(out, kappa))
}

/// Möbius scalar multiplication `r ⊗_κ x`.
pub fn mobius_scalar<T: Real>(r: T, x: &ManifoldPoint<T>, kappa: Curvature) -> Result<ManifoldPoint<T>> {
    mobius_scalar_raw(r, x.coords(), kappa).map(ManifoldPoint::from_raw)
}

pub(crate) fn mobius_scalar_raw<T: Real>(r: T, x: &[T], kappa: Curvature) -> Result<Vec<T>> {
    let nsq = norm_sq(x);
    if nsq.value() == 0.0 {
        return Ok(vec![T::zero(); x.len()]);
    }
    let n = nsq.sqrt();
    let angle = r * artan_k(n, kappa);
    if kappa.value() > 0.0 && !kappa.is_flat() && (angle.value() * kappa.sqrt_abs()).abs() >= FRAC_PI_2 {
        return Err(Error::Range(format!(
            "scalar multiple {} leaves the chart for kappa = {}",
            r.value(),
            kappa.value()
        )));
    }
    let coef = tan_k(angle, kappa) / n;
    Ok(clamp_vec(scale(x, coef), kappa))
}

/// Geodesic distance `2·artan_κ(‖(−x) ⊕ y‖)`.
///
/// Returns an exact (derivative-free) zero for coincident points.
pub fn distance<T: Real>(x: &ManifoldPoint<T>, y: &ManifoldPoint<T>, kappa: Curvature) -> Result<T> {
    check_same_dim(x, y)?;
    distance_raw(x.coords(), y.coords(), kappa)
}

pub(crate) fn distance_raw<T: Real>(x: &[T], y: &[T], kappa: Curvature) -> Result<T> {
    let neg: Vec<T> = x.iter().map(|&c| -c).collect();
    let u = mobius_add_raw(&neg, y, kappa)?;
    let nsq = norm_sq(&u);
    if nsq.value() == 0.0 {
        return Ok(T::zero());
    }
    Ok(artan_k(nsq.sqrt(), kappa) * 2.0)
}

/// Logarithmic map `Log_x(y)`.
pub fn log_map<T: Real>(
    x: &ManifoldPoint<T>,
    y: &ManifoldPoint<T>,
    kappa: Curvature,
) -> Result<TangentVector<T>> {
    check_same_dim(x, y)?;
    let neg: Vec<T> = x.coords().iter().map(|&c| -c).collect();
    let u = mobius_add_raw(&neg, y.coords(), kappa)?;
    let nsq = norm_sq(&u);
    let coords = if nsq.value() == 0.0 {
        vec![T::zero(); u.len()]
    } else {
        let n = nsq.sqrt();
        let lambda = conformal_factor(x, kappa)?;
        let coef = artan_k(n, kappa) * 2.0 / (lambda * n);
        scale(&u, coef)
    };
    Ok(TangentVector {
        coords,
        base: x.clone(),
    })
}

/// Exponential map `Exp_x(v) = x ⊕ (tan_κ(λ_x‖v‖/2) · v/‖v‖)`.
pub fn exp_map<T: Real>(v: &TangentVector<T>, kappa: Curvature) -> Result<ManifoldPoint<T>> {
    let x = v.base();
    let nsq = norm_sq(v.coords());
    if nsq.value() == 0.0 {
        return Ok(x.clone());
    }
    let n = nsq.sqrt();
    let lambda = conformal_factor(x, kappa)?;
    let arg = lambda * n * 0.5;
    check_period(arg.value(), kappa)?;
    let coef = tan_k(arg, kappa) / n;
    let step = scale(v.coords(), coef);
    mobius_add_raw(x.coords(), &step, kappa).map(ManifoldPoint::from_raw)
}

fn check_period(arg: f64, kappa: Curvature) -> Result<()> {
    if kappa.value() > 0.0 && !kappa.is_flat() && arg * kappa.sqrt_abs() >= FRAC_PI_2 {
        return Err(Error::Range(format!(
            "step of geodesic length {} exceeds the chart for kappa = {}",
            2.0 * arg,
            kappa.value()
        )));
    }
    Ok(())
}

/// `Log_o(y) = artan_κ(‖y‖) · y/‖y‖`, the origin-chart coordinates.
pub fn log0<T: Real>(y: &[T], kappa: Curvature) -> Vec<T> {
    let nsq = norm_sq(y);
    if nsq.value() == 0.0 {
        return vec![T::zero(); y.len()];
    }
    let n = nsq.sqrt();
    scale(y, artan_k(n, kappa) / n)
}

/// `Exp_o(v) = tan_κ(‖v‖) · v/‖v‖`, clamped into the model.
pub fn exp0<T: Real>(v: &[T], kappa: Curvature) -> Result<Vec<T>> {
    let nsq = norm_sq(v);
    if nsq.value() == 0.0 {
        return Ok(vec![T::zero(); v.len()]);
    }
    let n = nsq.sqrt();
    check_period(n.value(), kappa)?;
    Ok(clamp_vec(scale(v, tan_k(n, kappa) / n), kappa))
}

/// Gyro-transform `Gyr_z(W) z = f_scal(W, z) · zᵀW` from 𝔖^{d1} to 𝔖^{d2},
/// with `W` of shape `d1 × d2` and
/// `f_scal = √(κ⁻¹[1 − (λ_z − 1)²]) / (λ_z ‖zᵀW‖)`.
///
/// A vanishing `zᵀW` returns the origin of 𝔖^{d2}.
pub fn gyro_transform<T: Real>(
    w: &Matrix<T>,
    z: &ManifoldPoint<T>,
    kappa: Curvature,
) -> Result<ManifoldPoint<T>> {
    if w.rows() != z.dim() {
        return Err(Error::Shape(format!(
            "gyro-transform matrix has {} rows, point has dimension {}",
            w.rows(),
            z.dim()
        )));
    }
    let wz = w.left_mul(z.coords());
    let wz_sq = norm_sq(&wz);
    if wz_sq.value().sqrt() < DEGENERATE_NORM {
        return Ok(ManifoldPoint::origin(w.cols()));
    }
    let s = z.norm_sq();
    let one_plus = s * kappa.value() + 1.0;
    // κ⁻¹[1 − (λ−1)²] = 4‖z‖²/(1 + κ‖z‖²)², which stays finite as κ → 0
    let radicand = s * 4.0 / (one_plus * one_plus);
    let lambda = one_plus.recip_scaled(2.0);
    let f_scal = radicand.sqrt() / (lambda * wz_sq.sqrt());
    Ok(ManifoldPoint::from_raw(clamp_vec(scale(&wz, f_scal), kappa)))
}

/// Weighted gyro-midpoint
/// `½ ⊗ ( Σ_i [α_i λ_i / Σ_j α_j(λ_j − 1)] h_i )`.
pub fn gyro_midpoint<T: Real>(
    points: &[ManifoldPoint<T>],
    weights: &[T],
    kappa: Curvature,
) -> Result<ManifoldPoint<T>> {
    if points.is_empty() {
        return Err(Error::domain("gyro-midpoint of an empty set"));
    }
    if points.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    let dim = points[0].dim();
    if points.iter().any(|p| p.dim() != dim) {
        return Err(Error::Shape("gyro-midpoint over points of mixed dimension".into()));
    }
    if weights.iter().any(|w| !(w.value() >= 0.0)) {
        return Err(Error::domain("gyro-midpoint weights must be non-negative"));
    }
    if weights.iter().all(|w| w.value() == 0.0) {
        return Err(Error::domain("gyro-midpoint weights are all zero"));
    }
    let lambdas: Vec<T> = points
        .iter()
        .map(|p| lambda_of_sq(p.norm_sq(), kappa))
        .collect();
    let mut den = T::zero();
    for (&a, &l) in weights.iter().zip(&lambdas) {
        den = den + a * (l - 1.0);
    }
    if den.value().abs() < MOBIUS_SINGULAR {
        return Err(Error::DegenerateAggregation(format!(
            "midpoint denominator {:e}",
            den.value()
        )));
    }
    let mut acc = vec![T::zero(); dim];
    for ((p, &a), &l) in points.iter().zip(weights).zip(&lambdas) {
        let c = a * l / den;
        for (o, &x) in acc.iter_mut().zip(p.coords()) {
            *o = *o + c * x;
        }
    }
    // the pre-halving sum lies in the same ball for κ < 0; clamp round-off
    mobius_scalar_raw(T::cst(0.5), &clamp_vec(acc, kappa), kappa).map(ManifoldPoint::from_raw)
}

/// Inverse stereographic projection onto the Lorentz / spherical model:
/// `((λ_z − 1)/√|κ|, λ_z z)`.
pub fn stereo_unproject(z: &ManifoldPoint, kappa: Curvature) -> Result<LorentzPoint> {
    if kappa.is_flat() {
        return Err(Error::domain("no Lorentz model at kappa = 0"));
    }
    let lambda = conformal_factor(z, kappa)?;
    Ok(LorentzPoint {
        time_coord: (lambda - 1.0) / kappa.sqrt_abs(),
        space_coords: scale(z.coords(), lambda),
    })
}

/// Stereographic projection `z = s / (1 + √|κ| t)`, inverse of
/// [`stereo_unproject`].
pub fn stereo_project(p: &LorentzPoint, kappa: Curvature) -> Result<ManifoldPoint> {
    if kappa.is_flat() {
        return Err(Error::domain("no Lorentz model at kappa = 0"));
    }
    let den = 1.0 + kappa.sqrt_abs() * p.time_coord;
    if den.abs() < MOBIUS_SINGULAR {
        return Err(Error::Singularity("projection from the pole".into()));
    }
    Ok(ManifoldPoint::from_raw(scale(&p.space_coords, 1.0 / den)))
}
