//! Randomised invariant suite for the manifold operations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{
    exp0, exp_map, gyro_transform, log0, log_map, mobius_add, stereo_unproject, Curvature,
    ManifoldPoint,
};
use crate::linalg::Matrix;

pub const LORENTZ_TOL: f64 = 1e-9;
pub const ROUND_TRIP_TOL: f64 = 1e-8;
pub const MOBIUS_IDENTITY_TOL: f64 = 1e-10;
pub const MOBIUS_INVERSE_TOL: f64 = 1e-12;
pub const GYRO_IDENTITY_TOL: f64 = 1e-10;

/// Worst case of one invariant over all trials.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub worst: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeomCheckReport {
    pub kappa: f64,
    pub dim: usize,
    pub trials: usize,
    pub checks: Vec<CheckResult>,
}

impl GeomCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Worst {
    name: &'static str,
    bound: f64,
    strict: bool,
    worst: f64,
}

impl Worst {
    fn new(name: &'static str, bound: f64) -> Self {
        Self { name, bound, strict: false, worst: 0.0 }
    }

    fn strict(name: &'static str, bound: f64) -> Self {
        Self { name, bound, strict: true, worst: f64::NEG_INFINITY }
    }

    fn push(&mut self, x: f64) {
        // NaN must fail, so it replaces any finite worst case
        if x.is_nan() || x > self.worst {
            self.worst = x;
        }
    }

    fn finish(self) -> CheckResult {
        let passed = if self.strict {
            self.worst < self.bound
        } else {
            self.worst <= self.bound
        };
        CheckResult {
            name: self.name,
            worst: self.worst,
            bound: self.bound,
            passed,
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Tangent norm cap for sampling: deep inside the ball, or well inside
/// the chart of the sphere.
fn tangent_radius(kappa: Curvature) -> f64 {
    let k = kappa.value();
    if kappa.is_flat() {
        3.0
    } else if k < 0.0 {
        3.0 / kappa.sqrt_abs()
    } else {
        1.0 / kappa.sqrt_abs()
    }
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, kappa: Curvature) -> Result<ManifoldPoint> {
    let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let r = rng.gen_range(0.0..tangent_radius(kappa));
    let v: Vec<f64> = dir.iter().map(|x| x * r / norm).collect();
    ManifoldPoint::new(exp0(&v, kappa)?, kappa)
}

/// Runs every invariant `trials` times on seeded random inputs.
pub fn geomcheck(kappa: f64, dim: usize, trials: usize, seed: u64) -> Result<GeomCheckReport> {
    if dim == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    let kappa = Curvature::new(kappa)?;
    let k = kappa.value();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let identity = Matrix::<f64>::identity(dim);

    let mut domain = Worst::strict("gyro_transform_domain", 1.0);
    let mut lorentz = Worst::new("gyro_transform_lorentz", LORENTZ_TOL);
    let mut round_trip = Worst::new("exp_log_round_trip", ROUND_TRIP_TOL);
    let mut ident = Worst::new("mobius_identity", MOBIUS_IDENTITY_TOL);
    let mut inverse = Worst::new("mobius_inverse", MOBIUS_INVERSE_TOL);
    let mut gyro_id = Worst::new("gyro_transform_identity", GYRO_IDENTITY_TOL);

    let origin = ManifoldPoint::origin(dim);
    for _ in 0..trials {
        let z = random_point(&mut rng, dim, kappa)?;
        let y = random_point(&mut rng, dim, kappa)?;
        let w = Matrix::new(dim, dim, (0..dim * dim).map(|_| rng.sample(StandardNormal)).collect())?;

        let out = gyro_transform(&w, &z, kappa)?;
        let nsq: f64 = out.coords().iter().map(|x| x * x).sum();
        domain.push(-k * nsq);
        if !kappa.is_flat() {
            lorentz.push(stereo_unproject(&out, kappa)?.residual(kappa).abs());
        }

        let back = exp_map(&log_map(&z, &y, kappa)?, kappa)?;
        round_trip.push(max_abs_diff(back.coords(), y.coords()));
        let at_origin = exp0(&log0(z.coords(), kappa), kappa)?;
        round_trip.push(max_abs_diff(&at_origin, z.coords()));

        ident.push(max_abs_diff(mobius_add(&origin, &z, kappa)?.coords(), z.coords()));
        ident.push(max_abs_diff(mobius_add(&z, &origin, kappa)?.coords(), z.coords()));
        let zero = mobius_add(&z.neg(), &z, kappa)?;
        inverse.push(zero.coords().iter().map(|x| x.abs()).fold(0.0, f64::max));

        let same = gyro_transform(&identity, &z, kappa)?;
        gyro_id.push(max_abs_diff(same.coords(), z.coords()));
    }

    let mut checks = vec![domain.finish()];
    if !kappa.is_flat() {
        checks.push(lorentz.finish());
    }
    checks.extend([round_trip.finish(), ident.finish(), inverse.finish(), gyro_id.finish()]);
    Ok(GeomCheckReport {
        kappa: k,
        dim,
        trials,
        checks,
    })
}
