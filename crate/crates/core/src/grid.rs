//! Uniform periodic grid on the circle and the sampled functions living on it.
//!
//! Nodes are `theta_j = -pi + 2 pi j / n` for `j = 0..n`, so `theta = 0` is node
//! `n / 2` and `theta = -pi` (identified with `pi`) is node 0.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;
pub const MIN_NODES: usize = 8;

/// Which form of the inequality a sampled function belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    VForm,
    HForm,
    FForm,
    Generic,
}

/// Selects the interpolant used when a function is evaluated off the nodes.
/// Smooth data gets trigonometric interpolation; continuous data with kinks
/// (rearranged profiles, clamped profiles) gets a monotone periodic cubic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    Smooth,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffScheme {
    Spectral,
    Central,
}

impl std::str::FromStr for DiffScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(DiffScheme::Spectral),
            "central" => Ok(DiffScheme::Central),
            other => Err(Error::InvalidParameter(format!("unknown scheme {other:?}"))),
        }
    }
}

pub fn validate_n(n: usize) -> Result<()> {
    if n < MIN_NODES || !n.is_multiple_of(2) {
        return Err(Error::InvalidGridSize { n });
    }
    Ok(())
}

#[inline]
pub fn node(n: usize, j: usize) -> f64 {
    -PI + TWO_PI * j as f64 / n as f64
}

pub fn nodes(n: usize) -> Vec<f64> {
    (0..n).map(|j| node(n, j)).collect()
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(TWO_PI) - PI
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircleFunction {
    values: Vec<f64>,
    role: Role,
    smoothness: Smoothness,
}

impl CircleFunction {
    /// Builds a function from node samples. v-form and f-form samples must be
    /// strictly positive.
    pub fn new(values: Vec<f64>, role: Role) -> Result<Self> {
        validate_n(values.len())?;
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if matches!(role, Role::VForm | Role::FForm) && value <= 0.0 {
                return Err(Error::NonPositive { index, value });
            }
        }
        Ok(CircleFunction {
            values,
            role,
            smoothness: Smoothness::Smooth,
        })
    }

    pub fn from_fn(n: usize, role: Role, f: impl Fn(f64) -> f64) -> Result<Self> {
        validate_n(n)?;
        Self::new((0..n).map(|j| f(node(n, j))).collect(), role)
    }

    pub fn with_smoothness(mut self, smoothness: Smoothness) -> Self {
        self.smoothness = smoothness;
        self
    }

    /// Same grid, role and smoothness, new values. Callers guarantee validity.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        CircleFunction {
            values,
            role: self.role,
            smoothness: self.smoothness,
        }
    }

    pub(crate) fn from_parts(values: Vec<f64>, role: Role, smoothness: Smoothness) -> Self {
        CircleFunction {
            values,
            role,
            smoothness,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn step(&self) -> f64 {
        TWO_PI / self.n() as f64
    }

    pub fn expect_role(&self, expected: Role) -> Result<()> {
        if self.role != expected {
            return Err(Error::RoleMismatch {
                expected,
                found: self.role,
            });
        }
        Ok(())
    }

    /// Periodic trapezoid rule, spectrally accurate for smooth periodic data.
    pub fn integrate(&self) -> f64 {
        self.step() * self.values.iter().sum::<f64>()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn differentiate(&self, scheme: DiffScheme) -> CircleFunction {
        let values = match scheme {
            DiffScheme::Spectral => spectral_derivative(&self.values, 1),
            DiffScheme::Central => {
                let n = self.n();
                let scale = n as f64 / (4.0 * PI);
                (0..n)
                    .map(|j| (self.values[(j + 1) % n] - self.values[(j + n - 1) % n]) * scale)
                    .collect()
            }
        };
        CircleFunction::from_parts(values, Role::Generic, self.smoothness)
    }

    pub fn second_derivative(&self, scheme: DiffScheme) -> CircleFunction {
        let values = match scheme {
            DiffScheme::Spectral => spectral_derivative(&self.values, 2),
            DiffScheme::Central => {
                let n = self.n();
                let h = self.step();
                let inv = 1.0 / (h * h);
                (0..n)
                    .map(|j| {
                        (self.values[(j + 1) % n] - 2.0 * self.values[j]
                            + self.values[(j + n - 1) % n])
                            * inv
                    })
                    .collect()
            }
        };
        CircleFunction::from_parts(values, Role::Generic, self.smoothness)
    }

    pub fn interpolant(&self) -> Interpolant {
        match self.smoothness {
            Smoothness::Smooth => Interpolant::trigonometric(&self.values),
            Smoothness::Continuous => Interpolant::monotone_cubic(&self.values),
        }
    }

    /// Evaluates the interpolant at an arbitrary angle. Reproduces node values
    /// exactly at the nodes.
    pub fn interp_eval(&self, theta: f64) -> f64 {
        self.interpolant().eval(theta)
    }
}

/// Rescales a v-form function so that the mean of `v^-2` is 1 (that is,
/// `integral v^-2 = 2 pi`), or an f-form function so that `integral f = 2 pi`.
pub fn normalize_constraint(v: &CircleFunction) -> Result<CircleFunction> {
    let h = v.step();
    match v.role() {
        Role::VForm => {
            let c: f64 = h * v.values().iter().map(|x| x.powi(-2)).sum::<f64>();
            let s = (c / TWO_PI).sqrt();
            Ok(v.with_values(v.values().iter().map(|x| x * s).collect()))
        }
        Role::FForm => {
            let s = TWO_PI / v.integrate();
            Ok(v.with_values(v.values().iter().map(|x| x * s).collect()))
        }
        found => Err(Error::RoleMismatch {
            expected: Role::VForm,
            found,
        }),
    }
}

/// Off-node evaluation of a periodic sample vector.
#[derive(Debug, Clone)]
pub enum Interpolant {
    Trig { values: Vec<f64>, coeffs: Vec<Complex64> },
    Cubic { values: Vec<f64>, slopes: Vec<f64> },
}

/// Snapping threshold, in units of the grid step, for treating an angle as a node.
const NODE_SNAP: f64 = 1e-12;

impl Interpolant {
    pub fn trigonometric(values: &[f64]) -> Self {
        let n = values.len();
        let mut buf: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft_forward(&mut buf);
        let inv = 1.0 / n as f64;
        let coeffs = buf[..=n / 2]
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let w = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
                c * (w * inv)
            })
            .collect();
        Interpolant::Trig {
            values: values.to_vec(),
            coeffs,
        }
    }

    /// Periodic monotone cubic Hermite interpolant (harmonic-mean slopes).
    pub fn monotone_cubic(values: &[f64]) -> Self {
        let n = values.len();
        let h = TWO_PI / n as f64;
        let slopes = (0..n)
            .map(|j| {
                let left = (values[j] - values[(j + n - 1) % n]) / h;
                let right = (values[(j + 1) % n] - values[j]) / h;
                harmonic_slope(left, right)
            })
            .collect();
        Interpolant::Cubic {
            values: values.to_vec(),
            slopes,
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let values = match self {
            Interpolant::Trig { values, .. } | Interpolant::Cubic { values, .. } => values,
        };
        let n = values.len();
        let h = TWO_PI / n as f64;
        let phi = (theta + PI).rem_euclid(TWO_PI);
        let t = phi / h;
        let nearest = t.round();
        if (t - nearest).abs() < NODE_SNAP {
            return values[(nearest as usize) % n];
        }
        match self {
            Interpolant::Trig { coeffs, .. } => {
                let step = Complex64::from_polar(1.0, phi);
                let mut z = Complex64::new(1.0, 0.0);
                let mut acc = 0.0;
                for c in coeffs {
                    acc += (c * z).re;
                    z *= step;
                }
                acc
            }
            Interpolant::Cubic { slopes, .. } => {
                let j = (t.floor() as usize) % n;
                let s = t - t.floor();
                let k = (j + 1) % n;
                hermite(values[j], values[k], slopes[j] * h, slopes[k] * h, s)
            }
        }
    }
}

pub(crate) fn harmonic_slope(left: f64, right: f64) -> f64 {
    if left * right <= 0.0 {
        0.0
    } else {
        2.0 * left * right / (left + right)
    }
}

/// Cubic Hermite on the unit interval with endpoint values and scaled slopes.
#[inline]
pub(crate) fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * m0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * m1
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// Unnormalized inverse transform.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

/// Signed wavenumber of FFT bin `k` for an even transform length `n`.
#[inline]
pub(crate) fn wavenumber(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Applies a real Fourier multiplier `m(k)` to periodic samples.
pub(crate) fn fourier_multiply(values: &[f64], m: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_forward(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        *c *= m(wavenumber(k, n));
    }
    fft_inverse(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter().map(|c| c.re * inv).collect()
}

fn spectral_derivative(values: &[f64], order: u32) -> Vec<f64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_forward(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let kk = wavenumber(k, n);
        *c *= match order {
            1 if k == n / 2 => Complex64::new(0.0, 0.0),
            1 => Complex64::new(0.0, kk),
            _ => Complex64::new(-kk * kk, 0.0),
        };
    }
    fft_inverse(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter().map(|c| c.re * inv).collect()
}
