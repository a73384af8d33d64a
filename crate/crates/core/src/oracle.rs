//! Independent checks: a seeded random corpus, a gradient-descent minimizer
//! that never uses the symmetries, the line and interval versions of the
//! inequality, and the vanishing-set variant.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{constraint_integral, functional_v, FunctionalReport};
use crate::grid::{self, fourier_multiply, normalize_constraint, CircleFunction, DiffScheme, Role, TWO_PI};
use crate::quadrature::GaussLegendre;
use crate::symmetries::forward_energy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub count: usize,
    pub n: usize,
    pub max_harmonic: usize,
    pub amplitude_cap: f64,
    pub positivity_floor: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            seed: 0,
            count: 100,
            n: 512,
            max_harmonic: 5,
            amplitude_cap: 0.5,
            positivity_floor: 0.2,
        }
    }
}

/// One corpus member: `1 + sum_k (a_k cos k theta + b_k sin k theta)` with
/// `|a_k|, |b_k| <= cap / k`, clamped below at the floor and then smoothed by a
/// Gaussian Fourier multiplier, whose positive kernel keeps the floor.
pub fn corpus_member(spec: &CorpusSpec, index: usize) -> Result<CircleFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let k_max = spec.max_harmonic.max(1);
    let coeffs: Vec<(f64, f64)> = (1..=k_max)
        .map(|k| {
            let s = spec.amplitude_cap / k as f64;
            (rng.random_range(-s..=s), rng.random_range(-s..=s))
        })
        .collect();
    let floor = spec.positivity_floor;
    let raw: Vec<f64> = grid::nodes(spec.n)
        .into_iter()
        .map(|t| {
            let p: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(i, (a, b))| {
                    let k = (i + 1) as f64;
                    a * (k * t).cos() + b * (k * t).sin()
                })
                .sum();
            (1.0 + p).max(floor)
        })
        .collect();
    let width = 2.0 * k_max as f64;
    let smooth = fourier_multiply(&raw, |k| (-(k / width).powi(2)).exp());
    CircleFunction::new(smooth.into_iter().map(|x| x.max(floor)).collect(), Role::VForm)
}

/// Members are seeded independently, so the corpus does not depend on the
/// thread schedule.
pub fn random_corpus(spec: &CorpusSpec) -> Result<Vec<CircleFunction>> {
    grid::validate_n(spec.n)?;
    if !(spec.positivity_floor > 0.0) || !(spec.amplitude_cap >= 0.0) {
        return Err(Error::InvalidParameter("corpus floor must be positive".into()));
    }
    (0..spec.count)
        .into_par_iter()
        .map(|i| corpus_member(spec, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    #[serde(skip)]
    pub v: CircleFunction,
    /// Energy after each accepted step, starting with the normalized input.
    pub history: Vec<f64>,
    pub f: f64,
    pub steps_taken: usize,
}

fn h1_precondition(g: &[f64]) -> Vec<f64> {
    fourier_multiply(g, |k| 1.0 / (1.0 + k * k))
}

/// Minimizes `F * constraint` by preconditioned gradient descent with the
/// spectral scheme, renormalizing the constraint to `2 pi` after each step.
/// A step is accepted only if it lowers `F`; the rate halves on rejection and
/// grows by 1.2 on acceptance.
pub fn descend_oracle(v0: &CircleFunction, steps: usize, rate: f64) -> Result<OracleResult> {
    if !(rate > 0.0) {
        return Err(Error::InvalidParameter("rate must be positive".into()));
    }
    let scheme = DiffScheme::Spectral;
    let mut v = normalize_constraint(v0)?;
    let mut f = functional_v(&v, scheme)?;
    let initial = f;
    let mut history = vec![f];
    let mut eta = rate;
    let mut taken = 0;
    for _ in 0..steps {
        let c = constraint_integral(&v)?;
        let d2 = v.second_derivative(scheme);
        let g: Vec<f64> = v
            .values()
            .iter()
            .zip(d2.values())
            .map(|(&x, &ddx)| c * (-8.0 * ddx - 2.0 * x) - 2.0 * f * x.powi(-3))
            .collect();
        let p = h1_precondition(&g);
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = v.values().iter().zip(&p).map(|(x, d)| x - eta * d).collect();
            if trial.iter().all(|&x| x > 0.0 && x.is_finite()) {
                let w = normalize_constraint(&v.with_values(trial))?;
                let fw = functional_v(&w, scheme)?;
                if fw <= f {
                    accepted = Some((w, fw));
                    break;
                }
            }
            eta *= 0.5;
        }
        match accepted {
            Some((w, fw)) => {
                v = w;
                f = fw;
                history.push(f);
                taken += 1;
                eta *= 1.2;
            }
            None => break,
        }
    }
    if f > initial {
        return Err(Error::Diverged { initial, last: f });
    }
    Ok(OracleResult {
        v,
        history,
        f,
        steps_taken: taken,
    })
}

/// The two line versions of the inequality under `x = cot(theta / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StereoVariant {
    /// `integral (1 + x^2) v_x^2 - v^2 / (1 + x^2) >= -pi^2 / integral v^-2 / (1 + x^2)`.
    A,
    /// The same with `4 (1 + x^2) v_x^2`; the transplant of the interval `[0, 2 pi]`.
    B,
}

/// Profiles on the line with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum LineProfile {
    Constant { k: f64 },
    /// `v^-2 = k sqrt(1 - a^2) / (1 + a (p (1 - x^2) + 2 q x) / (1 + x^2))` with
    /// `(p, q)` the unit vector of `x0`; the circle critical family.
    EqualityA { k: f64, alpha: f64, x0: f64 },
    /// `v^-2 = k sqrt(1 - a^2) / (1 + a x / sqrt(1 + x^2))`; the interval
    /// critical family for `[0, 2 pi]`.
    EqualityB { k: f64, alpha: f64 },
}

impl LineProfile {
    fn validate(&self) -> Result<()> {
        let (k, alpha) = match *self {
            LineProfile::Constant { k } => (k, 0.0),
            LineProfile::EqualityA { k, alpha, x0 } => {
                if !x0.is_finite() {
                    return Err(Error::InvalidParameter("x0 must be finite".into()));
                }
                (k, alpha)
            }
            LineProfile::EqualityB { k, alpha } => (k, alpha),
        };
        if !(k > 0.0) || !k.is_finite() || !(alpha.abs() < 1.0) {
            return Err(Error::InvalidParameter("need k > 0 and |alpha| < 1".into()));
        }
        Ok(())
    }

    /// `(D, D')` where `v^-2 = k sqrt(1 - a^2) / D`.
    fn denominator(&self, x: f64) -> (f64, f64) {
        let r = 1.0 + x * x;
        match *self {
            LineProfile::Constant { .. } => (1.0, 0.0),
            LineProfile::EqualityA { alpha, x0, .. } => {
                let p = (1.0 - x0 * x0) / (1.0 + x0 * x0);
                let q = 2.0 * x0 / (1.0 + x0 * x0);
                (
                    1.0 + alpha * (p * (1.0 - x * x) + 2.0 * q * x) / r,
                    alpha * (-4.0 * p * x + 2.0 * q * (1.0 - x * x)) / (r * r),
                )
            }
            LineProfile::EqualityB { alpha, .. } => (1.0 + alpha * x / r.sqrt(), alpha / (r * r.sqrt())),
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            LineProfile::Constant { k } => 1.0 / k,
            LineProfile::EqualityA { k, alpha, .. } | LineProfile::EqualityB { k, alpha } => {
                1.0 / (k * (1.0 - alpha * alpha).sqrt())
            }
        }
    }

    /// `(v, v_x)` at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (d, dd) = self.denominator(x);
        let s = self.scale();
        let v = (d * s).sqrt();
        (v, 0.5 * dd * s / v)
    }

    /// Limits of `v` at `-inf` and `+inf`.
    pub fn limits(&self) -> (f64, f64) {
        let s = self.scale();
        let (lo, hi) = match *self {
            LineProfile::Constant { .. } => (1.0, 1.0),
            LineProfile::EqualityA { alpha, x0, .. } => {
                let p = (1.0 - x0 * x0) / (1.0 + x0 * x0);
                (1.0 - alpha * p, 1.0 - alpha * p)
            }
            LineProfile::EqualityB { alpha, .. } => (1.0 - alpha, 1.0 + alpha),
        };
        ((lo * s).sqrt(), (hi * s).sqrt())
    }

    /// `v` as a function of the circle angle, `x = cot(theta / 2)`, for
    /// `theta` in `[0, 2 pi]`.
    fn at_angle(&self, theta: f64) -> f64 {
        let (lo, hi) = self.limits();
        if theta <= 0.0 {
            hi
        } else if theta >= TWO_PI {
            lo
        } else {
            let x = (0.5 * theta).cos() / (0.5 * theta).sin();
            if x.is_finite() {
                self.eval(x).0
            } else {
                hi
            }
        }
    }
}

pub enum StereoInput<'a> {
    Grid(&'a CircleFunction),
    Analytic(LineProfile),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UFormReport {
    pub lhs: f64,
    pub constraint: f64,
    pub bound: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StereoReport {
    pub variant: StereoVariant,
    /// Energy of the circle (or interval) side, halved to match the line.
    pub circle_side: f64,
    pub line_side: f64,
    pub line_constraint: f64,
    pub bound_side: f64,
    pub slack: f64,
    /// Largest disagreement among the equivalent evaluations.
    pub residual: f64,
    pub u_form: Option<UFormReport>,
}

/// Integral over the real line through `x = tan s`.
fn line_integral(gl: &GaussLegendre, g: impl Fn(f64) -> f64) -> f64 {
    gl.composite(-FRAC_PI_2, FRAC_PI_2, 128, |s| {
        let x = s.tan();
        g(x) * (1.0 + x * x)
    })
}

const CIRCLE_NODES: usize = 2048;

pub fn stereographic_check(input: StereoInput<'_>, variant: StereoVariant) -> Result<StereoReport> {
    match input {
        StereoInput::Grid(v) => match variant {
            StereoVariant::A => grid_variant_a(v),
            StereoVariant::B => Err(Error::Rejected(
                "the interval variant needs an analytic line profile".into(),
            )),
        },
        StereoInput::Analytic(p) => {
            p.validate()?;
            analytic_check(&p, variant)
        }
    }
}

/// Evaluates the line side on the circle nodes through the change of
/// variables, with the finite limits at `theta = 0` where `x` is infinite.
fn grid_variant_a(v: &CircleFunction) -> Result<StereoReport> {
    v.expect_role(Role::VForm)?;
    let scheme = DiffScheme::Spectral;
    let circle_f = functional_v(v, scheme)?;
    let circle_c = constraint_integral(v)?;
    let dv = v.differentiate(scheme);
    let n = v.n();
    let h = v.step();
    let (mut line_f, mut line_c) = (0.0, 0.0);
    for j in 0..n {
        let theta = grid::node(n, j);
        let (val, d) = (v.values()[j], dv.values()[j]);
        if j == n / 2 {
            line_f += h * (2.0 * d * d - 0.5 * val * val);
            line_c += h * 0.5 / (val * val);
            continue;
        }
        let x = (0.5 * theta).cos() / (0.5 * theta).sin();
        let r = 1.0 + x * x;
        let vx = -2.0 * d / r;
        let jac = 0.5 * r;
        line_f += h * jac * (r * vx * vx - val * val / r);
        line_c += h * jac / (val * val * r);
    }
    let bound = -PI * PI / line_c;
    let residual = (line_f - 0.5 * circle_f).abs().max((line_c - 0.5 * circle_c).abs());
    Ok(StereoReport {
        variant: StereoVariant::A,
        circle_side: 0.5 * circle_f,
        line_side: line_f,
        line_constraint: line_c,
        bound_side: bound,
        slack: line_f - bound,
        residual,
        u_form: None,
    })
}

fn analytic_check(p: &LineProfile, variant: StereoVariant) -> Result<StereoReport> {
    let (lo, hi) = p.limits();
    if variant == StereoVariant::A && (lo - hi).abs() > 1e-14 * lo.max(hi) {
        return Err(Error::Rejected(
            "profile has different limits at -inf and +inf; use the interval variant".into(),
        ));
    }
    let gl = GaussLegendre::new(16);
    let grad = if variant == StereoVariant::A { 1.0 } else { 4.0 };
    let line_f = line_integral(&gl, |x| {
        let (v, vx) = p.eval(x);
        let r = 1.0 + x * x;
        grad * r * vx * vx - v * v / r
    });
    let line_c = line_integral(&gl, |x| {
        let (v, _) = p.eval(x);
        1.0 / (v * v * (1.0 + x * x))
    });
    let bound = -PI * PI / line_c;

    // u = sqrt((1 + x^2) / 2) v, with the boundary term kept inside the integrand.
    let u_of = |x: f64| {
        let (v, vx) = p.eval(x);
        let r = 1.0 + x * x;
        let w = (0.5 * r).sqrt();
        (w * v, w * vx + x * v / (2.0 * w))
    };
    let u_a = line_integral(&gl, |x| {
        let (u, ux) = u_of(x);
        let r = 1.0 + x * x;
        ux * ux - (u * u * (1.0 - x * x) / (r * r) + 2.0 * x * u * ux / r)
    });
    let u_c = line_integral(&gl, |x| u_of(x).0.powi(-2));
    let u_lhs = match variant {
        StereoVariant::A => u_a,
        StereoVariant::B => {
            4.0 * u_a
                + line_integral(&gl, |x| {
                    let u = u_of(x).0;
                    3.0 * u * u / (1.0 + x * x).powi(2)
                })
        }
    };
    let u_bound = -PI * PI / u_c;

    let (circle_f, circle_c) = match variant {
        StereoVariant::A => {
            let v = CircleFunction::from_fn(CIRCLE_NODES, Role::VForm, |t| p.at_angle(grid::wrap_angle(t).rem_euclid(TWO_PI)))?;
            let r = crate::functionals::inequality_report(&v, DiffScheme::Spectral)?;
            (r.f, r.constraint)
        }
        StereoVariant::B => {
            let half = CIRCLE_NODES / 2;
            let samples: Vec<f64> = (0..=half)
                .map(|k| p.at_angle(TWO_PI * k as f64 / half as f64))
                .collect();
            let r = interval_check(&samples, TWO_PI, DiffScheme::Spectral)?;
            (r.f, r.constraint)
        }
    };
    let residual = [
        (line_f - 0.5 * circle_f).abs(),
        (line_c - 0.5 * circle_c).abs(),
        (u_lhs - 0.5 * line_f).abs(),
        (u_c - 2.0 * line_c).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(StereoReport {
        variant,
        circle_side: 0.5 * circle_f,
        line_side: line_f,
        line_constraint: line_c,
        bound_side: bound,
        slack: line_f - bound,
        residual,
        u_form: Some(UFormReport {
            lhs: u_lhs,
            constraint: u_c,
            bound: u_bound,
            slack: u_lhs - u_bound,
        }),
    })
}

/// Checks `integral_0^l ((2l/pi)^2 v'^2 - v^2) >= -l^2 / integral_0^l v^-2` for
/// samples `v(k l / N)`, `k = 0..=N`. The samples are even-extended to a
/// circle of `2N` nodes and the circle functionals rescaled.
pub fn interval_check(samples: &[f64], l: f64, scheme: DiffScheme) -> Result<FunctionalReport> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidParameter("interval length must be positive".into()));
    }
    let big_n = samples.len().saturating_sub(1);
    if big_n < 4 {
        return Err(Error::InvalidParameter("need at least 5 interval samples".into()));
    }
    let n = 2 * big_n;
    let values = (0..n).map(|j| samples[j.abs_diff(big_n)]).collect();
    let u = CircleFunction::new(values, Role::VForm)?;
    let scale = l / TWO_PI;
    let f = scale * functional_v(&u, scheme)?;
    let c = scale * constraint_integral(&u)?;
    Ok(FunctionalReport::from_parts(f, c, l * l))
}

/// Samples of `v^-2 = k sqrt(1 - a^2) / (1 + a cos(pi theta / l))` on `[0, l]`.
pub fn interval_equality_samples(l: f64, alpha: f64, k: f64, big_n: usize) -> Vec<f64> {
    let s = (1.0 - alpha * alpha).sqrt();
    (0..=big_n)
        .map(|i| {
            let t = l * i as f64 / big_n as f64;
            ((1.0 + alpha * (PI * t / l).cos()) / (k * s)).sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VanishingReport {
    /// `4 integral w'^2`, from the edge differences.
    pub lhs: f64,
    /// `integral w^2`.
    pub rhs: f64,
}

/// Sample threshold below which a function counts as vanishing somewhere.
pub const VANISHING_TOL: f64 = 1e-9;

/// `4 integral w'^2 >= integral w^2` for `w` vanishing somewhere. Uses the
/// edge-difference energy, which is second-order accurate for the kinked
/// profiles this is meant for.
pub fn vanishing_check(w: &CircleFunction) -> Result<VanishingReport> {
    if !w.values().iter().any(|x| x.abs() <= VANISHING_TOL) {
        return Err(Error::Rejected("function does not vanish on the grid".into()));
    }
    let rhs = w.step() * w.values().iter().map(|x| x * x).sum::<f64>();
    Ok(VanishingReport {
        lhs: 4.0 * forward_energy(w.values()),
        rhs,
    })
}
