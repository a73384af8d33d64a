//! Closed-form solutions: the critical family on the circle and the
//! constrained Dirichlet problem on `[0, pi]`,
//!
//! minimize `integral_0^pi v'^2` subject to `v(0) = M`, `v(pi) = m`,
//! `m <= v <= M` and `integral_0^pi v^-2 = c`.
//!
//! Minimizers split into five cases by the value of `c`. On the part where
//! the obstacle is inactive `v^2` is a quadratic with `(v^2)'' = 2 mu`, and
//! `v'' = lambda v^-3` with `lambda = mu v^2 - (v^2)'^2 / 4`, constant there.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CircleFunction, Role, Smoothness};
use crate::quadrature::GaussLegendre;

/// `f = sqrt(1 - alpha^2) / (1 + alpha cos(theta - theta0))`, the f-form
/// critical point with `integral f = 2 pi`.
pub fn critical_profile(alpha: f64, theta0: f64, n: usize) -> Result<CircleFunction> {
    if !(alpha.abs() < 1.0) || !theta0.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (-1, 1)")));
    }
    let s = (1.0 - alpha * alpha).sqrt();
    CircleFunction::from_fn(n, Role::FForm, |t| s / (1.0 + alpha * (t - theta0).cos()))
}

/// `max(|sin(theta / 2)|, eps)`, a positive family degenerating to a profile
/// that vanishes at `theta = 0`.
pub fn vanishing_profile(eps: f64, n: usize) -> Result<CircleFunction> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    Ok(CircleFunction::from_fn(n, Role::VForm, |t| (0.5 * t).sin().abs().max(eps))?
        .with_smoothness(Smoothness::Continuous))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirichletThresholds {
    /// `pi / M^2`, the infimum of admissible constraints.
    pub c_min: f64,
    pub c_ab: f64,
    pub c_bc: f64,
    /// Constraint at which the multiplier vanishes, `pi / (m M)`.
    pub c_lambda0: f64,
    pub c_de: f64,
    /// `pi / m^2`, the supremum of admissible constraints.
    pub c_max: f64,
}

fn validate_bounds(m: f64, big_m: f64) -> Result<()> {
    if !(m > 0.0) || !(big_m > m) || !big_m.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need 0 < m < M, got m = {m}, M = {big_m}"
        )));
    }
    Ok(())
}

pub fn dirichlet_thresholds(m: f64, big_m: f64) -> Result<DirichletThresholds> {
    validate_bounds(m, big_m)?;
    let d = (big_m * big_m - m * m).sqrt();
    Ok(DirichletThresholds {
        c_min: PI / (big_m * big_m),
        c_ab: PI / (2.0 * big_m * d) * ((big_m + d) / (big_m - d)).ln(),
        c_bc: PI / (d * d) * (big_m * big_m / (m * m)).ln(),
        c_lambda0: PI / (m * big_m),
        c_de: PI / (m * d) * (d / m).atan(),
        c_max: PI / (m * m),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DirichletCase {
    A,
    B,
    C,
    D,
    E,
}

impl std::fmt::Display for DirichletCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DirichletCase::A => "a",
            DirichletCase::B => "b",
            DirichletCase::C => "c",
            DirichletCase::D => "d",
            DirichletCase::E => "e",
        };
        f.write_str(s)
    }
}

/// Relative width of the band around `c_bc` classified as case c.
pub const CASE_C_BAND: f64 = 1e-12;

pub fn classify(c: f64, th: &DirichletThresholds) -> Result<DirichletCase> {
    if !(c > th.c_min && c < th.c_max) {
        return Err(Error::InvalidParameter(format!(
            "constraint {c} outside ({}, {})",
            th.c_min, th.c_max
        )));
    }
    Ok(if c < th.c_ab {
        DirichletCase::A
    } else if (c - th.c_bc).abs() <= CASE_C_BAND * th.c_bc {
        DirichletCase::C
    } else if c < th.c_bc {
        DirichletCase::B
    } else if c <= th.c_de {
        DirichletCase::D
    } else {
        DirichletCase::E
    })
}

/// The minimizer, described through `v^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum DirichletProfile {
    /// `v = M` on `[0, alpha]`, then `v^2 = M^2 + mu (theta - alpha)^2`.
    PlateauThenArc { big_m: f64, alpha: f64, mu: f64 },
    /// `v^2 = M^2 + (m^2 - M^2) theta / pi + mu theta (theta - pi)` on all of `[0, pi]`.
    Arc { big_m: f64, m: f64, mu: f64 },
    /// `v^2 = m^2 + mu (theta - beta)^2` on `[0, beta)`, then `v = m`.
    ArcThenPlateau { m: f64, beta: f64, mu: f64 },
}

impl DirichletProfile {
    /// `(v^2, (v^2)', (v^2)'')` at `theta`.
    fn square(&self, theta: f64) -> (f64, f64, f64) {
        match *self {
            DirichletProfile::PlateauThenArc { big_m, alpha, mu } => {
                if theta <= alpha {
                    (big_m * big_m, 0.0, 0.0)
                } else {
                    let s = theta - alpha;
                    (big_m * big_m + mu * s * s, 2.0 * mu * s, 2.0 * mu)
                }
            }
            DirichletProfile::Arc { big_m, m, mu } => {
                let slope = (m * m - big_m * big_m) / PI;
                (
                    big_m * big_m + slope * theta + mu * theta * (theta - PI),
                    slope + mu * (2.0 * theta - PI),
                    2.0 * mu,
                )
            }
            DirichletProfile::ArcThenPlateau { m, beta, mu } => {
                if theta >= beta {
                    (m * m, 0.0, 0.0)
                } else {
                    let s = theta - beta;
                    (m * m + mu * s * s, 2.0 * mu * s, 2.0 * mu)
                }
            }
        }
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.square(theta).0.sqrt()
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        let (q, dq, _) = self.square(theta);
        dq / (2.0 * q.sqrt())
    }

    pub fn second_derivative(&self, theta: f64) -> f64 {
        let (q, dq, ddq) = self.square(theta);
        let v = q.sqrt();
        let dv = dq / (2.0 * v);
        (0.5 * ddq - dv * dv) / v
    }

    /// The interval on which the obstacle is inactive.
    pub fn free_interval(&self) -> (f64, f64) {
        match *self {
            DirichletProfile::PlateauThenArc { alpha, .. } => (alpha, PI),
            DirichletProfile::Arc { .. } => (0.0, PI),
            DirichletProfile::ArcThenPlateau { beta, .. } => (0.0, beta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirichletSolution {
    pub case: DirichletCase,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub c: f64,
    pub lambda: f64,
    pub energy: f64,
    pub profile: DirichletProfile,
}

fn rule() -> GaussLegendre {
    GaussLegendre::new(16)
}

const PANELS: usize = 32;

/// `integral_0^pi v^-2` for the case b/c/d arc with curvature `mu`.
fn arc_constraint(m: f64, big_m: f64, mu: f64, gl: &GaussLegendre) -> f64 {
    let p = DirichletProfile::Arc { big_m, m, mu };
    gl.composite(0.0, PI, PANELS, |t| 1.0 / p.square(t).0)
}

fn bisect(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut g_lo, g_hi) = (g(lo), g(hi));
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoBracket {
            lo,
            hi,
            f_lo: g_lo,
            f_hi: g_hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn dirichlet_solve(m: f64, big_m: f64, c: f64) -> Result<DirichletSolution> {
    let th = dirichlet_thresholds(m, big_m)?;
    let case = classify(c, &th)?;
    let d2 = big_m * big_m - m * m;
    let d = d2.sqrt();
    let (profile, lambda, energy) = match case {
        DirichletCase::A => {
            let la = ((big_m + d) / (big_m - d)).ln() / (2.0 * big_m * d);
            let alpha = bisect(0.0, PI, |a| a / (big_m * big_m) + (PI - a) * la - c)?;
            let mu = -d2 / ((PI - alpha) * (PI - alpha));
            let lambda = mu * big_m * big_m;
            let free = c - alpha / (big_m * big_m);
            (
                DirichletProfile::PlateauThenArc { big_m, alpha, mu },
                lambda,
                mu * (PI - alpha) - lambda * free,
            )
        }
        DirichletCase::C => {
            let lambda = -(d2 / (2.0 * PI)).powi(2);
            (
                DirichletProfile::Arc { big_m, m, mu: 0.0 },
                lambda,
                d2 / (4.0 * PI) * (big_m * big_m / (m * m)).ln(),
            )
        }
        DirichletCase::B | DirichletCase::D => {
            let gl = rule();
            let edge = d2 / (PI * PI);
            let (lo, hi) = if case == DirichletCase::B { (-edge, 0.0) } else { (0.0, edge) };
            let mu = bisect(lo, hi, |mu| arc_constraint(m, big_m, mu, &gl) - c)?;
            let b = -d2 / PI - mu * PI;
            let lambda = mu * big_m * big_m - 0.25 * b * b;
            (
                DirichletProfile::Arc { big_m, m, mu },
                lambda,
                mu * PI - lambda * c,
            )
        }
        DirichletCase::E => {
            let le = (d / m).atan() / (m * d);
            let beta = bisect(0.0, PI, |b| b * le + (PI - b) / (m * m) - c)?;
            let mu = d2 / (beta * beta);
            let lambda = mu * m * m;
            let free = c - (PI - beta) / (m * m);
            (
                DirichletProfile::ArcThenPlateau { m, beta, mu },
                lambda,
                mu * beta - lambda * free,
            )
        }
    };
    Ok(DirichletSolution {
        case,
        m,
        big_m,
        c,
        lambda,
        energy,
        profile,
    })
}

/// Constraint values `c_min + (c_max - c_min)(k + 1/2)/count`, strictly inside
/// the admissible range.
pub fn sweep_grid(m: f64, big_m: f64, count: usize) -> Result<Vec<f64>> {
    let th = dirichlet_thresholds(m, big_m)?;
    Ok((0..count)
        .map(|k| th.c_min + (th.c_max - th.c_min) * (k as f64 + 0.5) / count as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyPoint {
    pub c: f64,
    pub energy: f64,
    pub lambda: f64,
    pub case: DirichletCase,
}

pub fn dirichlet_energy_curve(m: f64, big_m: f64, c_grid: &[f64]) -> Result<Vec<EnergyPoint>> {
    c_grid
        .iter()
        .map(|&c| {
            dirichlet_solve(m, big_m, c).map(|s| EnergyPoint {
                c,
                energy: s.energy,
                lambda: s.lambda,
                case: s.case,
            })
        })
        .collect()
}

/// Central difference `(E(c + h) - E(c - h)) / 2h`, to be compared with the
/// multiplier at `c`.
pub fn energy_slope(m: f64, big_m: f64, c: f64, h: f64) -> Result<f64> {
    let up = dirichlet_solve(m, big_m, c + h)?.energy;
    let down = dirichlet_solve(m, big_m, c - h)?.energy;
    Ok((up - down) / (2.0 * h))
}
