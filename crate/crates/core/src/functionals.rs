//! Energy functionals of the circle inequality in its three equivalent forms,
//! the constraint, the Euler-Lagrange residual and the second variation at the
//! constant profile.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CircleFunction, DiffScheme, Role, TWO_PI};

/// The sharp constant: `F[v] >= -4 pi^2 / C[v]`.
pub const SHARP_BOUND_NUMERATOR: f64 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;

/// Tolerance on `integral f = 2 pi` required by [`el_residual`].
pub const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub f: f64,
    pub constraint: f64,
    pub q: f64,
    pub bound: f64,
    pub slack: f64,
}

impl FunctionalReport {
    /// Assembles the report for an energy `f` against `-numerator / constraint`.
    pub fn from_parts(f: f64, constraint: f64, numerator: f64) -> Self {
        let bound = -numerator / constraint;
        FunctionalReport {
            f,
            constraint,
            q: f * constraint,
            bound,
            slack: f - bound,
        }
    }
}

/// `integral (4 v'^2 - v^2)`.
pub fn functional_v(v: &CircleFunction, scheme: DiffScheme) -> Result<f64> {
    v.expect_role(Role::VForm)?;
    let d = v.differentiate(scheme);
    let h = v.step();
    Ok(h * v
        .values()
        .iter()
        .zip(d.values())
        .map(|(x, dx)| 4.0 * dx * dx - x * x)
        .sum::<f64>())
}

/// `integral e^{-h} (h'^2 - 1)`.
pub fn functional_h(hf: &CircleFunction, scheme: DiffScheme) -> Result<f64> {
    hf.expect_role(Role::HForm)?;
    let d = hf.differentiate(scheme);
    let step = hf.step();
    Ok(step
        * hf.values()
            .iter()
            .zip(d.values())
            .map(|(x, dx)| (-x).exp() * (dx * dx - 1.0))
            .sum::<f64>())
}

/// `integral (-1/f + f'^2 / f^3)`.
pub fn functional_f(f: &CircleFunction, scheme: DiffScheme) -> Result<f64> {
    f.expect_role(Role::FForm)?;
    let d = f.differentiate(scheme);
    let h = f.step();
    Ok(h * f
        .values()
        .iter()
        .zip(d.values())
        .map(|(x, dx)| -1.0 / x + dx * dx / (x * x * x))
        .sum::<f64>())
}

/// The constraint in whichever form the function carries: `integral v^-2`,
/// `integral f` or `integral e^h`.
pub fn constraint_integral(u: &CircleFunction) -> Result<f64> {
    let h = u.step();
    let vals = u.values();
    match u.role() {
        Role::VForm => Ok(h * vals.iter().map(|x| x.powi(-2)).sum::<f64>()),
        Role::FForm => Ok(u.integrate()),
        Role::HForm => Ok(h * vals.iter().map(|x| x.exp()).sum::<f64>()),
        found => Err(Error::RoleMismatch {
            expected: Role::VForm,
            found,
        }),
    }
}

pub fn inequality_report(v: &CircleFunction, scheme: DiffScheme) -> Result<FunctionalReport> {
    let f = functional_v(v, scheme)?;
    let c = constraint_integral(v)?;
    Ok(FunctionalReport::from_parts(f, c, SHARP_BOUND_NUMERATOR))
}

pub fn v_to_f(v: &CircleFunction) -> Result<CircleFunction> {
    v.expect_role(Role::VForm)?;
    Ok(CircleFunction::from_parts(
        v.values().iter().map(|x| x.powi(-2)).collect(),
        Role::FForm,
        v.smoothness(),
    ))
}

pub fn f_to_v(f: &CircleFunction) -> Result<CircleFunction> {
    f.expect_role(Role::FForm)?;
    Ok(CircleFunction::from_parts(
        f.values().iter().map(|x| x.powf(-0.5)).collect(),
        Role::VForm,
        f.smoothness(),
    ))
}

pub fn f_to_h(f: &CircleFunction) -> Result<CircleFunction> {
    f.expect_role(Role::FForm)?;
    Ok(CircleFunction::from_parts(
        f.values().iter().map(|x| x.ln()).collect(),
        Role::HForm,
        f.smoothness(),
    ))
}

/// Pointwise Euler-Lagrange residual `f^-2 + 3 f^-4 f'^2 - 2 f^-3 f'' - 1` of
/// the f-form functional. The multiplier is fixed to 1 by requiring
/// `integral f = 2 pi`; unnormalized input is rejected.
pub fn el_residual(f: &CircleFunction, scheme: DiffScheme) -> Result<CircleFunction> {
    f.expect_role(Role::FForm)?;
    let integral = f.integrate();
    if (integral - TWO_PI).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized {
            integral,
            tolerance: NORMALIZATION_TOL,
        });
    }
    let d1 = f.differentiate(scheme);
    let d2 = f.second_derivative(scheme);
    let r = f
        .values()
        .iter()
        .zip(d1.values().iter().zip(d2.values()))
        .map(|(&x, (&dx, &ddx))| {
            let inv = 1.0 / x;
            let inv2 = inv * inv;
            inv2 + 3.0 * inv2 * inv2 * dx * dx - 2.0 * inv2 * inv * ddx - 1.0
        })
        .collect();
    Ok(CircleFunction::from_parts(r, Role::Generic, f.smoothness()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub m: usize,
    pub kappa: f64,
    pub multiplicity: usize,
}

/// `-8 u'' - 8 u`, the Hessian of the v-form functional at `v = 1`.
pub fn second_variation_apply(u: &CircleFunction) -> CircleFunction {
    let d2 = u.second_derivative(DiffScheme::Spectral);
    let vals = u
        .values()
        .iter()
        .zip(d2.values())
        .map(|(x, ddx)| -8.0 * ddx - 8.0 * x)
        .collect();
    CircleFunction::from_parts(vals, Role::Generic, u.smoothness())
}

fn spectrum_grid(max_m: usize) -> usize {
    let need = 4 * (max_m + 2);
    need.max(32).next_power_of_two()
}

/// Eigenvalues of the second variation at `v = 1` on the tangent space of the
/// constraint, indexed by `m` with eigenfunctions `cos((m+1) theta)` and
/// `sin((m+1) theta)`. Each value is a Rayleigh quotient on the grid; the
/// multiplicity counts basis functions that are eigenvectors for it.
pub fn second_variation_spectrum(max_m: usize) -> Vec<SpectrumRow> {
    let n = spectrum_grid(max_m);
    (0..=max_m)
        .map(|m| {
            let k = (m + 1) as f64;
            let mut quotients = Vec::with_capacity(2);
            for phase in [0.0, std::f64::consts::FRAC_PI_2] {
                let u = CircleFunction::from_fn(n, Role::Generic, |t| (k * t + phase).cos())
                    .expect("spectrum grid is valid");
                let lu = second_variation_apply(&u);
                let num: f64 = u.values().iter().zip(lu.values()).map(|(a, b)| a * b).sum();
                let den: f64 = u.values().iter().map(|a| a * a).sum();
                let q = num / den;
                let resid = u
                    .values()
                    .iter()
                    .zip(lu.values())
                    .map(|(a, b)| (b - q * a).abs())
                    .fold(0.0, f64::max);
                quotients.push((q, resid));
            }
            let kappa = quotients[0].0;
            let scale = 1.0 + kappa.abs();
            let multiplicity = quotients
                .iter()
                .filter(|(q, r)| (q - kappa).abs() <= 1e-9 * scale && *r <= 1e-8 * scale)
                .count();
            SpectrumRow {
                m,
                kappa,
                multiplicity,
            }
        })
        .collect()
}

/// All eigenvalues, ascending, of the dense grid matrix of the second
/// variation at `v = 1`. Used to validate the basis computation.
pub fn second_variation_dense(n: usize) -> Result<Vec<f64>> {
    crate::grid::validate_n(n)?;
    let mut mat = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = second_variation_apply(&CircleFunction::from_parts(
            e,
            Role::Generic,
            crate::grid::Smoothness::Smooth,
        ));
        for i in 0..n {
            mat[(i, j)] = col.values()[i];
        }
    }
    let sym = (&mat + mat.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{normalize_constraint, Smoothness};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn vform(n: usize, f: impl Fn(f64) -> f64) -> CircleFunction {
        CircleFunction::from_fn(n, Role::VForm, f).unwrap()
    }

    #[test]
    fn constant_profile_values() {
        let one = vform(64, |_| 1.0);
        for scheme in [DiffScheme::Spectral, DiffScheme::Central] {
            let r = inequality_report(&one, scheme).unwrap();
            assert_abs_diff_eq!(r.f, -TWO_PI, epsilon = 1e-12);
            assert_abs_diff_eq!(r.constraint, TWO_PI, epsilon = 1e-12);
            assert_abs_diff_eq!(r.q, -4.0 * PI * PI, epsilon = 1e-11);
            assert_abs_diff_eq!(r.slack, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cosine_perturbation_anchor() {
        // F = -1.97 pi exactly; the constraint is 2 pi (1 - 0.01)^{-3/2}.
        let v = vform(512, |t| 1.0 + 0.1 * t.cos());
        let r = inequality_report(&v, DiffScheme::Spectral).unwrap();
        assert_abs_diff_eq!(r.f, -1.97 * PI, epsilon = 1e-10);
        assert_abs_diff_eq!(r.constraint, TWO_PI * 0.99f64.powf(-1.5), epsilon = 1e-10);
        assert!(r.slack > 0.0);
        assert_abs_diff_eq!(r.slack, 2.43e-4, epsilon = 1e-5);
    }

    #[test]
    fn three_forms_agree() {
        let v = vform(256, |t| 1.0 + 0.2 * t.cos() + 0.05 * (2.0 * t).sin());
        let f = v_to_f(&v).unwrap();
        let h = f_to_h(&f).unwrap();
        let fv = functional_v(&v, DiffScheme::Spectral).unwrap();
        assert_abs_diff_eq!(fv, functional_f(&f, DiffScheme::Spectral).unwrap(), epsilon = 1e-10);
        assert_abs_diff_eq!(fv, functional_h(&h, DiffScheme::Spectral).unwrap(), epsilon = 1e-10);
        let c = constraint_integral(&v).unwrap();
        assert_abs_diff_eq!(c, constraint_integral(&f).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(c, constraint_integral(&h).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn wrong_role_is_rejected() {
        let v = vform(16, |_| 1.0);
        assert!(matches!(
            functional_f(&v, DiffScheme::Central),
            Err(Error::RoleMismatch { .. })
        ));
    }

    fn critical_f(n: usize, alpha: f64, theta0: f64) -> CircleFunction {
        let s = (1.0 - alpha * alpha).sqrt();
        CircleFunction::from_fn(n, Role::FForm, |t| s / (1.0 + alpha * (t - theta0).cos())).unwrap()
    }

    #[test]
    fn residual_vanishes_on_constant_and_critical_profiles() {
        let one = CircleFunction::from_fn(64, Role::FForm, |_| 1.0).unwrap();
        let r = el_residual(&one, DiffScheme::Spectral).unwrap();
        assert!(r.values().iter().all(|x| x.abs() < 1e-14));
        let f = critical_f(512, 0.5, 0.0);
        let r = el_residual(&f, DiffScheme::Spectral).unwrap();
        assert!(r.values().iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn residual_requires_normalization() {
        // 1 + 0.1 cos has integral exactly 2 pi, so it passes the check and is
        // simply not critical.
        let f = CircleFunction::from_fn(128, Role::FForm, |t| 1.0 + 0.1 * t.cos()).unwrap();
        let r = el_residual(&f, DiffScheme::Spectral).unwrap();
        assert!(r.values().iter().map(|x| x.abs()).fold(0.0, f64::max) > 1e-2);
        let g = CircleFunction::from_fn(128, Role::FForm, |t| 1.1 + 0.1 * t.cos()).unwrap();
        assert!(matches!(
            el_residual(&g, DiffScheme::Spectral),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn spectrum_examples() {
        let rows = second_variation_spectrum(3);
        let expected = [0.0, 24.0, 64.0, 120.0];
        for (row, want) in rows.iter().zip(expected) {
            assert_abs_diff_eq!(row.kappa, want, epsilon = 1e-9);
            assert_eq!(row.multiplicity, 2);
        }
        let rows = second_variation_spectrum(10);
        assert_abs_diff_eq!(rows[10].kappa, 960.0, epsilon = 1e-9);
    }

    #[test]
    fn dense_matrix_agrees_with_basis() {
        let n = 32;
        let eig = second_variation_dense(n).unwrap();
        // Constant mode first, then pairs 8 m (m + 2), then the single Nyquist mode.
        assert_abs_diff_eq!(eig[0], -8.0, epsilon = 1e-9);
        for m in 0..(n / 2 - 1) {
            let kappa = 8.0 * (m * (m + 2)) as f64;
            assert_abs_diff_eq!(eig[1 + 2 * m], kappa, epsilon = 1e-8 * (1.0 + kappa));
            assert_abs_diff_eq!(eig[2 + 2 * m], kappa, epsilon = 1e-8 * (1.0 + kappa));
        }
        let rows = second_variation_spectrum(6);
        for row in rows {
            assert_abs_diff_eq!(row.kappa, eig[1 + 2 * row.m], epsilon = 1e-8 * (1.0 + row.kappa));
        }
    }

    fn arb_profile() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-0.15f64..0.15, -0.15f64..0.15), 1..5)
    }

    proptest! {
        #[test]
        fn scale_invariance_of_q(coeffs in arb_profile(), s in 0.2f64..5.0) {
            let p = |t: f64| 1.0 + coeffs.iter().enumerate()
                .map(|(k, (a, b))| a * ((k + 1) as f64 * t).cos() + b * ((k + 1) as f64 * t).sin())
                .sum::<f64>();
            let v = vform(128, p);
            let w = vform(128, |t| s * p(t));
            let q1 = inequality_report(&v, DiffScheme::Spectral).unwrap().q;
            let q2 = inequality_report(&w, DiffScheme::Spectral).unwrap().q;
            prop_assert!((q1 - q2).abs() <= 1e-9 * q1.abs().max(1.0));
        }

        #[test]
        fn inequality_holds_on_smooth_profiles(coeffs in arb_profile()) {
            let v = vform(128, |t| 1.0 + coeffs.iter().enumerate()
                .map(|(k, (a, b))| a * ((k + 1) as f64 * t).cos() + b * ((k + 1) as f64 * t).sin())
                .sum::<f64>());
            let r = inequality_report(&normalize_constraint(&v).unwrap(), DiffScheme::Spectral).unwrap();
            prop_assert!(r.slack >= -1e-9);
        }

        #[test]
        fn smoothness_flag_does_not_change_functionals(coeffs in arb_profile()) {
            let v = vform(64, |t| 1.0 + coeffs.iter().enumerate()
                .map(|(k, (a, _))| a * ((k + 1) as f64 * t).cos())
                .sum::<f64>());
            let w = v.clone().with_smoothness(Smoothness::Continuous);
            prop_assert_eq!(
                functional_v(&v, DiffScheme::Central).unwrap(),
                functional_v(&w, DiffScheme::Central).unwrap()
            );
        }
    }
}
