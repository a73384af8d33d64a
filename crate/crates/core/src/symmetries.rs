//! Circle symmetries of the inequality: Mobius (Lorentz) boosts acting on the
//! three forms, the boost multiplier, and symmetric decreasing rearrangement.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, harmonic_slope, hermite, CircleFunction, Role, Smoothness, TWO_PI};

/// Numerical guard on the boost parameter.
pub const MAX_ALPHA: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorentzParams {
    pub alpha: f64,
    pub theta0: f64,
    pub thetabar0: f64,
}

impl LorentzParams {
    pub fn new(alpha: f64, theta0: f64, thetabar0: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha.abs() > MAX_ALPHA {
            return Err(Error::InvalidParameter(format!(
                "boost parameter {alpha} outside [-{MAX_ALPHA}, {MAX_ALPHA}]"
            )));
        }
        if !theta0.is_finite() || !thetabar0.is_finite() {
            return Err(Error::InvalidParameter("boost centers must be finite".into()));
        }
        Ok(LorentzParams {
            alpha,
            theta0,
            thetabar0,
        })
    }

    /// Boost with both centers at 0.
    pub fn centered(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.0, 0.0)
    }

    pub fn inverse(&self) -> Self {
        LorentzParams {
            alpha: -self.alpha,
            theta0: self.thetabar0,
            thetabar0: self.theta0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.alpha == 0.0 && self.theta0 == 0.0 && self.thetabar0 == 0.0
    }

    /// Boost multiplier at `thetabar`; equals the Jacobian of the pullback.
    pub fn multiplier(&self, thetabar: f64) -> f64 {
        (1.0 - self.alpha * self.alpha).sqrt() / (1.0 - self.alpha * (thetabar - self.thetabar0).cos())
    }

    /// The angle `theta` that `thetabar` is pulled back to, in `(-pi, pi]`.
    pub fn pullback(&self, thetabar: f64) -> f64 {
        let a = self.alpha;
        let (s, c) = (thetabar - self.thetabar0).sin_cos();
        let den = 1.0 - a * c;
        let cos_t = (c - a) / den;
        let sin_t = (1.0 - a * a).sqrt() * s / den;
        let t = grid::wrap_angle(self.theta0 + sin_t.atan2(cos_t));
        if t == -PI {
            PI
        } else {
            t
        }
    }
}

pub fn pullback_angle(thetabar: f64, params: &LorentzParams) -> f64 {
    params.pullback(thetabar)
}

/// `k sqrt(1 - alpha^2) / (1 - alpha cos(theta - center))`, which integrates to
/// `2 pi k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuProfile {
    pub alpha: f64,
    pub center: f64,
    pub k: f64,
}

impl NuProfile {
    pub fn new(alpha: f64, center: f64, k: f64) -> Result<Self> {
        if !(alpha.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha {alpha} outside (-1, 1)")));
        }
        if !(k > 0.0) || !k.is_finite() || !center.is_finite() {
            return Err(Error::InvalidParameter("scale must be positive".into()));
        }
        Ok(NuProfile { alpha, center, k })
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.k * (1.0 - self.alpha * self.alpha).sqrt() / (1.0 - self.alpha * (theta - self.center).cos())
    }

    pub fn max(&self) -> f64 {
        let a = self.alpha.abs();
        self.k * ((1.0 + a) / (1.0 - a)).sqrt()
    }

    pub fn min(&self) -> f64 {
        let a = self.alpha.abs();
        self.k * ((1.0 - a) / (1.0 + a)).sqrt()
    }

    pub fn f_form(&self, n: usize) -> Result<CircleFunction> {
        CircleFunction::from_fn(n, Role::FForm, |t| self.eval(t))
    }

    /// The v-form function with `v^-2` equal to this profile.
    pub fn v_form(&self, n: usize) -> Result<CircleFunction> {
        CircleFunction::from_fn(n, Role::VForm, |t| self.eval(t).powf(-0.5))
    }
}

fn pulled_back_samples(u: &CircleFunction, params: &LorentzParams) -> Vec<(f64, f64)> {
    let n = u.n();
    let ip = u.interpolant();
    (0..n)
        .map(|j| {
            let tb = grid::node(n, j);
            (params.multiplier(tb), ip.eval(params.pullback(tb)))
        })
        .collect()
}

/// `fbar = nu * (f o pullback)`, sampled at the nodes.
pub fn lorentz_f(f: &CircleFunction, params: &LorentzParams) -> Result<CircleFunction> {
    f.expect_role(Role::FForm)?;
    if params.is_identity() {
        return Ok(f.clone());
    }
    let vals = pulled_back_samples(f, params).into_iter().map(|(nu, x)| nu * x).collect();
    Ok(f.with_values(vals))
}

/// `vbar = nu^{-1/2} * (v o pullback)`, sampled at the nodes.
pub fn lorentz_v(v: &CircleFunction, params: &LorentzParams) -> Result<CircleFunction> {
    v.expect_role(Role::VForm)?;
    if params.is_identity() {
        return Ok(v.clone());
    }
    let vals = pulled_back_samples(v, params)
        .into_iter()
        .map(|(nu, x)| x / nu.sqrt())
        .collect();
    Ok(v.with_values(vals))
}

/// `hbar = (h o pullback) + log nu`, sampled at the nodes.
pub fn lorentz_h(h: &CircleFunction, params: &LorentzParams) -> Result<CircleFunction> {
    h.expect_role(Role::HForm)?;
    if params.is_identity() {
        return Ok(h.clone());
    }
    let vals = pulled_back_samples(h, params)
        .into_iter()
        .map(|(nu, x)| x + nu.ln())
        .collect();
    Ok(h.with_values(vals))
}

/// f-form boost as a conservative remap. Samples are read as cell averages,
/// the cumulative integral is reconstructed with a monotone cubic, and each
/// output cell receives the mass of its preimage. The total `integral f` is
/// preserved to rounding and positivity is kept.
pub fn lorentz_f_conservative(f: &CircleFunction, params: &LorentzParams) -> Result<CircleFunction> {
    f.expect_role(Role::FForm)?;
    if params.is_identity() {
        return Ok(f.clone());
    }
    let n = f.n();
    let h = f.step();
    let vals = f.values();
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for &x in vals {
        cum.push(cum.last().unwrap() + h * x);
    }
    let total = cum[n];
    let slopes: Vec<f64> = (0..=n)
        .map(|e| harmonic_slope(vals[(e + n - 1) % n], vals[e % n]))
        .collect();
    let edge0 = -PI - 0.5 * h;
    let cumulative = |x: f64| -> f64 {
        let t = (x - edge0) / h;
        let periods = (t / n as f64).floor();
        let local = t - periods * n as f64;
        let e = (local.floor() as usize).min(n - 1);
        let s = local - e as f64;
        periods * total + hermite(cum[e], cum[e + 1], slopes[e] * h, slopes[e + 1] * h, s)
    };
    let mut edges = Vec::with_capacity(n + 1);
    let first = params.pullback(edge0);
    edges.push(first);
    for e in 1..n {
        let mut x = params.pullback(edge0 + h * e as f64);
        while x < edges[e - 1] {
            x += TWO_PI;
        }
        edges.push(x);
    }
    edges.push(first + TWO_PI);
    let g: Vec<f64> = edges.iter().map(|&x| cumulative(x)).collect();
    let out = (0..n).map(|j| ((g[j + 1] - g[j]) / h).max(f64::MIN_POSITIVE)).collect();
    Ok(f.with_values(out))
}

/// Symmetric decreasing rearrangement on the grid. The largest value goes to
/// `theta = 0` (node `n/2`), then values alternate right and left of it, ties
/// broken by original index, so the smallest ends at node 0 (`theta = pi`).
/// The result is flagged continuous unless the input was already arranged.
pub fn rearrange(v: &CircleFunction) -> CircleFunction {
    let n = v.n();
    let vals = v.values();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    let mid = n / 2;
    for (rank, &src) in order.iter().enumerate() {
        let d = rank.div_ceil(2);
        let pos = if rank % 2 == 1 { mid + d } else { mid - d };
        out[pos % n] = vals[src];
    }
    let scale = v.max().abs().max(v.min().abs()).max(f64::MIN_POSITIVE);
    let unchanged = out
        .iter()
        .zip(vals)
        .all(|(a, b)| (a - b).abs() <= 1e-12 * scale);
    let smoothness = if unchanged {
        v.smoothness()
    } else {
        Smoothness::Continuous
    };
    CircleFunction::from_parts(out, v.role(), smoothness)
}

/// First node at which the samples stop being nonincreasing away from
/// `theta = 0`, scanning right then left; `None` if the function is
/// symmetric decreasing in that sense.
pub fn arrangement_violation(v: &CircleFunction) -> Option<usize> {
    let n = v.n();
    let vals = v.values();
    let mid = n / 2;
    for j in mid + 1..n {
        if vals[j] > vals[j - 1] {
            return Some(j);
        }
    }
    (0..mid).rev().find(|&j| vals[j] > vals[j + 1])
}

/// `sum (u_{j+1} - u_j)^2 / h`, the edge-based Dirichlet energy. Exact for the
/// piecewise-linear interpolant and the natural form for kinked data.
pub fn forward_energy(u: &[f64]) -> f64 {
    let n = u.len();
    let h = TWO_PI / n as f64;
    (0..n).map(|j| (u[(j + 1) % n] - u[j]).powi(2)).sum::<f64>() / h
}

/// `sum ((u_{j+1} - u_{j-1}) / 2h)^2 h`, the Dirichlet energy of the central scheme.
pub fn central_energy(u: &[f64]) -> f64 {
    let n = u.len();
    let h = TWO_PI / n as f64;
    (0..n)
        .map(|j| ((u[(j + 1) % n] - u[(j + n - 1) % n]) / (2.0 * h)).powi(2))
        .sum::<f64>()
        * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{constraint_integral, functional_f, functional_h, inequality_report, f_to_h};
    use crate::grid::DiffScheme;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn multiplier_is_the_jacobian() {
        let p = LorentzParams::new(0.7, 0.4, -1.1).unwrap();
        let eps = 1e-6;
        for i in 0..50 {
            let tb = -3.0 + 0.12 * i as f64;
            let mut d = p.pullback(tb + eps) - p.pullback(tb - eps);
            if d < 0.0 {
                d += TWO_PI;
            }
            assert_abs_diff_eq!(d / (2.0 * eps), p.multiplier(tb), epsilon = 1e-6);
        }
    }

    #[test]
    fn pullback_examples() {
        let p = LorentzParams::centered(0.5).unwrap();
        assert_eq!(p.pullback(0.0), 0.0);
        assert_abs_diff_eq!(p.pullback(PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(p.multiplier(0.0), 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.multiplier(PI), 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert!(LorentzParams::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn boosting_the_constant_gives_the_multiplier() {
        let one = CircleFunction::from_fn(128, Role::FForm, |_| 1.0).unwrap();
        let p = LorentzParams::centered(0.5).unwrap();
        let out = lorentz_f(&one, &p).unwrap();
        for (j, &x) in out.values().iter().enumerate() {
            assert_abs_diff_eq!(x, p.multiplier(grid::node(128, j)), epsilon = 1e-14);
        }
    }

    #[test]
    fn boosts_move_along_the_critical_family() {
        // nu_{-a} boosted by a is the constant 1.
        let n = 256;
        let f = NuProfile::new(-0.5, 0.0, 1.0).unwrap().f_form(n).unwrap();
        let out = lorentz_f(&f, &LorentzParams::centered(0.5).unwrap()).unwrap();
        assert!(out.values().iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn inverse_undoes_the_boost() {
        let n = 512;
        let v = CircleFunction::from_fn(n, Role::VForm, |t| 1.0 + 0.2 * t.cos() - 0.1 * (2.0 * t).sin())
            .unwrap();
        let p = LorentzParams::new(0.6, 0.3, -0.8).unwrap();
        let back = lorentz_v(&lorentz_v(&v, &p).unwrap(), &p.inverse()).unwrap();
        for (a, b) in back.values().iter().zip(v.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn all_three_forms_are_invariant() {
        let n = 1024;
        let v = CircleFunction::from_fn(n, Role::VForm, |t| 1.0 + 0.25 * (t - 0.4).cos() + 0.05 * (3.0 * t).cos())
            .unwrap();
        let f = crate::functionals::v_to_f(&v).unwrap();
        let h = f_to_h(&f).unwrap();
        let p = LorentzParams::new(0.8, -0.5, 2.0).unwrap();
        let r0 = inequality_report(&v, DiffScheme::Spectral).unwrap();
        let r1 = inequality_report(&lorentz_v(&v, &p).unwrap(), DiffScheme::Spectral).unwrap();
        assert_abs_diff_eq!(r0.f, r1.f, epsilon = 1e-8);
        assert_abs_diff_eq!(r0.constraint, r1.constraint, epsilon = 1e-8);
        let fb = lorentz_f(&f, &p).unwrap();
        assert_abs_diff_eq!(functional_f(&fb, DiffScheme::Spectral).unwrap(), r0.f, epsilon = 1e-8);
        assert_abs_diff_eq!(constraint_integral(&fb).unwrap(), r0.constraint, epsilon = 1e-8);
        let hb = lorentz_h(&h, &p).unwrap();
        assert_abs_diff_eq!(functional_h(&hb, DiffScheme::Spectral).unwrap(), r0.f, epsilon = 1e-8);
    }

    #[test]
    fn conservative_boost_preserves_mass_and_identity() {
        let n = 256;
        let f = CircleFunction::from_fn(n, Role::FForm, |t| 1.0 + 0.4 * t.cos().abs())
            .unwrap()
            .with_smoothness(Smoothness::Continuous);
        let ident = lorentz_f_conservative(&f, &LorentzParams::centered(0.0).unwrap()).unwrap();
        assert_eq!(ident, f);
        for alpha in [0.1, 0.5, 0.9, 0.999] {
            let out = lorentz_f_conservative(&f, &LorentzParams::centered(alpha).unwrap()).unwrap();
            assert_abs_diff_eq!(out.integrate(), f.integrate(), epsilon = 1e-12);
            assert!(out.min() > 0.0);
        }
    }

    #[test]
    fn conservative_boost_tracks_the_pointwise_boost() {
        let n = 1024;
        let f = NuProfile::new(-0.3, 0.0, 1.0)
            .unwrap()
            .f_form(n)
            .unwrap();
        let p = LorentzParams::centered(0.4).unwrap();
        let a = lorentz_f(&f, &p).unwrap();
        let b = lorentz_f_conservative(&f, &p).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-4);
        }
    }

    #[test]
    fn rearrangement_example() {
        let v = CircleFunction::new(vec![2.0, 4.0, 1.0, 3.0, 0.5, 3.0, 2.0, 1.0], Role::VForm).unwrap();
        let r = rearrange(&v);
        assert_eq!(r.values(), &[0.5, 1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0]);
        assert_eq!(r.smoothness(), Smoothness::Continuous);
        assert_eq!(arrangement_violation(&r), None);
        assert_eq!(arrangement_violation(&v), Some(5));
    }

    #[test]
    fn rearranging_an_arranged_smooth_profile_keeps_it_smooth() {
        let v = NuProfile::new(-0.5, 0.0, 1.0).unwrap().v_form(64).unwrap();
        let r = rearrange(&v);
        assert_eq!(r.smoothness(), Smoothness::Smooth);
    }

    fn arb_values() -> impl Strategy<Value = Vec<f64>> {
        (4usize..64).prop_flat_map(|half| prop::collection::vec(0.1f64..10.0, 2 * half))
    }

    proptest! {
        #[test]
        fn rearrangement_invariants(vals in arb_values()) {
            let v = CircleFunction::new(vals.clone(), Role::VForm).unwrap();
            let r = rearrange(&v);
            let mut a = vals.clone();
            let mut b = r.values().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
            let rr = rearrange(&r);
            prop_assert_eq!(rr.values(), r.values());
            prop_assert!(arrangement_violation(&r).is_none());
            prop_assert!(forward_energy(r.values()) <= forward_energy(&vals) * (1.0 + 1e-12));
        }

        #[test]
        fn pullback_round_trips(a in -0.95f64..0.95, t0 in -PI..PI, tb0 in -PI..PI, tb in -PI..PI) {
            let p = LorentzParams::new(a, t0, tb0).unwrap();
            let back = p.inverse().pullback(p.pullback(tb));
            let d = grid::wrap_angle(back - tb);
            prop_assert!(d.abs() < 1e-9);
        }

        #[test]
        fn nu_integrates_to_scale(a in -0.95f64..0.95, c in -PI..PI, k in 0.1f64..10.0) {
            let p = NuProfile::new(a, c, k).unwrap();
            let f = p.f_form(1024).unwrap();
            prop_assert!((f.integrate() - TWO_PI * k).abs() < 1e-9 * k);
        }

        #[test]
        fn conservative_boost_conserves_mass(vals in arb_values(), a in -0.99f64..0.99) {
            let f = CircleFunction::new(vals, Role::FForm).unwrap().with_smoothness(Smoothness::Continuous);
            let g = lorentz_f_conservative(&f, &LorentzParams::centered(a).unwrap()).unwrap();
            prop_assert!((g.integrate() - f.integrate()).abs() <= 1e-12 * f.integrate());
            prop_assert!(g.min() > 0.0);
        }
    }
}
