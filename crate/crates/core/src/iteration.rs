//! Competing-symmetries iteration: alternate a boost chosen to push down the
//! maximum of `v^-2` with symmetric decreasing rearrangement.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{constraint_integral, f_to_v, functional_v, v_to_f};
use crate::grid::{self, CircleFunction, DiffScheme, Role, Smoothness};
use crate::symmetries::{arrangement_violation, lorentz_f, lorentz_f_conservative, rearrange, LorentzParams, MAX_ALPHA};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    pub coarse_step: f64,
    pub alpha_max: f64,
    /// Slack on the boosted maximum when picking the least minimizing boost.
    pub tol: f64,
    /// A gap wider than this between the least near-minimizer and the
    /// minimizer is reported as a plateau.
    pub plateau_width: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            coarse_step: 1.0 / 128.0,
            alpha_max: MAX_ALPHA,
            tol: 1e-6,
            plateau_width: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaSelection {
    pub alpha: f64,
    pub boosted_max: f64,
    pub minimum: f64,
    pub minimizer: f64,
    pub plateau: bool,
}

/// The f-form boost used by the iteration. Smooth data is boosted pointwise;
/// kinked data goes through the conservative remap so that `integral f` is
/// kept to rounding.
pub fn iteration_boost(f: &CircleFunction, alpha: f64) -> Result<CircleFunction> {
    let params = LorentzParams::centered(alpha)?;
    match f.smoothness() {
        Smoothness::Smooth => lorentz_f(f, &params),
        Smoothness::Continuous => lorentz_f_conservative(f, &params),
    }
}

fn arranged_f(v: &CircleFunction) -> Result<CircleFunction> {
    v.expect_role(Role::VForm)?;
    if let Some(index) = arrangement_violation(v) {
        return Err(Error::NotArranged { index });
    }
    v_to_f(v)
}

/// Largest node value of the boosted `v^-2`.
pub fn boosted_max(v: &CircleFunction, alpha: f64) -> Result<f64> {
    let f = arranged_f(v)?;
    Ok(iteration_boost(&f, alpha)?.max())
}

fn golden_minimize(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    while b - a > tol {
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    if gc <= gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// Least `alpha` in `[0, alpha_max]` whose boosted maximum is within `tol`
/// of the smallest boosted maximum.
pub fn select_alpha(v: &CircleFunction, cfg: &SearchConfig) -> Result<AlphaSelection> {
    if !(cfg.coarse_step > 0.0) || !(0.0..=MAX_ALPHA).contains(&cfg.alpha_max) {
        return Err(Error::InvalidParameter("bad boost search range".into()));
    }
    let f = arranged_f(v)?;
    let m = |a: f64| iteration_boost(&f, a).map(|g| g.max()).unwrap_or(f64::INFINITY);

    let mut coarse: Vec<f64> = Vec::new();
    let mut i = 0usize;
    loop {
        let a = i as f64 * cfg.coarse_step;
        if a >= cfg.alpha_max {
            break;
        }
        coarse.push(a);
        i += 1;
    }
    coarse.push(cfg.alpha_max);
    let values: Vec<f64> = coarse.iter().map(|&a| m(a)).collect();
    let best = (0..coarse.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    let lo = coarse[best.saturating_sub(1)];
    let hi = coarse[(best + 1).min(coarse.len() - 1)];
    let (mut minimizer, mut minimum) = (coarse[best], values[best]);
    if hi > lo {
        let (a, ga) = golden_minimize(&m, lo, hi, 1e-10);
        if ga < minimum {
            minimizer = a;
            minimum = ga;
        }
    }
    let threshold = minimum + cfg.tol;

    let alpha = if values[0] <= threshold {
        0.0
    } else {
        let first_ok = coarse
            .iter()
            .zip(&values)
            .position(|(&a, &g)| a < minimizer && g <= threshold);
        let (mut lo, mut hi) = match first_ok {
            Some(k) => (coarse[k - 1], coarse[k]),
            None => {
                let below = coarse.iter().rposition(|&a| a < minimizer).unwrap_or(0);
                (coarse[below], minimizer)
            }
        };
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if m(mid) <= threshold {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(AlphaSelection {
        alpha,
        boosted_max: m(alpha),
        minimum,
        minimizer,
        plateau: minimizer - alpha > cfg.plateau_width,
    })
}

/// Where the boosted `v^-2` attains its maximum over `[0, pi]`, up to `tol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxLocation {
    /// Attained at the quarter node `theta = pi / 2`.
    AtQuarter,
    /// Attained on both sides of `pi / 2`.
    Straddling,
    OneSided,
}

pub fn boosted_max_location(v: &CircleFunction, alpha: f64, tol: f64) -> Result<MaxLocation> {
    let f = arranged_f(v)?;
    let g = iteration_boost(&f, alpha)?;
    let n = g.n();
    let top = g.max();
    let quarter = 3 * n / 4;
    let hits: Vec<usize> = (n / 2..n)
        .chain(std::iter::once(0))
        .filter(|&j| g.values()[j] >= top - tol)
        .collect();
    if hits.contains(&quarter) {
        return Ok(MaxLocation::AtQuarter);
    }
    let side = |j: usize| j != 0 && j < quarter;
    let left = hits.iter().any(|&j| side(j));
    let right = hits.iter().any(|&j| !side(j));
    Ok(if left && right {
        MaxLocation::Straddling
    } else {
        MaxLocation::OneSided
    })
}

/// One boost-then-rearrange step.
pub fn iterate_step(v: &CircleFunction, cfg: &SearchConfig) -> Result<(CircleFunction, AlphaSelection)> {
    let sel = select_alpha(v, cfg)?;
    let f = v_to_f(v)?;
    let boosted = iteration_boost(&f, sel.alpha)?;
    Ok((rearrange(&f_to_v(&boosted)?), sel))
}

/// Spread of `v` over the nodes with `|theta| >= pi / 2`.
pub fn tail_flatness(v: &CircleFunction) -> f64 {
    let n = v.n();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..n {
        if grid::node(n, j).abs() >= FRAC_PI_2 - 1e-12 {
            lo = lo.min(v.values()[j]);
            hi = hi.max(v.values()[j]);
        }
    }
    hi - lo
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub alpha_n: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub min_v: f64,
    pub max_vinv2: f64,
    pub constraint: f64,
    pub tail_flatness: f64,
    pub plateau: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationConfig {
    pub max_steps: usize,
    pub flat_tol: f64,
    pub scheme: DiffScheme,
    pub search: SearchConfig,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            max_steps: 200,
            flat_tol: 1e-3,
            scheme: DiffScheme::Central,
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub steps: Vec<StepRecord>,
    pub converged: bool,
    pub tail_flatness: f64,
    /// The step chose no boost and left the profile unchanged.
    pub stalled: bool,
    #[serde(skip)]
    pub final_v: CircleFunction,
}

fn record(v: &CircleFunction, step: usize, alpha_n: f64, plateau: bool, scheme: DiffScheme) -> Result<StepRecord> {
    Ok(StepRecord {
        step,
        alpha_n,
        f: functional_v(v, scheme)?,
        min_v: v.min(),
        max_vinv2: v.values().iter().map(|x| x.powi(-2)).fold(f64::NEG_INFINITY, f64::max),
        constraint: constraint_integral(v)?,
        tail_flatness: tail_flatness(v),
        plateau,
    })
}

pub fn run_iteration(v0: &CircleFunction, max_steps: usize, flat_tol: f64) -> Result<IterationTrace> {
    run_iteration_with(
        v0,
        &IterationConfig {
            max_steps,
            flat_tol,
            ..IterationConfig::default()
        },
    )
}

/// Rearranges `v0`, then iterates until the tail is flat to `flat_tol`, the
/// step budget runs out, or a step leaves the profile unchanged.
pub fn run_iteration_with(v0: &CircleFunction, cfg: &IterationConfig) -> Result<IterationTrace> {
    v0.expect_role(Role::VForm)?;
    let mut v = rearrange(v0);
    let mut steps = vec![record(&v, 0, 0.0, false, cfg.scheme)?];
    let mut stalled = false;
    let mut flat = steps[0].tail_flatness;
    while flat >= cfg.flat_tol && steps.len() <= cfg.max_steps {
        let (next, sel) = iterate_step(&v, &cfg.search)?;
        if sel.alpha == 0.0 && next.values() == v.values() {
            stalled = true;
            break;
        }
        v = next;
        let rec = record(&v, steps.len(), sel.alpha, sel.plateau, cfg.scheme)?;
        flat = rec.tail_flatness;
        steps.push(rec);
    }
    Ok(IterationTrace {
        steps,
        converged: flat < cfg.flat_tol,
        tail_flatness: flat,
        stalled,
        final_v: v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticTolerances {
    pub per_step: f64,
    pub boost_budget: f64,
    pub constraint: f64,
    pub product: f64,
}

impl Default for DiagnosticTolerances {
    fn default() -> Self {
        DiagnosticTolerances {
            per_step: 1e-10,
            boost_budget: 1e-6,
            constraint: 1e-8,
            product: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    EnergyIncreased,
    MinDecreased,
    MaxIncreased,
    ConstraintDrift,
    /// The step shrank `max v^-2` by less than `sqrt(1 - alpha^2)`.
    BoostFactor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub step: usize,
    pub kind: ViolationKind,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceDiagnostics {
    pub violations: Vec<Violation>,
    /// `prod sqrt(1 - alpha_n^2)` over the trace.
    pub boost_product: f64,
    /// `max v^-2` at the end over `max v^-2` at the start.
    pub max_ratio: f64,
    pub product_bound_holds: bool,
}

impl TraceDiagnostics {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.product_bound_holds
    }
}

/// Checks the monotonicity of `F`, `min v` and `max v^-2`, conservation of
/// the constraint, the per-step boost factor and the cumulative product bound.
pub fn diagnose_trace(trace: &IterationTrace, tol: &DiagnosticTolerances) -> TraceDiagnostics {
    let mut violations = Vec::new();
    let slack = tol.per_step + tol.boost_budget;
    let steps = &trace.steps;
    let mut product = 1.0;
    if let Some(first) = steps.first() {
        for w in steps.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let mut flag = |kind, excess: f64, limit: f64| {
                if excess > limit {
                    violations.push(Violation {
                        step: b.step,
                        kind,
                        excess,
                    });
                }
            };
            flag(ViolationKind::EnergyIncreased, b.f - a.f, slack);
            flag(ViolationKind::MinDecreased, a.min_v - b.min_v, slack);
            flag(ViolationKind::MaxIncreased, b.max_vinv2 - a.max_vinv2, slack);
            flag(
                ViolationKind::ConstraintDrift,
                (b.constraint - first.constraint).abs(),
                tol.constraint,
            );
            let factor = (1.0 - b.alpha_n * b.alpha_n).sqrt();
            flag(ViolationKind::BoostFactor, b.max_vinv2 - factor * a.max_vinv2, slack);
            product *= factor;
        }
    }
    let max_ratio = match (steps.first(), steps.last()) {
        (Some(a), Some(b)) => b.max_vinv2 / a.max_vinv2,
        _ => 1.0,
    };
    TraceDiagnostics {
        violations,
        boost_product: product,
        max_ratio,
        product_bound_holds: product >= max_ratio - tol.product,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{normalize_constraint, TWO_PI};
    use crate::symmetries::NuProfile;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn vform(n: usize, f: impl Fn(f64) -> f64) -> CircleFunction {
        CircleFunction::from_fn(n, Role::VForm, f).unwrap()
    }

    #[test]
    fn boosted_max_examples() {
        let one = vform(512, |_| 1.0);
        assert_eq!(boosted_max(&one, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(boosted_max(&one, 0.5).unwrap(), 3f64.sqrt(), epsilon = 1e-9);
        let nu = NuProfile::new(-0.5, 0.0, 1.0).unwrap().v_form(512).unwrap();
        assert_abs_diff_eq!(boosted_max(&nu, 0.5).unwrap(), 1.0, epsilon = 1e-9);
        let bumpy = vform(16, |t| 1.0 + 0.2 * t.sin());
        assert!(matches!(boosted_max(&bumpy, 0.3), Err(Error::NotArranged { .. })));
    }

    #[test]
    fn constant_selects_no_boost() {
        let one = vform(256, |_| 1.0);
        let sel = select_alpha(&one, &SearchConfig::default()).unwrap();
        assert_eq!(sel.alpha, 0.0);
    }

    #[test]
    fn critical_profile_selects_its_own_boost() {
        let v = NuProfile::new(-0.5, 0.0, 1.0).unwrap().v_form(512).unwrap();
        let sel = select_alpha(&v, &SearchConfig::default()).unwrap();
        assert_abs_diff_eq!(sel.alpha, 0.5, epsilon = 1e-6);
        assert!(sel.alpha <= 0.5);
    }

    fn flat_tailed(n: usize) -> CircleFunction {
        // Symmetric decreasing, identically 1 on |theta| >= pi/2.
        vform(n, |t| (1.0 + 0.5 * t.cos().max(0.0).powi(2)).sqrt()).with_smoothness(Smoothness::Continuous)
    }

    #[test]
    fn flat_tail_is_a_fixed_point() {
        let v = flat_tailed(256);
        assert!(tail_flatness(&v) < 1e-14);
        assert_eq!(
            boosted_max_location(&v, 0.0, 1e-12).unwrap(),
            MaxLocation::AtQuarter
        );
        // Away from grid scale every boost raises the maximum; below it, cell
        // averaging can shave off a few 1e-6.
        let sel = select_alpha(&v, &SearchConfig::default()).unwrap();
        assert!(sel.alpha < 2.0 * TWO_PI / 256.0);
        assert!(boosted_max(&v, 0.05).unwrap() > 1.0 + 1e-3);
        assert_ne!(
            boosted_max_location(&v, sel.alpha, 1e-6).unwrap(),
            MaxLocation::OneSided
        );
    }

    #[test]
    fn returned_boost_puts_the_maximum_at_or_around_the_quarter() {
        let v = rearrange(&vform(512, |t| 1.0 + 0.3 * t.cos() + 0.1 * (2.0 * t).cos()));
        let sel = select_alpha(&v, &SearchConfig::default()).unwrap();
        assert!(sel.alpha > 0.0);
        let loc = boosted_max_location(&v, sel.alpha, 2e-6).unwrap();
        assert_ne!(loc, MaxLocation::OneSided);
    }

    #[test]
    fn single_step_examples() {
        let one = vform(128, |_| 1.0);
        let (out, sel) = iterate_step(&one, &SearchConfig::default()).unwrap();
        assert_eq!(sel.alpha, 0.0);
        assert_eq!(out.values(), one.values());

        let nu = NuProfile::new(-0.5, 0.0, 1.0).unwrap().v_form(512).unwrap();
        let (out, _) = iterate_step(&nu, &SearchConfig::default()).unwrap();
        assert!(out.values().iter().all(|x| (x - 1.0).abs() < 1e-6));
    }

    #[test]
    fn run_from_constant_converges_immediately() {
        let t = run_iteration(&vform(128, |_| 1.0), 50, 1e-3).unwrap();
        assert!(t.converged);
        assert_eq!(t.steps.len(), 1);
    }

    #[test]
    fn run_from_critical_profile_converges_in_one_step() {
        let v = NuProfile::new(-0.5, 0.0, 1.0).unwrap().v_form(512).unwrap();
        // The critical family is flat for the exact energy; the central
        // scheme would show its own truncation error along it.
        let cfg = IterationConfig {
            max_steps: 50,
            scheme: DiffScheme::Spectral,
            ..IterationConfig::default()
        };
        let t = run_iteration_with(&v, &cfg).unwrap();
        assert!(t.converged);
        assert_eq!(t.steps.len(), 2);
        assert!(t.final_v.values().iter().all(|x| (x - 1.0).abs() < 1e-6));
        let d = diagnose_trace(&t, &DiagnosticTolerances::default());
        assert!(d.passed(), "{d:?}");
        assert_abs_diff_eq!(d.boost_product, 0.75f64.sqrt(), epsilon = 1e-6);
        assert!(d.boost_product >= d.max_ratio);
    }

    #[test]
    fn regression_run_on_two_harmonic_profile() {
        let v0 = normalize_constraint(&vform(512, |t| 1.0 + 0.3 * t.cos() + 0.1 * (2.0 * t).cos())).unwrap();
        let t = run_iteration(&v0, 50, 1e-3).unwrap();
        assert!(t.converged);
        let d = diagnose_trace(
            &t,
            &DiagnosticTolerances {
                boost_budget: 0.0,
                ..DiagnosticTolerances::default()
            },
        );
        assert!(d.passed(), "{d:?}");
        let last = t.steps.last().unwrap();
        assert_abs_diff_eq!(last.constraint, TWO_PI, epsilon = 1e-8);
        assert!(last.min_v >= 0.5f64.sqrt() - 1e-6 && last.min_v <= 1.0 + 1e-6);
    }

    #[test]
    fn single_record_trace_passes() {
        let t = run_iteration(&vform(64, |_| 2.0), 10, 1e-3).unwrap();
        assert!(diagnose_trace(&t, &DiagnosticTolerances::default()).passed());
    }

    #[test]
    fn diagnostics_name_the_offending_step() {
        let v0 = normalize_constraint(&vform(256, |t| 1.0 + 0.3 * t.cos())).unwrap();
        let mut t = run_iteration(&v0, 20, 1e-3).unwrap();
        assert!(t.steps.len() >= 3);
        t.steps[2].f = t.steps[1].f + 1.0;
        let d = diagnose_trace(&t, &DiagnosticTolerances::default());
        assert!(d
            .violations
            .iter()
            .any(|x| x.step == 2 && x.kind == ViolationKind::EnergyIncreased));
    }

    #[test]
    fn tail_flatness_of_cosine() {
        let v = vform(64, |t| 2.0 + t.cos());
        assert_abs_diff_eq!(tail_flatness(&v), 1.0, epsilon = 1e-12);
        let _ = PI;
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn steps_keep_the_constraint_and_push_bounds_inward(
            a in 0.05f64..0.4, b in -0.15f64..0.15, phase in -PI..PI
        ) {
            let v = rearrange(&normalize_constraint(&vform(256, |t| 1.0 + a * (t - phase).cos() + b * (2.0 * t).sin())).unwrap());
            let (w, sel) = iterate_step(&v, &SearchConfig::default()).unwrap();
            let c0 = constraint_integral(&v).unwrap();
            let c1 = constraint_integral(&w).unwrap();
            prop_assert!((c0 - c1).abs() < 1e-10);
            let m0 = v.values().iter().map(|x| x.powi(-2)).fold(0.0, f64::max);
            let m1 = w.values().iter().map(|x| x.powi(-2)).fold(0.0, f64::max);
            prop_assert!(m1 <= m0 + 1e-12);
            prop_assert!(m1 <= (1.0 - sel.alpha * sel.alpha).sqrt() * m0 + 1e-10);
            prop_assert!(w.min() >= v.min() - 1e-12);
        }
    }
}
