//! Command-line front end. Every command prints one JSON document
//! `{command, config, results, assertions}`; traces and sweeps can be written
//! as CSV instead. Exit status is 0 when every assertion holds, 1 when one
//! fails, 2 for usage or input errors.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::closed_forms::{self, dirichlet_energy_curve, dirichlet_solve, dirichlet_thresholds, sweep_grid};
use crate::error::Error;
use crate::functionals::{el_residual, inequality_report, second_variation_spectrum};
use crate::grid::{normalize_constraint, CircleFunction, DiffScheme, Role, TWO_PI};
use crate::iteration::{diagnose_trace, run_iteration_with, DiagnosticTolerances, IterationConfig};
use crate::oracle::{
    descend_oracle, interval_check, interval_equality_samples, random_corpus, stereographic_check, vanishing_check,
    CorpusSpec, LineProfile, StereoInput, StereoVariant,
};
use crate::symmetries::NuProfile;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "circle-sobolev", version, about = "Checks for the sharp Sobolev inequality on the circle")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Spectral,
    Central,
}

impl From<SchemeArg> for DiffScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Spectral => DiffScheme::Spectral,
            SchemeArg::Central => DiffScheme::Central,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Grid size (even, at least 8).
    #[arg(long, global = true, default_value_t = 512, env = "CIRCLE_SOBOLEV_N")]
    pub n: usize,
    #[arg(long, global = true, value_enum, default_value = "spectral", env = "CIRCLE_SOBOLEV_SCHEME")]
    #[serde(skip)]
    pub scheme: SchemeArg,
    #[arg(long, global = true, default_value_t = 0, env = "CIRCLE_SOBOLEV_SEED")]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value = "json", env = "CIRCLE_SOBOLEV_FORMAT")]
    pub format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true, env = "CIRCLE_SOBOLEV_OUT")]
    pub out: Option<PathBuf>,
    /// Allowed negative slack in the inequality.
    #[arg(long, global = true, default_value_t = 1e-6, env = "CIRCLE_SOBOLEV_TOL_SLACK")]
    pub tol_slack: f64,
    /// Allowed deviation of energies from their closed-form values.
    #[arg(long, global = true, default_value_t = 1e-8, env = "CIRCLE_SOBOLEV_TOL_ENERGY")]
    pub tol_energy: f64,
    /// Allowed pointwise Euler-Lagrange residual or line/circle mismatch.
    #[arg(long, global = true, default_value_t = 1e-7, env = "CIRCLE_SOBOLEV_TOL_RESIDUAL")]
    pub tol_residual: f64,
    /// Per-step tolerance on the iteration's monotone quantities.
    #[arg(long, global = true, default_value_t = 1e-10, env = "CIRCLE_SOBOLEV_TOL_STEP")]
    pub tol_step: f64,
    /// Interpolation budget added to the per-step tolerance.
    #[arg(long, global = true, default_value_t = 1e-6, env = "CIRCLE_SOBOLEV_TOL_BOOST")]
    pub tol_boost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Constant,
    /// `1 + amp cos(harmonic theta)`.
    Cosine,
    /// `v^-2` equal to the boost multiplier with `alpha` and `center`.
    Nu,
    /// Member `index` of the seeded random corpus.
    Corpus,
    /// One value per line.
    File,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProfileArgs {
    #[arg(long, value_enum, default_value = "cosine")]
    pub profile: ProfileKind,
    #[arg(long, default_value_t = 0.1)]
    pub amp: f64,
    #[arg(long, default_value_t = 1)]
    pub harmonic: u32,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub center: f64,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Rescale so that `integral v^-2 = 2 pi`.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineFamily {
    Grid,
    Constant,
    EqualityA,
    EqualityB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalFamily {
    Constant,
    Equality,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VanishingFamily {
    AbsSin,
    SinSquared,
    Zero,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Evaluate the inequality on a profile or on the random corpus.
    Check {
        #[command(flatten)]
        profile: ProfileArgs,
        /// Check this many corpus members instead of a single profile.
        #[arg(long)]
        corpus_count: Option<usize>,
    },
    /// Run the boost-and-rearrange iteration and diagnose its trace.
    Iterate {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 200)]
        max_steps: usize,
        #[arg(long, default_value_t = 1e-3)]
        flat_tol: f64,
    },
    /// Evaluate the critical family.
    Critical {
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta0: f64,
    },
    /// Eigenvalues of the second variation at the constant.
    Spectrum {
        #[arg(long, default_value_t = 3)]
        max_m: usize,
    },
    /// Closed-form Dirichlet problem on `[0, pi]`.
    Dirichlet {
        #[arg(long = "m")]
        m: f64,
        #[arg(long = "M")]
        big_m: f64,
        #[arg(long, conflicts_with = "sweep")]
        c: Option<f64>,
        /// Solve on this many evenly spaced constraint values.
        #[arg(long)]
        sweep: Option<usize>,
    },
    /// Symmetry-free gradient descent.
    Oracle {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        rate: f64,
    },
    /// Line versions of the inequality.
    Stereo {
        #[arg(long, value_enum, default_value = "a")]
        variant: VariantArg,
        #[arg(long, value_enum, default_value = "equality-a")]
        family: LineFamily,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
        #[command(flatten)]
        profile: ProfileArgs,
    },
    /// Interval version of the inequality.
    Interval {
        #[arg(long, default_value_t = PI)]
        l: f64,
        #[arg(long, value_enum, default_value = "equality")]
        family: IntervalFamily,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, default_value_t = 512)]
        samples: usize,
    },
    /// Vanishing-set variant `4 integral w'^2 >= integral w^2`.
    Vanishing {
        #[arg(long, value_enum, default_value = "abs-sin")]
        family: VanishingFamily,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Iterate { .. } => "iterate",
            Command::Critical { .. } => "critical",
            Command::Spectrum { .. } => "spectrum",
            Command::Dirichlet { .. } => "dirichlet",
            Command::Oracle { .. } => "oracle",
            Command::Stereo { .. } => "stereo",
            Command::Interval { .. } => "interval",
            Command::Vanishing { .. } => "vanishing",
        }
    }
}

/// A reported number with the accuracy it is claimed to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub config: Value,
    pub results: Vec<Measurement>,
    pub assertions: Vec<Assertion>,
    #[serde(skip)]
    csv: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
}

impl Report {
    fn new(command: &Command, global: &GlobalArgs) -> Self {
        let mut config = serde_json::to_value(global).unwrap_or(Value::Null);
        if let Value::Object(map) = &mut config {
            let scheme = match global.scheme {
                SchemeArg::Spectral => "spectral",
                SchemeArg::Central => "central",
            };
            map.insert("scheme".into(), json!(scheme));
            map.insert("arguments".into(), serde_json::to_value(command).unwrap_or(Value::Null));
        }
        Report {
            command: command.name().into(),
            config,
            results: Vec::new(),
            assertions: Vec::new(),
            csv: None,
        }
    }

    fn measure(&mut self, name: &str, value: f64, tolerance: f64) {
        self.results.push(Measurement {
            name: name.into(),
            index: None,
            value,
            tolerance,
        });
    }

    fn measure_at(&mut self, name: &str, index: usize, value: f64, tolerance: f64) {
        self.results.push(Measurement {
            name: name.into(),
            index: Some(index),
            value,
            tolerance,
        });
    }

    /// Records `value <= tolerance`.
    fn assert_le(&mut self, name: &str, value: f64, tolerance: f64) {
        self.assertions.push(Assertion {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
        });
    }

    fn assert_flag(&mut self, name: &str, ok: bool) {
        self.assertions.push(Assertion {
            name: name.into(),
            passed: ok,
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 0.0,
        });
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> Option<String> {
        let (header, rows) = self.csv.as_ref()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).ok()?;
        for r in rows {
            w.write_record(r).ok()?;
        }
        String::from_utf8(w.into_inner().ok()?).ok()
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "usage error: {s}"),
            CliError::Input(e) => write!(f, "input error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Input(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn build_profile(p: &ProfileArgs, g: &GlobalArgs) -> CliResult<CircleFunction> {
    let n = g.n;
    let v = match p.profile {
        ProfileKind::Constant => CircleFunction::from_fn(n, Role::VForm, |_| 1.0)?,
        ProfileKind::Cosine => {
            let k = p.harmonic as f64;
            CircleFunction::from_fn(n, Role::VForm, |t| 1.0 + p.amp * (k * t).cos())?
        }
        ProfileKind::Nu => NuProfile::new(p.alpha, p.center, 1.0)?.v_form(n)?,
        ProfileKind::Corpus => {
            let spec = CorpusSpec {
                seed: g.seed,
                count: 0,
                n,
                ..CorpusSpec::default()
            };
            crate::oracle::corpus_member(&spec, p.index)?
        }
        ProfileKind::File => {
            let path = p
                .file
                .as_ref()
                .ok_or_else(|| CliError::Usage("--profile file needs --file".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let vals = text
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|e| CliError::Usage(format!("bad sample {s:?}: {e}"))))
                .collect::<CliResult<Vec<f64>>>()?;
            CircleFunction::new(vals, Role::VForm)?
        }
    };
    Ok(if p.normalize { normalize_constraint(&v)? } else { v })
}

pub fn execute(cli: &Cli) -> CliResult<Report> {
    let g = &cli.global;
    let scheme: DiffScheme = g.scheme.into();
    let mut rep = Report::new(&cli.command, g);
    let csv_ok = matches!(
        &cli.command,
        Command::Iterate { .. } | Command::Dirichlet { sweep: Some(_), .. }
    );
    if g.format == Format::Csv && !csv_ok {
        return Err(CliError::Usage("csv output is available for iterate and dirichlet --sweep".into()));
    }
    match &cli.command {
        Command::Check { profile, corpus_count } => {
            let members = match corpus_count {
                Some(count) => random_corpus(&CorpusSpec {
                    seed: g.seed,
                    count: *count,
                    n: g.n,
                    ..CorpusSpec::default()
                })?,
                None => vec![build_profile(profile, g)?],
            };
            let mut worst = f64::INFINITY;
            for (i, v) in members.iter().enumerate() {
                let r = inequality_report(v, scheme)?;
                let idx = (members.len() > 1).then_some(i);
                let push = |rep: &mut Report, name: &str, value: f64| match idx {
                    Some(i) => rep.measure_at(name, i, value, g.tol_energy),
                    None => rep.measure(name, value, g.tol_energy),
                };
                push(&mut rep, "F", r.f);
                push(&mut rep, "constraint", r.constraint);
                push(&mut rep, "Q", r.q);
                push(&mut rep, "bound", r.bound);
                push(&mut rep, "slack", r.slack);
                worst = worst.min(r.slack);
            }
            rep.assert_le("negative_slack", -worst, g.tol_slack);
        }
        Command::Iterate {
            profile,
            max_steps,
            flat_tol,
        } => {
            let v0 = build_profile(profile, g)?;
            let cfg = IterationConfig {
                max_steps: *max_steps,
                flat_tol: *flat_tol,
                scheme,
                ..IterationConfig::default()
            };
            let trace = run_iteration_with(&v0, &cfg)?;
            let tol = DiagnosticTolerances {
                per_step: g.tol_step,
                boost_budget: g.tol_boost,
                ..DiagnosticTolerances::default()
            };
            let diag = diagnose_trace(&trace, &tol);
            let step_tol = g.tol_step + g.tol_boost;
            for s in &trace.steps {
                rep.measure_at("alpha_n", s.step, s.alpha_n, 1e-12);
                rep.measure_at("F", s.step, s.f, step_tol);
                rep.measure_at("min_v", s.step, s.min_v, step_tol);
                rep.measure_at("max_vinv2", s.step, s.max_vinv2, step_tol);
                rep.measure_at("constraint", s.step, s.constraint, tol.constraint);
            }
            rep.measure("tail_flatness", trace.tail_flatness, *flat_tol);
            rep.measure("boost_product", diag.boost_product, tol.product);
            rep.measure("max_ratio", diag.max_ratio, tol.product);
            rep.assert_le("monotonicity_violations", diag.violations.len() as f64, 0.0);
            rep.assert_le("product_bound_gap", diag.max_ratio - diag.boost_product, tol.product);
            rep.assert_le("tail_flatness", trace.tail_flatness, *flat_tol);
            let rows = trace
                .steps
                .iter()
                .map(|s| {
                    vec![
                        s.step.to_string(),
                        s.alpha_n.to_string(),
                        s.f.to_string(),
                        s.min_v.to_string(),
                        s.max_vinv2.to_string(),
                        s.constraint.to_string(),
                    ]
                })
                .collect();
            rep.csv = Some((
                vec!["step", "alpha_n", "F", "min_v", "max_vinv2", "constraint"],
                rows,
            ));
        }
        Command::Critical { alpha, theta0 } => {
            let f = closed_forms::critical_profile(*alpha, *theta0, g.n)?;
            let v = crate::functionals::f_to_v(&f)?;
            let r = inequality_report(&v, scheme)?;
            let resid = el_residual(&f, scheme)?
                .values()
                .iter()
                .fold(0.0f64, |a, x| a.max(x.abs()));
            rep.measure("F", r.f, g.tol_energy);
            rep.measure("constraint", r.constraint, g.tol_energy);
            rep.measure("Q", r.q, g.tol_energy * TWO_PI);
            rep.measure("slack", r.slack, g.tol_energy);
            rep.measure("max_el_residual", resid, g.tol_residual);
            rep.assert_le("energy_error", (r.f + TWO_PI).abs(), g.tol_energy);
            rep.assert_le("slack_error", r.slack.abs(), g.tol_energy);
            rep.assert_le("el_residual", resid, g.tol_residual);
        }
        Command::Spectrum { max_m } => {
            for row in second_variation_spectrum(*max_m) {
                let want = 8.0 * (row.m * (row.m + 2)) as f64;
                let tol = 1e-9 * (1.0 + want);
                rep.measure_at("kappa", row.m, row.kappa, tol);
                rep.measure_at("multiplicity", row.m, row.multiplicity as f64, 0.0);
                rep.assert_le(&format!("kappa_{}", row.m), (row.kappa - want).abs(), tol);
                rep.assert_flag(&format!("multiplicity_{}", row.m), row.multiplicity == 2);
            }
        }
        Command::Dirichlet { m, big_m, c, sweep } => {
            let th = dirichlet_thresholds(*m, *big_m)?;
            for (name, value) in [
                ("c_min", th.c_min),
                ("c_ab", th.c_ab),
                ("c_bc", th.c_bc),
                ("c_lambda0", th.c_lambda0),
                ("c_de", th.c_de),
                ("c_max", th.c_max),
            ] {
                rep.measure(name, value, 1e-12);
            }
            let ordered = [th.c_min, th.c_ab, th.c_bc, th.c_lambda0, th.c_de, th.c_max]
                .windows(2)
                .all(|w| w[0] <= w[1]);
            rep.assert_flag("thresholds_ordered", ordered);
            match (c, sweep) {
                (Some(c), _) => {
                    let s = dirichlet_solve(*m, *big_m, *c)?;
                    rep.config["case"] = json!(s.case.to_string());
                    rep.measure("lambda", s.lambda, 1e-10);
                    rep.measure("energy", s.energy, 1e-10);
                    let slope = closed_forms::energy_slope(*m, *big_m, *c, 1e-5)?;
                    rep.measure("energy_slope", slope, 1e-3 * s.lambda.abs() + 1e-9);
                    rep.assert_le("slope_vs_lambda", (slope - s.lambda).abs(), 1e-3 * s.lambda.abs() + 1e-9);
                }
                (None, Some(count)) => {
                    let grid = sweep_grid(*m, *big_m, *count)?;
                    let curve = dirichlet_energy_curve(*m, *big_m, &grid)?;
                    let mut rows = Vec::with_capacity(curve.len());
                    let mut worst: f64 = 0.0;
                    for (i, p) in curve.iter().enumerate() {
                        rep.measure_at("c", i, p.c, 1e-15);
                        rep.measure_at("energy", i, p.energy, 1e-10);
                        rep.measure_at("lambda", i, p.lambda, 1e-10);
                        let slope = closed_forms::energy_slope(*m, *big_m, p.c, 1e-5)?;
                        worst = worst.max((slope - p.lambda).abs() - 1e-3 * p.lambda.abs() - 1e-9);
                        rows.push(vec![
                            p.c.to_string(),
                            p.energy.to_string(),
                            p.lambda.to_string(),
                            p.case.to_string(),
                        ]);
                    }
                    rep.assert_le("slope_vs_lambda_excess", worst, 0.0);
                    rep.csv = Some((vec!["c", "E", "lambda", "case"], rows));
                }
                (None, None) => return Err(CliError::Usage("dirichlet needs --c or --sweep".into())),
            }
        }
        Command::Oracle { profile, steps, rate } => {
            let v0 = build_profile(profile, g)?;
            let r = descend_oracle(&v0, *steps, *rate)?;
            for (i, f) in r.history.iter().enumerate() {
                rep.measure_at("F", i, *f, 1e-12);
            }
            rep.measure("steps_taken", r.steps_taken as f64, 0.0);
            let rises = r.history.windows(2).filter(|w| w[1] > w[0]).count();
            rep.assert_le("energy_increases", rises as f64, 0.0);
            rep.assert_le("distance_to_sharp_value", (r.f + TWO_PI).abs(), 1e-3);
        }
        Command::Stereo {
            variant,
            family,
            k,
            x0,
            profile,
        } => {
            let variant = match variant {
                VariantArg::A => StereoVariant::A,
                VariantArg::B => StereoVariant::B,
            };
            let grid_v;
            let input = match family {
                LineFamily::Grid => {
                    grid_v = build_profile(profile, g)?;
                    StereoInput::Grid(&grid_v)
                }
                LineFamily::Constant => StereoInput::Analytic(LineProfile::Constant { k: *k }),
                LineFamily::EqualityA => StereoInput::Analytic(LineProfile::EqualityA {
                    k: *k,
                    alpha: profile.alpha,
                    x0: *x0,
                }),
                LineFamily::EqualityB => StereoInput::Analytic(LineProfile::EqualityB {
                    k: *k,
                    alpha: profile.alpha,
                }),
            };
            let r = stereographic_check(input, variant)?;
            rep.measure("circle_side", r.circle_side, g.tol_residual);
            rep.measure("line_side", r.line_side, g.tol_residual);
            rep.measure("line_constraint", r.line_constraint, g.tol_residual);
            rep.measure("bound_side", r.bound_side, g.tol_residual);
            rep.measure("slack", r.slack, g.tol_slack);
            if let Some(u) = r.u_form {
                rep.measure("u_lhs", u.lhs, g.tol_residual);
                rep.measure("u_constraint", u.constraint, g.tol_residual);
                rep.measure("u_bound", u.bound, g.tol_residual);
                rep.assert_le("u_negative_slack", -u.slack, g.tol_slack);
            }
            rep.assert_le("residual", r.residual, g.tol_residual.max(1e-6));
            rep.assert_le("negative_slack", -r.slack, g.tol_slack);
        }
        Command::Interval {
            l,
            family,
            alpha,
            samples,
        } => {
            let s = match family {
                IntervalFamily::Constant => vec![1.0; samples + 1],
                IntervalFamily::Equality => interval_equality_samples(*l, *alpha, 1.0, *samples),
                IntervalFamily::Linear => (0..=*samples).map(|i| 1.0 + i as f64 / *samples as f64).collect(),
            };
            let r = interval_check(&s, *l, scheme)?;
            rep.measure("F", r.f, g.tol_energy);
            rep.measure("constraint", r.constraint, g.tol_energy);
            rep.measure("bound", r.bound, g.tol_energy);
            rep.measure("slack", r.slack, g.tol_slack);
            rep.assert_le("negative_slack", -r.slack, g.tol_slack);
        }
        Command::Vanishing { family } => {
            let w = CircleFunction::from_fn(g.n, Role::Generic, |t| match family {
                VanishingFamily::AbsSin => (0.5 * t).sin().abs(),
                VanishingFamily::SinSquared => (0.5 * t).sin().powi(2),
                VanishingFamily::Zero => 0.0,
            })?;
            let r = vanishing_check(&w)?;
            rep.measure("lhs", r.lhs, g.tol_slack);
            rep.measure("rhs", r.rhs, g.tol_slack);
            rep.assert_le("deficit", r.rhs - r.lhs, g.tol_slack);
        }
    }
    Ok(rep)
}

/// Parses, runs and writes the output; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let rep = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_USAGE;
        }
    };
    let text = match cli.global.format {
        Format::Json => rep.to_json(),
        Format::Csv => rep.to_csv().unwrap_or_default(),
    };
    let written = match &cli.global.out {
        Some(path) => std::fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string())
        }
    };
    if let Err(e) = written {
        eprintln!("output error: {e}");
        return EXIT_USAGE;
    }
    if rep.passed() {
        EXIT_PASS
    } else {
        EXIT_VIOLATION
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn report(args: &[&str]) -> Report {
        let cli = Cli::try_parse_from(std::iter::once("circle-sobolev").chain(args.iter().copied())).unwrap();
        execute(&cli).unwrap()
    }

    fn value(rep: &Report, name: &str) -> f64 {
        rep.results.iter().find(|m| m.name == name).unwrap().value
    }

    #[test]
    fn critical_command() {
        let r = report(&["critical", "--alpha", "0.5", "--n", "1024"]);
        assert!(r.passed());
        assert_abs_diff_eq!(value(&r, "F"), -TWO_PI, epsilon = 1e-8);
        assert_abs_diff_eq!(value(&r, "slack"), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn spectrum_command() {
        let r = report(&["spectrum", "--max-m", "3"]);
        let kappas: Vec<f64> = r.results.iter().filter(|m| m.name == "kappa").map(|m| m.value).collect();
        for (k, want) in kappas.iter().zip([0.0, 24.0, 64.0, 120.0]) {
            assert_abs_diff_eq!(*k, want, epsilon = 1e-9);
        }
        assert!(r.passed());
    }

    #[test]
    fn dirichlet_command() {
        let r = report(&["dirichlet", "--m", "0.5", "--M", "1", "--c", "6.2831853"]);
        assert_eq!(r.config["case"], json!("d"));
        assert_abs_diff_eq!(value(&r, "lambda"), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(value(&r, "energy"), 0.0795775, epsilon = 1e-6);
    }

    #[test]
    fn csv_only_for_traces() {
        let cli = Cli::try_parse_from(["circle-sobolev", "--format", "csv", "spectrum"]).unwrap();
        assert!(matches!(execute(&cli), Err(CliError::Usage(_))));
        let cli = Cli::try_parse_from(["circle-sobolev", "--format", "csv", "--n", "128", "iterate"]).unwrap();
        let csv = execute(&cli).unwrap().to_csv().unwrap();
        assert!(csv.starts_with("step,alpha_n,F,min_v,max_vinv2,constraint\n"));
    }

    #[test]
    fn usage_errors_exit_with_two() {
        assert_eq!(run(["circle-sobolev", "nonsense"]), EXIT_USAGE);
        assert_eq!(run(["circle-sobolev", "--n", "7", "check"]), EXIT_USAGE);
        assert_eq!(run(["circle-sobolev", "dirichlet", "--m", "1", "--M", "0.5", "--c", "3"]), EXIT_USAGE);
    }
}
