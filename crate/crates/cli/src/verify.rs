//! The invariant suite.
//!
//! Each check is named `module.invariant`:
//!
//! * `algebra.unit_norm`, `algebra.submultiplicativity`,
//!   `algebra.log_norm_oracle`, `algebra.exponential_bound`,
//!   `algebra.lyapunov_index`, `algebra.inverse_consistency`
//! * `flow.semigroup`, `flow.generator_consistency`
//! * `cocycle.identity_at_zero`, `cocycle.chain_rule`,
//!   `cocycle.invertibility`, `cocycle.generator_round_trip`,
//!   `cocycle.v_identity`, `cocycle.gronwall`, `cocycle.skew_product`,
//!   `cocycle.solver_order`, `cocycle.solver_convergence`
//! * `models.worst_case_vector`, `models.piecewise_kink_continuity`
//! * `analysis.growth`, `analysis.lyapunov`,
//!   `analysis.monotone_non_uniformity`, `analysis.kink_detection`
//!
//! A filter keeps the checks whose full name contains it.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use semicocycle::algebra::log_norm_limit_oracle;
use semicocycle::analysis::{
    differentiability_probe, dimension_sweep, gronwall_bound, growth_bound_report, lyapunov_rate, GrowthConstant,
    BOUND_SLACK, DEFAULT_EPSILON, DEFAULT_LYAPUNOV_GRID,
};
use semicocycle::cocycle::derivative_cocycle;
use semicocycle::models::{broken_affine, piecewise_gamma, DEFAULT_RHO};
use semicocycle::{
    build_default, build_model, AlgebraElement, CocycleModel, Error, ModelBundle, ModelName, ModelParams, NormTag,
    Result, Scalar, SolverOptions, VectorState,
};

use crate::run::c0_lower_bound;
use crate::table::{format_float, Table};

pub const DEFAULT_SEED: u64 = 42;
const CHAIN_SAMPLES: usize = 20;
const ORDER_STEPS: [f64; 3] = [2e-3, 1e-3, 5e-4];

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub filter: Option<String>,
    /// Add the non-cocycle `Γ_t = 1 + t` to the chain-rule check.
    pub inject_broken: bool,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub module: &'static str,
    pub invariant: &'static str,
    pub subject: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub note: String,
}

impl CheckLine {
    pub fn name(&self) -> String {
        format!("{}.{}", self.module, self.invariant)
    }

    pub fn render(&self) -> String {
        let mut line = format!(
            "{} {} [{}] measured={:.3e} threshold={:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name(),
            self.subject,
            self.measured,
            self.threshold
        );
        if !self.note.is_empty() {
            line.push_str("  ");
            line.push_str(&self.note);
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub lines: Vec<CheckLine>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }

    pub fn to_table(&self) -> Table {
        let mut table = Table::new(&[
            "module",
            "invariant",
            "subject",
            "passed",
            "measured",
            "threshold",
            "note",
        ]);
        for l in &self.lines {
            table.push(vec![
                l.module.into(),
                l.invariant.into(),
                l.subject.clone().into(),
                l.passed.into(),
                l.measured.into(),
                l.threshold.into(),
                l.note.clone().into(),
            ]);
        }
        table
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        self.to_table().write(&dir.join("verify.csv"))
    }
}

struct Ctx {
    seed: u64,
    inject_broken: bool,
    opts: SolverOptions,
}

type CheckFn = fn(&Ctx) -> Vec<CheckLine>;

const CHECKS: &[(&str, &str, CheckFn)] = &[
    ("algebra", "unit_norm", unit_norm),
    ("algebra", "submultiplicativity", submultiplicativity),
    ("algebra", "log_norm_oracle", log_norm_oracle),
    ("algebra", "exponential_bound", exponential_bound),
    ("algebra", "lyapunov_index", lyapunov_index),
    ("algebra", "inverse_consistency", inverse_consistency),
    ("flow", "semigroup", flow_semigroup),
    ("flow", "generator_consistency", generator_consistency),
    ("cocycle", "identity_at_zero", identity_at_zero),
    ("cocycle", "chain_rule", chain_rule),
    ("cocycle", "invertibility", invertibility),
    ("cocycle", "generator_round_trip", generator_round_trip),
    ("cocycle", "v_identity", v_identity),
    ("cocycle", "gronwall", gronwall),
    ("cocycle", "skew_product", skew_product),
    ("cocycle", "solver_order", solver_order),
    ("cocycle", "solver_convergence", solver_convergence),
    ("models", "worst_case_vector", worst_case_vector),
    ("models", "piecewise_kink_continuity", piecewise_kink_continuity),
    ("analysis", "growth", growth),
    ("analysis", "lyapunov", lyapunov),
    ("analysis", "monotone_non_uniformity", monotone_non_uniformity),
    ("analysis", "kink_detection", kink_detection),
];

/// Names of every check, `module.invariant`.
pub fn check_names() -> Vec<String> {
    CHECKS.iter().map(|(m, i, _)| format!("{m}.{i}")).collect()
}

pub fn verify_suite(options: &VerifyOptions) -> VerifyReport {
    let ctx = Ctx {
        seed: options.seed.unwrap_or(DEFAULT_SEED),
        inject_broken: options.inject_broken,
        opts: SolverOptions::default(),
    };
    let selected: Vec<&(&str, &str, CheckFn)> = CHECKS
        .iter()
        .filter(|(m, i, _)| match &options.filter {
            Some(f) => format!("{m}.{i}").contains(f.as_str()),
            None => true,
        })
        .collect();
    let lines: Vec<Vec<CheckLine>> = selected.par_iter().map(|(_, _, check)| check(&ctx)).collect();
    VerifyReport {
        lines: lines.into_iter().flatten().collect(),
    }
}

/// One line from a fallible measurement; numerical errors become failures.
fn line(
    module: &'static str,
    invariant: &'static str,
    subject: impl Into<String>,
    threshold: f64,
    measure: impl FnOnce() -> Result<(f64, String)>,
) -> CheckLine {
    let subject = subject.into();
    match measure() {
        Ok((measured, note)) => CheckLine {
            module,
            invariant,
            subject,
            passed: measured <= threshold,
            measured,
            threshold,
            note,
        },
        Err(e) => CheckLine {
            module,
            invariant,
            subject,
            passed: false,
            measured: f64::NAN,
            threshold,
            note: format!("error: {e}"),
        },
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn par_max<T: Sync>(items: &[T], f: impl Fn(&T) -> Result<f64> + Sync + Send) -> Result<f64> {
    let values: Vec<f64> = items.par_iter().map(f).collect::<Result<_>>()?;
    Ok(max_of(values))
}

fn random_matrices(seed: u64, count: usize, tag: NormTag) -> Vec<AlgebraElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let m = rng.gen_range(1..=4);
            AlgebraElement::from_fn(m, tag, |_, _| {
                Scalar::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
            })
        })
        .collect()
}

fn registry() -> Vec<ModelBundle> {
    ModelName::ALL.iter().map(|&m| build_default(m)).collect()
}

fn generated_registry() -> Vec<ModelBundle> {
    registry().into_iter().filter(|b| b.cocycle.has_generator()).collect()
}

fn samples(bundle: &ModelBundle, count: usize, seed: u64) -> Result<Vec<VectorState>> {
    Ok(bundle
        .flow
        .domain
        .sample_strictly_inside(bundle.sample_margin(), count, seed)?
        .points)
}

fn unit_grid() -> Vec<(f64, f64)> {
    let g = [0.0, 0.25, 0.5, 0.75, 1.0];
    g.iter().flat_map(|&s| g.iter().map(move |&t| (s, t))).collect()
}

fn unit_norm(_ctx: &Ctx) -> Vec<CheckLine> {
    NormTag::ALL
        .iter()
        .map(|&tag| {
            line("algebra", "unit_norm", tag.to_string(), 1e-14, || {
                Ok((
                    max_of((1..=6).map(|m| (AlgebraElement::identity(m, tag).operator_norm(tag) - 1.0).abs())),
                    String::new(),
                ))
            })
        })
        .collect()
}

fn submultiplicativity(ctx: &Ctx) -> Vec<CheckLine> {
    NormTag::ALL
        .iter()
        .map(|&tag| {
            line("algebra", "submultiplicativity", tag.to_string(), 1e-10, || {
                let a = random_matrices(ctx.seed, 100, tag);
                let b = random_matrices(ctx.seed + 1, 100, tag);
                let worst = a.iter().zip(&b).filter(|(a, b)| a.dim() == b.dim()).map(|(a, b)| {
                    let bound = a.operator_norm(tag) * b.operator_norm(tag);
                    ((a * b).operator_norm(tag) - bound) / bound.max(1e-300)
                });
                Ok((max_of(worst), String::new()))
            })
        })
        .collect()
}

fn log_norm_oracle(ctx: &Ctx) -> Vec<CheckLine> {
    NormTag::ALL
        .iter()
        .map(|&tag| {
            let matrices = random_matrices(ctx.seed, 100, tag);
            let diffs: Vec<f64> = matrices
                .iter()
                .map(|a| log_norm_limit_oracle(a, tag, 1e-6) - a.log_norm(tag))
                .collect();
            let (lo, hi) = (
                diffs.iter().copied().fold(f64::INFINITY, f64::min),
                max_of(diffs.iter().copied()),
            );
            CheckLine {
                module: "algebra",
                invariant: "log_norm_oracle",
                subject: format!("{tag}, 100 matrices"),
                passed: lo >= -1e-9 && hi <= 1e-4,
                measured: hi,
                threshold: 1e-4,
                note: format!("oracle - mu in [{lo:.3e}, {hi:.3e}], lower limit -1e-9"),
            }
        })
        .collect()
}

fn exponential_bound(ctx: &Ctx) -> Vec<CheckLine> {
    NormTag::ALL
        .iter()
        .map(|&tag| {
            line("algebra", "exponential_bound", tag.to_string(), 1e-10, || {
                let mut worst = f64::NEG_INFINITY;
                for a in random_matrices(ctx.seed + 2, 100, tag) {
                    for t in [0.5, 1.0, 2.0] {
                        let ratio = a.exp(t)?.operator_norm(tag) / (t * a.log_norm(tag)).exp();
                        worst = worst.max(ratio - 1.0);
                    }
                }
                Ok((worst, "‖e^{tA}‖ / e^{t mu(A)} - 1".into()))
            })
        })
        .collect()
}

fn lyapunov_index(ctx: &Ctx) -> Vec<CheckLine> {
    let cases: [(&str, [[f64; 2]; 2], f64); 2] = [
        ("diag(-1,-2)", [[-1.0, 0.0], [0.0, -2.0]], -1.0),
        ("rotation [[0,1],[-1,0]]", [[0.0, 1.0], [-1.0, 0.0]], 0.0),
    ];
    cases
        .iter()
        .map(|(subject, rows, want)| {
            line("algebra", "lyapunov_index", *subject, 1e-3, || {
                let a = AlgebraElement::from_real_rows(&[&rows[0], &rows[1]], NormTag::L2)?;
                let kappa = a.lyapunov_index(&ctx.opts)?;
                Ok(((kappa - want).abs(), format!("kappa={kappa:.6}")))
            })
        })
        .collect()
}

fn inverse_consistency(ctx: &Ctx) -> Vec<CheckLine> {
    vec![line(
        "algebra",
        "inverse_consistency",
        "A + 5I, 100 matrices",
        1e-12,
        || {
            let mut worst: f64 = 0.0;
            for a in random_matrices(ctx.seed + 3, 100, NormTag::L1) {
                let m = a.dim();
                let shifted = &a + &AlgebraElement::identity(m, NormTag::L1).scale(Scalar::new(5.0, 0.0));
                let inv = shifted.inverse(ctx.opts.max_condition)?;
                worst = worst.max((&(&shifted * &inv) - &AlgebraElement::identity(m, NormTag::L1)).norm());
            }
            Ok((worst, String::new()))
        },
    )]
}

fn flow_semigroup(ctx: &Ctx) -> Vec<CheckLine> {
    let mut out = Vec::new();
    for bundle in registry() {
        for (label, flow, threshold) in [
            ("closed form", bundle.flow.clone(), 1e-12),
            ("integrated", bundle.flow.generator_only(), 1e-6),
        ] {
            out.push(line(
                "flow",
                "semigroup",
                format!("{} {label}", bundle.name),
                threshold,
                || {
                    let points = samples(&bundle, 10, ctx.seed)?;
                    let worst = par_max(&points, |x| {
                        let r: Result<Vec<f64>> = unit_grid()
                            .iter()
                            .map(|&(s, t)| flow.semigroup_residual(x, s, t, &ctx.opts))
                            .collect();
                        Ok(max_of(r?))
                    })?;
                    Ok((worst, String::new()))
                },
            ));
        }
    }
    out
}

fn generator_consistency(ctx: &Ctx) -> Vec<CheckLine> {
    registry()
        .into_iter()
        .map(|bundle| {
            line("flow", "generator_consistency", bundle.name.clone(), 1e-6, || {
                let points = samples(&bundle, 20, ctx.seed)?;
                let worst = par_max(&points, |x| {
                    let numeric = bundle.flow.numeric_generator(x, 1e-5)?;
                    let exact = bundle.flow.generator(x.coords());
                    let diff: Vec<Scalar> = numeric.iter().zip(&exact).map(|(a, b)| a - b).collect();
                    Ok(bundle.flow.domain.tag.vector_norm(&diff))
                })?;
                Ok((worst, String::new()))
            })
        })
        .collect()
}

fn identity_at_zero(ctx: &Ctx) -> Vec<CheckLine> {
    registry()
        .into_iter()
        .map(|bundle| {
            line("cocycle", "identity_at_zero", bundle.name.clone(), 0.0, || {
                let id = AlgebraElement::identity(bundle.cocycle.dim(), bundle.cocycle.tag());
                let mut worst: f64 = 0.0;
                for x in samples(&bundle, 10, ctx.seed)? {
                    worst = worst.max((&bundle.cocycle.gamma_at(&x, 0.0, &ctx.opts)? - &id).norm());
                    let path = bundle.cocycle.solve_cocycle(&x, 0.1, &ctx.opts)?;
                    worst = worst.max((&path.gamma[0] - &id).norm());
                }
                Ok((worst, String::new()))
            })
        })
        .collect()
}

/// Max chain-rule residual over seeded samples and the 5×5 unit grid.
fn chain_rule_max(bundle: &ModelBundle, cocycle: &CocycleModel, seed: u64, opts: &SolverOptions) -> Result<f64> {
    let points = samples(bundle, CHAIN_SAMPLES, seed)?;
    par_max(&points, |x| {
        let r: Result<Vec<f64>> = unit_grid()
            .iter()
            .map(|&(s, t)| cocycle.chain_rule_residual(x, s, t, opts))
            .collect();
        Ok(max_of(r?))
    })
}

fn chain_rule(ctx: &Ctx) -> Vec<CheckLine> {
    let mut bundles = registry();
    if ctx.inject_broken {
        bundles.push(broken_affine());
    }
    let mut out = Vec::new();
    for bundle in bundles {
        out.push(line(
            "cocycle",
            "chain_rule",
            format!("{} closed form", bundle.name),
            1e-10,
            || {
                Ok((
                    chain_rule_max(&bundle, &bundle.cocycle, ctx.seed, &ctx.opts)?,
                    "20 samples, 5x5 (s,t)".into(),
                ))
            },
        ));
        if bundle.cocycle.has_generator() {
            out.push(line(
                "cocycle",
                "chain_rule",
                format!("{} generated", bundle.name),
                1e-6,
                || {
                    let generated = bundle.cocycle.generated_only()?;
                    Ok((
                        chain_rule_max(&bundle, &generated, ctx.seed, &ctx.opts)?,
                        "RK4 h=1e-3".into(),
                    ))
                },
            ));
        }
    }
    out
}

fn invertibility(ctx: &Ctx) -> Vec<CheckLine> {
    let times: Vec<f64> = (0..=12).map(|i| i as f64 * 0.25).collect();
    let mut out = Vec::new();
    for bundle in registry() {
        let measured = samples(&bundle, CHAIN_SAMPLES, ctx.seed).and_then(|points| {
            let per_point: Vec<(f64, f64)> = points
                .par_iter()
                .map(|x| {
                    let (mut cond, mut trip) = (0.0f64, 0.0f64);
                    for &t in &times {
                        let g = bundle.cocycle.gamma_at(x, t, &ctx.opts)?;
                        let id = AlgebraElement::identity(g.dim(), g.tag());
                        cond = cond.max(g.condition_estimate());
                        let inv = g.inverse(ctx.opts.max_condition)?;
                        trip = trip.max((&(&g * &inv) - &id).norm());
                        let y = bundle.flow.flow_at(x, t, &ctx.opts)?;
                        let back = bundle.cocycle.inverse_cocycle_value(&y, t, &ctx.opts)?;
                        trip = trip.max((&(&back * &g) - &id).norm());
                    }
                    Ok((cond, trip))
                })
                .collect::<Result<_>>()?;
            Ok((
                max_of(per_point.iter().map(|p| p.0)),
                max_of(per_point.iter().map(|p| p.1)),
            ))
        });
        let split = |pick: fn((f64, f64)) -> f64| measured.clone().map(|m| (pick(m), String::new()));
        out.push(line(
            "cocycle",
            "invertibility",
            format!("{} condition", bundle.name),
            ctx.opts.max_condition,
            || split(|m| m.0),
        ));
        out.push(line(
            "cocycle",
            "invertibility",
            format!("{} round trip", bundle.name),
            1e-8,
            || split(|m| m.1),
        ));
    }
    out
}

fn generator_round_trip(ctx: &Ctx) -> Vec<CheckLine> {
    let mut cases: Vec<(String, ModelBundle, CocycleModel)> = Vec::new();
    for name in [ModelName::ConstantGenerator, ModelName::LinearContraction] {
        let b = build_default(name);
        let g = b.cocycle.generated_only().expect("generated");
        cases.push((b.name.clone(), b, g));
    }
    for n in [1, 2, 4] {
        let b = build_model(ModelName::C0, n, &ModelParams::new()).expect("valid");
        let g = b.cocycle.generated_only().expect("generated");
        cases.push((format!("c0 n={n}"), b, g));
    }
    let ell1 = build_model(ModelName::Ell1, 4, &ModelParams::new()).expect("valid");
    let derivative = derivative_cocycle(&ell1.flow, ctx.opts.fd_step);
    cases.push(("derivative cocycle of ell1 n=4".into(), ell1, derivative));

    cases
        .into_iter()
        .map(|(subject, bundle, model)| {
            line("cocycle", "generator_round_trip", subject, 1e-4, || {
                let points = samples(&bundle, 5, ctx.seed)?;
                let worst = par_max(&points, |x| {
                    let recovered = model.recover_generator(x, 0.05, &ctx.opts)?;
                    let known = model.generator_at(x).expect("generated");
                    Ok((&recovered - &known).operator_norm(known.tag()))
                })?;
                Ok((worst, "s=0.05, fd_step=1e-5".into()))
            })
        })
        .collect()
}

fn v_identity(ctx: &Ctx) -> Vec<CheckLine> {
    generated_registry()
        .into_iter()
        .map(|bundle| {
            line(
                "cocycle",
                "v_identity",
                format!("{} generated", bundle.name),
                1e-6,
                || {
                    let model = bundle.cocycle.generated_only()?;
                    let points = samples(&bundle, 5, ctx.seed)?;
                    let worst = par_max(&points, |x| {
                        let r: Result<Vec<f64>> = unit_grid()
                            .iter()
                            .map(|&(s, t)| model.v_identity_residual(x, s, t, &ctx.opts))
                            .collect();
                        Ok(max_of(r?))
                    })?;
                    Ok((worst, "5 samples, 5x5 (s,t)".into()))
                },
            )
        })
        .collect()
}

fn gronwall(ctx: &Ctx) -> Vec<CheckLine> {
    let mut out = Vec::new();
    for bundle in generated_registry() {
        let tag = bundle.cocycle.tag();
        let field_tag = bundle.flow.domain.tag;
        let model = match bundle.cocycle.generated_only() {
            Ok(m) => m,
            Err(_) => continue,
        };
        let b = |x: &[Scalar]| {
            model
                .generator_at(&VectorState::new(x.to_vec(), field_tag))
                .expect("generated")
        };
        let deficits = samples(&bundle, 10, ctx.seed).and_then(|points| {
            points
                .par_iter()
                .map(|x| {
                    let path = model.solve_cocycle(x, 3.0, &ctx.opts)?;
                    let bounds = gronwall_bound(&path, &b, tag);
                    let d: Vec<(f64, f64)> = path
                        .gamma
                        .iter()
                        .zip(&bounds)
                        .map(|(g, bound)| {
                            let deficit = g.operator_norm(tag) - bound;
                            (deficit / bound, deficit.abs())
                        })
                        .collect();
                    Ok(d)
                })
                .collect::<Result<Vec<_>>>()
        });
        let d = deficits.clone();
        out.push(line(
            "cocycle",
            "gronwall",
            format!("{} generated", bundle.name),
            BOUND_SLACK,
            move || Ok((max_of(d?.iter().flatten().map(|p| p.0)), "relative deficit, T=3".into())),
        ));
        if bundle.name == "constant_generator" {
            out.push(line(
                "cocycle",
                "gronwall",
                "constant scalar equality",
                1e-10,
                move || Ok((max_of(deficits?.iter().flatten().map(|p| p.1)), "|‖Γ‖ - bound|".into())),
            ));
        }
    }
    out
}

fn skew_product(ctx: &Ctx) -> Vec<CheckLine> {
    registry()
        .into_iter()
        .map(|bundle| {
            line("cocycle", "skew_product", bundle.name.clone(), 1e-14, || {
                let points = samples(&bundle, 10, ctx.seed)?;
                let m = bundle.cocycle.dim();
                let y = vec![Scalar::new(1.0 / m as f64, 0.0); m];
                let worst = par_max(&points, |x| {
                    let mut worst = f64::NEG_INFINITY;
                    for (s, t) in unit_grid() {
                        let ext = bundle.cocycle.extended_semigroup_residual(x, &y, s, t, &ctx.opts)?;
                        let chain = bundle.cocycle.chain_rule_residual(x, t, s, &ctx.opts)?;
                        let flow = bundle.flow.semigroup_residual(x, s, t, &ctx.opts)?;
                        let scale = bundle.cocycle.gamma_at(x, s + t, &ctx.opts)?.norm().max(1.0);
                        worst = worst.max((ext - chain - flow) / scale);
                    }
                    Ok(worst)
                })?;
                Ok((worst, "(extended - chain - flow) / scale".into()))
            })
        })
        .collect()
}

fn ratio_note(label: &str, values: &[f64]) -> (f64, f64, String) {
    let r1 = values[0] / values[1];
    let r2 = values[1] / values[2];
    let note = format!(
        "{label} at h=2e-3,1e-3,5e-4: {:.3e}, {:.3e}, {:.3e}; ratios {r1:.3}, {r2:.3}",
        values[0], values[1], values[2]
    );
    (r1, r2, note)
}

fn in_order_band(r: f64) -> bool {
    (16.0 * 0.8..=16.0 * 1.2).contains(&r)
}

fn solver_order(ctx: &Ctx) -> Vec<CheckLine> {
    generated_registry()
        .into_iter()
        .map(|bundle| {
            let measured = bundle.cocycle.generated_only().and_then(|model| {
                ORDER_STEPS
                    .iter()
                    .map(|&h| chain_rule_max(&bundle, &model, ctx.seed, &ctx.opts.with_step(h)))
                    .collect::<Result<Vec<f64>>>()
            });
            match measured {
                Ok(values) => {
                    let (r1, r2, note) = ratio_note("max chain-rule residual", &values);
                    CheckLine {
                        module: "cocycle",
                        invariant: "solver_order",
                        subject: format!("{} generated", bundle.name),
                        passed: in_order_band(r1) && in_order_band(r2),
                        measured: r2,
                        threshold: 16.0,
                        note: note + "; required 16 ± 20%",
                    }
                }
                Err(e) => line("cocycle", "solver_order", bundle.name.clone(), 16.0, || Err(e)),
            }
        })
        .collect()
}

/// Diagnostic companion of `solver_order`: the RK4 global error of the
/// generated c₀ cocycle against its closed form at `t = 1`.
fn solver_convergence(ctx: &Ctx) -> Vec<CheckLine> {
    let bundle = build_default(ModelName::C0);
    let measured = bundle.cocycle.generated_only().and_then(|model| {
        let points = samples(&bundle, CHAIN_SAMPLES, ctx.seed)?;
        ORDER_STEPS
            .iter()
            .map(|&h| {
                let opts = ctx.opts.with_step(h);
                par_max(&points, |x| {
                    let exact = bundle.cocycle.gamma_at(x, 1.0, &opts)?;
                    Ok((&model.gamma_at(x, 1.0, &opts)? - &exact).norm())
                })
            })
            .collect::<Result<Vec<f64>>>()
    });
    match measured {
        Ok(values) => {
            let (r1, r2, note) = ratio_note("global error vs closed form", &values);
            vec![CheckLine {
                module: "cocycle",
                invariant: "solver_convergence",
                subject: "c0 n=16 generated".into(),
                passed: in_order_band(r1) && in_order_band(r2),
                measured: r2,
                threshold: 16.0,
                note,
            }]
        }
        Err(e) => vec![line("cocycle", "solver_convergence", "c0", 16.0, || Err(e))],
    }
}

fn worst_case_vector(ctx: &Ctx) -> Vec<CheckLine> {
    [4usize, 8, 16, 32]
        .iter()
        .map(|&n| {
            line("models", "worst_case_vector", format!("c0 n={n}"), 1e-10, || {
                let bundle = build_model(ModelName::C0, n, &ModelParams::new())?;
                let x = bundle
                    .worst_case_vectors(1.0 - DEFAULT_RHO)
                    .pop()
                    .ok_or_else(|| Error::BadParameter("no worst-case vector".into()))?;
                let mut worst: f64 = 0.0;
                for t in [0.1, 0.5, 2.0] {
                    let g = bundle.cocycle.gamma_at(&x, t, &ctx.opts)?.get(0, 0).re;
                    let want = (1..=n).map(|k| 1.0 - (-(k as f64) * t).exp()).sum::<f64>().exp();
                    let lower = (n as f64 * (1.0 - (-t).exp())).exp();
                    if g < lower * (1.0 - 1e-12) {
                        return Ok((f64::INFINITY, format!("below exp(n(1-e^-t)) at t={t}")));
                    }
                    worst = worst.max((g - want).abs() / want);
                }
                Ok((worst, "relative error, t in {0.1, 0.5, 2}".into()))
            })
        })
        .collect()
}

fn piecewise_kink_continuity(_ctx: &Ctx) -> Vec<CheckLine> {
    [0.6f64, 0.75, 0.9]
        .iter()
        .map(|&x| {
            line("models", "piecewise_kink_continuity", format!("x={x}"), 1e-12, || {
                let kink = (2.0 * x).ln();
                let jump = (piecewise_gamma(kink * (1.0 - 1e-15), x) - piecewise_gamma(kink * (1.0 + 1e-15), x)).abs();
                let gap = 2.0 * x * (-kink).exp();
                Ok((jump, format!("unnormalised derivative gap 2|x|e^(-t*) = {gap:.15}")))
            })
        })
        .collect()
}

fn growth(ctx: &Ctx) -> Vec<CheckLine> {
    let grid: Vec<f64> = (0..=12).map(|i| i as f64 * 0.25).collect();
    generated_registry()
        .into_iter()
        .map(|bundle| {
            line("analysis", "growth", bundle.name.clone(), 0.0, || {
                let set = bundle
                    .flow
                    .domain
                    .sample_strictly_inside(bundle.sample_margin(), 30, ctx.seed)?;
                let report = growth_bound_report(&bundle, &set, &grid, GrowthConstant::OrbitSup, &ctx.opts)?;
                let tightest = report
                    .cells
                    .iter()
                    .map(|c| c.margin / c.bound)
                    .fold(f64::INFINITY, f64::min);
                Ok((
                    report.violations.len() as f64,
                    format!(
                        "K_est={:.6}, min relative margin {tightest:.3e}, 30 samples, t in [0,3]",
                        report.k_est
                    ),
                ))
            })
        })
        .collect()
}

fn lyapunov(ctx: &Ctx) -> Vec<CheckLine> {
    let mut out = Vec::new();
    for bundle in registry() {
        let reports = samples(&bundle, 5, ctx.seed).and_then(|points| {
            points
                .par_iter()
                .map(|x| lyapunov_rate(&bundle, x, &DEFAULT_LYAPUNOV_GRID, DEFAULT_EPSILON, &ctx.opts))
                .collect::<Result<Vec<_>>>()
        });
        let r = reports.clone();
        out.push(line(
            "analysis",
            "lyapunov",
            format!("{} slope - kappa", bundle.name),
            DEFAULT_EPSILON,
            move || {
                let r = r?;
                let worst = max_of(r.iter().map(|r| r.final_slope - r.kappa_ref));
                Ok((worst, format!("kappa_ref={:.6}, slope over [20, 40]", r[0].kappa_ref)))
            },
        ));
        if bundle.name == "constant_generator" {
            out.push(line(
                "analysis",
                "lyapunov",
                "constant_generator exact slope",
                1e-8,
                move || {
                    let r = reports?;
                    let worst = max_of(
                        r.iter()
                            .flat_map(|r| r.slopes.iter().map(|(_, s)| (s - r.kappa_ref).abs())),
                    );
                    Ok((worst, "(1/T) ln‖Γ_T‖ at T in {5,10,20,40}".into()))
                },
            ));
        }
    }
    out
}

fn monotone_non_uniformity(ctx: &Ctx) -> Vec<CheckLine> {
    let dims = [4usize, 8, 16, 32];
    let t = 0.1;
    let rows = dimension_sweep(
        ModelName::C0,
        &dims,
        &ModelParams::new(),
        t,
        1.0 - DEFAULT_RHO,
        CHAIN_SAMPLES,
        ctx.seed,
        &ctx.opts,
    );
    match rows {
        Ok(rows) => {
            let increasing = rows.windows(2).all(|w| w[1].modulus > w[0].modulus);
            let slack = rows
                .iter()
                .map(|r| r.modulus - c0_lower_bound(r.n, t))
                .fold(f64::INFINITY, f64::min);
            let listing: Vec<String> = rows
                .iter()
                .map(|r| format!("n={}: {:.6} >= {:.6}", r.n, r.modulus, c0_lower_bound(r.n, t)))
                .collect();
            vec![CheckLine {
                module: "analysis",
                invariant: "monotone_non_uniformity",
                subject: "c0 rho=0.5 t=0.1".into(),
                passed: increasing && slack >= 0.0,
                measured: -slack,
                threshold: 0.0,
                note: format!("strictly increasing={increasing}; {}", listing.join("; ")),
            }]
        }
        Err(e) => vec![line("analysis", "monotone_non_uniformity", "c0", 0.0, || Err(e))],
    }
}

fn kink_detection(ctx: &Ctx) -> Vec<CheckLine> {
    let bundle = build_default(ModelName::Piecewise);
    let h = ctx.opts.h;
    let grid: Vec<f64> = (1..=1000).map(|i| i as f64 * h).collect();
    [0.6f64, 0.75, 0.9]
        .iter()
        .map(|&x| {
            let state = VectorState::real(&[x], NormTag::LInf);
            match differentiability_probe(&bundle, &state, &grid, h, &ctx.opts) {
                Ok(report) => {
                    let kink = (2.0 * x).ln();
                    let located = (report.argmax_t - kink).abs() <= h;
                    let err = (report.peak_gap - 1.0).abs();
                    CheckLine {
                        module: "analysis",
                        invariant: "kink_detection",
                        subject: format!("x={x}"),
                        passed: located && err <= 5.0 * h,
                        measured: err,
                        threshold: 5.0 * h,
                        note: format!(
                            "kink {kink:.6}, grid argmax {:.6} (gap {:.4}), refined peak {} at {:.6}",
                            report.argmax_t,
                            report.max_gap,
                            format_float(report.peak_gap),
                            report.peak_t
                        ),
                    }
                }
                Err(e) => line("analysis", "kink_detection", format!("x={x}"), 5.0 * h, || Err(e)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_selects_by_substring() {
        let report = verify_suite(&VerifyOptions {
            filter: Some("unit_norm".into()),
            ..Default::default()
        });
        assert_eq!(report.lines.len(), 3);
        assert!(report.lines.iter().all(|l| l.invariant == "unit_norm"));
    }

    #[test]
    fn broken_model_fails_chain_rule() {
        let report = verify_suite(&VerifyOptions {
            filter: Some("chain_rule".into()),
            inject_broken: true,
            seed: None,
        });
        let broken: Vec<&CheckLine> = report
            .lines
            .iter()
            .filter(|l| l.subject.starts_with("broken"))
            .collect();
        assert_eq!(broken.len(), 1);
        assert!(!broken[0].passed);
        assert_eq!(report.exit_code(), 1);
    }

    #[test]
    fn names_are_unique() {
        let mut names = check_names();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), CHECKS.len());
    }
}
