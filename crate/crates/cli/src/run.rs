//! Execution of a single experiment config.
//!
//! Every run writes `summary.json` (config echo, invariant verdicts, scalar
//! metrics, or the numerical error) and, on success, `table.csv`. Column
//! order per kind:
//!
//! | kind                | columns                                                       |
//! |---------------------|---------------------------------------------------------------|
//! | `simulate`          | `t, norm_gamma, flow_norm`                                    |
//! | `chain_rule`        | `sample, s, t, residual`                                      |
//! | `recover_generator` | `i, j, recovered_re, recovered_im, known_re, known_im`        |
//! | `growth`            | `sample, t, norm, bound, margin`                              |
//! | `gronwall`          | `t, norm_gamma, bound`                                        |
//! | `lyapunov`          | `t, slope`                                                    |
//! | `continuity`        | `t, modulus`                                                  |
//! | `dimension_sweep`   | `n, modulus, lower_bound`                                     |
//! | `differentiability` | `t, gap`                                                      |

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use semicocycle::analysis::{
    continuity_modulus, differentiability_probe, dimension_sweep, gronwall_bound, growth_bound_report, lyapunov_rate,
    GrowthConstant, BOUND_SLACK, DEFAULT_EPSILON, DEFAULT_LYAPUNOV_GRID,
};
use semicocycle::models::DEFAULT_RHO;
use semicocycle::{AlgebraElement, CocycleModel, Error, ModelBundle, ModelName};

use crate::config::{ExperimentConfig, ExperimentKind, DEFAULT_UNIT_GRID};
use crate::table::Table;
use crate::HarnessError;

/// Verdict on one named invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantResult {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl InvariantResult {
    fn at_most(name: &'static str, measured: f64, threshold: f64) -> Self {
        Self {
            name,
            passed: measured <= threshold,
            measured,
            threshold,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub table: Table,
    pub invariants: Vec<InvariantResult>,
    pub metrics: Map<String, Value>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// 0 when every invariant passed, 1 otherwise or on a numerical error.
    pub exit_code: i32,
    pub summary: Value,
    pub out_dir: PathBuf,
}

/// Validate, execute and write results under `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<RunOutcome, HarnessError> {
    config.validate()?;
    let result = execute(config);
    std::fs::create_dir_all(out)?;
    let (exit_code, summary) = match result {
        Ok(bundle) => {
            bundle.table.write(&out.join("table.csv"))?;
            let passed = bundle.invariants.iter().all(|i| i.passed);
            let summary = json!({
                "config": config,
                "kind": config.kind,
                "invariants": bundle.invariants,
                "metrics": bundle.metrics,
                "columns": bundle.table.columns,
                "rows": bundle.table.len(),
                "error": Value::Null,
            });
            (if passed { 0 } else { 1 }, summary)
        }
        Err(e) => {
            let summary = json!({
                "config": config,
                "kind": config.kind,
                "invariants": [],
                "metrics": {},
                "error": e.to_string(),
            });
            (1, summary)
        }
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(out.join("summary.json"), text + "\n")?;
    Ok(RunOutcome {
        exit_code,
        summary,
        out_dir: out.to_path_buf(),
    })
}

/// Compute the table, invariants and metrics of a validated config.
pub fn execute(config: &ExperimentConfig) -> Result<ResultBundle, Error> {
    let bundle = config.model.build().map_err(|e| Error::BadParameter(e.to_string()))?;
    let cocycle = if config.generated {
        bundle.cocycle.generated_only()?
    } else {
        bundle.cocycle.clone()
    };
    match config.kind {
        ExperimentKind::Simulate => simulate(config, &bundle, &cocycle),
        ExperimentKind::ChainRule => chain_rule(config, &bundle, &cocycle),
        ExperimentKind::RecoverGenerator => recover(config, &bundle, &cocycle),
        ExperimentKind::Growth => growth(config, &bundle, &cocycle),
        ExperimentKind::Gronwall => gronwall(config, &bundle, &cocycle),
        ExperimentKind::Lyapunov => lyapunov(config, &bundle, &cocycle),
        ExperimentKind::Continuity => continuity(config, &bundle, &cocycle),
        ExperimentKind::DimensionSweep => sweep(config, &bundle),
        ExperimentKind::Differentiability => differentiability(config, &bundle, &cocycle),
    }
}

fn metrics(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn x0(config: &ExperimentConfig, bundle: &ModelBundle) -> semicocycle::VectorState {
    config.x0_state(bundle.flow.domain.tag).expect("validated")
}

fn seed(config: &ExperimentConfig) -> u64 {
    config.seed.expect("validated")
}

fn simulate(config: &ExperimentConfig, bundle: &ModelBundle, cocycle: &CocycleModel) -> Result<ResultBundle, Error> {
    let path = cocycle.solve_cocycle(&x0(config, bundle), config.t_end.expect("validated"), &config.solver)?;
    let tag = cocycle.tag();
    let mut table = Table::new(&["t", "norm_gamma", "flow_norm"]);
    for ((t, g), x) in path.times.iter().zip(&path.gamma).zip(&path.flow_states) {
        table.push(vec![(*t).into(), g.operator_norm(tag).into(), x.norm().into()]);
    }
    let identity = AlgebraElement::identity(cocycle.dim(), tag);
    let mut invariants = vec![InvariantResult::at_most(
        "identity_at_zero",
        (&path.gamma[0] - &identity).norm(),
        0.0,
    )];
    if let Some(b) = gronwall_field(cocycle) {
        let bounds = gronwall_bound(&path, &*b, tag);
        invariants.push(InvariantResult::at_most(
            "gronwall",
            relative_deficit(&path.gamma, &bounds, tag),
            BOUND_SLACK,
        ));
    }
    let last = path.final_gamma();
    Ok(ResultBundle {
        metrics: metrics(&[
            ("final_norm_gamma", json!(last.operator_norm(tag))),
            (
                "final_gamma_re",
                json!(last.entries().iter().map(|z| z.re).collect::<Vec<_>>()),
            ),
            ("steps", json!(path.times.len() - 1)),
        ]),
        table,
        invariants,
    })
}

type Field = std::sync::Arc<dyn Fn(&[semicocycle::Scalar]) -> AlgebraElement + Send + Sync>;

fn gronwall_field(cocycle: &CocycleModel) -> Option<Field> {
    if !cocycle.has_generator() {
        return None;
    }
    let model = cocycle.clone();
    let tag = cocycle.base_flow().domain.tag;
    Some(std::sync::Arc::new(move |x: &[semicocycle::Scalar]| {
        model
            .generator_at(&semicocycle::VectorState::new(x.to_vec(), tag))
            .expect("checked")
    }))
}

fn relative_deficit(gamma: &[AlgebraElement], bounds: &[f64], tag: semicocycle::NormTag) -> f64 {
    gamma
        .iter()
        .zip(bounds)
        .map(|(g, b)| (g.operator_norm(tag) - b) / b)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn chain_rule(config: &ExperimentConfig, bundle: &ModelBundle, cocycle: &CocycleModel) -> Result<ResultBundle, Error> {
    let delta = config.delta.unwrap_or_else(|| bundle.sample_margin());
    let samples = bundle
        .flow
        .domain
        .sample_strictly_inside(delta, config.sample_count(), seed(config))?;
    let s_grid = config.grids.s.clone().unwrap_or_else(|| DEFAULT_UNIT_GRID.to_vec());
    let t_grid = config.grids.t.clone().unwrap_or_else(|| DEFAULT_UNIT_GRID.to_vec());
    let rows: Vec<Vec<(f64, f64, f64)>> = samples
        .points
        .par_iter()
        .map(|x| {
            let mut out = Vec::with_capacity(s_grid.len() * t_grid.len());
            for &s in &s_grid {
                for &t in &t_grid {
                    out.push((s, t, cocycle.chain_rule_residual(x, s, t, &config.solver)?));
                }
            }
            Ok(out)
        })
        .collect::<Result<_, Error>>()?;
    let mut table = Table::new(&["sample", "s", "t", "residual"]);
    let mut worst: f64 = 0.0;
    for (i, row) in rows.iter().enumerate() {
        for &(s, t, r) in row {
            worst = worst.max(r);
            table.push(vec![i.into(), s.into(), t.into(), r.into()]);
        }
    }
    let threshold = if cocycle.has_closed_form() { 1e-10 } else { 1e-6 };
    Ok(ResultBundle {
        table,
        invariants: vec![InvariantResult::at_most("chain_rule", worst, threshold)],
        metrics: metrics(&[("max_residual", json!(worst)), ("samples", json!(samples.points.len()))]),
    })
}

fn recover(config: &ExperimentConfig, bundle: &ModelBundle, cocycle: &CocycleModel) -> Result<ResultBundle, Error> {
    let x = x0(config, bundle);
    let s = config.s.unwrap_or(0.05);
    let recovered = cocycle.recover_generator(&x, s, &config.solver)?;
    let known = bundle.cocycle.generator_at(&x);
    let mut table = Table::new(&["i", "j", "recovered_re", "recovered_im", "known_re", "known_im"]);
    let m = recovered.dim();
    for i in 0..m {
        for j in 0..m {
            let r = recovered.get(i, j);
            let k = known.as_ref().map(|k| k.get(i, j));
            table.push(vec![
                i.into(),
                j.into(),
                r.re.into(),
                r.im.into(),
                k.map_or(f64::NAN, |k| k.re).into(),
                k.map_or(f64::NAN, |k| k.im).into(),
            ]);
        }
    }
    let mut invariants = Vec::new();
    let mut error = Value::Null;
    if let (Some(k), true) = (&known, bundle.truth.is_differentiable) {
        let e = (&recovered - k).operator_norm(k.tag());
        error = json!(e);
        invariants.push(InvariantResult::at_most("generator_round_trip", e, 1e-4));
    }
    Ok(ResultBundle {
        table,
        invariants,
        metrics: metrics(&[("s", json!(s)), ("error", error)]),
    })
}

fn growth(config: &ExperimentConfig, bundle: &ModelBundle, cocycle: &CocycleModel) -> Result<ResultBundle, Error> {
    let delta = config.delta.unwrap_or_else(|| bundle.sample_margin());
    let samples = bundle
        .flow
        .domain
        .sample_strictly_inside(delta, config.sample_count(), seed(config))?;
    let t_grid = config
        .grids
        .t
        .clone()
        .unwrap_or_else(|| (0..=12).map(|i| i as f64 * 0.25).collect());
    let mut probe = bundle.clone();
    probe.cocycle = cocycle.clone();
    let report = growth_bound_report(&probe, &samples, &t_grid, GrowthConstant::OrbitSup, &config.solver)?;
    let mut table = Table::new(&["sample", "t", "norm", "bound", "margin"]);
    for c in &report.cells {
        table.push(vec![
            c.sample.into(),
            c.t.into(),
            c.norm.into(),
            c.bound.into(),
            c.margin.into(),
        ]);
    }
    Ok(ResultBundle {
        table,
        invariants: vec![InvariantResult::at_most("growth", report.violations.len() as f64, 0.0)],
        metrics: metrics(&[
            ("k_est", json!(report.k_est)),
            ("violations", json!(report.violations.len())),
            ("sample_margin", json!(report.sample_margin)),
        ]),
    })
}

fn gronwall(config: &ExperimentConfig, bundle: &ModelBundle, cocycle: &CocycleModel) -> Result<ResultBundle, Error> {
    let path = cocycle.solve_cocycle(&x0(config, bundle), config.t_end.expect("validated"), &config.solver)?;
    let tag = cocycle.tag();
    let b = gronwall_field(cocycle).ok_or(Error::NoGenerator)?;
    let bounds = gronwall_bound(&path, &*b, tag);
    let mut table = Table::new(&["t", "norm_gamma", "bound"]);
    for ((t, g), bound) in path.times.iter().zip(&path.gamma).zip(&bounds) {
        table.push(vec![(*t).into(), g.operator_norm(tag).into(), (*bound).into()]);
    }
    let relative = relative_deficit(&path.gamma, &bounds, tag);
    Ok(ResultBundle {
        table,
        invariants: vec![InvariantResult::at_most("gronwall", relative, BOUND_SLACK)],
        metrics: metrics(&[("max_relative_deficit", json!(relative))]),
    })
}

fn lyapunov(config: &ExperimentConfig, bundle: &ModelBundle, cocycle: &CocycleModel) -> Result<ResultBundle, Error> {
    let grid = config.grids.t.clone().unwrap_or_else(|| DEFAULT_LYAPUNOV_GRID.to_vec());
    let epsilon = config.epsilon.unwrap_or(DEFAULT_EPSILON);
    let mut probe = bundle.clone();
    probe.cocycle = cocycle.clone();
    let report = lyapunov_rate(&probe, &x0(config, bundle), &grid, epsilon, &config.solver)?;
    let mut table = Table::new(&["t", "slope"]);
    for &(t, slope) in &report.slopes {
        table.push(vec![t.into(), slope.into()]);
    }
    Ok(ResultBundle {
        table,
        invariants: vec![InvariantResult {
            name: "lyapunov",
            passed: report.satisfied,
            measured: report.final_slope,
            threshold: report.kappa_ref + epsilon,
        }],
        metrics: metrics(&[
            ("final_slope", json!(report.final_slope)),
            ("kappa_ref", json!(report.kappa_ref)),
            ("epsilon", json!(epsilon)),
        ]),
    })
}

fn continuity(config: &ExperimentConfig, bundle: &ModelBundle, cocycle: &CocycleModel) -> Result<ResultBundle, Error> {
    let delta = config.delta.unwrap_or_else(|| bundle.sample_margin());
    let t0 = config.t0.unwrap_or(0.0);
    let grid = config.grids.t.clone().expect("validated");
    let mut probe = bundle.clone();
    probe.cocycle = cocycle.clone();
    let report = continuity_modulus(
        &probe,
        delta,
        t0,
        &grid,
        config.sample_count(),
        seed(config),
        &config.solver,
    )?;
    let mut table = Table::new(&["t", "modulus"]);
    for &(t, m) in &report.modulus {
        table.push(vec![t.into(), m.into()]);
    }
    let at_t0: Vec<f64> = report
        .modulus
        .iter()
        .filter(|(t, _)| *t == t0)
        .map(|(_, m)| *m)
        .collect();
    let invariants = match at_t0.first() {
        Some(&m) => vec![InvariantResult::at_most("modulus_at_t0", m, 0.0)],
        None => Vec::new(),
    };
    Ok(ResultBundle {
        table,
        invariants,
        metrics: metrics(&[
            ("t0", json!(t0)),
            ("margin", json!(delta)),
            ("n", json!(report.n)),
            ("sample_count", json!(report.sample_count)),
        ]),
    })
}

/// `exp(n(1 − e^{-t})) − 1`, the lower bound carried by the c₀ worst-case vector.
pub fn c0_lower_bound(n: usize, t: f64) -> f64 {
    (n as f64 * (1.0 - (-t).exp())).exp_m1()
}

fn sweep(config: &ExperimentConfig, bundle: &ModelBundle) -> Result<ResultBundle, Error> {
    let name = config.model.name;
    let t = config.t.expect("validated");
    let dims = config.grids.dims.clone().expect("validated");
    let is_c0 = name == ModelName::C0;
    let delta = config.delta.unwrap_or_else(|| {
        if is_c0 {
            1.0 - config.model.params.get("rho").copied().unwrap_or(DEFAULT_RHO)
        } else {
            bundle.sample_margin()
        }
    });
    let rows = dimension_sweep(
        name,
        &dims,
        &config.model.params,
        t,
        delta,
        config.sample_count(),
        seed(config),
        &config.solver,
    )?;
    let mut table = Table::new(&["n", "modulus", "lower_bound"]);
    for r in &rows {
        let lower = if is_c0 { c0_lower_bound(r.n, t) } else { f64::NAN };
        table.push(vec![r.n.into(), r.modulus.into(), lower.into()]);
    }
    let mut invariants = Vec::new();
    if is_c0 && t > 0.0 {
        let increasing = rows.windows(2).all(|w| w[1].modulus > w[0].modulus);
        let slack = rows
            .iter()
            .map(|r| r.modulus - c0_lower_bound(r.n, t))
            .fold(f64::INFINITY, f64::min);
        invariants.push(InvariantResult {
            name: "monotone_non_uniformity",
            passed: increasing && slack >= 0.0,
            measured: slack,
            threshold: 0.0,
        });
    }
    Ok(ResultBundle {
        table,
        invariants,
        metrics: metrics(&[("t", json!(t)), ("margin", json!(delta))]),
    })
}

fn differentiability(
    config: &ExperimentConfig,
    bundle: &ModelBundle,
    cocycle: &CocycleModel,
) -> Result<ResultBundle, Error> {
    let h = config.probe_h.unwrap_or(config.solver.h);
    let grid = config.grids.t.clone().unwrap_or_else(|| {
        let cells = (1.0 / h).round() as usize;
        (1..=cells).map(|i| i as f64 * h).collect()
    });
    let x = x0(config, bundle);
    let mut probe = bundle.clone();
    probe.cocycle = cocycle.clone();
    let report = differentiability_probe(&probe, &x, &grid, h, &config.solver)?;
    let mut table = Table::new(&["t", "gap"]);
    for &(t, gap) in &report.gaps {
        table.push(vec![t.into(), gap.into()]);
    }
    let mut invariants = Vec::new();
    let a = x.coords()[0].re.abs();
    if bundle.name == "piecewise" && a > 0.5 {
        let kink = (2.0 * a).ln();
        if kink > grid[0] && kink < grid[grid.len() - 1] {
            invariants.push(InvariantResult {
                name: "kink_detection",
                passed: (report.argmax_t - kink).abs() <= h && (report.peak_gap - 1.0).abs() <= 5.0 * h,
                measured: (report.peak_gap - 1.0).abs(),
                threshold: 5.0 * h,
            });
        }
    }
    Ok(ResultBundle {
        table,
        invariants,
        metrics: metrics(&[
            ("h", json!(h)),
            ("argmax_t", json!(report.argmax_t)),
            ("max_gap", json!(report.max_gap)),
            ("peak_t", json!(report.peak_t)),
            ("peak_gap", json!(report.peak_gap)),
            ("ode_residual", json!(report.ode_residual)),
        ]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        let c = ExperimentConfig::from_json(text).unwrap();
        c.validate().unwrap();
        c
    }

    #[test]
    fn simulate_c0() {
        let c = config(r#"{"model":{"name":"c0","n":2},"kind":"simulate","x0":[0.25,0.0],"T":1.0}"#);
        let r = execute(&c).unwrap();
        assert_eq!(r.table.columns, ["t", "norm_gamma", "flow_norm"]);
        assert_eq!(r.table.len(), 1001);
        let last = r.metrics["final_norm_gamma"].as_f64().unwrap();
        assert!((last - (0.5 * (1.0 - (-1.0f64).exp())).exp()).abs() < 1e-6);
        assert!(r.invariants.iter().all(|i| i.passed));
    }

    #[test]
    fn sweep_two_rows() {
        let c = config(
            r#"{"model":{"name":"c0"},"kind":"dimension_sweep","seed":3,"t":0.1,"grids":{"dims":[4,8]},"samples":5}"#,
        );
        let r = execute(&c).unwrap();
        assert_eq!(r.table.len(), 2);
        assert!(r.invariants[0].passed);
    }

    #[test]
    fn piecewise_kink() {
        let c = config(r#"{"model":{"name":"piecewise"},"kind":"differentiability","x0":[0.75]}"#);
        let r = execute(&c).unwrap();
        assert_eq!(r.table.len(), 1000);
        assert!(r.invariants[0].passed, "{:?}", r.invariants);
    }

    #[test]
    fn each_kind_runs() {
        let cases = [
            r#"{"model":{"name":"c0","n":4},"kind":"chain_rule","seed":1,"samples":3}"#,
            r#"{"model":{"name":"c0","n":4},"kind":"chain_rule","seed":1,"samples":2,"generated":true}"#,
            r#"{"model":{"name":"c0","n":2},"kind":"recover_generator","x0":[0.25,0.1]}"#,
            r#"{"model":{"name":"linear_contraction"},"kind":"growth","seed":1,"samples":4}"#,
            r#"{"model":{"name":"constant_generator"},"kind":"gronwall","x0":[0.2],"T":2.0}"#,
            r#"{"model":{"name":"ell1","n":4},"kind":"lyapunov","x0":[0.1,0.1,0.1,0.1]}"#,
            r#"{"model":{"name":"c0","n":8},"kind":"continuity","seed":2,"grids":{"t":[0.0,0.1,0.2]}}"#,
        ];
        for text in cases {
            let r = execute(&config(text)).unwrap();
            assert!(!r.table.is_empty());
            assert!(r.invariants.iter().all(|i| i.passed), "{text}: {:?}", r.invariants);
        }
    }
}
