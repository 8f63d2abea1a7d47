//! Numerical probes of the quantitative statements about semicocycles:
//! exponential growth bounds from `μ(B)`, Grönwall estimates along paths,
//! Lyapunov rates near an attracting fixed point, continuity moduli and
//! differentiability in `t`.
//!
//! Probes report measurements; they never decide a continuity class.
//! Per-sample work runs on rayon and is collected in sample order, so every
//! report is deterministic.

use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{AlgebraElement, NormTag, Scalar};
use crate::cocycle::{CocycleModel, CocyclePath};
use crate::error::{Error, Result};
use crate::flow::{SampleSet, VectorState};
use crate::models::{build_model, ModelBundle, ModelName, ModelParams};
use crate::ode::running_simpson;
use crate::options::SolverOptions;

/// Relative slack of the growth and Grönwall comparisons.
pub const BOUND_SLACK: f64 = 1e-6;

/// Where the growth constant `K` is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GrowthConstant {
    /// sup of `μ(B)` over the samples and their forward orbits on `[0, max t]`
    OrbitSup,
    /// sup of `μ(B)` over the sample points only
    SampleSup,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCell {
    pub sample: usize,
    pub t: f64,
    pub norm: f64,
    pub bound: f64,
    /// `e^{Kt} − ‖Γ_t(x)‖`
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub k_est: f64,
    pub cells: Vec<GrowthCell>,
    pub violations: Vec<GrowthCell>,
    pub sample_count: usize,
    pub sample_margin: f64,
    pub seed: u64,
}

/// Check `‖Γ_t(x)‖ ≤ e^{Kt}` on every (sample, t) cell.
///
/// A cell is a violation when `‖Γ_t(x)‖ > e^{Kt}(1 + 1e-6)`. Violations
/// are reported, not raised, so samples outside an invariant set can be
/// probed on purpose.
pub fn growth_bound_report(
    bundle: &ModelBundle,
    samples: &SampleSet,
    t_grid: &[f64],
    constant: GrowthConstant,
    opts: &SolverOptions,
) -> Result<GrowthReport> {
    let cocycle = &bundle.cocycle;
    if !cocycle.has_generator() {
        return Err(Error::NoGenerator);
    }
    let tag = cocycle.tag();
    let mu = |x: &VectorState| cocycle.generator_at(x).expect("checked").log_norm(tag);
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);

    let k_est = match constant {
        GrowthConstant::Fixed(k) => k,
        GrowthConstant::SampleSup => samples.points.iter().map(mu).fold(f64::NEG_INFINITY, f64::max),
        GrowthConstant::OrbitSup => {
            let per_sample: Vec<f64> = samples
                .points
                .par_iter()
                .map(|x| -> Result<f64> {
                    let orbit = bundle.flow.evolve(x, t_max, opts)?;
                    Ok(orbit.states.iter().map(mu).fold(f64::NEG_INFINITY, f64::max))
                })
                .collect::<Result<_>>()?;
            per_sample.into_iter().fold(f64::NEG_INFINITY, f64::max)
        }
    };
    if !k_est.is_finite() {
        return Err(Error::NonFinite { t: 0.0 });
    }

    let rows: Vec<Vec<GrowthCell>> = samples
        .points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            t_grid
                .iter()
                .map(|&t| {
                    let norm = cocycle.gamma_at(x, t, opts)?.operator_norm(tag);
                    let bound = (k_est * t).exp();
                    Ok(GrowthCell {
                        sample: i,
                        t,
                        norm,
                        bound,
                        margin: bound - norm,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let cells: Vec<GrowthCell> = rows.into_iter().flatten().collect();
    let violations = cells
        .iter()
        .filter(|c| c.norm > c.bound * (1.0 + BOUND_SLACK))
        .cloned()
        .collect();
    Ok(GrowthReport {
        k_est,
        cells,
        violations,
        sample_count: samples.points.len(),
        sample_margin: samples.margin,
        seed: samples.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallReport {
    /// max over nodes of `‖Γ_{t_i}‖ − exp(∫₀^{t_i} μ(B(F_s x)) ds)`
    pub max_deficit: f64,
    /// the same deficit divided by the bound
    pub max_relative_deficit: f64,
}

/// `exp(∫₀^{t_i} μ(B(F_s(x))) ds)` at every node of `path`, the integral by
/// Simpson on the path grid.
pub fn gronwall_bound(path: &CocyclePath, b: &dyn Fn(&[Scalar]) -> AlgebraElement, tag: NormTag) -> Vec<f64> {
    let mu: Vec<f64> = path.flow_states.iter().map(|x| b(x.coords()).log_norm(tag)).collect();
    running_simpson(&mu, path.step()).into_iter().map(f64::exp).collect()
}

/// Compare a solved path against its Grönwall bound.
pub fn gronwall_check(path: &CocyclePath, b: &dyn Fn(&[Scalar]) -> AlgebraElement, tag: NormTag) -> GronwallReport {
    let mut report = GronwallReport {
        max_deficit: f64::NEG_INFINITY,
        max_relative_deficit: f64::NEG_INFINITY,
    };
    for (g, bound) in path.gamma.iter().zip(gronwall_bound(path, b, tag)) {
        let deficit = g.operator_norm(tag) - bound;
        report.max_deficit = report.max_deficit.max(deficit);
        report.max_relative_deficit = report.max_relative_deficit.max(deficit / bound);
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    /// `(T, (1/T) ln ‖Γ_T(x)‖)`
    pub slopes: Vec<(f64, f64)>,
    /// slope of `ln ‖Γ_t(x)‖` over the last grid segment
    pub final_slope: f64,
    pub kappa_ref: f64,
    pub epsilon: f64,
    pub satisfied: bool,
}

pub const DEFAULT_LYAPUNOV_GRID: [f64; 4] = [5.0, 10.0, 20.0, 40.0];
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Growth rate of `Γ_t(x)` against `κ(B(x₀))` at the attracting fixed point.
///
/// The limsup is approximated by the slope of `ln ‖Γ_t(x)‖` over the last
/// segment of `t_grid`. Without a generator the registry's known index is
/// used as the reference.
pub fn lyapunov_rate(
    bundle: &ModelBundle,
    x: &VectorState,
    t_grid: &[f64],
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<LyapunovReport> {
    let x0 = bundle.flow.fixed_point().ok_or(Error::NoFixedPoint)?;
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] > 0.0) {
        return Err(Error::BadParameter(
            "Lyapunov grid needs two or more increasing positive times".into(),
        ));
    }
    let kappa_ref = match bundle.cocycle.generator_at(x0) {
        Some(b) => b.lyapunov_index(opts)?,
        None => bundle.truth.known_kappa.ok_or(Error::NoGenerator)?,
    };
    let tag = bundle.cocycle.tag();
    let logs: Vec<f64> = t_grid
        .iter()
        .map(|&t| Ok(bundle.cocycle.gamma_at(x, t, opts)?.operator_norm(tag).ln()))
        .collect::<Result<_>>()?;
    let slopes: Vec<(f64, f64)> = t_grid.iter().zip(&logs).map(|(&t, l)| (t, l / t)).collect();
    let k = t_grid.len() - 1;
    let final_slope = (logs[k] - logs[k - 1]) / (t_grid[k] - t_grid[k - 1]);
    Ok(LyapunovReport {
        slopes,
        final_slope,
        kappa_ref,
        epsilon,
        satisfied: final_slope <= kappa_ref + epsilon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityProbeReport {
    pub t0: f64,
    /// `(t, sup_x ‖Γ_t(x) − Γ_{t0}(x)‖)`
    pub modulus: Vec<(f64, f64)>,
    pub margin: f64,
    pub n: usize,
    pub sample_count: usize,
}

fn sup_modulus(
    cocycle: &CocycleModel,
    points: &[VectorState],
    t0: f64,
    t_grid: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<(f64, f64)>> {
    let tag = cocycle.tag();
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|x| {
            let base = cocycle.gamma_at(x, t0, opts)?;
            t_grid
                .iter()
                .map(|&t| {
                    if t == t0 {
                        return Ok(0.0);
                    }
                    Ok((&cocycle.gamma_at(x, t, opts)? - &base).operator_norm(tag))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| (t, rows.iter().map(|r| r[j]).fold(0.0, f64::max)))
        .collect())
}

/// `sup ‖Γ_t(x) − Γ_{t0}(x)‖` over `count` seeded points at least `delta`
/// inside the domain, plus the model's worst-case vectors.
pub fn continuity_modulus(
    bundle: &ModelBundle,
    delta: f64,
    t0: f64,
    t_grid: &[f64],
    count: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<ContinuityProbeReport> {
    let mut points = bundle.flow.domain.sample_strictly_inside(delta, count, seed)?.points;
    points.extend(bundle.worst_case_vectors(delta));
    Ok(ContinuityProbeReport {
        t0,
        modulus: sup_modulus(&bundle.cocycle, &points, t0, t_grid, opts)?,
        margin: delta,
        n: bundle.truth.n,
        sample_count: points.len(),
    })
}

/// Modulus restricted to the ball of `radius` around `center`, probed with
/// seeded points and the direction of the last coordinate.
#[allow(clippy::too_many_arguments)]
pub fn local_modulus(
    bundle: &ModelBundle,
    center: &VectorState,
    radius: f64,
    t0: f64,
    t_grid: &[f64],
    count: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<ContinuityProbeReport> {
    let n = center.dim();
    let tag = center.tag();
    let unit = crate::flow::DomainDescriptor::whole_space(tag, n)?.sample_strictly_inside(1.0, count, seed)?;
    let mut points: Vec<VectorState> = unit.points.iter().map(|u| center.offset(radius, u.coords())).collect();
    points.push(center.offset(radius, VectorState::basis(n, n - 1, 1.0, tag).coords()));
    for p in &points {
        if !bundle.flow.domain.contains(p) {
            return Err(Error::LeftDomain { t: 0.0 });
        }
    }
    Ok(ContinuityProbeReport {
        t0,
        modulus: sup_modulus(&bundle.cocycle, &points, t0, t_grid, opts)?,
        margin: bundle.flow.domain.boundary_distance(center) - radius,
        n,
        sample_count: points.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub modulus: f64,
}

/// Continuity modulus at `t` (from `t0 = 0`) for each truncation dimension.
#[allow(clippy::too_many_arguments)]
pub fn dimension_sweep(
    model: ModelName,
    dims: &[usize],
    params: &ModelParams,
    t: f64,
    delta: f64,
    count: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Vec<SweepRow>> {
    if dims.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadParameter("dimension list must be increasing".into()));
    }
    dims.iter()
        .map(|&n| {
            let bundle = build_model(model, n, params)?;
            let report = continuity_modulus(&bundle, delta, 0.0, &[t], count, seed, opts)?;
            Ok(SweepRow {
                n,
                modulus: report.modulus[0].1,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferentiabilityReport {
    pub h: f64,
    /// `(t, ‖forward difference − backward difference‖)` for grid times `t ≥ h`
    pub gaps: Vec<(f64, f64)>,
    pub argmax_t: f64,
    pub max_gap: f64,
    /// maximiser of the gap as a function of continuous `t` near `argmax_t`
    pub peak_t: f64,
    pub peak_gap: f64,
    /// max of `‖dΓ/dt − B(F_t x)Γ_t(x)‖` (central difference), when `B` exists
    pub ode_residual: Option<f64>,
}

/// One-sided difference quotients of `t ↦ Γ_t(x)` with step `h`.
///
/// Grid times below `h` are skipped. The largest gap is then localised
/// within the neighbouring cells by golden-section search, which recovers the
/// jump of a kink lying between grid nodes.
pub fn differentiability_probe(
    bundle: &ModelBundle,
    x: &VectorState,
    t_grid: &[f64],
    h: f64,
    opts: &SolverOptions,
) -> Result<DifferentiabilityReport> {
    if !(h > 0.0) {
        return Err(Error::BadParameter(format!("difference step h = {h} must be positive")));
    }
    let cocycle = &bundle.cocycle;
    let tag = cocycle.tag();
    let gamma = |t: f64| cocycle.gamma_at(x, t, opts);
    let gap = |t: f64| -> Result<f64> {
        let (prev, here, next) = (gamma(t - h)?, gamma(t)?, gamma(t + h)?);
        let forward = &next - &here;
        let backward = &here - &prev;
        Ok((&forward - &backward).operator_norm(tag) / h)
    };

    let times: Vec<f64> = t_grid.iter().copied().filter(|&t| t >= h).collect();
    if times.is_empty() {
        return Err(Error::BadParameter("no grid time is at least h".into()));
    }
    let gaps: Vec<(f64, f64)> = times.par_iter().map(|&t| Ok((t, gap(t)?))).collect::<Result<_>>()?;
    let (argmax_t, max_gap) =
        gaps.iter().copied().fold(
            (times[0], f64::NEG_INFINITY),
            |best, c| if c.1 > best.1 { c } else { best },
        );

    let lo = (argmax_t - h).max(h);
    let hi = argmax_t + h;
    let (mut peak_t, mut peak_gap) = golden_max(&gap, lo, hi)?;
    if max_gap > peak_gap {
        peak_t = argmax_t;
        peak_gap = max_gap;
    }

    let ode_residual = match cocycle.has_generator() {
        false => None,
        true => {
            let residuals: Vec<f64> = times
                .par_iter()
                .map(|&t| {
                    let derivative = (&gamma(t + h)? - &gamma(t - h)?).scale(Scalar::new(0.5 / h, 0.0));
                    let moved = bundle.flow.flow_at(x, t, opts)?;
                    let rhs = &cocycle.generator_at(&moved).expect("checked") * &gamma(t)?;
                    Ok((&derivative - &rhs).operator_norm(tag))
                })
                .collect::<Result<_>>()?;
            Some(residuals.into_iter().fold(0.0, f64::max))
        }
    };

    Ok(DifferentiabilityReport {
        h,
        gaps,
        argmax_t,
        max_gap,
        peak_t,
        peak_gap,
        ode_residual,
    })
}

fn golden_max(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..80 {
        if (b - a).abs() <= 1e-12 * b.abs().max(1.0) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::MatrixField;
    use crate::models::build_default;
    use std::sync::Arc;

    fn tv(t: f64) -> Scalar {
        Scalar::new(t, 0.0)
    }

    #[test]
    fn growth_constant_generator_is_tight() {
        let bundle = build_default(ModelName::ConstantGenerator);
        let opts = SolverOptions::default();
        let samples = bundle.flow.domain.sample_strictly_inside(0.1, 5, 1).unwrap();
        let grid: Vec<f64> = (0..=6).map(|i| i as f64 * 0.5).collect();
        let report = growth_bound_report(&bundle, &samples, &grid, GrowthConstant::OrbitSup, &opts).unwrap();
        assert_eq!(report.k_est, -2.0);
        assert!(report.violations.is_empty());
        for c in &report.cells {
            assert!((c.norm - (-2.0 * c.t).exp()).abs() <= 1e-8);
        }
    }

    #[test]
    fn growth_c0_on_invariant_ball() {
        let bundle = build_model(ModelName::C0, 2, &ModelParams::new()).unwrap();
        let opts = SolverOptions::default();
        let samples = bundle.flow.domain.sample_strictly_inside(0.6, 30, 7).unwrap();
        let grid: Vec<f64> = (0..=6).map(|i| i as f64 * 0.5).collect();
        let report = growth_bound_report(&bundle, &samples, &grid, GrowthConstant::SampleSup, &opts).unwrap();
        let oracle = samples
            .points
            .iter()
            .map(|x| {
                let (a, b) = (x.coords()[0].re / 0.5, x.coords()[1].re / 0.5);
                a + 2.0 * b * b
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((report.k_est - oracle).abs() < 1e-14);
        let report = growth_bound_report(&bundle, &samples, &grid, GrowthConstant::OrbitSup, &opts).unwrap();
        assert!(report.violations.is_empty());
    }

    #[test]
    fn growth_flags_rather_than_errors() {
        // B = −0.8e^{-t} along the orbit of (−0.4, 0): its value at the sample
        // underestimates the growth
        let bundle = build_model(ModelName::C0, 2, &ModelParams::new()).unwrap();
        let samples = SampleSet {
            points: vec![VectorState::real(&[-0.4, 0.0], NormTag::LInf)],
            margin: 0.6,
            seed: 0,
        };
        let grid = [1.0, 2.0, 3.0];
        let opts = SolverOptions::default();
        let report = growth_bound_report(&bundle, &samples, &grid, GrowthConstant::SampleSup, &opts).unwrap();
        assert!(!report.violations.is_empty());
        let ok = growth_bound_report(&bundle, &samples, &grid, GrowthConstant::OrbitSup, &opts).unwrap();
        assert!(ok.violations.is_empty());
    }

    #[test]
    fn growth_needs_generator() {
        let bundle = build_default(ModelName::Piecewise);
        let samples = bundle.flow.domain.sample_strictly_inside(0.1, 3, 1).unwrap();
        let r = growth_bound_report(
            &bundle,
            &samples,
            &[1.0],
            GrowthConstant::OrbitSup,
            &SolverOptions::default(),
        );
        assert_eq!(r.unwrap_err(), Error::NoGenerator);
    }

    #[test]
    fn gronwall_examples() {
        let opts = SolverOptions::default();
        let bundle = build_default(ModelName::ConstantGenerator);
        let x = VectorState::real(&[0.3], NormTag::L2);
        let model = bundle.cocycle.generated_only().unwrap();
        let path = model.solve_cocycle(&x, 3.0, &opts).unwrap();
        let b = |_x: &[Scalar]| AlgebraElement::scalar(tv(-2.0), NormTag::L2);
        assert!(gronwall_check(&path, &b, NormTag::L2).max_deficit.abs() <= 1e-10);

        for tag in NormTag::ALL {
            let bundle = build_default(ModelName::LinearContraction);
            let model = bundle.cocycle.generated_only().unwrap();
            let x = VectorState::real(&[0.3, -0.2], NormTag::L2);
            let path = model.solve_cocycle(&x, 2.0, &opts).unwrap();
            let b = |_x: &[Scalar]| AlgebraElement::identity(2, tag).scale(tv(-1.0));
            assert!(gronwall_check(&path, &b, tag).max_deficit <= 1e-10);
        }

        let rotation: MatrixField = Arc::new(|_x: &[Scalar]| {
            AlgebraElement::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]], NormTag::L2).unwrap()
        });
        let bundle = build_default(ModelName::LinearContraction);
        let model = CocycleModel::generated(bundle.flow.clone(), 2, NormTag::L2, rotation.clone());
        let path = model
            .solve_cocycle(&VectorState::real(&[0.1, 0.1], NormTag::L2), 5.0, &opts)
            .unwrap();
        let report = gronwall_check(&path, &*rotation, NormTag::L2);
        assert!(report.max_deficit <= 1e-8);
        assert!(report.max_deficit >= -1e-8);
    }

    fn affine_bundle() -> ModelBundle {
        // B(x) = −0.5 + x₁ over e^{-t}x: Γ_t = exp(−0.5t + x₁(1 − e^{-t}))
        let mut bundle = build_default(ModelName::ConstantGenerator);
        let generator: MatrixField = Arc::new(|x: &[Scalar]| AlgebraElement::scalar(tv(-0.5) + x[0], NormTag::L2));
        bundle.cocycle = CocycleModel::generated(bundle.flow.clone(), 1, NormTag::L2, generator);
        bundle.truth.known_kappa = Some(-0.5);
        bundle
    }

    #[test]
    fn lyapunov_examples() {
        let opts = SolverOptions::default();
        let bundle = affine_bundle();
        let x = VectorState::real(&[0.5], NormTag::L2);
        let grid = [2.0, 4.0, 6.0];
        let report = lyapunov_rate(&bundle, &x, &grid, DEFAULT_EPSILON, &opts).unwrap();
        assert!((report.kappa_ref + 0.5).abs() < 1e-3);
        assert!(report.satisfied);
        for &(t, slope) in &report.slopes {
            let oracle = -0.5 + 0.5 * (1.0 - (-t).exp()) / t;
            assert!((slope - oracle).abs() < 1e-8, "t={t}");
        }

        let bundle = build_default(ModelName::ConstantGenerator);
        let report = lyapunov_rate(&bundle, &x, &DEFAULT_LYAPUNOV_GRID, DEFAULT_EPSILON, &opts).unwrap();
        for &(_, slope) in &report.slopes {
            assert!((slope + 2.0).abs() < 1e-12);
        }
        assert!((report.kappa_ref + 2.0).abs() < 1e-3);

        let bundle = build_default(ModelName::LinearContraction);
        let x = VectorState::real(&[0.3, 0.1], NormTag::L2);
        let report = lyapunov_rate(&bundle, &x, &DEFAULT_LYAPUNOV_GRID, DEFAULT_EPSILON, &opts).unwrap();
        assert!((report.final_slope + 1.0).abs() < 1e-10);
        assert!((report.kappa_ref + 1.0).abs() < 1e-3);
        assert!(report.satisfied);
    }

    #[test]
    fn lyapunov_needs_fixed_point() {
        let mut bundle = build_default(ModelName::ConstantGenerator);
        bundle.flow = bundle.flow.generator_only();
        let flow = crate::flow::FlowModel::new(
            bundle.flow.domain,
            Arc::new(|x: &[Scalar]| x.iter().map(|_| tv(1.0)).collect()),
        );
        bundle.flow = flow;
        let x = VectorState::real(&[0.1], NormTag::L2);
        let r = lyapunov_rate(&bundle, &x, &[1.0, 2.0], 0.05, &SolverOptions::default());
        assert_eq!(r.unwrap_err(), Error::NoFixedPoint);
    }

    #[test]
    fn continuity_examples() {
        let opts = SolverOptions::default();
        let bundle = build_default(ModelName::ConstantGenerator);
        let grid = [0.0, 0.1, 0.5, 1.0];
        let report = continuity_modulus(&bundle, 0.1, 0.0, &grid, 10, 3, &opts).unwrap();
        for &(t, m) in &report.modulus {
            assert!((m - (1.0 - (-2.0 * t).exp())).abs() < 1e-15);
        }
        assert_eq!(report.modulus[0].1, 0.0);

        let bundle = build_model(ModelName::C0, 10, &ModelParams::new()).unwrap();
        let report = continuity_modulus(&bundle, 0.5, 0.0, &[0.1], 20, 3, &opts).unwrap();
        let lower = (1..=10).map(|k| 1.0 - (-0.1 * k as f64).exp()).sum::<f64>().exp() - 1.0;
        assert!(report.modulus[0].1 >= lower * (1.0 - 1e-12));
    }

    #[test]
    fn ell1_local_modulus_grows_with_dimension() {
        let opts = SolverOptions::default();
        let (eps, t) = (0.1, 0.5);
        let mut last = 0.0;
        for n in [2, 4, 8, 16] {
            let bundle = build_model(ModelName::Ell1, n, &ModelParams::new()).unwrap();
            let center = VectorState::zeros(n, NormTag::L1);
            let report = local_modulus(&bundle, &center, eps, 0.0, &[t], 10, 5, &opts).unwrap();
            let m = report.modulus[0].1;
            assert!(m > last);
            assert!((m - (eps * (1.0 - (-(n as f64) * t).exp())).exp_m1()).abs() < 1e-15);
            last = m;
        }
        // γ_t(x + εeₙ) − γ_t(x) = ε(1 − e^{-nt}) along the probe direction
        let n = 16;
        let bundle = build_model(ModelName::Ell1, n, &ModelParams::new()).unwrap();
        let x = VectorState::real(&vec![0.01; n], NormTag::L1);
        let probe = x.offset(eps, VectorState::basis(n, n - 1, 1.0, NormTag::L1).coords());
        let g = |y: &VectorState| bundle.cocycle.gamma_at(y, t, &opts).unwrap().get(0, 0).re.ln();
        assert!((g(&probe) - g(&x) - eps * (1.0 - (-(n as f64) * t).exp())).abs() < 1e-15);
    }

    #[test]
    fn sweep_examples() {
        let opts = SolverOptions::default();
        let rows = dimension_sweep(ModelName::C0, &[4, 8, 16], &ModelParams::new(), 0.1, 0.5, 10, 9, &opts).unwrap();
        let step = 1.0 - (-0.1f64).exp();
        assert!((step - 0.09516).abs() < 1e-5);
        for w in rows.windows(2) {
            assert!(w[1].modulus > w[0].modulus);
        }
        for r in &rows {
            assert!(r.modulus >= (r.n as f64 * step).exp() - 1.0);
        }
        let zero = dimension_sweep(ModelName::C0, &[4, 8, 16], &ModelParams::new(), 0.0, 0.5, 10, 9, &opts).unwrap();
        assert!(zero.iter().all(|r| r.modulus == 0.0));
        let flat = dimension_sweep(
            ModelName::ConstantGenerator,
            &[1, 2, 3],
            &ModelParams::new(),
            0.3,
            0.1,
            5,
            9,
            &opts,
        )
        .unwrap();
        assert!(flat.iter().all(|r| r.modulus == flat[0].modulus));
    }

    #[test]
    fn piecewise_kink_is_localised() {
        let opts = SolverOptions::default();
        let bundle = build_default(ModelName::Piecewise);
        let h = 1e-3;
        let grid: Vec<f64> = (1..=1000).map(|i| i as f64 * h).collect();
        for x in [0.6f64, 0.75, 0.9] {
            let state = VectorState::real(&[x], NormTag::LInf);
            let report = differentiability_probe(&bundle, &state, &grid, h, &opts).unwrap();
            let kink = (2.0 * x).ln();
            assert!((report.argmax_t - kink).abs() <= h, "x={x}");
            assert!((report.peak_gap - 1.0).abs() <= 5.0 * h);
            assert!((report.peak_t - kink).abs() <= h);
            assert!(report.ode_residual.is_none());
            // smooth away from the kink
            let far = report.gaps.iter().filter(|(t, _)| (t - kink).abs() > 2.0 * h);
            assert!(far.map(|g| g.1).fold(0.0, f64::max) <= 2.0 * h);
        }
    }

    #[test]
    fn smooth_models_have_small_gaps() {
        let opts = SolverOptions::default();
        let h = 1e-4;
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let bundle = build_default(ModelName::ConstantGenerator);
        let x = VectorState::real(&[0.3], NormTag::L2);
        let report = differentiability_probe(&bundle, &x, &grid, h, &opts).unwrap();
        assert!(report.max_gap <= 10.0 * h);
        assert!(report.ode_residual.unwrap() <= 1e-6);

        let bundle = build_model(ModelName::C0, 2, &ModelParams::new()).unwrap();
        let x = VectorState::real(&[0.25, 0.1], NormTag::LInf);
        let report = differentiability_probe(&bundle, &x, &grid, h, &opts).unwrap();
        assert!(report.ode_residual.unwrap() <= 1e-5);
    }
}
