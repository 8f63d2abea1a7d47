//! Registry of explicit flows and semicocycles with their known
//! classification, used as ground truth by the analysis layer and the tests.
//!
//! All five base flows contract to the fixed point `0`. Real examples live in
//! the complex framework with zero imaginary parts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, NormTag, Scalar};
use crate::cocycle::{CocycleMap, CocycleModel, MatrixField};
use crate::error::{Error, Result};
use crate::flow::{DomainDescriptor, FlowModel, VectorState};

/// Named real parameters, e.g. `rho` for c₀ and `b` for the constant generator.
pub type ModelParams = BTreeMap<String, f64>;

pub const DEFAULT_RHO: f64 = 0.5;
pub const DEFAULT_B: f64 = -2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Ell1,
    C0,
    Piecewise,
    LinearContraction,
    ConstantGenerator,
}

impl ModelName {
    pub const ALL: [ModelName; 5] = [
        ModelName::Ell1,
        ModelName::C0,
        ModelName::Piecewise,
        ModelName::LinearContraction,
        ModelName::ConstantGenerator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Ell1 => "ell1",
            ModelName::C0 => "c0",
            ModelName::Piecewise => "piecewise",
            ModelName::LinearContraction => "linear_contraction",
            ModelName::ConstantGenerator => "constant_generator",
        }
    }

    pub fn default_dim(self) -> usize {
        match self {
            ModelName::Ell1 | ModelName::C0 => 16,
            ModelName::LinearContraction => 2,
            ModelName::Piecewise | ModelName::ConstantGenerator => 1,
        }
    }

    /// Parameter keys accepted by [`build_model`].
    pub fn param_keys(self) -> &'static [&'static str] {
        match self {
            ModelName::C0 => &["rho"],
            ModelName::ConstantGenerator => &["b"],
            _ => &[],
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

/// Known classification of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub is_t_continuous: bool,
    pub is_ujc: bool,
    pub is_differentiable: bool,
    pub known_b: Option<String>,
    /// Lyapunov index of the generator at the fixed point.
    pub known_kappa: Option<f64>,
    pub n: usize,
    pub params: ModelParams,
}

#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub name: String,
    pub flow: FlowModel,
    pub cocycle: CocycleModel,
    pub truth: Truth,
}

impl ModelBundle {
    /// Vectors on which uniformity is known to fail, kept if they sit at
    /// least `delta` inside the domain. For c₀ this is `x⁽ⁿ⁾ = (ρ, …, ρ)`;
    /// for ℓ¹ the last coordinate direction `(1 − δ)·eₙ`.
    pub fn worst_case_vectors(&self, delta: f64) -> Vec<VectorState> {
        let n = self.truth.n;
        let domain = &self.flow.domain;
        let candidates = match self.name.as_str() {
            "c0" => {
                let rho = self.truth.params["rho"];
                vec![VectorState::real(&vec![rho; n], domain.tag)]
            }
            "ell1" => vec![VectorState::basis(n, n - 1, 1.0 - delta, domain.tag)],
            _ => Vec::new(),
        };
        candidates
            .into_iter()
            .filter(|x| domain.boundary_distance(x) >= delta - 1e-12)
            .collect()
    }

    /// Margin of the declared invariant set `{x : dist(x, ∂D) ≥ δ}`.
    pub fn sample_margin(&self) -> f64 {
        self.flow.invariant_margin().unwrap_or(0.1)
    }
}

pub fn build_default(name: ModelName) -> ModelBundle {
    build_model(name, name.default_dim(), &ModelParams::new()).expect("defaults are valid")
}

pub fn build_model(name: ModelName, n: usize, params: &ModelParams) -> Result<ModelBundle> {
    if n < 1 {
        return Err(Error::BadParameter("dimension n must be at least 1".into()));
    }
    for key in params.keys() {
        if !name.param_keys().contains(&key.as_str()) {
            return Err(Error::BadParameter(format!("model {name} has no parameter {key:?}")));
        }
    }
    let bundle = match name {
        ModelName::Ell1 => ell1(n)?,
        ModelName::C0 => {
            let rho = params.get("rho").copied().unwrap_or(DEFAULT_RHO);
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::BadParameter(format!("rho = {rho} must lie in (0, 1)")));
            }
            c0(n, rho)?
        }
        ModelName::Piecewise => piecewise()?,
        ModelName::LinearContraction => linear_contraction(n)?,
        ModelName::ConstantGenerator => {
            let b = params.get("b").copied().unwrap_or(DEFAULT_B);
            if !b.is_finite() {
                return Err(Error::BadParameter(format!("b = {b} must be finite")));
            }
            constant_generator(n, b)?
        }
    };
    Ok(bundle)
}

fn real(v: f64) -> Scalar {
    Scalar::new(v, 0.0)
}

/// `F_t(x) = e^{-t}x` on the unit ball, generator `-x`, Jacobian `-I`.
fn uniform_contraction(n: usize, tag: NormTag) -> Result<FlowModel> {
    let domain = DomainDescriptor::ball(1.0, tag, n)?;
    FlowModel::new(domain, Arc::new(|x: &[Scalar]| x.iter().map(|z| -z).collect()))
        .with_closed_form(
            Arc::new(|t: f64, x: &[Scalar]| x.iter().map(|z| z * (-t).exp()).collect()),
            true,
        )
        .with_jacobian(Arc::new(move |_x: &[Scalar]| {
            AlgebraElement::identity(n, tag).scale(real(-1.0))
        }))
        .with_fixed_point(VectorState::zeros(n, tag))
}

fn scalar_map(tag: NormTag, f: impl Fn(f64, &[Scalar]) -> Scalar + Send + Sync + 'static) -> CocycleMap {
    Arc::new(move |t, x| Ok(AlgebraElement::scalar(f(t, x), tag)))
}

/// ℓ¹ model: `F_t(x)_k = e^{-kt}x_k`, `Γ_t(x) = exp(Σ x_k(1 − e^{-kt}))`.
fn ell1(n: usize) -> Result<ModelBundle> {
    let tag = NormTag::L1;
    let domain = DomainDescriptor::ball(1.0, tag, n)?;
    let flow = FlowModel::new(
        domain,
        Arc::new(|x: &[Scalar]| x.iter().enumerate().map(|(k, z)| -(k as f64 + 1.0) * z).collect()),
    )
    .with_closed_form(
        Arc::new(|t: f64, x: &[Scalar]| {
            x.iter()
                .enumerate()
                .map(|(k, z)| z * (-(k as f64 + 1.0) * t).exp())
                .collect()
        }),
        true,
    )
    .with_jacobian(Arc::new(move |_x: &[Scalar]| {
        let d: Vec<Scalar> = (1..=n).map(|k| real(-(k as f64))).collect();
        AlgebraElement::diag(&d, tag)
    }))
    .with_fixed_point(VectorState::zeros(n, tag))?
    .with_invariant_margin(0.1);
    let map = scalar_map(tag, |t, x| {
        let gamma: Scalar = x
            .iter()
            .enumerate()
            .map(|(k, z)| z * (1.0 - (-(k as f64 + 1.0) * t).exp()))
            .sum();
        gamma.exp()
    });
    Ok(ModelBundle {
        name: "ell1".into(),
        cocycle: CocycleModel::closed_form(flow.clone(), 1, tag, map),
        flow,
        truth: Truth {
            is_t_continuous: false,
            is_ujc: false,
            is_differentiable: false,
            known_b: None,
            known_kappa: Some(0.0),
            n,
            params: ModelParams::new(),
        },
    })
}

/// c₀ model: `F_t(x) = e^{-t}x`, `Γ_t(x) = exp(Σ (x_k/ρ)^k (1 − e^{-kt}))`,
/// generated by `B(x) = Σ k (x_k/ρ)^k`.
fn c0(n: usize, rho: f64) -> Result<ModelBundle> {
    let tag = NormTag::LInf;
    // samples satisfy ‖x‖∞ ≤ 0.9ρ, where the series terms stay below 0.9^k
    let flow = uniform_contraction(n, tag)?.with_invariant_margin(1.0 - 0.9 * rho);
    let map = scalar_map(tag, move |t, x| {
        let gamma: Scalar = x
            .iter()
            .enumerate()
            .map(|(k, z)| {
                let k = k as i32 + 1;
                (z / rho).powi(k) * (1.0 - (-(k as f64) * t).exp())
            })
            .sum();
        gamma.exp()
    });
    let generator: MatrixField = Arc::new(move |x: &[Scalar]| {
        let b: Scalar = x
            .iter()
            .enumerate()
            .map(|(k, z)| (k as f64 + 1.0) * (z / rho).powi(k as i32 + 1))
            .sum();
        AlgebraElement::scalar(b, tag)
    });
    Ok(ModelBundle {
        name: "c0".into(),
        cocycle: CocycleModel::closed_form(flow.clone(), 1, tag, map).with_generator(generator),
        flow,
        truth: Truth {
            is_t_continuous: false,
            is_ujc: true,
            is_differentiable: true,
            known_b: Some("sum_k k (x_k/rho)^k".into()),
            known_kappa: Some(0.0),
            n,
            params: ModelParams::from([("rho".to_string(), rho)]),
        },
    })
}

/// Real cocycle over `e^{-t}x` on `(-1, 1)`:
/// `e^{-t}` for `|x| < ½`, `2|x|e^{-t}` for `½ ≤ |x| < e^t/2`, else `1`.
/// Continuous but not differentiable in `t` at `t = ln(2|x|)`.
pub fn piecewise_gamma(t: f64, x: f64) -> f64 {
    let a = x.abs();
    if a < 0.5 {
        (-t).exp()
    } else if a < 0.5 * t.exp() {
        2.0 * a * (-t).exp()
    } else {
        1.0
    }
}

fn piecewise() -> Result<ModelBundle> {
    let tag = NormTag::LInf;
    let flow = FlowModel::new(
        DomainDescriptor::interval(-1.0, 1.0)?,
        Arc::new(|x: &[Scalar]| vec![-x[0]]),
    )
    .with_closed_form(Arc::new(|t: f64, x: &[Scalar]| vec![x[0] * (-t).exp()]), true)
    .with_jacobian(Arc::new(move |_x: &[Scalar]| AlgebraElement::scalar(real(-1.0), tag)))
    .with_fixed_point(VectorState::zeros(1, tag))?
    .with_invariant_margin(0.1);
    let map = scalar_map(tag, |t, x| real(piecewise_gamma(t, x[0].re)));
    Ok(ModelBundle {
        name: "piecewise".into(),
        cocycle: CocycleModel::closed_form(flow.clone(), 1, tag, map),
        flow,
        truth: Truth {
            is_t_continuous: true,
            is_ujc: true,
            is_differentiable: false,
            known_b: None,
            known_kappa: Some(-1.0),
            n: 1,
            params: ModelParams::new(),
        },
    })
}

/// Derivative cocycle of `e^{-t}x` on the Euclidean unit ball: `Γ_t = e^{-t}I`.
fn linear_contraction(n: usize) -> Result<ModelBundle> {
    let tag = NormTag::L2;
    let flow = uniform_contraction(n, tag)?.with_invariant_margin(0.1);
    let jacobian = flow.jacobian().expect("contraction has a Jacobian").clone();
    let map: CocycleMap = Arc::new(move |t, _x| Ok(AlgebraElement::identity(n, tag).scale(real((-t).exp()))));
    Ok(ModelBundle {
        name: "linear_contraction".into(),
        cocycle: CocycleModel::closed_form(flow.clone(), n, tag, map).with_generator(jacobian),
        flow,
        truth: Truth {
            is_t_continuous: true,
            is_ujc: true,
            is_differentiable: true,
            known_b: Some("-I".into()),
            known_kappa: Some(-1.0),
            n,
            params: ModelParams::new(),
        },
    })
}

/// `Γ_t(x) = e^{tb}`, independent of `x`, over `e^{-t}x` on the unit ball.
fn constant_generator(n: usize, b: f64) -> Result<ModelBundle> {
    let tag = NormTag::L2;
    let flow = uniform_contraction(n, tag)?.with_invariant_margin(0.1);
    let map = scalar_map(tag, move |t, _x| real((b * t).exp()));
    let generator: MatrixField = Arc::new(move |_x: &[Scalar]| AlgebraElement::scalar(real(b), tag));
    Ok(ModelBundle {
        name: "constant_generator".into(),
        cocycle: CocycleModel::closed_form(flow.clone(), 1, tag, map).with_generator(generator),
        flow,
        truth: Truth {
            is_t_continuous: true,
            is_ujc: true,
            is_differentiable: true,
            known_b: Some("b".into()),
            known_kappa: Some(b),
            n,
            params: ModelParams::from([("b".to_string(), b)]),
        },
    })
}

/// Not a semicocycle: `Γ_t = 1 + t` violates the chain rule. Used to check
/// that the verification suite can fail.
pub fn broken_affine() -> ModelBundle {
    let tag = NormTag::L2;
    let flow = uniform_contraction(1, tag).expect("valid").with_invariant_margin(0.1);
    let map = scalar_map(tag, |t, _x| real(1.0 + t));
    ModelBundle {
        name: "broken_affine".into(),
        cocycle: CocycleModel::closed_form(flow.clone(), 1, tag, map),
        flow,
        truth: Truth {
            is_t_continuous: true,
            is_ujc: true,
            is_differentiable: true,
            known_b: Some("1".into()),
            known_kappa: None,
            n: 1,
            params: ModelParams::new(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::options::SolverOptions;

    fn value(a: &AlgebraElement) -> f64 {
        a.get(0, 0).re
    }

    #[test]
    fn names_round_trip() {
        for name in ModelName::ALL {
            assert_eq!(name.as_str().parse::<ModelName>().unwrap(), name);
        }
        assert!(matches!("ell2".parse::<ModelName>(), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn bad_parameters() {
        let rho = |v: f64| ModelParams::from([("rho".to_string(), v)]);
        assert!(matches!(
            build_model(ModelName::C0, 4, &rho(1.0)),
            Err(Error::BadParameter(_))
        ));
        assert!(matches!(
            build_model(ModelName::C0, 4, &rho(0.0)),
            Err(Error::BadParameter(_))
        ));
        assert!(matches!(
            build_model(ModelName::C0, 0, &rho(0.5)),
            Err(Error::BadParameter(_))
        ));
        assert!(matches!(
            build_model(ModelName::Ell1, 4, &rho(0.5)),
            Err(Error::BadParameter(_))
        ));
    }

    #[test]
    fn c0_limit_value() {
        let bundle = build_model(ModelName::C0, 1, &ModelParams::from([("rho".to_string(), 0.5)])).unwrap();
        let x = VectorState::real(&[0.25], NormTag::LInf);
        let g = bundle.cocycle.gamma_at(&x, 50.0, &SolverOptions::default()).unwrap();
        assert!((value(&g) - 0.5f64.exp()).abs() < 1e-12);
        assert!((value(&g) - 1.64872).abs() < 1e-5);
    }

    #[test]
    fn piecewise_first_branch() {
        let bundle = build_default(ModelName::Piecewise);
        let x = VectorState::real(&[0.3], NormTag::LInf);
        let g = bundle.cocycle.gamma_at(&x, 2.0, &SolverOptions::default()).unwrap();
        assert_eq!(value(&g), (-2.0f64).exp());
    }

    #[test]
    fn ell1_flow_is_diagonal() {
        let bundle = build_model(ModelName::Ell1, 4, &ModelParams::new()).unwrap();
        let x = VectorState::real(&[0.1; 4], NormTag::L1);
        let y = bundle.flow.flow_at(&x, 1.0, &SolverOptions::default()).unwrap();
        for k in 0..4 {
            assert_eq!(y.coords()[k].re, 0.1 * (-(k as f64 + 1.0)).exp());
        }
        assert_eq!(bundle.flow.domain.tag, NormTag::L1);
    }

    #[test]
    fn constant_generator_kappa() {
        let bundle = build_default(ModelName::ConstantGenerator);
        assert_eq!(bundle.truth.known_kappa, Some(-2.0));
        assert_eq!(build_default(ModelName::C0).flow.domain.tag, NormTag::LInf);
    }

    #[test]
    fn c0_worst_case_vector() {
        let opts = SolverOptions::default();
        for n in [1, 4, 16] {
            let bundle = build_model(ModelName::C0, n, &ModelParams::new()).unwrap();
            let worst = bundle.worst_case_vectors(1.0 - DEFAULT_RHO);
            assert_eq!(worst.len(), 1);
            for t in [0.1, 0.5, 2.0] {
                let g = value(&bundle.cocycle.gamma_at(&worst[0], t, &opts).unwrap());
                let want = (1..=n).map(|k| 1.0 - (-(k as f64) * t).exp()).sum::<f64>().exp();
                assert!((g - want).abs() <= 1e-10 * want);
                assert!(g >= (n as f64 * (1.0 - (-t).exp())).exp() * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn piecewise_kink() {
        for x in [0.6f64, 0.75, 0.9] {
            let kink = (2.0 * x).ln();
            let left = piecewise_gamma(kink - 1e-13, x);
            let right = piecewise_gamma(kink + 1e-13, x);
            assert!((left - right).abs() <= 1e-12);
            // one-sided slopes 0 and −2|x|e^{-t}; the gap at the kink is exactly 1
            let gap: f64 = 2.0 * x * (-kink).exp();
            assert!((gap - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn piecewise_chain_rule_closed_form() {
        let bundle = build_default(ModelName::Piecewise);
        let opts = SolverOptions::default();
        for x in [-0.95, -0.6, 0.2, 0.5, 0.75, 0.9] {
            let x = VectorState::real(&[x], NormTag::LInf);
            for s in [0.0, 0.1, 0.4, 1.0] {
                for t in [0.0, 0.25, 0.7, 2.0] {
                    assert!(bundle.cocycle.chain_rule_residual(&x, s, t, &opts).unwrap() <= 1e-15);
                }
            }
        }
    }

    #[test]
    fn broken_model_fails_chain_rule() {
        let bundle = broken_affine();
        let x = VectorState::real(&[0.5], NormTag::L2);
        assert_eq!(
            bundle
                .cocycle
                .chain_rule_residual(&x, 1.0, 1.0, &SolverOptions::default())
                .unwrap(),
            1.0
        );
    }
}
