//! Property tests for flows, semicocycles and the model registry.

use std::sync::Arc;

use proptest::prelude::*;
use semicocycle::cocycle::{conjugation_cocycle, derivative_cocycle, MatrixField};
use semicocycle::{
    build_default, build_model, AlgebraElement, ModelBundle, ModelName, ModelParams, NormTag, Scalar, SolverOptions,
    VectorState,
};

fn bundles() -> Vec<ModelBundle> {
    let mut out: Vec<ModelBundle> = ModelName::ALL.iter().map(|&m| build_default(m)).collect();
    out.push(build_model(ModelName::C0, 4, &ModelParams::new()).unwrap());
    out
}

/// A point of the invariant ball of `bundle`, rescaled from raw
/// coordinates in `[-1, 1]`.
fn inside(bundle: &ModelBundle, raw: &[f64]) -> VectorState {
    let domain = &bundle.flow.domain;
    let coords: Vec<f64> = raw.iter().cycle().take(domain.dim).copied().collect();
    let v = VectorState::real(&coords, domain.tag);
    let reach = 1.0 - bundle.sample_margin();
    let scale = if v.norm() > 0.0 { reach / v.norm().max(1.0) } else { 0.0 };
    VectorState::real(&coords.iter().map(|c| c * scale).collect::<Vec<_>>(), domain.tag)
}

fn raw() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 16)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_form_flows_are_semigroups(raw in raw(), s in 0.0..2.0f64, t in 0.0..2.0f64) {
        let opts = SolverOptions::default();
        for bundle in bundles() {
            let x = inside(&bundle, &raw);
            prop_assert!(bundle.flow.semigroup_residual(&x, s, t, &opts).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn closed_form_chain_rule(raw in raw(), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let opts = SolverOptions::default();
        for bundle in bundles() {
            let x = inside(&bundle, &raw);
            let scale = bundle.cocycle.gamma_at(&x, s + t, &opts).unwrap().norm().max(1.0);
            let r = bundle.cocycle.chain_rule_residual(&x, s, t, &opts).unwrap();
            prop_assert!(r <= 1e-10 * scale, "{}: {r:e}", bundle.name);
        }
    }

    #[test]
    fn identity_at_zero(raw in raw()) {
        let opts = SolverOptions::default();
        for bundle in bundles() {
            let x = inside(&bundle, &raw);
            let id = AlgebraElement::identity(bundle.cocycle.dim(), bundle.cocycle.tag());
            prop_assert_eq!(bundle.cocycle.gamma_at(&x, 0.0, &opts).unwrap(), id.clone());
            prop_assert_eq!(&bundle.cocycle.solve_cocycle(&x, 0.5, &opts).unwrap().gamma[0], &id);
        }
    }

    #[test]
    fn skew_product_is_a_semigroup(raw in raw(), s in 0.0..1.0f64, t in 0.0..1.0f64, y in -1.0..1.0f64) {
        let opts = SolverOptions::default();
        for bundle in bundles() {
            let x = inside(&bundle, &raw);
            let m = bundle.cocycle.dim();
            let y = vec![Scalar::new(y / m as f64, 0.0); m];
            let extended = bundle.cocycle.extended_semigroup_residual(&x, &y, s, t, &opts).unwrap();
            let chain = bundle.cocycle.chain_rule_residual(&x, t, s, &opts).unwrap();
            let flow = bundle.flow.semigroup_residual(&x, s, t, &opts).unwrap();
            let scale = bundle.cocycle.gamma_at(&x, s + t, &opts).unwrap().norm().max(1.0);
            prop_assert!(extended <= chain + flow + 1e-14 * scale, "{}", bundle.name);
        }
    }

    #[test]
    fn inverse_cocycle_round_trips(raw in raw(), t in 0.0..3.0f64) {
        let opts = SolverOptions::default();
        for bundle in bundles() {
            let x = inside(&bundle, &raw);
            let y = bundle.flow.flow_at(&x, t, &opts).unwrap();
            let inv = bundle.cocycle.inverse_cocycle_value(&y, t, &opts).unwrap();
            let g = bundle.cocycle.gamma_at(&x, t, &opts).unwrap();
            let id = AlgebraElement::identity(g.dim(), g.tag());
            prop_assert!((&(&inv * &g) - &id).norm() <= 1e-8);
        }
    }

    #[test]
    fn derivative_cocycle_matches_flow_jacobian(raw in raw(), t in 0.0..1.0f64) {
        // ℓ¹ flow: F_t'(x) = diag(e^{-kt})
        let opts = SolverOptions::default();
        let bundle = build_model(ModelName::Ell1, 4, &ModelParams::new()).unwrap();
        let model = derivative_cocycle(&bundle.flow, 1e-5);
        let x = inside(&bundle, &raw);
        let g = model.solve_cocycle(&x, t, &opts).unwrap();
        let want: Vec<Scalar> = (1..=4).map(|k| Scalar::new((-(k as f64) * t).exp(), 0.0)).collect();
        prop_assert!((g.final_gamma() - &AlgebraElement::diag(&want, NormTag::L1)).norm() <= 1e-8);
    }

    #[test]
    fn conjugation_cocycles_satisfy_chain_rule(raw in raw(), c in -0.9..0.9f64, s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let opts = SolverOptions::default();
        let bundle = build_default(ModelName::LinearContraction);
        let m: MatrixField = Arc::new(move |x: &[Scalar]| {
            AlgebraElement::from_rows(
                &[vec![1.0 + x[0] * c, x[1]], vec![-x[1], Scalar::new(1.0, 0.0)]],
                NormTag::L2,
            )
            .unwrap()
        });
        let model = conjugation_cocycle(m, 2, NormTag::L2, &bundle.flow, opts);
        let x = inside(&bundle, &raw);
        prop_assert!(model.chain_rule_residual(&x, s, t, &opts).unwrap() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn generated_chain_rule_and_v_identity(raw in raw(), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let opts = SolverOptions::default();
        for name in [ModelName::C0, ModelName::LinearContraction, ModelName::ConstantGenerator] {
            let bundle = build_default(name);
            let model = bundle.cocycle.generated_only().unwrap();
            let x = inside(&bundle, &raw);
            prop_assert!(model.chain_rule_residual(&x, s, t, &opts).unwrap() <= 1e-6);
            prop_assert!(model.v_identity_residual(&x, s, t, &opts).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn generated_and_closed_forms_agree(raw in raw(), t in 0.0..2.0f64) {
        let opts = SolverOptions::default();
        for name in [ModelName::C0, ModelName::LinearContraction, ModelName::ConstantGenerator] {
            let bundle = build_default(name);
            let x = inside(&bundle, &raw);
            let closed = bundle.cocycle.gamma_at(&x, t, &opts).unwrap();
            let solved = bundle.cocycle.solve_cocycle(&x, t, &opts).unwrap();
            prop_assert!((solved.final_gamma() - &closed).norm() <= 1e-8 * closed.norm().max(1.0));
        }
    }

    #[test]
    fn generator_round_trip(raw in raw()) {
        let opts = SolverOptions::default();
        let bundles = [
            build_default(ModelName::ConstantGenerator),
            build_default(ModelName::LinearContraction),
            build_model(ModelName::C0, 4, &ModelParams::new()).unwrap(),
        ];
        for bundle in bundles {
            let model = bundle.cocycle.generated_only().unwrap();
            let x = inside(&bundle, &raw);
            let recovered = model.recover_generator(&x, 0.05, &opts).unwrap();
            let known = model.generator_at(&x).unwrap();
            prop_assert!((&recovered - &known).operator_norm(known.tag()) <= 1e-4, "{}", bundle.name);
        }
    }

    #[test]
    fn flow_generator_is_recovered(raw in raw()) {
        for bundle in bundles() {
            let x = inside(&bundle, &raw);
            // the ℓ¹ flow has rates up to k = 16, so the O(h²) term needs a small step
            let numeric = bundle.flow.numeric_generator(&x, 1e-5).unwrap();
            let exact = bundle.flow.generator(x.coords());
            let diff: Vec<Scalar> = numeric.iter().zip(&exact).map(|(a, b)| a - b).collect();
            prop_assert!(bundle.flow.domain.tag.vector_norm(&diff) <= 1e-6);
        }
    }
}

#[test]
fn condition_gate_holds_on_registry() {
    let opts = SolverOptions::default();
    for bundle in bundles() {
        let samples = bundle
            .flow
            .domain
            .sample_strictly_inside(bundle.sample_margin(), 10, 11)
            .unwrap();
        for x in &samples.points {
            for i in 0..=6 {
                let g = bundle.cocycle.gamma_at(x, 0.5 * i as f64, &opts).unwrap();
                assert!(g.condition_estimate() <= 1e8);
            }
        }
    }
}
