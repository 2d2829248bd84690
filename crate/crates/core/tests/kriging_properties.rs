use std::sync::Arc;

use misspec_krige::kernels::Domain;
use misspec_krige::kriging::Kriger;
use misspec_krige::{
    error_moments, kriging_predictor, Design, GaussianModel, KernelConfig, KernelRegistry, LinearPredictor, MeanConfig,
    TargetFunctional,
};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

/// Distinct sites in `[0, 1]` at least `0.02` apart, in generation order.
fn sites(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, 1..=max).prop_map(|xs| {
        let mut kept: Vec<f64> = Vec::new();
        for x in xs {
            if kept.iter().all(|k| (k - x).abs() >= 0.02) {
                kept.push(x);
            }
        }
        kept
    })
}

fn kernel_config() -> impl Strategy<Value = KernelConfig> {
    (0.5..3.0f64, prop::sample::select(vec![0.5, 1.5]), 0.5..5.0f64)
        .prop_map(|(s, nu, k)| KernelConfig::matern(s, nu, k))
}

fn model(cfg: &KernelConfig, mean: MeanConfig) -> GaussianModel {
    let kernel = KernelRegistry::with_builtins().build(cfg).unwrap();
    GaussianModel::new("m", mean.build().unwrap(), kernel)
}

fn design(xs: &[f64]) -> Design {
    Design::on_line(Domain::unit_interval(), xs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kriging_weights_are_first_order_optimal(xs in sites(10), cfg in kernel_config(), t in 0.0..=1.0f64) {
        let d = design(&xs);
        let m = model(&cfg, MeanConfig::Zero);
        let target = TargetFunctional::point("t", vec![t]);
        let p = kriging_predictor(&target, &d, &m).unwrap();
        let base = error_moments(&p, &target, &m).unwrap().variance;
        for j in 0..p.weights.len() {
            for eps in [1e-3, -1e-3] {
                let mut w = p.weights.clone();
                w[j] += eps;
                let q = LinearPredictor::new(p.design.clone(), w, p.intercept, "perturbed").unwrap();
                let v = error_moments(&q, &target, &m).unwrap().variance;
                prop_assert!(v >= base - TOL, "site {j} eps {eps}: {v} < {base}");
            }
        }
    }

    #[test]
    fn kriging_is_unbiased_under_its_own_model(
        xs in sites(10),
        cfg in kernel_config(),
        t in 0.0..=1.0f64,
        b0 in -3.0..3.0f64,
        b1 in -3.0..3.0f64,
    ) {
        let d = design(&xs);
        let m = model(&cfg, MeanConfig::Linear { intercept: b0, slope: vec![b1] });
        let target = TargetFunctional::new("f", 0.7, vec![(vec![t], 1.0), (vec![1.0 - t], -0.4)]).unwrap();
        let p = kriging_predictor(&target, &d, &m).unwrap();
        prop_assert!(error_moments(&p, &target, &m).unwrap().mean.abs() <= TOL);
    }

    #[test]
    fn variance_never_increases_as_sites_are_appended(xs in sites(12), cfg in kernel_config(), t in 0.0..=1.0f64) {
        let m = model(&cfg, MeanConfig::Zero);
        let target = TargetFunctional::point("t", vec![t]);
        let mut prev = f64::INFINITY;
        for k in 1..=xs.len() {
            let d = design(&xs[..k]);
            let p = kriging_predictor(&target, &d, &m).unwrap();
            let v = error_moments(&p, &target, &m).unwrap().variance;
            prop_assert!(v <= prev + TOL, "n = {k}: {v} > {prev}");
            prev = v;
        }
    }

    #[test]
    fn weights_are_invariant_to_kernel_scale(xs in sites(10), cfg in kernel_config(), t in 0.0..=1.0f64) {
        let d = Arc::new(design(&xs));
        let target = TargetFunctional::point("t", vec![t]);
        let base = Kriger::new(d.clone(), model(&cfg, MeanConfig::Zero)).unwrap().predictor(&target).unwrap();
        for c in [0.1, 4.0, 100.0] {
            let scaled = model(&KernelConfig::scaled(c, cfg.clone()), MeanConfig::Zero);
            let p = Kriger::new(d.clone(), scaled).unwrap().predictor(&target).unwrap();
            for (a, b) in p.weights.iter().zip(&base.weights) {
                prop_assert!((a - b).abs() <= TOL, "c = {c}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn design_sites_are_interpolated(xs in sites(10), cfg in kernel_config(), pick in any::<prop::sample::Index>()) {
        let d = design(&xs);
        let m = model(&cfg, MeanConfig::Constant { value: 0.5 });
        let x = xs[pick.index(xs.len())];
        let target = TargetFunctional::point("site", vec![x]);
        let p = kriging_predictor(&target, &d, &m).unwrap();
        prop_assert!(error_moments(&p, &target, &m).unwrap().variance <= TOL);
    }
}
