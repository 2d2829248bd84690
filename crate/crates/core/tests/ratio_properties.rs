use misspec_krige::kernels::Domain;
use misspec_krige::ratios::{efficiency_ratios, invariant_violation};
use misspec_krige::{Design, GaussianModel, KernelConfig, KernelRegistry, MeanConfig, TargetFunctional};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn sites() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, 1..=10).prop_map(|xs| {
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
    (0.5..3.0f64, prop::sample::select(vec![0.5, 1.5, 2.5]), 0.5..5.0f64)
        .prop_map(|(s, nu, k)| KernelConfig::matern(s, nu, k))
}

fn mean_config() -> impl Strategy<Value = MeanConfig> {
    prop_oneof![
        Just(MeanConfig::Zero),
        (-2.0..2.0f64).prop_map(|value| MeanConfig::Constant { value }),
        (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(intercept, s)| MeanConfig::Linear {
            intercept,
            slope: vec![s]
        }),
    ]
}

fn model(cfg: &KernelConfig, mean: &MeanConfig) -> GaussianModel {
    let kernel = KernelRegistry::with_builtins().build(cfg).unwrap();
    GaussianModel::new("m", mean.build().unwrap(), kernel)
}

fn targets(ts: &[f64]) -> Vec<TargetFunctional> {
    ts.iter()
        .enumerate()
        .map(|(i, &t)| TargetFunctional::point(format!("t{i}"), vec![t]))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ratio_invariants_hold(
        xs in sites(),
        ts in prop::collection::vec(0.0..=1.0f64, 1..6),
        (k, kt) in (kernel_config(), kernel_config()),
        (m, mt) in (mean_config(), mean_config()),
    ) {
        let d = Design::on_line(Domain::unit_interval(), &xs).unwrap();
        let set = efficiency_ratios(&d, &targets(&ts), &model(&k, &m), &model(&kt, &mt), None).unwrap();
        for r in set.records.iter().filter(|r| !r.is_sup()) {
            prop_assert!(r.r_var(1) >= 1.0 - TOL && r.r_var(2) >= 1.0 - TOL, "{:?}", r.values);
        }
        prop_assert!(invariant_violation(&set.records) <= TOL);
    }

    #[test]
    fn zero_means_make_moment_and_variance_ratios_equal(
        xs in sites(),
        ts in prop::collection::vec(0.0..=1.0f64, 1..6),
        (k, kt) in (kernel_config(), kernel_config()),
    ) {
        let d = Design::on_line(Domain::unit_interval(), &xs).unwrap();
        let set = efficiency_ratios(
            &d,
            &targets(&ts),
            &model(&k, &MeanConfig::Zero),
            &model(&kt, &MeanConfig::Zero),
            None,
        )
        .unwrap();
        for r in &set.records {
            for i in 1..=4 {
                prop_assert_eq!(r.r_mom(i), r.r_var(i));
            }
            prop_assert_eq!(r.mean_term, 0.0);
        }
    }
}
