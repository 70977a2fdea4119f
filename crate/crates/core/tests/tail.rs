use std::sync::Arc;

use extkm::estimators::Region;
use extkm::km::PhiFunction;
use extkm::profile::{reference_gamma_f, IndexProfile};
use extkm::tail::{
    asymptotic_variance_oracle, covariate_limit_distribution, karamata_components, limit_functional,
    BurrFamily, CovariateLaw, LimitModel, ParetoFamily, RVFamily, Threshold, VarianceMethod,
};
use proptest::prelude::*;

fn burr(kappa: f64, tau: f64) -> BurrFamily {
    BurrFamily::new(IndexProfile::Constant(kappa), IndexProfile::Constant(tau))
}

fn two_point_limit() -> LimitModel {
    LimitModel::new(
        CovariateLaw::discrete(vec![2.0, 4.0], vec![0.5, 0.5]).unwrap(),
        reference_gamma_f(),
        Some(1.0),
    )
    .unwrap()
}

#[test]
fn burr_quantile_hand_values() {
    let f = burr(1.0, 1.0);
    assert!((f.tail_quantile(0.0, 2.0).unwrap() - 1.0).abs() < 1e-14);
    assert!((f.survival(0.0, 1.0) - 0.5).abs() < 1e-15);
    let g = burr(1.0, 2.0);
    assert!((g.tail_quantile(0.0, 100.0).unwrap() - 99f64.sqrt()).abs() < 1e-12);
    assert!(g.tail_quantile(0.0, 0.5).is_err());
}

#[test]
fn burr_karamata_components() {
    let f = burr(1.0, 2.0);
    let c = karamata_components(&f, 0.0, 1e6, 1e6, 1e6).unwrap();
    assert_eq!(c.rho, -1.0);
    let eta = 1e6 / (2.0 * (1e6 - 1.0));
    assert!((c.eta - eta).abs() < 1e-12);
    assert!((c.delta - 2.0).abs() < 1e-5);
    let h = burr(1.0, 1.0);
    assert!((h.karamata_delta(0.0, 1e8) - 1.0).abs() < 1e-7);
}

#[test]
fn eta_discrepancy_decreases_in_u() {
    let f = BurrFamily::with_tail_index(reference_gamma_f());
    let xs: Vec<f64> = (0..=40).map(|i| 1.0 + 0.1 * i as f64).collect();
    let gaps: Vec<f64> = [1e2, 1e3, 1e4, 1e6]
        .iter()
        .map(|u| {
            xs.iter()
                .map(|x| (f.eta(*x, *u).unwrap() - f.gamma(*x)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn reference_profile_values() {
    let g = reference_gamma_f();
    assert!((g.eval(2.0) - (0.5 + 2.0 / (2.0 * std::f64::consts::PI).sqrt())).abs() < 1e-12);
    assert!((g.eval(2.0) - 1.29789).abs() < 1e-5);
    assert!((g.eval(1.0) - 0.5).abs() < 1e-20);
}

#[test]
fn covariate_law_converges_to_two_atoms() {
    let family = Arc::new(BurrFamily::with_tail_index(reference_gamma_f()));
    let fx = CovariateLaw::uniform(1.0, 5.0).unwrap();
    let mut gaps = Vec::new();
    for t in [1e2, 1e3, 1e4, 1e6] {
        let law = covariate_limit_distribution(family.clone(), &fx, Threshold::Finite(t)).unwrap();
        assert!((law.total_mass() - 1.0).abs() < 1e-10);
        let near = law.probability(1.8, 2.2) + law.probability(3.8, 4.2);
        gaps.push(1.0 - near);
    }
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    let limit = covariate_limit_distribution(family, &fx, Threshold::Infinite).unwrap();
    assert!((limit.probability(1.9, 2.1) - 0.5).abs() < 1e-3);
    assert!((limit.probability(3.9, 4.1) - 0.5).abs() < 1e-3);
}

#[test]
fn constant_index_keeps_covariate_law() {
    let family = Arc::new(ParetoFamily::new(IndexProfile::Constant(0.7)));
    let fx = CovariateLaw::discrete(vec![1.0, 2.0, 3.0], vec![0.2, 0.3, 0.5]).unwrap();
    for t in [Threshold::Finite(50.0), Threshold::Infinite] {
        let law = covariate_limit_distribution(family.clone(), &fx, t).unwrap();
        assert!((law.probability(1.5, 2.5) - 0.3).abs() < 1e-12);
        assert!((law.probability(2.5, 3.5) - 0.5).abs() < 1e-12);
    }
}

#[test]
fn limit_functional_hand_values() {
    let m = two_point_limit();
    assert!((limit_functional(&PhiFunction::constant(1.0), &m).unwrap() - 1.0).abs() < 1e-8);
    let region = Region::interval(1.8, 2.2).unwrap().indicator();
    assert!((limit_functional(&region, &m).unwrap() - 0.5).abs() < 1e-8);
    let g = reference_gamma_f().eval(2.0);
    assert!((limit_functional(&PhiFunction::log_y(), &m).unwrap() - g).abs() < 1e-6);
    // Pareto(1/2) has finite mean 2; Pareto(2) has none
    let pareto = LimitModel::new(CovariateLaw::uniform(1.0, 5.0).unwrap(), IndexProfile::Constant(0.5), None).unwrap();
    let identity = PhiFunction::new("y", |_: &[f64], y: f64| y).with_envelope(|y| y);
    assert!((limit_functional(&identity, &pareto).unwrap() - 2.0).abs() < 1e-6);
    let heavy = LimitModel::new(CovariateLaw::uniform(1.0, 5.0).unwrap(), IndexProfile::Constant(2.0), None).unwrap();
    assert!(limit_functional(&identity, &heavy).is_err());
}

#[test]
fn variance_oracle_bernoulli_case() {
    let m = LimitModel::new(CovariateLaw::uniform(1.0, 5.0).unwrap(), IndexProfile::Constant(0.5), None).unwrap();
    let v = asymptotic_variance_oracle(&PhiFunction::y_at_most(2.0), &m, VarianceMethod::Quadrature).unwrap();
    assert!((v.value - 0.1875).abs() < 1e-8);
    assert!((v.mean_w - 0.75).abs() < 1e-8);
    let flat = asymptotic_variance_oracle(&PhiFunction::constant(3.0), &m, VarianceMethod::Quadrature).unwrap();
    assert!(flat.value.abs() < 1e-8);
}

#[test]
fn variance_oracle_methods_agree() {
    let m = LimitModel::new(CovariateLaw::uniform(1.0, 5.0).unwrap(), IndexProfile::Constant(0.5), Some(1.0)).unwrap();
    let phi = PhiFunction::y_at_most(2.0);
    let q = asymptotic_variance_oracle(&phi, &m, VarianceMethod::Quadrature).unwrap();
    let mc = asymptotic_variance_oracle(&phi, &m, VarianceMethod::MonteCarlo { reps: 200_000, seed: 11 }).unwrap();
    assert!((q.value - mc.value).abs() <= 3.0 * mc.std_error, "{q:?} {mc:?}");
}

proptest! {
    #[test]
    fn burr_round_trip(kappa in 0.3f64..3.0, tau in 0.3f64..4.0, log_t in 0.01f64..30.0) {
        let f = burr(kappa, tau);
        let t = log_t.exp();
        let u = f.tail_quantile(0.0, t).unwrap();
        prop_assert!((f.survival(0.0, u) * t - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pareto_round_trip(x in 1.0f64..5.0, log_t in 0.01f64..30.0) {
        let f = ParetoFamily::new(reference_gamma_f());
        let t = log_t.exp();
        let u = f.tail_quantile(x, t).unwrap();
        prop_assert!((f.survival(x, u) * t - 1.0).abs() < 1e-8);
    }
}
