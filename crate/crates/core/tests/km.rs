use extkm::km::{
    ekmi_cdf, ekmi_confidence_interval, ekmi_integral, empirical_gamma_functions, km_weights,
    plug_in_variance, PhiFunction,
};
use extkm::sample::TailSubsample;
use proptest::prelude::*;

fn tail(v: &[f64], d: &[u8], x: &[f64]) -> TailSubsample {
    TailSubsample::from_parts(1.0, v.to_vec(), d.iter().map(|b| *b == 1).collect(), x.to_vec(), 1).unwrap()
}

/// Textbook product-limit survival in increasing order of `v`, returned as
/// the jump at each point.
fn product_limit_jumps(v: &[f64], d: &[bool]) -> Vec<f64> {
    let k = v.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|a, b| v[*a].total_cmp(&v[*b]).then(d[*b].cmp(&d[*a])));
    let mut surv = 1.0;
    let mut jumps = vec![0.0; k];
    for (pos, &i) in order.iter().enumerate() {
        let at_risk = (k - pos) as f64;
        if d[i] {
            let next = surv * (1.0 - 1.0 / at_risk);
            jumps[i] = surv - next;
            surv = next;
        }
    }
    jumps
}

#[test]
fn hand_weights() {
    let w = km_weights(&tail(&[8.0, 4.0, 2.0], &[1, 1, 1], &[0.0; 3]));
    assert_eq!(w.as_slice(), &[1.0 / 3.0; 3]);
    let w = km_weights(&tail(&[8.0, 4.0, 2.0], &[1, 0, 1], &[0.0; 3]));
    let expected = [2.0 / 3.0, 0.0, 1.0 / 3.0];
    for (a, b) in w.as_slice().iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!((w.total() - 1.0).abs() < 1e-15);
    let w = km_weights(&tail(&[8.0, 4.0, 2.0], &[0, 1, 1], &[0.0; 3]));
    assert_eq!(w.as_slice()[0], 0.0);
    assert!((w.total() - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn hand_cdf_and_integral() {
    let t = tail(&[8.0, 4.0, 2.0], &[1, 0, 1], &[0.0; 3]);
    let w = km_weights(&t);
    assert!((ekmi_cdf(&t, &w, &[f64::INFINITY], 5.0) - 1.0 / 3.0).abs() < 1e-15);
    assert!((ekmi_cdf(&t, &w, &[f64::INFINITY], f64::INFINITY) - 1.0).abs() < 1e-15);
    let s = ekmi_integral(&t, &w, &PhiFunction::log_y()).unwrap();
    assert!((s - 7.0 / 3.0 * 2f64.ln()).abs() < 1e-14);
    assert!((s - 1.61734).abs() < 1e-5);
    let one = ekmi_integral(&t, &w, &PhiFunction::constant(1.0)).unwrap();
    assert!((one - w.total()).abs() < 1e-15);
}

#[test]
fn gamma_functions_hand_values() {
    let t = tail(&[8.0, 4.0, 2.0], &[1, 0, 1], &[0.0; 3]);
    let g = empirical_gamma_functions(&t, &PhiFunction::log_y(), 8.0).unwrap();
    assert!((g.gamma0 - 2.0).abs() < 1e-14);
    let below = empirical_gamma_functions(&t, &PhiFunction::log_y(), 3.0).unwrap();
    assert_eq!(below.gamma2, 0.0);
    let plain = tail(&[8.0, 4.0, 2.0], &[1, 1, 1], &[0.0; 3]);
    for y in [1.0, 3.0, 8.0, 100.0] {
        let g = empirical_gamma_functions(&plain, &PhiFunction::log_y(), y).unwrap();
        assert_eq!(g.gamma0, 1.0);
        assert_eq!(g.gamma2, 0.0);
    }
    assert!(empirical_gamma_functions(&t, &PhiFunction::log_y(), 0.5).is_err());
}

#[test]
fn uncensored_variance_is_sample_variance() {
    let v = [9.0, 7.5, 4.0, 3.0, 2.2, 1.5];
    let t = tail(&v, &[1; 6], &[0.0; 6]);
    let logs: Vec<f64> = v.iter().map(|y| y.ln()).collect();
    let mean = logs.iter().sum::<f64>() / 6.0;
    let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / 5.0;
    assert!((plug_in_variance(&t, &PhiFunction::log_y()).unwrap() - var).abs() < 1e-14);
    assert_eq!(plug_in_variance(&t, &PhiFunction::constant(2.0)).unwrap(), 0.0);
}

#[test]
fn interval_uses_normal_quantile() {
    let v = [9.0, 7.5, 4.0, 3.0, 2.2, 1.5];
    let t = tail(&v, &[1, 0, 1, 1, 0, 1], &[0.0; 6]);
    let ci = ekmi_confidence_interval(&t, &PhiFunction::log_y(), 0.95).unwrap();
    let q = (ci.upper - ci.value) / ci.std_error;
    assert!((q - 1.959964).abs() < 1e-6);
    let flat = ekmi_confidence_interval(&tail(&v, &[1; 6], &[0.0; 6]), &PhiFunction::constant(1.0), 0.9).unwrap();
    assert_eq!((flat.lower, flat.upper), (1.0, 1.0));
    assert!(ekmi_confidence_interval(&t, &PhiFunction::log_y(), 1.0).is_err());
}

fn arb_tail() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, Vec<f64>)> {
    (1usize..80).prop_flat_map(|k| {
        (
            prop::collection::vec(1.0f64..1e4, k),
            prop::collection::vec(prop::bool::weighted(0.6), k),
            prop::collection::vec(0f64..5.0, k),
        )
    })
}

fn build((mut v, d, x): (Vec<f64>, Vec<bool>, Vec<f64>)) -> TailSubsample {
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    let k = v.len();
    TailSubsample::from_parts(1.0, v, d[..k].to_vec(), x[..k].to_vec(), 1).unwrap()
}

proptest! {
    #[test]
    fn weights_match_product_limit(raw in arb_tail()) {
        let t = build(raw);
        let w = km_weights(&t);
        let oracle = product_limit_jumps(t.v(), t.delta());
        for (a, b) in w.as_slice().iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let total: f64 = w.as_slice().iter().sum();
        prop_assert!(total <= 1.0 + 1e-12);
        prop_assert_eq!((total - 1.0).abs() < 1e-12, t.delta()[0]);
    }

    #[test]
    fn cdf_is_monotone_and_bounded(raw in arb_tail(), ys in prop::collection::vec(1.0f64..1e4, 2), xs in prop::collection::vec(0f64..5.0, 2)) {
        let t = build(raw);
        let w = km_weights(&t);
        let (y0, y1) = (ys[0].min(ys[1]), ys[0].max(ys[1]));
        let (x0, x1) = (xs[0].min(xs[1]), xs[0].max(xs[1]));
        let low = ekmi_cdf(&t, &w, &[x0], y0);
        prop_assert!(low <= ekmi_cdf(&t, &w, &[x1], y0) + 1e-15);
        prop_assert!(low <= ekmi_cdf(&t, &w, &[x0], y1) + 1e-15);
        prop_assert!(ekmi_cdf(&t, &w, &[x1], y1) <= w.total() + 1e-15);
    }

    #[test]
    fn variance_is_nonnegative(raw in arb_tail()) {
        let t = build(raw);
        prop_assume!(t.k() >= 2);
        for phi in [PhiFunction::log_y(), PhiFunction::y_at_most(3.0), PhiFunction::constant(1.0)] {
            prop_assert!(plug_in_variance(&t, &phi).unwrap() >= 0.0);
        }
    }

    #[test]
    fn uncensored_integral_is_plain_mean(raw in arb_tail()) {
        let (v, d, x) = raw;
        let t = build((v, vec![true; d.len()], x));
        let w = km_weights(&t);
        let phi = PhiFunction::new("x + log y", |x: &[f64], y: f64| x[0] + y.ln());
        let mean = (0..t.k()).map(|i| t.x(i)[0] + t.v()[i].ln()).sum::<f64>() / t.k() as f64;
        prop_assert_eq!(ekmi_integral(&t, &w, &phi).unwrap(), mean);
    }
}
