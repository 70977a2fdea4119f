//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::error::Error;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use extkm::estimators::{naive_region_estimator, region_probability, tail_index_curve, Bandwidth, Region};
use extkm::km::{ekmi_integral, km_weights, PhiFunction};
use extkm::profile::{reference_gamma_f, IndexProfile};
use extkm::sample::{sort_with_concomitants, CensoredSample, TailSubsample};
use extkm::seeds::rng;
use extkm::simulation::{
    decomposition_residual_check, empirical_threshold, monte_carlo_clt, ModelConfig,
};
use extkm::tail::{
    asymptotic_variance_oracle, covariate_limit_distribution, potter_bound_report, BurrFamily,
    CovariateLaw, LimitModel, ParetoFamily, Threshold, VarianceMethod,
};
use rand::Rng;

type Outcome = Result<(bool, String), Box<dyn Error>>;
type Criterion = (&'static str, u64, fn() -> Outcome);

const SEED: u64 = 7;

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn tail_of(v: Vec<f64>, delta: Vec<bool>, x: Vec<f64>) -> TailSubsample {
    TailSubsample::from_parts(1.0, v, delta, x, 1).expect("valid tail")
}

fn weight_laws() -> Outcome {
    let mut patterns = 0usize;
    let mut bad = Vec::new();
    for k in 1..=12usize {
        let v: Vec<f64> = (0..k).map(|i| (k - i) as f64 + 1.0).collect();
        for mask in 0u32..(1 << k) {
            let delta: Vec<bool> = (0..k).map(|i| mask >> i & 1 == 1).collect();
            let w = km_weights(&tail_of(v.clone(), delta.clone(), vec![0.0; k]));
            let total: f64 = w.as_slice().iter().sum();
            let full = (total - 1.0).abs() <= 1e-12;
            if total > 1.0 + 1e-12 || full != delta[0] {
                bad.push(format!("k={k} mask={mask:b} total={total}"));
            }
            if delta.iter().all(|d| *d) && w.as_slice().iter().any(|wi| *wi != 1.0 / k as f64) {
                bad.push(format!("k={k} uncensored weights not 1/k"));
            }
            patterns += 1;
        }
    }
    Ok((bad.is_empty(), format!("{patterns} patterns, {} violations {:?}", bad.len(), bad.first())))
}

/// Jumps of the product-limit estimator through the exponential form,
/// integrating against the censored sub-distribution in increasing order of
/// `v` and counting the risk set by value.
fn exp_log_oracle(v: &[f64], delta: &[bool], phi: &[f64]) -> f64 {
    let k = v.len();
    let kf = k as f64;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let mut sum = 0.0;
    for &i in &order {
        if !delta[i] {
            continue;
        }
        let mut integral = 0.0;
        for &j in &order {
            if v[j] >= v[i] {
                break;
            }
            if !delta[j] {
                let surv = v.iter().filter(|&&u| u > v[j]).count() as f64 / kf;
                integral += (1.0 + 1.0 / (kf * surv)).ln() / kf;
            }
        }
        sum += phi[i] * (kf * integral).exp();
    }
    sum / kf
}

fn exp_log_identity() -> Outcome {
    let mut r = rng(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = r.random_range(2..=500usize);
        let censor_rate: f64 = r.random_range(0.0..0.8);
        let mut v: Vec<f64> = (0..k).map(|_| 1.0 / r.random::<f64>().max(1e-300).powf(0.5)).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        let delta: Vec<bool> = (0..k).map(|_| r.random::<f64>() >= censor_rate).collect();
        let x: Vec<f64> = (0..k).map(|_| r.random_range(1.0..5.0)).collect();
        let phi = PhiFunction::new("x log y", |x: &[f64], y: f64| x[0] * y.ln() + 1.0);
        let tail = tail_of(v.clone(), delta.clone(), x.clone());
        let s = ekmi_integral(&tail, &km_weights(&tail), &phi)?;
        let values: Vec<f64> = (0..k).map(|i| x[i] * v[i].ln() + 1.0).collect();
        let oracle = exp_log_oracle(&v, &delta, &values);
        worst = worst.max((s - oracle).abs() / (1.0 + s.abs()));
    }
    Ok((worst < 1e-10, format!("max relative gap {worst:.3e} over 200 samples")))
}

fn reduction_and_scale() -> Outcome {
    let phis = [
        PhiFunction::log_y(),
        PhiFunction::new("x log y", |x: &[f64], y: f64| x[0] * y.ln()),
        Region::interval(1.8, 2.2)?.indicator(),
    ];
    let uncensored = ModelConfig::pareto(0.5, None, 5000, SEED);
    let sorted = sort_with_concomitants(&uncensored.sample_with_seed(5000, SEED)?)?;
    let tail = sorted.tail(500)?;
    let w = km_weights(&tail);
    let mut exact = true;
    for phi in &phis {
        let s = ekmi_integral(&tail, &w, phi)?;
        let mean = (0..500).map(|i| phi.eval(tail.x(i), tail.v()[i])).sum::<f64>() / 500.0;
        exact &= s == mean;
    }
    let censored = ModelConfig::burr_paper(5000, SEED).sample_with_seed(5000, SEED)?;
    let mut worst: f64 = 0.0;
    for phi in &phis {
        let base = {
            let t = sort_with_concomitants(&censored)?.tail(500)?;
            ekmi_integral(&t, &km_weights(&t), phi)?
        };
        for c in [1e-6, 1.0, 1e6] {
            let scaled: CensoredSample = censored.scaled(c);
            let t = sort_with_concomitants(&scaled)?.tail(500)?;
            let s = ekmi_integral(&t, &km_weights(&t), phi)?;
            worst = worst.max((s - base).abs() / base.abs().max(f64::MIN_POSITIVE));
        }
    }
    Ok((
        exact && worst <= 1e-12,
        format!("uncensored exact = {exact}, max scale gap {worst:.3e}"),
    ))
}

fn region_figure() -> Outcome {
    let n = 100_000;
    let r1 = Region::interval(1.8, 2.2)?;
    let r0 = Region::interval(1.0, 1.4)?;
    let cfg = ModelConfig::burr_paper(n, SEED);
    let sorted = sort_with_concomitants(&cfg.sample_with_seed(n, SEED)?)?;
    let e1 = region_probability(&sorted, 1000, &r1, 0.95)?.value;
    let e0 = region_probability(&sorted, 1000, &r0, 0.95)?.value;
    let (mut wins1, mut wins0) = (0, 0);
    for seed in 1..=20u64 {
        let sorted = sort_with_concomitants(&cfg.sample_with_seed(n, seed)?)?;
        let k = 10_000;
        let ek1 = region_probability(&sorted, k, &r1, 0.95)?.value;
        let nv1 = naive_region_estimator(&sorted, k, &r1)?;
        let ek0 = region_probability(&sorted, k, &r0, 0.95)?.value;
        let nv0 = naive_region_estimator(&sorted, k, &r0)?;
        wins1 += usize::from((ek1 - 0.5).abs() < (nv1 - 0.5).abs());
        wins0 += usize::from(ek0.abs() < nv0.abs());
    }
    let pass = (0.40..=0.60).contains(&e1) && e0 <= 0.05 && wins1 >= 12 && wins0 >= 12;
    Ok((
        pass,
        format!(
            "k/n=0.01: R(1.8,2.2) = {e1:.4}, R(1.0,1.4) = {e0:.4}; EKMI closer at k/n=0.1 in {wins1}/20 and {wins0}/20 seeds"
        ),
    ))
}

fn kernel_figure() -> Outcome {
    let n = 100_000;
    let target = 1.29789;
    let cfg = ModelConfig::burr_paper(n, SEED);
    let sorted = sort_with_concomitants(&cfg.sample_with_seed(n, SEED)?)?;
    let fixed = tail_index_curve(&sorted, 5000, &[2.0, 3.0, 4.0], Bandwidth::Fixed(0.1), 0.95)?;
    let (g2, g3, g4) = (fixed[0].estimate.value, fixed[1].estimate.value, fixed[2].estimate.value);
    let grid: Vec<f64> = (0..=80).map(|i| 1.0 + 0.05 * i as f64).collect();
    let auto = tail_index_curve(&sorted, 20_000, &grid, Bandwidth::Auto, 0.95)?;
    let peak = |lo: f64, hi: f64| {
        auto.iter()
            .filter(|p| p.center >= lo && p.center <= hi)
            .map(|p| p.estimate.value)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (p_low, p_high) = (peak(1.0, 3.0), peak(3.0, 5.0));
    let in_band = |g: f64| (g - target).abs() <= 0.25;
    let peaks_ok = (1.0..=1.6).contains(&p_low) && (1.0..=1.6).contains(&p_high);
    Ok((
        in_band(g2) && in_band(g4) && g3 < g2 - 0.2 && peaks_ok,
        format!(
            "h=0.1: g(2) = {g2:.4}, g(3) = {g3:.4}, g(4) = {g4:.4}; AUTO (h = {:.4}) peaks {p_low:.4}, {p_high:.4}",
            auto[0].bandwidth
        ),
    ))
}

fn clt_coverage() -> Outcome {
    let cfg = ModelConfig::pareto(0.5, Some(1.0), 20_000, SEED);
    let report = monte_carlo_clt(&cfg, &PhiFunction::y_at_most(2.0), 200, 500, 0.95)?;
    let ad = report.anderson_darling.unwrap_or(f64::NAN);
    let pass = (0.90..=0.985).contains(&report.coverage) && report.normality_pass == Some(true);
    Ok((
        pass,
        format!(
            "center {} ({}), coverage {:.3}, Anderson-Darling {ad:.3} (1% critical 3.857)",
            report.center, report.center_kind, report.coverage
        ),
    ))
}

fn decomposition() -> Outcome {
    let phi = PhiFunction::y_at_most(2.0);
    let cfg = ModelConfig::pareto(0.5, Some(1.0), 1_000_000, SEED);
    let t = empirical_threshold(&cfg, 0.999, 1_000_000, SEED);
    let small = decomposition_residual_check(&cfg, &phi, t, 200, 200, SEED)?;
    let large = decomposition_residual_check(&cfg, &phi, t, 2000, 200, SEED)?;
    let drop = 1.0 - large.median_abs / small.median_abs;
    let plain = ModelConfig::pareto(0.5, None, 1_000_000, SEED);
    let t0 = empirical_threshold(&plain, 0.999, 1_000_000, SEED);
    let zero = decomposition_residual_check(&plain, &phi, t0, 200, 20, SEED)?;
    let exact = zero.scaled_residuals.iter().all(|r| *r == 0.0);
    Ok((
        drop >= 0.3 && exact,
        format!(
            "t = {t:.3}: median |sqrt(k) r| {:.4} (k=200) -> {:.4} (k=2000), drop {:.0}%; uncensored exactly zero = {exact}",
            small.median_abs,
            large.median_abs,
            100.0 * drop
        ),
    ))
}

fn limit_covariate() -> Outcome {
    let family = Arc::new(BurrFamily::with_tail_index(reference_gamma_f()));
    let fx = CovariateLaw::uniform(1.0, 5.0)?;
    let p4 = covariate_limit_distribution(family.clone(), &fx, Threshold::Finite(1e4))?.probability(1.8, 2.2);
    let p6 = covariate_limit_distribution(family.clone(), &fx, Threshold::Finite(1e6))?.probability(1.8, 2.2);
    let limit = covariate_limit_distribution(family, &fx, Threshold::Infinite)?;
    let atoms_ok = match &limit {
        CovariateLaw::Discrete { atoms, probs } => {
            atoms.len() == 2
                && (atoms[0] - 2.0).abs() <= 1e-3
                && (atoms[1] - 4.0).abs() <= 1e-3
                && probs.iter().all(|p| (p - 0.5).abs() <= 1e-3)
        }
        _ => false,
    };
    Ok((
        (p4 - 0.5).abs() <= 0.05 && (p6 - 0.5).abs() <= 0.01 && atoms_ok,
        format!("P(1.8<X<=2.2): t=1e4 {p4:.4}, t=1e6 {p6:.4}; limit {limit:?}"),
    ))
}

fn potter() -> Outcome {
    let xs: Vec<f64> = (0..=40).map(|i| 1.0 + 0.1 * i as f64).collect();
    let ys = log_grid(1.0, 1e3, 25);
    let mut lines = Vec::new();
    let mut pass = true;
    for profile in [IndexProfile::Constant(0.5), reference_gamma_f()] {
        let r = potter_bound_report(&ParetoFamily::new(profile), 0.0, 0.0, 1.0, &log_grid(1.1, 1e6, 25), &ys, &xs)?;
        pass &= r.pass;
        lines.push(format!("pareto eps=0 max {:.2e}", r.max_violation));
    }
    let burr = BurrFamily::new(IndexProfile::Constant(1.0), IndexProfile::Constant(2.0));
    let ok = potter_bound_report(&burr, 0.05, 0.05, 99.0, &log_grid(100.0, 1e6, 25), &ys, &[0.0])?;
    let bad = potter_bound_report(&burr, 0.05, 0.05, 1.0, &log_grid(1.1, 1e6, 25), &ys, &[0.0])?;
    pass &= ok.pass && !bad.pass;
    lines.push(format!("burr t>=100 max {:.2e}", ok.max_violation));
    lines.push(format!("burr t>=1.1 max {:.3} flagged = {}", bad.max_violation, !bad.pass));
    Ok((pass, lines.join("; ")))
}

fn variance_oracle() -> Outcome {
    let phi = PhiFunction::y_at_most(2.0);
    let mut pass = true;
    let mut lines = Vec::new();
    for gamma_g in [None, Some(1.0), Some(0.75)] {
        let model = LimitModel::new(CovariateLaw::uniform(1.0, 5.0)?, IndexProfile::Constant(0.5), gamma_g)?;
        let quad = asymptotic_variance_oracle(&phi, &model, VarianceMethod::Quadrature)?;
        let mc = asymptotic_variance_oracle(
            &phi,
            &model,
            VarianceMethod::MonteCarlo {
                reps: 1_000_000,
                seed: SEED,
            },
        )?;
        let z = (quad.value - mc.value).abs() / mc.std_error;
        pass &= z <= 3.0;
        lines.push(format!("gG={gamma_g:?}: {:.5} vs {:.5} ({z:.2} SE)", quad.value, mc.value));
    }
    Ok((pass, lines.join("; ")))
}

fn run_cli(threads: usize, args: &[&str]) -> Result<Vec<u8>, Box<dyn Error>> {
    let out = Command::new(env!("CARGO_BIN_EXE_extkm"))
        .args(args)
        .env("EXTKM_THREADS", threads.to_string())
        .output()?;
    if !out.status.success() {
        return Err(format!("extkm {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)).into());
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let commands: [&[&str]; 4] = [
        &["simulate", "--simulate", "burr_paper", "--n", "50000", "--seed", "7"],
        &["simulate", "--simulate", "pareto_exact", "--n", "20000", "--seed", "7", "--format", "json"],
        &["clt-study", "--simulate", "pareto_exact", "--n", "5000", "--k", "100", "--reps", "100", "--seed", "7"],
        &[
            "clt-study", "--simulate", "burr_paper", "--n", "5000", "--k", "100", "--reps", "60", "--seed", "7",
            "--format", "json",
        ],
    ];
    let mut same = 0;
    for args in commands {
        let base = run_cli(1, args)?;
        if [2, 8].iter().all(|t| run_cli(*t, args).map(|o| o == base).unwrap_or(false)) {
            same += 1;
        }
    }
    Ok((same == commands.len(), format!("{same}/{} commands identical across 1, 2, 8 threads", commands.len())))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("weight laws", 5, weight_laws),
        ("exp-log identity", 10, exp_log_identity),
        ("uncensored reduction and scale invariance", 5, reduction_and_scale),
        ("region probabilities", 180, region_figure),
        ("kernel tail index", 180, kernel_figure),
        ("CLT coverage", 300, clt_coverage),
        ("decomposition residual", 300, decomposition),
        ("limit covariate law", 60, limit_covariate),
        ("Potter verifier", 30, potter),
        ("variance oracle", 120, variance_oracle),
        ("determinism", 120, determinism),
    ];
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        println!(
            "criterion {} [{name}]: {} ({detail}) in {:.1}s (budget {budget}s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
