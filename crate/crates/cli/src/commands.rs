use std::path::Path;

use rayon::prelude::*;

use extkm::estimators::{
    category_distribution, distinct_categories, hill_estimator, naive_region_estimator,
    region_probability, tail_index_curve, Bandwidth, Region,
};
use extkm::profile::{reference_gamma_f, IndexProfile};
use extkm::sample::{load_csv, sort_with_concomitants, CensoredSample, CsvSchema, SortedSample};
use extkm::simulation::{
    decomposition_residual_check, empirical_threshold, monte_carlo_clt, sample_model, ModelConfig,
};
use extkm::tail::diagnostics::{condition_diagnostics, DiagnosticsReport};
use extkm::tail::family::{BurrFamily, ParetoFamily, RVFamily};
use extkm::tail::{potter_bound_report, BoundReport};

use crate::args::{Cli, Command, DataArgs, OutArgs, SimArgs};
use crate::figures;
use crate::grid::{parse_k_grid, parse_log_grid, parse_phi, parse_real_grid};
use crate::output::{emit, header_line, render_json, Cell, Format, Table};
use crate::CliError;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn check_level(level: f64) -> Result<(), CliError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("--level must lie in (0, 1), got {level}")))
    }
}

/// Canned name or config file, with `--n` / `--seed` overrides.
pub fn model_from(sim: &SimArgs, default: &str) -> Result<ModelConfig, CliError> {
    let name = sim.simulate.as_deref().unwrap_or(default);
    let mut cfg = match ModelConfig::canned(name) {
        Some(c) => c,
        None => {
            let path = Path::new(name);
            if !path.is_file() {
                return Err(usage(format!("'{name}' is neither a canned model nor a config file")));
            }
            let text = std::fs::read_to_string(path)?;
            ModelConfig::from_kv(&text).map_err(|e| usage(e.to_string()))?
        }
    };
    if let Some(n) = sim.n {
        cfg.n = n;
    }
    if let Some(s) = sim.seed {
        cfg.seed = s;
    }
    if cfg.n < 2 {
        return Err(usage("sample size must be at least 2"));
    }
    Ok(cfg)
}

struct Data {
    sorted: SortedSample,
    seed: Option<u64>,
    source: String,
}

fn load_data(args: &DataArgs) -> Result<Data, CliError> {
    let (sample, seed, source): (CensoredSample, _, _) = match (&args.input, &args.simulate) {
        (Some(path), None) => {
            let covs: Vec<&str> = args.x_cols.iter().map(String::as_str).collect();
            let schema = CsvSchema::new(&args.z_col, &args.delta_col, &covs);
            (load_csv(path, &schema)?, None, format!("input={}", path.display()))
        }
        (None, Some(_)) => {
            let sim = SimArgs {
                simulate: args.simulate.clone(),
                n: args.n,
                seed: args.seed,
            };
            let cfg = model_from(&sim, "burr_paper")?;
            (sample_model(&cfg)?, Some(cfg.seed), cfg.describe())
        }
        (None, None) => return Err(usage("give --input or --simulate")),
        (Some(_), Some(_)) => return Err(usage("--input and --simulate are mutually exclusive")),
    };
    Ok(Data {
        sorted: sort_with_concomitants(&sample)?,
        seed,
        source,
    })
}

fn check_k(ks: &[usize], n: usize) -> Result<(), CliError> {
    match ks.last() {
        Some(&k) if k >= n => Err(CliError::Data(format!("k = {k} must be below the sample size {n}"))),
        _ => Ok(()),
    }
}

fn write_table(
    table: &Table,
    command: &str,
    seed: Option<u64>,
    params: &str,
    out: &OutArgs,
) -> Result<(), CliError> {
    let text = table.render(&header_line(command, seed, params), out.format)?;
    emit(&text, out.out.as_deref())
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { sim, out } => {
            let cfg = model_from(&sim, "burr_paper")?;
            let sample = sample_model(&cfg)?;
            let mut t = Table::new(&["z", "delta", "x"]);
            for i in 0..sample.len() {
                t.push(vec![
                    sample.z()[i].into(),
                    Cell::Int(u64::from(sample.delta()[i])),
                    sample.x(i)[0].into(),
                ]);
            }
            write_table(&t, "simulate", Some(cfg.seed), &cfg.describe(), &out)
        }
        Command::Region {
            data,
            k_grid,
            region,
            level,
            out,
        } => {
            check_level(level)?;
            let ks = parse_k_grid(&k_grid)?;
            let regions: Vec<Region> = region
                .iter()
                .map(|r| Region::parse(r).map_err(|e| usage(e.to_string())))
                .collect::<Result<_, _>>()?;
            let d = load_data(&data)?;
            check_k(&ks, d.sorted.len())?;
            let mut t = Table::new(&["k", "estimate", "se", "lo", "hi", "naive", "region"]);
            for r in &regions {
                let rows: Vec<Vec<Cell>> = ks
                    .par_iter()
                    .map(|&k| -> Result<Vec<Cell>, CliError> {
                        let e = region_probability(&d.sorted, k, r, level)?;
                        let naive = naive_region_estimator(&d.sorted, k, r)?;
                        Ok(vec![
                            k.into(),
                            e.value.into(),
                            e.std_error.into(),
                            e.lower.into(),
                            e.upper.into(),
                            naive.into(),
                            r.to_string().into(),
                        ])
                    })
                    .collect::<Result<_, _>>()?;
                rows.into_iter().for_each(|row| t.push(row));
            }
            let params = format!("{}; k_grid={k_grid}; regions={}; level={level}", d.source, region.join(" "));
            write_table(&t, "region", d.seed, &params, &out)
        }
        Command::TailCurve {
            data,
            k_grid,
            grid,
            bandwidth,
            level,
            out,
        } => {
            check_level(level)?;
            let ks = parse_k_grid(&k_grid)?;
            let centers = parse_real_grid(&grid)?;
            let bws: Vec<Bandwidth> = bandwidth
                .iter()
                .map(|b| b.parse().map_err(|e: extkm::estimators::EstimatorError| usage(e.to_string())))
                .collect::<Result<_, _>>()?;
            let d = load_data(&data)?;
            check_k(&ks, d.sorted.len())?;
            let mut t = Table::new(&["a", "k", "estimate", "lo", "hi", "bandwidth", "se", "bandwidth_mode"]);
            for bw in &bws {
                for &k in &ks {
                    for p in tail_index_curve(&d.sorted, k, &centers, *bw, level)? {
                        t.push(vec![
                            p.center.into(),
                            k.into(),
                            p.estimate.value.into(),
                            p.estimate.lower.into(),
                            p.estimate.upper.into(),
                            p.bandwidth.into(),
                            p.estimate.std_error.into(),
                            bw.to_string().into(),
                        ]);
                    }
                }
            }
            let params = format!(
                "{}; k_grid={k_grid}; grid={grid}; bandwidth={}; level={level}",
                d.source,
                bandwidth.join(" ")
            );
            write_table(&t, "tail-curve", d.seed, &params, &out)
        }
        Command::Hill { data, k_grid, out } => {
            let ks = parse_k_grid(&k_grid)?;
            let d = load_data(&data)?;
            check_k(&ks, d.sorted.len())?;
            let vals: Vec<f64> = ks
                .par_iter()
                .map(|&k| hill_estimator(&d.sorted, k))
                .collect::<Result<_, _>>()?;
            let mut t = Table::new(&["k", "hill"]);
            for (k, v) in ks.iter().zip(vals) {
                t.push(vec![(*k).into(), v.into()]);
            }
            write_table(&t, "hill", d.seed, &format!("{}; k_grid={k_grid}", d.source), &out)
        }
        Command::CensoredProp { data, k_grid, out } => {
            let ks = parse_k_grid(&k_grid)?;
            let d = load_data(&data)?;
            check_k(&ks, d.sorted.len())?;
            let mut t = Table::new(&["k", "censored_prop"]);
            for &k in &ks {
                t.push(vec![k.into(), d.sorted.censored_proportion(k)?.into()]);
            }
            write_table(&t, "censored-prop", d.seed, &format!("{}; k_grid={k_grid}", d.source), &out)
        }
        Command::Categories { data, k_grid, out } => {
            let ks = parse_k_grid(&k_grid)?;
            let d = load_data(&data)?;
            check_k(&ks, d.sorted.len())?;
            let cats = distinct_categories(&d.sorted, *ks.last().expect("nonempty grid"))?;
            let mut t = Table::new(&["k", "category", "raw", "normalized"]);
            for &k in &ks {
                let dist = category_distribution(&d.sorted, k, &cats)?;
                for i in 0..dist.labels.len() {
                    t.push(vec![
                        k.into(),
                        dist.labels[i].into(),
                        dist.raw[i].into(),
                        dist.normalized[i].into(),
                    ]);
                }
            }
            write_table(&t, "categories", d.seed, &format!("{}; k_grid={k_grid}", d.source), &out)
        }
        Command::CltStudy {
            sim,
            phi,
            k,
            reps,
            level,
            out,
        } => {
            check_level(level)?;
            let cfg = model_from(&sim, "pareto_exact")?;
            let f = parse_phi(&phi)?;
            if k < 2 || k >= cfg.n {
                return Err(usage(format!("k = {k} must satisfy 2 <= k < n = {}", cfg.n)));
            }
            if reps < extkm::simulation::clt::MIN_REPLICATES {
                return Err(usage(format!(
                    "--reps must be at least {}",
                    extkm::simulation::clt::MIN_REPLICATES
                )));
            }
            let report = monte_carlo_clt(&cfg, &f, k, reps, level)?;
            let params = format!("{}; phi={phi}; k={k}; reps={reps}; level={level}", cfg.describe());
            let header = header_line("clt-study", Some(cfg.seed), &params);
            let text = match out.format {
                Format::Json => render_json(&header, &report)?,
                Format::Csv => figures::clt_table(&report).render(&header, Format::Csv)?,
            };
            emit(&text, out.out.as_deref())
        }
        Command::CheckConditions {
            family,
            kappa,
            tau,
            gamma,
            eps_a,
            eps_c,
            threshold_n,
            t_grid,
            y_grid,
            x_grid,
            u_grid,
            out,
        } => {
            let prof = |s: Option<String>, default: IndexProfile| -> Result<IndexProfile, CliError> {
                match s {
                    Some(s) => s.parse().map_err(|e: extkm::profile::ProfileError| usage(e.to_string())),
                    None => Ok(default),
                }
            };
            let fam: Box<dyn RVFamily> = match family.as_str() {
                "burr_paper" => Box::new(BurrFamily::with_tail_index(reference_gamma_f())),
                "burr" => Box::new(BurrFamily::new(
                    prof(kappa, IndexProfile::Constant(1.0))?,
                    prof(tau, IndexProfile::Constant(2.0))?,
                )),
                "pareto" => Box::new(ParetoFamily::new(prof(gamma, IndexProfile::Constant(0.5))?)),
                other => return Err(usage(format!("unknown family '{other}'"))),
            };
            let ts = parse_log_grid(&t_grid)?;
            let ys = parse_log_grid(&y_grid)?;
            let xs = parse_real_grid(&x_grid)?;
            let us = parse_log_grid(&u_grid)?;
            let potter = potter_bound_report(fam.as_ref(), eps_a, eps_c, threshold_n, &ts, &ys, &xs)
                .map_err(|e| match e {
                    extkm::tail::TailError::Domain(m) => usage(m),
                    other => CliError::Data(other.to_string()),
                })?;
            let diagnostics = condition_diagnostics(fam.as_ref(), &xs, &ys, &us);
            #[derive(serde::Serialize)]
            struct Body {
                potter: BoundReport,
                diagnostics: DiagnosticsReport,
            }
            let params = format!(
                "family={}; eps_a={eps_a}; eps_c={eps_c}; threshold_n={threshold_n}; t_grid={t_grid}; y_grid={y_grid}; x_grid={x_grid}; u_grid={u_grid}",
                fam.name()
            );
            let text = render_json(
                &header_line("check-conditions", None, &params),
                &Body { potter, diagnostics },
            )?;
            emit(&text, out.as_deref())
        }
        Command::DecompCheck {
            sim,
            phi,
            k_grid,
            reps,
            quantile,
            pilot_n,
            threshold,
            out,
        } => {
            let cfg = model_from(&sim, "pareto_exact")?;
            let f = parse_phi(&phi)?;
            let ks = parse_k_grid(&k_grid)?;
            if reps == 0 {
                return Err(usage("--reps must be positive"));
            }
            if !(quantile > 0.0 && quantile < 1.0) {
                return Err(usage("--quantile must lie in (0, 1)"));
            }
            let t = match threshold {
                Some(t) if t > 0.0 => t,
                Some(t) => return Err(usage(format!("--threshold must be positive, got {t}"))),
                None => empirical_threshold(&cfg, quantile, pilot_n.max(2), cfg.seed),
            };
            let mut table = Table::new(&[
                "k",
                "threshold",
                "reps",
                "median_abs",
                "mean_abs",
                "max_abs",
                "mean_estimate",
                "target",
            ]);
            for &k in &ks {
                let s = decomposition_residual_check(&cfg, &f, t, k, reps, cfg.seed)?;
                table.push(vec![
                    k.into(),
                    s.threshold.into(),
                    reps.into(),
                    s.median_abs.into(),
                    s.mean_abs.into(),
                    s.max_abs.into(),
                    s.mean_estimate.into(),
                    s.target.into(),
                ]);
            }
            let params = format!(
                "{}; phi={phi}; k_grid={k_grid}; reps={reps}; quantile={quantile}; pilot_n={pilot_n}; threshold={t}",
                cfg.describe()
            );
            write_table(&table, "decomp-check", Some(cfg.seed), &params, &out)
        }
        Command::Figures {
            study,
            manifest,
            out_dir,
            seed,
        } => {
            let params = match (study, manifest) {
                (_, Some(path)) => figures::StudyParams::from_manifest(&std::fs::read_to_string(&path)?)?,
                (Some(name), None) => figures::StudyParams::canned(&name, seed)?,
                (None, None) => return Err(usage("give --study or --manifest")),
            };
            figures::emit_figure_bundle(&params, &out_dir)
        }
    }
}
