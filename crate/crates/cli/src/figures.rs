//! Canned studies that write one data file per figure panel.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use extkm::estimators::{naive_region_estimator, region_probability, tail_index_curve, Bandwidth, Region};
use extkm::sample::sort_with_concomitants;
use extkm::simulation::{gamma_profiles, monte_carlo_clt, sample_model, MCReport, ModelConfig};

use crate::grid::{parse_k_grid, parse_phi, parse_real_grid};
use crate::output::{emit, header_line, Cell, Format, Table};
use crate::CliError;

pub const STUDIES: [&str; 4] = ["fig_gamma", "fig_regions", "fig_kernel", "clt_coverage"];

/// Everything a study needs; written to and read from the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyParams {
    pub study: String,
    pub model: String,
    pub seed: u64,
    pub n: usize,
    pub k_grid: String,
    pub k: usize,
    pub regions: Vec<String>,
    pub bandwidths: Vec<String>,
    pub a_grid: String,
    pub reps: usize,
    pub level: f64,
    pub phi: String,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl StudyParams {
    pub fn canned(study: &str, seed: Option<u64>) -> Result<Self, CliError> {
        let mut p = Self {
            study: study.to_string(),
            model: "burr_paper".into(),
            seed: seed.unwrap_or(7),
            n: 100_000,
            k_grid: "100:20000:100".into(),
            k: 5000,
            regions: vec!["1.8,2.2".into(), "1.0,1.4".into()],
            bandwidths: vec!["0.05".into(), "0.1".into(), "0.5".into(), "AUTO".into()],
            a_grid: "1:5:0.02".into(),
            reps: 500,
            level: 0.95,
            phi: "le:2".into(),
        };
        match study {
            "fig_gamma" => {
                p.a_grid = "1:5:0.01".into();
            }
            "fig_regions" | "fig_kernel" => {}
            "clt_coverage" => {
                p.model = "pareto_exact".into();
                p.n = 20_000;
                p.k = 200;
            }
            other => {
                return Err(usage(format!(
                    "unknown study '{other}' (known: {})",
                    STUDIES.join(", ")
                )))
            }
        }
        Ok(p)
    }

    pub fn to_manifest(&self, files: &[String]) -> String {
        format!(
            "study = {}\nmodel = {}\nseed = {}\nn = {}\nk_grid = {}\nk = {}\nregions = {}\nbandwidths = {}\na_grid = {}\nreps = {}\nlevel = {}\nphi = {}\nfiles = {}\n",
            self.study,
            self.model,
            self.seed,
            self.n,
            self.k_grid,
            self.k,
            self.regions.join(" "),
            self.bandwidths.join(" "),
            self.a_grid,
            self.reps,
            self.level,
            self.phi,
            files.join(" ")
        )
    }

    pub fn from_manifest(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("bad manifest line '{line}'")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| map.get(k).cloned().ok_or_else(|| usage(format!("manifest lacks '{k}'")));
        let num_err = |k: &str| usage(format!("manifest: bad value for '{k}'"));
        let list = |s: String| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let p = Self {
            study: get("study")?,
            model: get("model")?,
            seed: get("seed")?.parse().map_err(|_| num_err("seed"))?,
            n: get("n")?.parse().map_err(|_| num_err("n"))?,
            k_grid: get("k_grid")?,
            k: get("k")?.parse().map_err(|_| num_err("k"))?,
            regions: list(get("regions")?),
            bandwidths: list(get("bandwidths")?),
            a_grid: get("a_grid")?,
            reps: get("reps")?.parse().map_err(|_| num_err("reps"))?,
            level: get("level")?.parse().map_err(|_| num_err("level"))?,
            phi: get("phi")?,
        };
        if !STUDIES.contains(&p.study.as_str()) {
            return Err(usage(format!("unknown study '{}'", p.study)));
        }
        Ok(p)
    }

    fn model(&self) -> Result<ModelConfig, CliError> {
        let mut m = ModelConfig::canned(&self.model)
            .ok_or_else(|| usage(format!("unknown model '{}'", self.model)))?;
        m.n = self.n;
        m.seed = self.seed;
        Ok(m)
    }

    fn echo(&self) -> String {
        self.to_manifest(&[]).lines().filter(|l| !l.starts_with("files")).collect::<Vec<_>>().join("; ")
    }
}

pub fn clt_table(report: &MCReport) -> Table {
    let mut t = Table::new(&["rep", "seed", "threshold", "estimate", "se", "lo", "hi", "covered"]);
    let q = extkm::stats::two_sided_quantile(report.level);
    for r in 0..report.reps {
        let (e, se) = (report.estimates[r], report.std_errors[r]);
        t.push(vec![
            r.into(),
            report.seeds[r].into(),
            report.thresholds[r].into(),
            e.into(),
            se.into(),
            (e - q * se).into(),
            (e + q * se).into(),
            report.covered[r].into(),
        ]);
    }
    t.notes.push(format!(
        "center={} ({}); coverage={}; anderson_darling={}; normality_pass={}",
        report.center,
        report.center_kind,
        report.coverage,
        report.anderson_darling.map_or("none".into(), |a| a.to_string()),
        report.normality_pass.map_or("none".into(), |a| a.to_string()),
    ));
    t
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect()
}

/// Runs the study and writes its panel files and `manifest.txt` into `dir`.
pub fn emit_figure_bundle(p: &StudyParams, dir: &Path) -> Result<(), CliError> {
    let header = header_line(&format!("figures {}", p.study), Some(p.seed), &p.echo());
    let mut panels: Vec<(String, Table)> = Vec::new();
    match p.study.as_str() {
        "fig_gamma" => {
            let mut t = Table::new(&["x", "gamma_f", "gamma_c1"]);
            for x in parse_real_grid(&p.a_grid)? {
                let (gf, gc) = gamma_profiles(x);
                t.push(vec![x.into(), gf.into(), gc.into()]);
            }
            panels.push(("gamma_profiles.csv".into(), t));
        }
        "fig_regions" => {
            let ks = parse_k_grid(&p.k_grid)?;
            let sorted = sort_with_concomitants(&sample_model(&p.model()?)?)?;
            if ks.last().is_some_and(|k| *k >= sorted.len()) {
                return Err(CliError::Data("k grid exceeds the sample size".into()));
            }
            for (i, r) in p.regions.iter().enumerate() {
                let region = Region::parse(r).map_err(|e| usage(e.to_string()))?;
                let rows: Vec<Vec<Cell>> = ks
                    .par_iter()
                    .map(|&k| -> Result<Vec<Cell>, CliError> {
                        let e = region_probability(&sorted, k, &region, p.level)?;
                        let naive = naive_region_estimator(&sorted, k, &region)?;
                        Ok(vec![
                            k.into(),
                            e.value.into(),
                            e.std_error.into(),
                            e.lower.into(),
                            e.upper.into(),
                            naive.into(),
                        ])
                    })
                    .collect::<Result<_, _>>()?;
                let mut t = Table::new(&["k", "estimate", "se", "lo", "hi", "naive"]);
                t.notes.push(format!("region={region}"));
                rows.into_iter().for_each(|row| t.push(row));
                panels.push((format!("region_{}.csv", i + 1), t));
            }
        }
        "fig_kernel" => {
            let sorted = sort_with_concomitants(&sample_model(&p.model()?)?)?;
            if p.k >= sorted.len() {
                return Err(CliError::Data("k exceeds the sample size".into()));
            }
            let centers = parse_real_grid(&p.a_grid)?;
            for b in &p.bandwidths {
                let bw: Bandwidth = b.parse().map_err(|e: extkm::estimators::EstimatorError| usage(e.to_string()))?;
                let mut t = Table::new(&["a", "k", "estimate", "lo", "hi", "bandwidth", "se"]);
                for c in tail_index_curve(&sorted, p.k, &centers, bw, p.level)? {
                    t.push(vec![
                        c.center.into(),
                        p.k.into(),
                        c.estimate.value.into(),
                        c.estimate.lower.into(),
                        c.estimate.upper.into(),
                        c.bandwidth.into(),
                        c.estimate.std_error.into(),
                    ]);
                }
                panels.push((format!("kernel_h{}.csv", sanitize(&bw.to_string())), t));
            }
        }
        "clt_coverage" => {
            let model = p.model()?;
            let phi = parse_phi(&p.phi)?;
            let report = monte_carlo_clt(&model, &phi, p.k, p.reps, p.level)?;
            let mut s = Table::new(&["reps", "k", "n", "level", "center", "coverage", "anderson_darling"]);
            s.push(vec![
                report.reps.into(),
                report.k.into(),
                report.n.into(),
                report.level.into(),
                report.center.into(),
                report.coverage.into(),
                report.anderson_darling.unwrap_or(f64::NAN).into(),
            ]);
            panels.push(("clt_replicates.csv".into(), clt_table(&report)));
            panels.push(("clt_summary.csv".into(), s));
        }
        other => return Err(usage(format!("unknown study '{other}'"))),
    }
    std::fs::create_dir_all(dir)?;
    let names: Vec<String> = panels.iter().map(|(n, _)| n.clone()).collect();
    for (name, table) in &panels {
        emit(&table.render(&header, Format::Csv)?, Some(&dir.join(name)))?;
    }
    emit(&p.to_manifest(&names), Some(&dir.join("manifest.txt")))
}
