use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "extkm", version, about = "Extreme Kaplan-Meier integrals: tail estimation under censoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Where the sample comes from: a CSV file or a simulation config.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a response, a censoring indicator and covariates.
    #[arg(long, conflicts_with = "simulate")]
    pub input: Option<PathBuf>,
    /// Canned model name (burr_paper, pareto_exact, pareto_uncensored) or a key=value config file.
    #[arg(long)]
    pub simulate: Option<String>,
    /// Sample size override for --simulate.
    #[arg(long, requires = "simulate")]
    pub n: Option<usize>,
    /// Seed override for --simulate.
    #[arg(long, requires = "simulate")]
    pub seed: Option<u64>,
    #[arg(long, default_value = "z")]
    pub z_col: String,
    #[arg(long, default_value = "delta")]
    pub delta_col: String,
    /// Covariate column; repeat for several.
    #[arg(long = "x-col", default_values_t = vec!["x".to_string()])]
    pub x_cols: Vec<String>,
}

/// Simulation config only (for Monte Carlo studies).
#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub simulate: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a sample from a model and write z, delta, x.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// EKMI probability of covariate regions in the tail, with the naive estimator.
    Region {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k_grid: String,
        /// Region such as 1.8,2.2 (half-open (a,b]) or [1,2); repeat for several.
        #[arg(long, required = true)]
        region: Vec<String>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Kernel-smoothed local tail index over a grid of covariate centers.
    TailCurve {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k_grid: String,
        /// Centers as start:stop:step or a comma list.
        #[arg(long, default_value = "1:5:0.05")]
        grid: String,
        /// Bandwidth value or AUTO; repeat for several.
        #[arg(long, default_values_t = vec!["AUTO".to_string()])]
        bandwidth: Vec<String>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Hill estimator of the tail index, ignoring censoring.
    Hill {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k_grid: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fraction of censored observations among the top k.
    CensoredProp {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k_grid: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// EKMI distribution of a categorical covariate in the tail.
    Categories {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k_grid: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo coverage of EKMI confidence intervals.
    CltStudy {
        #[command(flatten)]
        sim: SimArgs,
        /// le:c, log, const:c, region:a,b, kernel:a,h or kernel-log:a,h.
        #[arg(long, default_value = "le:2")]
        phi: String,
        #[arg(long, default_value_t = 200)]
        k: usize,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Potter bounds and regular-variation diagnostics of a response family (JSON).
    CheckConditions {
        /// burr_paper, burr or pareto.
        #[arg(long, default_value = "burr")]
        family: String,
        /// Index profiles, e.g. const:1 or bumps:0.5,2,0.1,2;4.
        #[arg(long)]
        kappa: Option<String>,
        #[arg(long)]
        tau: Option<String>,
        #[arg(long)]
        gamma: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        eps_a: f64,
        #[arg(long, default_value_t = 0.05)]
        eps_c: f64,
        /// Threshold N; every t in the grid must exceed it.
        #[arg(long = "threshold-n", default_value_t = 99.0)]
        threshold_n: f64,
        /// Log grids lo:hi:count.
        #[arg(long, default_value = "100:1000000:25")]
        t_grid: String,
        #[arg(long, default_value = "1:1000:25")]
        y_grid: String,
        #[arg(long, default_value = "1:5:0.1")]
        x_grid: String,
        #[arg(long, default_value = "10:1000000:6")]
        u_grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo size of the remainder in the exchangeable-sum decomposition.
    DecompCheck {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value = "le:2")]
        phi: String,
        #[arg(long, default_value = "200,2000")]
        k_grid: String,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        /// Threshold as a quantile of Z from a pilot sample.
        #[arg(long, default_value_t = 0.999)]
        quantile: f64,
        #[arg(long, default_value_t = 1_000_000)]
        pilot_n: usize,
        /// Fixed threshold; overrides --quantile.
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write the data files of a canned study plus a manifest.
    Figures {
        /// fig_gamma, fig_regions, fig_kernel or clt_coverage.
        #[arg(long, required_unless_present = "manifest")]
        study: Option<String>,
        /// Re-run the study described by an earlier manifest.
        #[arg(long, conflicts_with = "study")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, conflicts_with = "manifest")]
        seed: Option<u64>,
    },
}
