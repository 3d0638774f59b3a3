use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use central_clustering::summarize::GrowthRule;
use central_clustering::DistanceKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Bayesian central clustering: simulate data, sample the posterior over
/// clusterings, summarize it, and compare clusterings.
#[derive(Debug, Parser)]
#[command(name = "ccluster", version, about)]
pub struct Cli {
    /// Upper bound on worker threads (defaults to all cores).
    #[arg(long, global = true, env = "CC_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Draw a one-dimensional equal-weight normal mixture.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler and write a clustering trace.
    Sample(SampleArgs),
    /// Modes, credible and HPD regions, and count distributions of a trace.
    Summarize(SummarizeArgs),
    /// Distance between two clusterings.
    Metric(MetricArgs),
    /// K-means baseline clustering.
    Kmeans(KmeansArgs),
    /// Rerun a command from its manifest and check the outputs match.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Number of observations.
    #[arg(long)]
    pub n: usize,
    /// Component means, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub means: Vec<f64>,
    /// Common component standard deviation.
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Generating labels (defaults to `--out` with extension `.truth`).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    /// Input CSV (header optional).
    #[arg(long)]
    pub data: PathBuf,
    /// Keep only these columns (0-based, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<usize>>,
    /// Keep every `m`-th row.
    #[arg(long)]
    pub thin_rows: Option<usize>,
    /// Number of component slots `M`.
    #[arg(long, default_value_t = 30)]
    pub max_components: usize,
    #[arg(long, default_value_t = 6000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gamma prior on the concentration, `shape,rate`.
    #[arg(long, default_value = "0.1,0.1")]
    pub alpha_prior: AlphaPrior,
    /// Wishart degrees of freedom (defaults to `max(4, d)`).
    #[arg(long)]
    pub dof: Option<f64>,
    /// Mean covariance multiplier.
    #[arg(long)]
    pub psi: Option<f64>,
    /// Independent chains, seeded `seed + index`, run in parallel.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Output trace; with several chains, `.chain<i>` is inserted before the
    /// extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Target probability of credible and HPD regions.
    #[arg(long, default_value_t = 0.95)]
    pub target: f64,
    /// Radius increment of credible and HPD regions.
    #[arg(long, default_value_t = 1e-3)]
    pub zeta: f64,
    #[arg(long, value_enum, default_value_t = Metric::Approx)]
    pub metric: Metric,
    /// Restrict to trace entries with this many clusters.
    #[arg(long)]
    pub condition_k: Option<usize>,
    /// Neighborhood radii, `lo,hi,step`.
    #[arg(long, default_value = "0.01,0.99,0.01")]
    pub eps_grid: EpsGrid,
    /// Which regions grow when an entry lies outside all of them.
    #[arg(long, value_enum, default_value_t = Growth::Nearest)]
    pub growth: Growth,
    /// Quantile levels relative to the global mode, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub quantiles: Vec<f64>,
    /// Output prefix: writes `<out>.json`, `<out>.counts.csv`,
    /// `<out>.curves.csv` and `<out>.modes.txt`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct MetricArgs {
    /// First clustering file (trace or label lines).
    #[arg(long, requires = "b", conflicts_with = "csv")]
    pub a: Option<PathBuf>,
    /// Second clustering file.
    #[arg(long, requires = "a")]
    pub b: Option<PathBuf>,
    /// Entry of `--a` to use (0-based).
    #[arg(long, default_value_t = 0)]
    pub a_index: usize,
    /// Entry of `--b` to use (0-based).
    #[arg(long, default_value_t = 0)]
    pub b_index: usize,
    /// CSV holding both label columns.
    #[arg(long, requires = "columns")]
    pub csv: Option<PathBuf>,
    /// Two label columns of `--csv`, by name or 0-based index.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub columns: Option<Vec<String>>,
    /// Report the exact distance (both are reported when neither flag is set).
    #[arg(long)]
    pub exact: bool,
    /// Report the approximate distance.
    #[arg(long)]
    pub approx: bool,
    /// Write the contingency table as CSV.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct KmeansArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Keep only these columns (0-based, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<usize>>,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = Init::Uniform)]
    pub init: Init,
    /// Output clustering file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Rerun without comparing output digests.
    #[arg(long)]
    pub no_verify: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Exact,
    Approx,
}

impl From<Metric> for DistanceKind {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Exact => DistanceKind::Exact,
            Metric::Approx => DistanceKind::Approx,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Growth {
    Nearest,
    All,
}

impl From<Growth> for GrowthRule {
    fn from(g: Growth) -> Self {
        match g {
            Growth::Nearest => GrowthRule::Nearest,
            Growth::All => GrowthRule::All,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    Uniform,
    PlusPlus,
}

fn parse_floats<const N: usize>(s: &str, what: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {what}, got {s:?}"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("{p:?} is not a number"))?;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl FromStr for AlphaPrior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let [shape, rate] = parse_floats(s, "shape,rate")?;
        Ok(AlphaPrior { shape, rate })
    }
}

impl fmt::Display for AlphaPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.shape, self.rate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl FromStr for EpsGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let [lo, hi, step] = parse_floats(s, "lo,hi,step")?;
        Ok(EpsGrid { lo, hi, step })
    }
}

impl fmt::Display for EpsGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.lo, self.hi, self.step)
    }
}
