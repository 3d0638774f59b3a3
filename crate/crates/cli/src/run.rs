use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use central_clustering::data::generate_mixture_1d;
use central_clustering::kmeans::{kmeans, KMeansConfig, KMeansInit};
use central_clustering::metric::{approx_from_table, exact_from_table, DistanceResult};
use central_clustering::summarize::{epsilon_grid, GrowthRule};
use central_clustering::trace::{load_clusterings, save_clustering};
use central_clustering::{
    load_dataset, load_trace, run_chain, Clustering, ClusteringTrace, ContingencyTable, Dataset, DistanceKind,
    ModeReport, ModelConfig, Posterior, RegionReport, RunSettings,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::{Command, Init, KmeansArgs, MetricArgs, SampleArgs, SimulateArgs, SummarizeArgs};
use crate::manifest::{commit, write_atomic};

/// Files a command read and wrote, plus the text it prints.
#[derive(Debug, Default)]
pub struct Outcome {
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub report: String,
}

pub fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Sample(a) => sample(a),
        Command::Summarize(a) => summarize(a),
        Command::Metric(a) => metric(a),
        Command::Kmeans(a) => kmeans_cmd(a),
        Command::Replay(_) => bail!("replay cannot be nested"),
    }
}

/// `path` with `suffix` appended to its file name.
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn load_data(path: &Path, columns: Option<&[usize]>, thin_rows: Option<usize>) -> Result<Dataset> {
    let mut data = load_dataset(path)?;
    if let Some(cols) = columns {
        data = data.feature_subset(cols)?;
    }
    if let Some(step) = thin_rows {
        data = data.thin_rows(step)?;
    }
    Ok(data)
}

fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let sim = generate_mixture_1d(a.n, &a.means, a.sigma, a.seed)?;
    let truth = a.truth.clone().unwrap_or_else(|| a.out.with_extension("truth"));
    ensure!(truth != a.out, "truth file must differ from --out");
    commit(&a.out, |tmp| Ok(sim.data.save_csv(tmp)?))?;
    commit(&truth, |tmp| Ok(save_clustering(&sim.truth, tmp)?))?;
    Ok(Outcome {
        seeds: vec![a.seed],
        inputs: vec![],
        outputs: vec![a.out.clone(), truth],
        report: format!("simulated n={} components={}\n", a.n, a.means.len()),
    })
}

/// Trace path of chain `i` when running `chains` chains.
pub fn chain_path(out: &Path, i: usize, chains: usize) -> PathBuf {
    if chains == 1 {
        return out.to_path_buf();
    }
    match (out.file_stem(), out.extension()) {
        (Some(stem), Some(ext)) => {
            let mut name = stem.to_os_string();
            name.push(format!(".chain{i}."));
            name.push(ext);
            out.with_file_name(name)
        }
        _ => with_suffix(out, &format!(".chain{i}")),
    }
}

#[derive(Serialize)]
struct SampleConfigEcho<'a> {
    data: &'a Path,
    n: usize,
    d: usize,
    model: &'a ModelConfig,
    settings: &'a RunSettings,
    chains: usize,
    traces: &'a [PathBuf],
}

fn sample(a: &SampleArgs) -> Result<Outcome> {
    ensure!(a.chains >= 1, "--chains must be at least 1");
    let data = load_data(&a.data, a.columns.as_deref(), a.thin_rows)?;
    let mut cfg = ModelConfig::default_for(&data);
    cfg.max_components = a.max_components;
    cfg.alpha_shape = a.alpha_prior.shape;
    cfg.alpha_rate = a.alpha_prior.rate;
    if let Some(dof) = a.dof {
        cfg.dof = dof;
    }
    if let Some(psi) = a.psi {
        cfg.psi = psi;
    }
    cfg.validate()?;
    let settings = RunSettings {
        iterations: a.iters,
        burn_in: a.burnin,
        thinning: a.thin,
        seed: a.seed,
    };
    settings.validate()?;
    let seeds: Vec<u64> = (0..a.chains as u64)
        .map(|i| a.seed.checked_add(i).context("chain seed overflows u64"))
        .collect::<Result<_>>()?;
    let traces: Vec<ClusteringTrace> = seeds
        .par_iter()
        .map(|&seed| run_chain(&cfg, &data, &RunSettings { seed, ..settings }))
        .collect::<central_clustering::Result<_>>()?;

    let paths: Vec<PathBuf> = (0..a.chains).map(|i| chain_path(&a.out, i, a.chains)).collect();
    let mut report = String::new();
    for ((trace, path), seed) in traces.iter().zip(&paths).zip(&seeds) {
        write_atomic(path, trace.to_text().as_bytes())?;
        let counts = central_clustering::summarize::cluster_count_distribution(&trace.cluster_counts())?;
        let (mode_k, p) = counts.iter().fold((0, -1.0), |best, (&k, &p)| if p > best.1 { (k, p) } else { best });
        writeln!(
            report,
            "chain seed={seed} entries={} modal_k={mode_k} (p={p:.4}) -> {}",
            trace.len(),
            path.display()
        )?;
    }
    let echo = with_suffix(&a.out, ".config.json");
    write_json(
        &echo,
        &SampleConfigEcho {
            data: &a.data,
            n: data.n(),
            d: data.d(),
            model: &cfg,
            settings: &settings,
            chains: a.chains,
            traces: &paths,
        },
    )?;
    let mut outputs = paths;
    outputs.push(echo);
    Ok(Outcome {
        seeds,
        inputs: vec![a.data.clone()],
        outputs,
        report,
    })
}

#[derive(Serialize)]
struct EntryRef {
    index: usize,
    iteration: usize,
    k: usize,
}

#[derive(Serialize)]
struct QuantileRef {
    q: f64,
    index: usize,
    iteration: usize,
    distance: f64,
}

#[derive(Serialize)]
struct CountProb {
    k: usize,
    probability: f64,
}

#[derive(Serialize)]
struct SummaryReport {
    metric: DistanceKind,
    trace_entries: usize,
    sample_size: usize,
    condition_k: Option<usize>,
    growth: GrowthRule,
    global_mode: EntryRef,
    modes: ModeReport,
    credible: RegionReport,
    hpd: RegionReport,
    median: EntryRef,
    quantiles: Vec<QuantileRef>,
    cluster_count_distribution: Vec<CountProb>,
    hpd_count_distribution: Vec<CountProb>,
}

fn count_probs(m: BTreeMap<usize, f64>) -> Vec<CountProb> {
    m.into_iter().map(|(k, probability)| CountProb { k, probability }).collect()
}

fn summarize(a: &SummarizeArgs) -> Result<Outcome> {
    let trace = load_trace(&a.trace)?;
    let kind = DistanceKind::from(a.metric);
    let grid = epsilon_grid(a.eps_grid.lo, a.eps_grid.hi, a.eps_grid.step)?;
    let full = Posterior::from_trace(&trace, kind)?;
    let post = match a.condition_k {
        Some(k) => full.conditional(k)?,
        None => full,
    };
    let entry = |index: usize| EntryRef {
        index,
        iteration: trace.entries[index].iteration,
        k: trace.entries[index].k,
    };
    let modes = post.detect_modes(&grid)?;
    let global = modes.mode_indices[0];
    let credible = post.credible_region(global, a.target, a.zeta)?;
    let hpd = post.hpd_region(&modes.mode_indices, a.target, a.zeta, a.growth.into())?;
    let median = post.median_clustering()?;
    let quantiles = a
        .quantiles
        .iter()
        .map(|&q| {
            let index = post.quantile_clustering(global, q)?;
            let distance = central_clustering::metric::distance(
                &trace.entries[global].clustering,
                &trace.entries[index].clustering,
                kind,
            )?
            .value;
            Ok(QuantileRef {
                q,
                index,
                iteration: trace.entries[index].iteration,
                distance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let curves: Vec<Vec<f64>> = modes
        .mode_indices
        .iter()
        .map(|&m| post.neighborhood_curve(m, &grid))
        .collect::<central_clustering::Result<_>>()?;

    let report = SummaryReport {
        metric: kind,
        trace_entries: trace.len(),
        sample_size: post.len(),
        condition_k: a.condition_k,
        growth: a.growth.into(),
        global_mode: entry(global),
        cluster_count_distribution: count_probs(post.cluster_count_distribution()),
        hpd_count_distribution: count_probs(post.region_count_distribution(&hpd)?),
        modes,
        credible,
        hpd,
        median: entry(median),
        quantiles,
    };

    let json = with_suffix(&a.out, ".json");
    let counts_csv = with_suffix(&a.out, ".counts.csv");
    let curves_csv = with_suffix(&a.out, ".curves.csv");
    let modes_txt = with_suffix(&a.out, ".modes.txt");
    write_json(&json, &report)?;

    let mut counts = String::from("k,probability\n");
    for c in &report.cluster_count_distribution {
        writeln!(counts, "{},{}", c.k, c.probability)?;
    }
    write_atomic(&counts_csv, counts.as_bytes())?;

    let mut text = String::from("epsilon");
    for m in &report.modes.mode_indices {
        write!(text, ",mode_{m}")?;
    }
    text.push('\n');
    for (g, eps) in grid.iter().enumerate() {
        write!(text, "{eps}")?;
        for curve in &curves {
            write!(text, ",{}", curve[g])?;
        }
        text.push('\n');
    }
    write_atomic(&curves_csv, text.as_bytes())?;

    let mode_trace = ClusteringTrace {
        meta: trace.meta.clone(),
        entries: report.modes.mode_indices.iter().map(|&i| trace.entries[i].clone()).collect(),
    };
    write_atomic(&modes_txt, mode_trace.to_text().as_bytes())?;

    let mut out = String::new();
    writeln!(
        out,
        "entries={} modes={} global_mode=#{} (iter {}, k={})",
        report.sample_size,
        report.modes.mode_indices.len(),
        report.global_mode.index,
        report.global_mode.iteration,
        report.global_mode.k
    )?;
    writeln!(
        out,
        "credible radius={} achieved={:.4}; hpd radii={:?} achieved={:.4}",
        report.credible.radii[0], report.credible.achieved_prob, report.hpd.radii, report.hpd.achieved_prob
    )?;
    Ok(Outcome {
        seeds: vec![],
        inputs: vec![a.trace.clone()],
        outputs: vec![json, counts_csv, curves_csv, modes_txt],
        report: out,
    })
}

#[derive(Serialize)]
struct MetricReport {
    n: usize,
    rows: usize,
    cols: usize,
    exact: Option<DistanceResult>,
    approx: Option<DistanceResult>,
    /// Present when both distances are computed.
    approx_le_exact: Option<bool>,
}

/// Labels in a numeric CSV column, by header name or 0-based index.
fn label_column(data: &Dataset, key: &str) -> Result<Clustering> {
    let col = match data.column_names().and_then(|names| names.iter().position(|n| n == key)) {
        Some(c) => c,
        None => key
            .parse::<usize>()
            .ok()
            .filter(|&c| c < data.d())
            .with_context(|| format!("no column {key:?}"))?,
    };
    let labels = data
        .rows()
        .enumerate()
        .map(|(i, r)| {
            let v = r[col];
            ensure!(v.fract() == 0.0 && v.abs() < 2f64.powi(53), "row {i}: label {v} is not an integer");
            Ok(v as i64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Clustering::canonicalize(&labels)?)
}

fn pick(path: &Path, index: usize) -> Result<Clustering> {
    let all = load_clusterings(path)?;
    let len = all.len();
    all.into_iter()
        .nth(index)
        .with_context(|| format!("{} holds {len} clusterings; index {index} is out of range", path.display()))
}

fn metric(a: &MetricArgs) -> Result<Outcome> {
    let (x, y, inputs) = match (&a.a, &a.b, &a.csv) {
        (Some(pa), Some(pb), None) => (pick(pa, a.a_index)?, pick(pb, a.b_index)?, vec![pa.clone(), pb.clone()]),
        (None, None, Some(csv)) => {
            let cols = a.columns.as_deref().unwrap_or_default();
            ensure!(cols.len() == 2, "--columns needs exactly two columns");
            let data = load_dataset(csv)?;
            (label_column(&data, &cols[0])?, label_column(&data, &cols[1])?, vec![csv.clone()])
        }
        _ => bail!("give either --a and --b, or --csv with --columns"),
    };
    let table = ContingencyTable::new(&x, &y)?;
    let both = a.exact == a.approx;
    let exact = (both || a.exact).then(|| exact_from_table(&table));
    let approx = (both || a.approx).then(|| approx_from_table(&table));
    let approx_le_exact = match (&exact, &approx) {
        (Some(e), Some(p)) => {
            let ok = p.mismatches <= e.mismatches;
            ensure!(ok, "approximate distance {} exceeds exact distance {}", p.value, e.value);
            Some(ok)
        }
        _ => None,
    };
    let report = MetricReport {
        n: x.n(),
        rows: table.rows(),
        cols: table.cols(),
        exact,
        approx,
        approx_le_exact,
    };
    let mut outputs = vec![];
    if let Some(out) = &a.out {
        write_json(out, &report)?;
        outputs.push(out.clone());
    }
    if let Some(path) = &a.table {
        write_atomic(path, table.to_csv().as_bytes())?;
        outputs.push(path.clone());
    }
    let mut text = String::new();
    if let Some(e) = &report.exact {
        writeln!(text, "exact {}", e.value)?;
    }
    if let Some(p) = &report.approx {
        let (ab, ba) = p.directed_pair.unwrap_or_default();
        writeln!(text, "approx {} (directed {ab}, {ba})", p.value)?;
    }
    Ok(Outcome {
        seeds: vec![],
        inputs,
        outputs,
        report: text,
    })
}

fn kmeans_cmd(a: &KmeansArgs) -> Result<Outcome> {
    let data = load_data(&a.data, a.columns.as_deref(), None)?;
    let cfg = KMeansConfig {
        k: a.k,
        seed: a.seed,
        max_iters: a.max_iters,
        init: match a.init {
            Init::Uniform => KMeansInit::Uniform,
            Init::PlusPlus => KMeansInit::PlusPlus,
        },
        restarts: a.restarts,
    };
    let result = kmeans(&data, &cfg)?;
    commit(&a.out, |tmp| Ok(save_clustering(&result.clustering, tmp)?))?;
    Ok(Outcome {
        seeds: vec![a.seed],
        inputs: vec![a.data.clone()],
        outputs: vec![a.out.clone()],
        report: format!(
            "k={} objective={} iterations={} converged={}\n",
            result.clustering.num_clusters(),
            result.objective,
            result.iterations,
            result.converged
        ),
    })
}
