//! Post-burn-in clustering traces and their text format.
//!
//! ```text
//! #cc-trace v1 n=<n> seed=<seed> burnin=<b> thin=<t> [config=<hex>]
//! iter=<i> k=<k> alpha=<a> labels=<l0,l1,...>
//! ```
//!
//! Single clusterings (K-means output, ground truth) use the entry line
//! without `alpha=` and need no header.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};

pub const TRACE_VERSION: &str = "v1";
const TRACE_MAGIC: &str = "#cc-trace";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    /// Units per clustering.
    pub n: usize,
    pub seed: u64,
    pub config_hash: Option<u64>,
    pub burn_in: usize,
    pub thinning: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub clustering: Clustering,
    /// Occupied clusters.
    pub k: usize,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringTrace {
    pub meta: TraceMeta,
    pub entries: Vec<TraceEntry>,
}

impl ClusteringTrace {
    pub fn new(meta: TraceMeta) -> Self {
        ClusteringTrace {
            meta,
            entries: Vec::new(),
        }
    }

    /// Wraps bare clusterings (iteration index = position, alpha unknown).
    pub fn from_clusterings(clusterings: Vec<Clustering>) -> Result<Self> {
        let n = clusterings.first().ok_or(Error::Empty("no clusterings"))?.n();
        if let Some(bad) = clusterings.iter().find(|c| c.n() != n) {
            return Err(Error::LengthMismatch { left: n, right: bad.n() });
        }
        let entries = clusterings
            .into_iter()
            .enumerate()
            .map(|(i, c)| TraceEntry {
                iteration: i,
                k: c.num_clusters(),
                clustering: c,
                alpha: f64::NAN,
            })
            .collect();
        Ok(ClusteringTrace {
            meta: TraceMeta {
                n,
                seed: 0,
                config_hash: None,
                burn_in: 0,
                thinning: 1,
            },
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clusterings(&self) -> impl Iterator<Item = &Clustering> + Clone {
        self.entries.iter().map(|e| &e.clustering)
    }

    pub fn cluster_counts(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.k).collect()
    }

    /// Positions of entries with exactly `k` clusters.
    pub fn positions_with_k(&self, k: usize) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.k == k)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn available_counts(&self) -> Vec<usize> {
        let counts: BTreeMap<usize, ()> = self.entries.iter().map(|e| (e.k, ())).collect();
        counts.into_keys().collect()
    }

    pub fn header_line(&self) -> String {
        let m = &self.meta;
        let mut s = format!(
            "{TRACE_MAGIC} {TRACE_VERSION} n={} seed={} burnin={} thin={}",
            m.n, m.seed, m.burn_in, m.thinning
        );
        if let Some(h) = m.config_hash {
            s.push_str(&format!(" config={h:016x}"));
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = self.header_line();
        out.push('\n');
        for e in &self.entries {
            out.push_str(&entry_line(e.iteration, &e.clustering, Some(e.alpha)));
            out.push('\n');
        }
        out
    }
}

fn entry_line(iteration: usize, c: &Clustering, alpha: Option<f64>) -> String {
    match alpha {
        Some(a) => format!("iter={iteration} k={} alpha={a} labels={c}", c.num_clusters()),
        None => format!("iter={iteration} k={} labels={c}", c.num_clusters()),
    }
}

pub fn save_trace(trace: &ClusteringTrace, path: &Path) -> Result<()> {
    write_text(path, &trace.to_text())
}

/// Writes one clustering as a single entry line.
pub fn save_clustering(clustering: &Clustering, path: &Path) -> Result<()> {
    write_text(path, &format!("{}\n", entry_line(0, clustering, None)))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

struct ParsedEntry {
    iteration: usize,
    k: usize,
    alpha: Option<f64>,
    clustering: Clustering,
}

fn parse_entry(line: &str) -> std::result::Result<ParsedEntry, String> {
    let mut iteration = None;
    let mut k = None;
    let mut alpha = None;
    let mut labels = None;
    for token in line.split_whitespace() {
        let (key, value) = token.split_once('=').ok_or_else(|| format!("malformed token {token:?}"))?;
        match key {
            "iter" => iteration = Some(value.parse::<usize>().map_err(|e| format!("iter: {e}"))?),
            "k" => k = Some(value.parse::<usize>().map_err(|e| format!("k: {e}"))?),
            "alpha" => alpha = Some(value.parse::<f64>().map_err(|e| format!("alpha: {e}"))?),
            "labels" => {
                let parsed: std::result::Result<Vec<u32>, _> = value.split(',').map(str::parse::<u32>).collect();
                labels = Some(parsed.map_err(|e| format!("labels: {e}"))?);
            }
            other => return Err(format!("unknown field {other:?}")),
        }
    }
    let labels = labels.ok_or("missing labels=")?;
    let clustering = Clustering::canonicalize(&labels).map_err(|e| e.to_string())?;
    let k = k.ok_or("missing k=")?;
    if k != clustering.num_clusters() {
        return Err(format!("k={k} but labels have {} clusters", clustering.num_clusters()));
    }
    Ok(ParsedEntry {
        iteration: iteration.ok_or("missing iter=")?,
        k,
        alpha,
        clustering,
    })
}

fn parse_header(line: &str) -> std::result::Result<TraceMeta, Error> {
    let mut tokens = line.split_whitespace();
    tokens.next(); // magic
    let version = tokens.next().unwrap_or("");
    if version != TRACE_VERSION {
        return Err(Error::TraceVersion {
            found: version.to_string(),
            expected: TRACE_VERSION,
        });
    }
    let mut meta = TraceMeta {
        n: 0,
        seed: 0,
        config_hash: None,
        burn_in: 0,
        thinning: 1,
    };
    let mut seen_n = false;
    for token in tokens {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("malformed header token {token:?}")))?;
        let num = |v: &str| v.parse::<u64>().map_err(|e| Error::invalid(format!("header {key}: {e}")));
        match key {
            "n" => {
                meta.n = num(value)? as usize;
                seen_n = true;
            }
            "seed" => meta.seed = num(value)?,
            "burnin" => meta.burn_in = num(value)? as usize,
            "thin" => meta.thinning = num(value)? as usize,
            "config" => {
                meta.config_hash = Some(
                    u64::from_str_radix(value, 16).map_err(|e| Error::invalid(format!("header config: {e}")))?,
                )
            }
            other => return Err(Error::invalid(format!("unknown header field {other:?}"))),
        }
    }
    if !seen_n {
        return Err(Error::invalid("header lacks n="));
    }
    Ok(meta)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(path, e))
}

pub fn load_trace(path: &Path) -> Result<ClusteringTrace> {
    let lines = read_lines(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut iter = lines.iter().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = iter.next().ok_or_else(|| parse_err(1, "empty trace file".into()))?;
    if !header.starts_with(TRACE_MAGIC) {
        return Err(parse_err(hline + 1, format!("expected {TRACE_MAGIC} header")));
    }
    let meta = match parse_header(header) {
        Ok(m) => m,
        Err(e @ Error::TraceVersion { .. }) => return Err(e),
        Err(e) => return Err(parse_err(hline + 1, e.to_string())),
    };
    let mut trace = ClusteringTrace::new(meta);
    for (idx, line) in iter {
        let entry = parse_entry(line).map_err(|m| parse_err(idx + 1, m))?;
        if entry.clustering.n() != trace.meta.n {
            return Err(parse_err(
                idx + 1,
                format!("{} labels, header says n={}", entry.clustering.n(), trace.meta.n),
            ));
        }
        if let Some(prev) = trace.entries.last() {
            if entry.iteration <= prev.iteration {
                return Err(parse_err(idx + 1, "iterations must increase".into()));
            }
        }
        trace.entries.push(TraceEntry {
            iteration: entry.iteration,
            k: entry.k,
            alpha: entry.alpha.ok_or_else(|| parse_err(idx + 1, "missing alpha=".into()))?,
            clustering: entry.clustering,
        });
    }
    Ok(trace)
}

/// Reads every entry line of a clustering or trace file, ignoring any header.
pub fn load_clusterings(path: &Path) -> Result<Vec<Clustering>> {
    let lines = read_lines(path)?;
    let mut out = Vec::new();
    for (idx, line) in lines.iter().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let entry = parse_entry(t).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        })?;
        out.push(entry.clustering);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: lines.len(),
            message: "no clustering lines".into(),
        });
    }
    Ok(out)
}
