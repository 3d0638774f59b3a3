//! Lloyd's K-means, used as the deterministic-clustering baseline.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KMeansInit {
    /// `k` distinct rows drawn uniformly.
    #[default]
    Uniform,
    PlusPlus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub init: KMeansInit,
    /// Independent starts; the lowest within-cluster sum of squares wins.
    pub restarts: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            seed,
            max_iters: 300,
            init: KMeansInit::Uniform,
            restarts: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub clustering: Clustering,
    /// Raw (pre-canonicalization) assignment of each row to a center.
    pub assignment: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Within-cluster sum of squares after each assignment step.
    pub objective_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn init_centers(data: &Dataset, k: usize, init: KMeansInit, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    match init {
        KMeansInit::Uniform => index::sample(rng, data.n(), k)
            .into_iter()
            .map(|i| data.row(i).to_vec())
            .collect(),
        KMeansInit::PlusPlus => {
            let mut centers = vec![data.row(rng.random_range(0..data.n())).to_vec()];
            let mut d2: Vec<f64> = data.rows().map(|r| sq_dist(r, &centers[0])).collect();
            while centers.len() < k {
                let total: f64 = d2.iter().sum();
                let next = if total > 0.0 {
                    let mut u = rng.random::<f64>() * total;
                    let mut pick = data.n() - 1;
                    for (i, w) in d2.iter().enumerate() {
                        if u < *w {
                            pick = i;
                            break;
                        }
                        u -= w;
                    }
                    pick
                } else {
                    rng.random_range(0..data.n())
                };
                let c = data.row(next).to_vec();
                for (i, r) in data.rows().enumerate() {
                    d2[i] = d2[i].min(sq_dist(r, &c));
                }
                centers.push(c);
            }
            centers
        }
    }
}

fn lloyd(data: &Dataset, mut centers: Vec<Vec<f64>>, max_iters: usize) -> KMeansResult {
    let k = centers.len();
    let d = data.d();
    let mut assignment: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let step: Vec<(usize, f64)> = (0..data.n())
            .into_par_iter()
            .map(|i| nearest(data.row(i), &centers))
            .collect();
        let new_assignment: Vec<usize> = step.iter().map(|s| s.0).collect();
        history.push(step.iter().map(|s| s.1).sum());
        if new_assignment == assignment {
            converged = true;
            break;
        }
        assignment = new_assignment;

        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &j) in assignment.iter().enumerate() {
            counts[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(data.row(i)) {
                *s += v;
            }
        }
        let mut taken: Vec<usize> = Vec::new();
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // reseed from the point farthest from its current center
                let far = (0..data.n())
                    .filter(|i| !taken.contains(i))
                    .map(|i| (i, sq_dist(data.row(i), &centers[assignment[i]])))
                    .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
                taken.push(far.0);
                centers[j] = data.row(far.0).to_vec();
            }
        }
    }

    let objective = history.last().copied().unwrap_or(f64::INFINITY);
    let clustering = Clustering::canonicalize(&assignment).expect("non-empty data");
    KMeansResult {
        clustering,
        assignment,
        centers,
        objective,
        iterations,
        converged,
        objective_history: history,
    }
}

pub fn kmeans(data: &Dataset, config: &KMeansConfig) -> Result<KMeansResult> {
    if config.k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if config.k > data.n() {
        return Err(Error::invalid(format!(
            "k = {} exceeds the number of rows ({})",
            config.k,
            data.n()
        )));
    }
    if config.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    if config.restarts == 0 {
        return Err(Error::invalid("restarts must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..config.restarts {
        let centers = init_centers(data, config.k, config.init, &mut rng);
        let run = lloyd(data, centers, config.max_iters);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
