//! Posterior summaries over a sample of clusterings: central clusterings,
//! modes, credible and HPD regions, conditional summaries, median, quantiles
//! and the cluster-count distribution.
//!
//! Neighborhoods are strict (`d < ε`) and include the candidate itself.
//! Ties are always broken towards the smallest trace index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::metric::{DistanceKind, DistanceMatrix};
use crate::trace::ClusteringTrace;

/// `ε` grid `lo, lo + step, ...` up to `hi` (inclusive within rounding).
pub fn epsilon_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::invalid(format!("invalid epsilon grid {lo},{hi},{step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

/// `0.01, 0.02, ..., 0.99`.
pub fn default_epsilon_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralClustering {
    pub index: usize,
    pub probability: f64,
}

/// Argmax of the neighborhood probability at one grid value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub epsilon: f64,
    pub index: usize,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    /// Trace indices of the modes; the global mode comes first.
    pub mode_indices: Vec<usize>,
    /// Grid value at which each mode first attains the maximum.
    pub epsilons: Vec<f64>,
    pub neighborhood_probs: Vec<f64>,
    /// Argmax at every grid value.
    pub grid: Vec<GridPoint>,
    /// Number of entries the probabilities are relative to.
    pub sample_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    /// Trace indices of the centers.
    pub centers: Vec<usize>,
    /// Radius of each center's ball, `radius_steps[j] * zeta`.
    pub radii: Vec<f64>,
    pub radius_steps: Vec<u64>,
    pub zeta: f64,
    pub target_prob: f64,
    /// Trace indices inside the union of balls, ascending.
    pub members: Vec<usize>,
    pub achieved_prob: f64,
}

/// How the HPD loop grows radii when a point lies outside every region.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthRule {
    /// Grow only the region whose center is nearest the point (ties to the
    /// earlier mode).
    #[default]
    Nearest,
    /// Grow every region.
    All,
}

/// Per-distinct-clustering sorted distances, for `O(log U)` neighborhood
/// counts.
struct NeighborhoodIndex {
    sorted: Vec<Vec<f64>>,
    cumulative: Vec<Vec<u64>>,
}

impl NeighborhoodIndex {
    fn new(dm: &DistanceMatrix) -> Self {
        let u_len = dm.unique_len();
        let mut sorted = Vec::with_capacity(u_len);
        let mut cumulative = Vec::with_capacity(u_len);
        for u in 0..u_len {
            let mut row: Vec<(f64, u64)> = (0..u_len).map(|v| (dm.unique_distance(u, v), dm.multiplicity(v))).collect();
            row.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut acc = 0;
            let mut cum = Vec::with_capacity(u_len);
            for &(_, m) in &row {
                acc += m;
                cum.push(acc);
            }
            sorted.push(row.into_iter().map(|r| r.0).collect());
            cumulative.push(cum);
        }
        NeighborhoodIndex { sorted, cumulative }
    }

    /// Entries within `eps` (strictly) of distinct clustering `u`.
    fn count(&self, u: usize, eps: f64) -> u64 {
        let k = self.sorted[u].partition_point(|&d| d < eps);
        if k == 0 {
            0
        } else {
            self.cumulative[u][k - 1]
        }
    }
}

/// Summaries over a sample of clusterings, backed by one distance matrix.
#[derive(Clone, Debug)]
pub struct Posterior {
    distances: DistanceMatrix,
    /// Cluster count of each entry.
    counts: Vec<usize>,
}

impl Posterior {
    pub fn from_trace(trace: &ClusteringTrace, kind: DistanceKind) -> Result<Self> {
        Ok(Posterior {
            distances: DistanceMatrix::new(trace.clusterings(), kind)?,
            counts: trace.cluster_counts(),
        })
    }

    pub fn from_clusterings(clusterings: &[Clustering], kind: DistanceKind) -> Result<Self> {
        Ok(Posterior {
            distances: DistanceMatrix::new(clusterings, kind)?,
            counts: clusterings.iter().map(Clustering::num_clusters).collect(),
        })
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.distances
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn cluster_counts(&self) -> &[usize] {
        &self.counts
    }

    fn fraction(&self, count: u64) -> f64 {
        count as f64 / self.len() as f64
    }

    /// Neighborhood probability of every entry at `epsilon`.
    pub fn neighborhood_probabilities(&self, epsilon: f64) -> Vec<f64> {
        let index = NeighborhoodIndex::new(&self.distances);
        (0..self.len())
            .map(|i| self.fraction(index.count(self.distances.unique_of(i), epsilon)))
            .collect()
    }

    fn central_with(&self, index: &NeighborhoodIndex, epsilon: f64) -> (usize, u64) {
        let dm = &self.distances;
        let mut best = (usize::MAX, 0u64);
        for u in 0..dm.unique_len() {
            let c = index.count(u, epsilon);
            let pos = dm.first_position(u);
            if c > best.1 || (c == best.1 && pos < best.0) {
                best = (pos, c);
            }
        }
        best
    }

    /// The entry whose `ε`-neighborhood holds the most entries.
    pub fn empirical_central_clustering(&self, epsilon: f64) -> Result<CentralClustering> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        let index = NeighborhoodIndex::new(&self.distances);
        let (pos, count) = self.central_with(&index, epsilon);
        Ok(CentralClustering {
            index: self.distances.origin(pos),
            probability: self.fraction(count),
        })
    }

    /// Central clustering at every grid value. An entry is a mode if it is
    /// the central clustering at some grid value where some neighborhood
    /// holds more than its own center (only-self neighborhoods carry no
    /// information). If every grid value is like that, the first entry is
    /// reported as the single mode.
    pub fn detect_modes(&self, grid: &[f64]) -> Result<ModeReport> {
        if grid.is_empty() {
            return Err(Error::Empty("epsilon grid"));
        }
        if grid.iter().any(|e| !(*e > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("epsilon grid must be positive and increasing"));
        }
        let dm = &self.distances;
        let index = NeighborhoodIndex::new(dm);
        let mut report = ModeReport {
            mode_indices: Vec::new(),
            epsilons: Vec::new(),
            neighborhood_probs: Vec::new(),
            grid: Vec::with_capacity(grid.len()),
            sample_size: self.len(),
        };
        let mut seen = Vec::new();
        for &eps in grid {
            let (pos, count) = self.central_with(&index, eps);
            let probability = self.fraction(count);
            report.grid.push(GridPoint {
                epsilon: eps,
                index: dm.origin(pos),
                probability,
            });
            if count <= 1 {
                continue;
            }
            let u = dm.unique_of(pos);
            if !seen.contains(&u) {
                seen.push(u);
                report.mode_indices.push(dm.origin(pos));
                report.epsilons.push(eps);
                report.neighborhood_probs.push(probability);
            }
        }
        if report.mode_indices.is_empty() {
            report.mode_indices.push(dm.origin(0));
            report.epsilons.push(grid[0]);
            report.neighborhood_probs.push(self.fraction(index.count(dm.unique_of(0), grid[0])));
        }
        Ok(report)
    }

    /// Neighborhood probability of entry `center` at each grid value.
    pub fn neighborhood_curve(&self, center: usize, grid: &[f64]) -> Result<Vec<f64>> {
        let center = self.position_of(center)?;
        let u = self.distances.unique_of(center);
        let index = NeighborhoodIndex::new(&self.distances);
        Ok(grid.iter().map(|&e| self.fraction(index.count(u, e))).collect())
    }

    /// Position in this summary of a trace index.
    fn position_of(&self, trace_index: usize) -> Result<usize> {
        let dm = &self.distances;
        (0..dm.len())
            .find(|&p| dm.origin(p) == trace_index)
            .ok_or_else(|| Error::invalid(format!("trace index {trace_index} is not part of this summary")))
    }

    /// Smallest radius `m·ζ` (`m ≥ 1`) whose ball around `center` holds at
    /// least `target_prob` of the entries.
    pub fn credible_region(&self, center: usize, target_prob: f64, zeta: f64) -> Result<RegionReport> {
        check_region_args(target_prob, zeta)?;
        let c = self.position_of(center)?;
        let n = self.len();
        let mut dist: Vec<f64> = (0..n).map(|p| self.distances.get(c, p)).collect();
        let needed = min_count(n, target_prob);
        dist.sort_by(f64::total_cmp);
        let steps = steps_exceeding(dist[needed - 1], zeta).max(1);
        Ok(self.region_report(&[c], &[steps], zeta, target_prob))
    }

    fn region_report(&self, centers: &[usize], steps: &[u64], zeta: f64, target_prob: f64) -> RegionReport {
        let dm = &self.distances;
        let radii: Vec<f64> = steps.iter().map(|&m| m as f64 * zeta).collect();
        let members: Vec<usize> = (0..self.len())
            .filter(|&p| centers.iter().zip(&radii).any(|(&c, &r)| dm.get(c, p) < r))
            .collect();
        RegionReport {
            centers: centers.iter().map(|&c| dm.origin(c)).collect(),
            radii,
            radius_steps: steps.to_vec(),
            zeta,
            target_prob,
            achieved_prob: self.fraction(members.len() as u64),
            members: members.into_iter().map(|p| dm.origin(p)).collect(),
        }
    }

    /// Adaptive HPD region around `modes`: radii start at zero; sweeping the
    /// entries in order, each entry outside every ball grows a radius by `ζ`
    /// (see [`GrowthRule`]); the loop stops as soon as the union holds
    /// `target_prob` of the entries.
    ///
    /// Sweeps in which no entry changes membership are skipped in bulk, which
    /// yields exactly the radii of the entry-by-entry loop.
    pub fn hpd_region(&self, modes: &[usize], target_prob: f64, zeta: f64, rule: GrowthRule) -> Result<RegionReport> {
        check_region_args(target_prob, zeta)?;
        if modes.is_empty() {
            return Err(Error::Empty("mode list"));
        }
        let centers: Vec<usize> = modes.iter().map(|&m| self.position_of(m)).collect::<Result<_>>()?;
        let n = self.len();
        let dm = &self.distances;
        let needed = min_count(n, target_prob);
        let k = centers.len();

        // per center: entries ordered by distance, and how many are inside
        let order: Vec<Vec<usize>> = centers
            .iter()
            .map(|&c| {
                let mut o: Vec<usize> = (0..n).collect();
                o.sort_by(|&a, &b| dm.get(c, a).total_cmp(&dm.get(c, b)));
                o
            })
            .collect();
        let nearest: Vec<usize> = (0..n)
            .map(|p| {
                let mut best = 0;
                for j in 1..k {
                    if dm.get(centers[j], p) < dm.get(centers[best], p) {
                        best = j;
                    }
                }
                best
            })
            .collect();

        let mut steps = vec![0u64; k];
        let mut inside = vec![0usize; k];
        let mut cover = vec![0u32; n];
        let mut union = 0usize;

        // raises center j's radius to `steps[j]`, admitting entries
        let admit = |j: usize, steps: &[u64], inside: &mut [usize], cover: &mut [u32], union: &mut usize| {
            let r = steps[j] as f64 * zeta;
            while inside[j] < n && dm.get(centers[j], order[j][inside[j]]) < r {
                let p = order[j][inside[j]];
                cover[p] += 1;
                if cover[p] == 1 {
                    *union += 1;
                }
                inside[j] += 1;
            }
        };

        'outer: loop {
            // bulk-skip sweeps that cannot change membership
            let outside: Vec<usize> = (0..n).filter(|&p| cover[p] == 0).collect();
            let mut per_sweep = vec![0u64; k];
            for &p in &outside {
                match rule {
                    GrowthRule::Nearest => per_sweep[nearest[p]] += 1,
                    GrowthRule::All => per_sweep.iter_mut().for_each(|c| *c += 1),
                }
            }
            let mut idle = u64::MAX;
            for j in 0..k {
                if per_sweep[j] == 0 {
                    continue;
                }
                let closest = outside
                    .iter()
                    .map(|&p| dm.get(centers[j], p))
                    .fold(f64::INFINITY, f64::min);
                let admit_at = steps_exceeding(closest, zeta);
                idle = idle.min((admit_at - 1 - steps[j]) / per_sweep[j]);
            }
            if idle > 0 && idle != u64::MAX {
                for j in 0..k {
                    steps[j] += idle * per_sweep[j];
                }
            }
            // one sweep entry by entry
            for p in 0..n {
                if cover[p] != 0 {
                    continue;
                }
                let grow: Vec<usize> = match rule {
                    GrowthRule::Nearest => vec![nearest[p]],
                    GrowthRule::All => (0..k).collect(),
                };
                for j in grow {
                    steps[j] += 1;
                    admit(j, &steps, &mut inside, &mut cover, &mut union);
                    if union >= needed {
                        break 'outer;
                    }
                }
            }
        }
        Ok(self.region_report(&centers, &steps, zeta, target_prob))
    }

    /// Central clustering analysis of the entries with exactly `k` clusters;
    /// probabilities are relative to that sub-sample and indices refer to the
    /// full trace.
    pub fn conditional(&self, k: usize) -> Result<Posterior> {
        let positions: Vec<usize> = (0..self.len()).filter(|&p| self.counts[p] == k).collect();
        if positions.is_empty() {
            let mut available: Vec<usize> = self.counts.clone();
            available.sort_unstable();
            available.dedup();
            return Err(Error::NoSuchClusterCount { requested: k, available });
        }
        Ok(Posterior {
            distances: self.distances.restrict(&positions)?,
            counts: vec![k; positions.len()],
        })
    }

    /// Modes of the sub-sample with `k` clusters.
    pub fn conditional_central_clustering(&self, k: usize, grid: &[f64]) -> Result<ModeReport> {
        self.conditional(k)?.detect_modes(grid)
    }

    /// Entry minimizing the summed distance to all entries.
    pub fn median_clustering(&self) -> Result<usize> {
        let dm = &self.distances;
        let u_len = dm.unique_len();
        let mut best: Option<(u128, usize)> = None;
        for u in 0..u_len {
            let total: u128 = (0..u_len)
                .map(|v| dm.unique_mismatches(u, v) as u128 * dm.multiplicity(v) as u128)
                .sum();
            let pos = dm.first_position(u);
            if best.is_none_or(|(t, p)| total < t || (total == t && pos < p)) {
                best = Some((total, pos));
            }
        }
        let (_, pos) = best.ok_or(Error::Empty("no clusterings"))?;
        Ok(dm.origin(pos))
    }

    /// Entry of rank `⌈q·N⌉` (rank 1 for `q = 0`) when entries are ordered by
    /// distance to `reference`, trace order breaking ties.
    pub fn quantile_clustering(&self, reference: usize, q: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!("quantile must lie in [0, 1], got {q}")));
        }
        let r = self.position_of(reference)?;
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.distances.get(r, a).total_cmp(&self.distances.get(r, b)));
        let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
        Ok(self.distances.origin(order[rank - 1]))
    }

    /// Empirical distribution of the cluster count over all entries.
    pub fn cluster_count_distribution(&self) -> BTreeMap<usize, f64> {
        cluster_count_distribution(&self.counts).expect("posterior is non-empty")
    }

    /// Cluster-count distribution over the members of a region.
    pub fn region_count_distribution(&self, region: &RegionReport) -> Result<BTreeMap<usize, f64>> {
        let counts: Vec<usize> = region
            .members
            .iter()
            .map(|&m| self.position_of(m).map(|p| self.counts[p]))
            .collect::<Result<_>>()?;
        cluster_count_distribution(&counts)
    }
}

/// Empirical frequencies of cluster counts.
pub fn cluster_count_distribution(counts: &[usize]) -> Result<BTreeMap<usize, f64>> {
    if counts.is_empty() {
        return Err(Error::Empty("no cluster counts"));
    }
    let mut tally: BTreeMap<usize, u64> = BTreeMap::new();
    for &k in counts {
        *tally.entry(k).or_insert(0) += 1;
    }
    let n = counts.len() as f64;
    Ok(tally.into_iter().map(|(k, c)| (k, c as f64 / n)).collect())
}

fn check_region_args(target_prob: f64, zeta: f64) -> Result<()> {
    if !(target_prob > 0.0 && target_prob < 1.0) {
        return Err(Error::invalid(format!("target probability must lie in (0, 1), got {target_prob}")));
    }
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::invalid(format!("zeta must be positive, got {zeta}")));
    }
    Ok(())
}

/// Smallest count `r` with `r / n ≥ target`.
fn min_count(n: usize, target: f64) -> usize {
    let mut r = ((target * n as f64).floor() as usize).min(n);
    while r < n && (r as f64 / n as f64) < target {
        r += 1;
    }
    while r > 1 && ((r - 1) as f64 / n as f64) >= target {
        r -= 1;
    }
    r.max(1)
}

/// Smallest `m` with `m·ζ > d`.
fn steps_exceeding(d: f64, zeta: f64) -> u64 {
    let mut m = (d / zeta).floor().max(0.0) as u64;
    while !((m as f64) * zeta > d) {
        m += 1;
    }
    while m > 0 && ((m - 1) as f64) * zeta > d {
        m -= 1;
    }
    m
}
