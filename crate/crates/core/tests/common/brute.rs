use central_clustering::metric::{distance, DistanceKind};
use central_clustering::summarize::GrowthRule;
use central_clustering::Clustering;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn c(labels: &[u32]) -> Clustering {
    Clustering::canonicalize(labels).unwrap()
}

pub fn dense(trace: &[Clustering], kind: DistanceKind) -> Vec<Vec<f64>> {
    trace
        .iter()
        .map(|a| trace.iter().map(|b| distance(a, b, kind).unwrap().value).collect())
        .collect()
}

pub fn brute_central(d: &[Vec<f64>], eps: f64) -> (usize, f64) {
    let n = d.len();
    let mut best = (0, 0);
    for i in 0..n {
        let count = (0..n).filter(|&j| d[i][j] < eps).count();
        if count > best.1 {
            best = (i, count);
        }
    }
    (best.0, best.1 as f64 / n as f64)
}

pub fn brute_credible(d: &[Vec<f64>], center: usize, target: f64, zeta: f64) -> (u64, Vec<usize>) {
    let n = d.len();
    let mut m = 1u64;
    loop {
        let r = m as f64 * zeta;
        let members: Vec<usize> = (0..n).filter(|&j| d[center][j] < r).collect();
        if members.len() as f64 / n as f64 >= target {
            return (m, members);
        }
        m += 1;
    }
}

/// The adaptive loop run literally, one entry and one increment at a time.
pub fn naive_hpd(d: &[Vec<f64>], modes: &[usize], target: f64, zeta: f64, rule: GrowthRule) -> (Vec<u64>, Vec<usize>) {
    let n = d.len();
    let mut steps = vec![0u64; modes.len()];
    let inside = |steps: &[u64], i: usize| modes.iter().zip(steps).any(|(&m, &s)| d[m][i] < s as f64 * zeta);
    loop {
        for i in 0..n {
            if inside(&steps, i) {
                continue;
            }
            let grow: Vec<usize> = match rule {
                GrowthRule::Nearest => {
                    let mut best = 0;
                    for j in 1..modes.len() {
                        if d[modes[j]][i] < d[modes[best]][i] {
                            best = j;
                        }
                    }
                    vec![best]
                }
                GrowthRule::All => (0..modes.len()).collect(),
            };
            for j in grow {
                steps[j] += 1;
                let members: Vec<usize> = (0..n).filter(|&p| inside(&steps, p)).collect();
                if members.len() as f64 / n as f64 >= target {
                    return (steps, members);
                }
            }
        }
    }
}

pub fn brute_median(d: &[Vec<f64>]) -> usize {
    let sums: Vec<f64> = d.iter().map(|row| row.iter().sum()).collect();
    let mut best = 0;
    for i in 1..sums.len() {
        if sums[i] < sums[best] - 1e-12 {
            best = i;
        }
    }
    best
}

pub fn brute_quantile(d: &[Vec<f64>], reference: usize, q: f64) -> usize {
    let n = d.len();
    let mut ranked: Vec<usize> = (0..n).collect();
    // insertion sort: stable by construction
    for i in 1..n {
        let mut j = i;
        while j > 0 && d[reference][ranked[j - 1]] > d[reference][ranked[j]] {
            ranked.swap(j - 1, j);
            j -= 1;
        }
    }
    let rank = if q == 0.0 { 1 } else { (q * n as f64).ceil() as usize };
    ranked[rank - 1]
}

/// Clusterings of `n` units scattered around a few random base partitions.
pub fn random_trace(rng: &mut ChaCha8Rng, len: usize, n: usize) -> Vec<Clustering> {
    let bases: Vec<Vec<u32>> = (0..rng.random_range(1..=3))
        .map(|_| (0..n).map(|_| rng.random_range(0..4)).collect())
        .collect();
    (0..len)
        .map(|_| {
            let mut labels = bases[rng.random_range(0..bases.len())].clone();
            for _ in 0..rng.random_range(0..4) {
                let u = rng.random_range(0..n);
                labels[u] = rng.random_range(0..5);
            }
            c(&labels)
        })
        .collect()
}
