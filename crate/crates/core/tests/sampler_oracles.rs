mod common;

use std::collections::HashMap;

use central_clustering::sampler::{update_alpha, Component, GibbsSampler, ModelConfig, NormalWishart, SamplerState, SuffStats};
use central_clustering::{Clustering, Dataset};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

fn univariate(m0: f64, kappa: f64, s: f64, scale: f64) -> NormalWishart {
    NormalWishart::new(DVector::from_element(1, m0), kappa, s, DMatrix::from_element(1, 1, scale)).unwrap()
}

fn stats_1d(ys: &[f64]) -> SuffStats {
    let rows: Vec<[f64; 1]> = ys.iter().map(|&y| [y]).collect();
    SuffStats::from_rows(1, rows.iter().map(|r| &r[..]))
}

#[test]
fn univariate_slot_marginal_matches_quadrature() {
    for &(y, m0, kappa, s, scale) in &[
        (0.3, 0.0, 1.0, 4.0, 4.0),
        (2.5, 1.0, 1.0, 4.0, 2.06),
        (-1.7, 0.5, 0.25, 6.0, 1.0),
        (10.0, 3.0, 1.0, 4.0, 2.0),
    ] {
        let g0 = univariate(m0, kappa, s, scale);
        let closed = g0.ln_marginal(&stats_1d(&[y])).unwrap().exp();
        let quad = common::univariate_marginal_by_quadrature(&[y], m0, kappa, s, scale);
        let rel = (closed - quad).abs() / quad;
        assert!(rel < 1e-6, "y={y}: closed {closed} quadrature {quad} rel {rel}");
    }
}

#[test]
fn univariate_group_marginal_matches_quadrature() {
    let ys = [0.2, -0.4, 0.9];
    let g0 = univariate(0.0, 1.0, 4.0, 2.0);
    let closed = g0.ln_marginal(&stats_1d(&ys)).unwrap().exp();
    let quad = common::univariate_marginal_by_quadrature(&ys, 0.0, 1.0, 4.0, 2.0);
    assert!((closed - quad).abs() / quad < 1e-6, "{closed} vs {quad}");
}

/// Bivariate normal density written out from the 2x2 inverse.
fn bivariate_pdf(y: &[f64], mean: &DVector<f64>, precision: &DMatrix<f64>) -> f64 {
    let (a, b, c) = (precision[(0, 0)], precision[(0, 1)], precision[(1, 1)]);
    let det = a * c - b * b;
    let (dx, dy) = (y[0] - mean[0], y[1] - mean[1]);
    let q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy;
    det.sqrt() / (2.0 * std::f64::consts::PI) * (-0.5 * q).exp()
}

#[test]
fn bivariate_predictive_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let obs: Vec<[f64; 2]> = (0..50)
        .map(|_| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            [1.0 + 0.8 * z1, -0.5 + 0.3 * z1 + 0.5 * z2]
        })
        .collect();
    let prior = NormalWishart::new(
        DVector::from_vec(vec![0.0, 0.0]),
        1.0,
        4.0,
        DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.5]),
    )
    .unwrap();
    let post = prior.posterior(&SuffStats::from_rows(2, obs.iter().map(|r| &r[..])));
    let tests = [[1.0, -0.5], [0.0, 0.0], [2.0, 0.3], [1.5, -1.2], [0.2, -0.9]];
    let draws: Vec<Component> = (0..100_000).map(|_| post.sample(&mut rng).unwrap()).collect();
    for y in &tests {
        let mc = draws.iter().map(|c| bivariate_pdf(y, &c.mean, &c.precision)).sum::<f64>() / draws.len() as f64;
        let closed = post.ln_predictive(y).unwrap().exp();
        assert!((closed - mc).abs() / mc < 0.02, "{y:?}: closed {closed} mc {mc}");
    }
}

#[test]
fn allocation_probability_matches_closed_form() {
    let data = Dataset::from_rows(vec![vec![0.0]]).unwrap();
    let cfg = ModelConfig {
        max_components: 2,
        ..ModelConfig::default_for(&data)
    };
    let unit = |m: f64| Component::new(DVector::from_element(1, m), DMatrix::from_element(1, 1, 1.0)).unwrap();
    let state = SamplerState {
        allocations: vec![0],
        configuration: vec![0, 1],
        values: vec![unit(0.0), unit(10.0)],
        alpha: 1.0,
    };
    let s = GibbsSampler::with_state(cfg, &data, state, 0).unwrap();
    let p = s.allocation_probabilities(0);
    // N(0; 0, 1) / (N(0; 0, 1) + N(0; 10, 1)) = 1 / (1 + e^{-50})
    let expected = 1.0 / (1.0 + (-50f64).exp());
    assert!((p[0] - expected).abs() < 1e-12);
    assert!((p[1] - (1.0 - expected)).abs() < 1e-12);
}

#[test]
fn alpha_with_all_values_distinct_dominates_prior() {
    let (shape, rate, m) = (0.1, 0.1, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let prior = Gamma::new(shape, 1.0 / rate).unwrap();
    let mut alpha: f64 = prior.sample(&mut rng);
    for _ in 0..1000 {
        alpha = update_alpha(&mut rng, alpha, m, m, shape, rate).unwrap();
    }
    let mut chain = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        for _ in 0..5 {
            alpha = update_alpha(&mut rng, alpha, m, m, shape, rate).unwrap();
        }
        chain.push(alpha);
    }
    let prior_draws: Vec<f64> = (0..10_000).map(|_| prior.sample(&mut rng)).collect();
    let z = common::mann_whitney_z(&chain, &prior_draws);
    assert!(z > 5.0, "rank statistic {z}");
}

fn set_partitions(m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0]];
    for _ in 1..m {
        let mut next = Vec::new();
        for p in &out {
            let max = *p.iter().max().unwrap();
            for l in 0..=max + 1 {
                let mut q = p.clone();
                q.push(l);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Posterior over clusterings by exhaustive enumeration of `(Z, C)`, with
/// component values integrated analytically and `α` by quadrature.
fn enumerate_posterior(ys: &[f64], cfg: &ModelConfig) -> HashMap<Clustering, f64> {
    let n = ys.len();
    let m = cfg.max_components;
    let g0 = univariate(cfg.mu0[0], 1.0 / cfg.psi, cfg.dof, cfg.scale[0]);
    let (a0, b0) = (cfg.alpha_shape, cfg.alpha_rate);
    let prior_weight = |k: usize| {
        let f = |t: f64| {
            let a = t.exp();
            let ln_prior = a0 * b0.ln() - ln_gamma(a0) + (a0 - 1.0) * a.ln() - b0 * a;
            a * (ln_prior + k as f64 * a.ln() + ln_gamma(a) - ln_gamma(a + m as f64)).exp()
        };
        common::integrate(&f, -40.0, 8.0, 1e-14)
    };
    let mut out: HashMap<Clustering, f64> = HashMap::new();
    for c in set_partitions(m) {
        let k = c.iter().max().unwrap() + 1;
        let mut occupancy = vec![0usize; k];
        for &l in &c {
            occupancy[l] += 1;
        }
        let pc = prior_weight(k) * occupancy.iter().map(|&o| ln_gamma(o as f64).exp()).product::<f64>();
        for code in 0..m.pow(n as u32) {
            let labels: Vec<usize> = (0..n).map(|i| c[(code / m.pow(i as u32)) % m]).collect();
            let mut ln_ml = 0.0;
            for l in 0..k {
                let group: Vec<f64> = (0..n).filter(|&i| labels[i] == l).map(|i| ys[i]).collect();
                if !group.is_empty() {
                    ln_ml += g0.ln_marginal(&stats_1d(&group)).unwrap();
                }
            }
            *out.entry(Clustering::canonicalize(&labels).unwrap()).or_insert(0.0) += pc * ln_ml.exp();
        }
    }
    let total: f64 = out.values().sum();
    out.values_mut().for_each(|v| *v /= total);
    out
}

#[test]
fn chain_frequencies_match_enumerated_posterior() {
    let ys = [0.0, 0.3, 2.0, 2.2];
    let data = Dataset::from_rows(ys.iter().map(|&y| vec![y]).collect()).unwrap();
    let cfg = ModelConfig {
        max_components: 3,
        dof: 4.0,
        scale: vec![1.0],
        mu0: vec![1.0],
        psi: 1.0,
        alpha_shape: 2.0,
        alpha_rate: 2.0,
    };
    let exact = enumerate_posterior(&ys, &cfg);
    assert_eq!(exact.len(), 14);

    let mut s = GibbsSampler::new(cfg, &data, 5).unwrap();
    for _ in 0..500 {
        s.step().unwrap();
    }
    let sweeps = 200_000;
    let mut freq: HashMap<Clustering, f64> = HashMap::new();
    for _ in 0..sweeps {
        s.step().unwrap();
        *freq.entry(s.state().clustering()).or_insert(0.0) += 1.0 / sweeps as f64;
    }
    for (c, p) in &exact {
        let f = freq.get(c).copied().unwrap_or(0.0);
        assert!((f - p).abs() < 0.006, "{c}: chain {f:.4} exact {p:.4}");
    }
}
