//! Nonmarginalized Gibbs sampler for the finite-`M` Dirichlet-process
//! mixture: allocations `Z` to `M` slots, a configuration `C` mapping slots
//! to `k` distinct component values, the values themselves, and `α`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::clustering::Clustering;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sampler::categorical::{normalize_ln_weights, sample_ln_weights};
use crate::sampler::config::ModelConfig;
use crate::sampler::normal_wishart::{Component, NormalWishart, SuffStats};
use crate::trace::{ClusteringTrace, TraceEntry, TraceMeta};

/// Row count at or above which the allocation sweep runs in parallel. Results
/// do not depend on it: every unit draws from its own random stream.
const PARALLEL_ROWS: usize = 2048;

/// Full latent state of one iteration. Indices are zero-based.
#[derive(Clone, Debug)]
pub struct SamplerState {
    /// Slot of each unit, in `0..M`.
    pub allocations: Vec<usize>,
    /// Distinct-value index of each slot, in `0..k`.
    pub configuration: Vec<usize>,
    /// The `k` distinct component values.
    pub values: Vec<Component>,
    pub alpha: f64,
}

impl SamplerState {
    /// Number of distinct values.
    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn max_components(&self) -> usize {
        self.configuration.len()
    }

    /// Slots per distinct value.
    pub fn occupancy(&self) -> Vec<usize> {
        let mut occ = vec![0; self.k()];
        for &c in &self.configuration {
            occ[c] += 1;
        }
        occ
    }

    /// Unit `i` and `i'` share a cluster iff their slots map to the same value.
    pub fn clustering(&self) -> Clustering {
        let labels: Vec<usize> = self.allocations.iter().map(|&z| self.configuration[z]).collect();
        Clustering::canonicalize(&labels).expect("state has at least one unit")
    }

    /// Checks the structural invariants: every slot index and value index in
    /// range, every value used by some slot, every precision factorizable.
    pub fn check(&self, n: usize, max_components: usize) -> Result<()> {
        if self.allocations.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: self.allocations.len(),
            });
        }
        if self.configuration.len() != max_components {
            return Err(Error::invalid(format!(
                "configuration has {} slots, expected {max_components}",
                self.configuration.len()
            )));
        }
        if let Some(z) = self.allocations.iter().find(|&&z| z >= max_components) {
            return Err(Error::invalid(format!("allocation {z} out of range")));
        }
        if let Some(c) = self.configuration.iter().find(|&&c| c >= self.k()) {
            return Err(Error::invalid(format!("configuration value {c} out of range")));
        }
        if let Some(l) = self.occupancy().iter().position(|&m| m == 0) {
            return Err(Error::invalid(format!("distinct value {l} is used by no slot")));
        }
        if self.k() == 0 || self.k() > max_components {
            return Err(Error::invalid(format!("k = {} outside 1..={max_components}", self.k())));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        for v in &self.values {
            Component::new(v.mean.clone(), v.precision.clone())?;
        }
        Ok(())
    }
}

/// One `α` draw given `k` distinct values among `m` DP draws, by auxiliary
/// `η ~ Beta(α + 1, m)` and a two-component Gamma mixture.
pub fn update_alpha<R: Rng + ?Sized>(
    rng: &mut R,
    alpha: f64,
    k: usize,
    m: usize,
    shape: f64,
    rate: f64,
) -> Result<f64> {
    if k == 0 || k > m {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={m}")));
    }
    let beta = Beta::new(alpha + 1.0, m as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let eta: f64 = beta.sample(rng);
    let rate_post = rate - eta.ln();
    let kf = k as f64;
    let odds_high = shape + kf - 1.0;
    let odds_low = m as f64 * rate_post;
    let shape_post = if rng.random::<f64>() * (odds_high + odds_low) < odds_high {
        shape + kf
    } else {
        shape + kf - 1.0
    };
    let gamma = Gamma::new(shape_post, 1.0 / rate_post).map_err(|e| Error::invalid(e.to_string()))?;
    // guard against the (measure-zero) underflow to exactly 0
    Ok(gamma.sample(rng).max(f64::MIN_POSITIVE))
}

pub struct GibbsSampler<'a> {
    data: &'a Dataset,
    config: ModelConfig,
    base: NormalWishart,
    state: SamplerState,
    rng: ChaCha8Rng,
}

impl<'a> GibbsSampler<'a> {
    /// Starts from uniform allocations, one distinct value per slot drawn
    /// from the base measure, and `α` drawn from its prior.
    pub fn new(config: ModelConfig, data: &'a Dataset, seed: u64) -> Result<Self> {
        config.validate()?;
        check_dim(&config, data)?;
        let base = config.base_measure()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = config.max_components;
        let allocations = (0..data.n()).map(|_| rng.random_range(0..m)).collect();
        let values = (0..m).map(|_| base.sample(&mut rng)).collect::<Result<Vec<_>>>()?;
        let prior = Gamma::new(config.alpha_shape, 1.0 / config.alpha_rate).map_err(|e| Error::invalid(e.to_string()))?;
        let alpha = prior.sample(&mut rng).max(f64::MIN_POSITIVE);
        let state = SamplerState {
            allocations,
            configuration: (0..m).collect(),
            values,
            alpha,
        };
        Ok(GibbsSampler {
            data,
            config,
            base,
            state,
            rng,
        })
    }

    /// Starts from a given state.
    pub fn with_state(config: ModelConfig, data: &'a Dataset, state: SamplerState, seed: u64) -> Result<Self> {
        config.validate()?;
        check_dim(&config, data)?;
        state.check(data.n(), config.max_components)?;
        Ok(GibbsSampler {
            data,
            base: config.base_measure()?,
            config,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn base_measure(&self) -> &NormalWishart {
        &self.base
    }

    /// Unnormalized log probabilities of each slot for unit `i`.
    pub fn allocation_ln_weights(&self, i: usize) -> Vec<f64> {
        let y = self.data.row(i);
        let per_value: Vec<f64> = self.state.values.iter().map(|v| v.ln_pdf(y)).collect();
        self.state.configuration.iter().map(|&c| per_value[c]).collect()
    }

    /// Normalized full-conditional probabilities of each slot for unit `i`.
    pub fn allocation_probabilities(&self, i: usize) -> Vec<f64> {
        normalize_ln_weights(&self.allocation_ln_weights(i))
    }

    /// Resamples every `z_i` given the slot values.
    pub fn update_allocations(&mut self) {
        let key: u64 = self.rng.random();
        let draw = |i: usize| {
            let mut unit_rng = ChaCha8Rng::seed_from_u64(key);
            unit_rng.set_stream(i as u64);
            sample_ln_weights(&mut unit_rng, &self.allocation_ln_weights(i))
        };
        let n = self.data.n();
        let z: Vec<usize> = if n >= PARALLEL_ROWS {
            (0..n).into_par_iter().map(draw).collect()
        } else {
            (0..n).map(draw).collect()
        };
        self.state.allocations = z;
    }

    fn slot_stats(&self) -> Vec<SuffStats> {
        let d = self.data.d();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.config.max_components];
        for (i, &z) in self.state.allocations.iter().enumerate() {
            members[z].push(i);
        }
        members
            .iter()
            .map(|rows| SuffStats::from_rows(d, rows.iter().map(|&i| self.data.row(i))))
            .collect()
    }

    /// Log weights for slot `j` choosing each existing value (given the
    /// occupancies of the other slots) or a fresh value, in that order.
    pub fn configuration_ln_weights(&self, occupancy_without_slot: &[usize], stats: &SuffStats) -> Result<Vec<f64>> {
        let mut w: Vec<f64> = self
            .state
            .values
            .iter()
            .zip(occupancy_without_slot)
            .map(|(v, &m)| {
                if m == 0 {
                    f64::NEG_INFINITY
                } else {
                    (m as f64).ln() + v.ln_likelihood(stats)
                }
            })
            .collect();
        w.push(self.state.alpha.ln() + self.base.ln_marginal(stats)?);
        Ok(w)
    }

    /// Pólya-urn sweep over the slots, then the remix step.
    pub fn update_configuration(&mut self) -> Result<()> {
        let stats = self.slot_stats();
        let mut occ = self.state.occupancy();
        for (j, slot_stats) in stats.iter().enumerate() {
            let old = self.state.configuration[j];
            occ[old] -= 1;
            if occ[old] == 0 {
                // the value was held by this slot alone; discard it
                self.state.values.remove(old);
                occ.remove(old);
                for c in self.state.configuration.iter_mut() {
                    if *c > old {
                        *c -= 1;
                    }
                }
            }
            let w = self.configuration_ln_weights(&occ, slot_stats)?;
            let pick = sample_ln_weights(&mut self.rng, &w);
            if pick == occ.len() {
                let fresh = self.base.posterior(slot_stats).sample(&mut self.rng)?;
                self.state.values.push(fresh);
                occ.push(1);
            } else {
                occ[pick] += 1;
            }
            self.state.configuration[j] = pick;
        }
        self.remix_with(&stats)
    }

    /// Redraws every distinct value from its conjugate posterior given the
    /// data allocated to its slots. Allocations and configuration are kept.
    pub fn remix(&mut self) -> Result<()> {
        let stats = self.slot_stats();
        self.remix_with(&stats)
    }

    fn remix_with(&mut self, slot_stats: &[SuffStats]) -> Result<()> {
        let d = self.data.d();
        let mut pooled = vec![SuffStats::empty(d); self.state.k()];
        for (j, s) in slot_stats.iter().enumerate() {
            let c = self.state.configuration[j];
            pooled[c] = pooled[c].merge(s);
        }
        for (l, s) in pooled.iter().enumerate() {
            self.state.values[l] = self.base.posterior(s).sample(&mut self.rng)?;
        }
        Ok(())
    }

    pub fn update_alpha(&mut self) -> Result<()> {
        self.state.alpha = update_alpha(
            &mut self.rng,
            self.state.alpha,
            self.state.k(),
            self.config.max_components,
            self.config.alpha_shape,
            self.config.alpha_rate,
        )?;
        Ok(())
    }

    /// One full sweep: allocations, configuration (with remix), `α`.
    pub fn step(&mut self) -> Result<()> {
        self.update_allocations();
        self.update_configuration()?;
        self.update_alpha()
    }

    /// `ln p(Y, Z, C, θ*, α)`: likelihood, uniform allocation prior, the
    /// DP partition probability of the slots, base-measure density of each
    /// distinct value, and the Gamma prior on `α`.
    pub fn ln_joint(&self) -> Result<f64> {
        let s = &self.state;
        let m = self.config.max_components as f64;
        let stats = self.slot_stats();
        let mut total = 0.0;
        for (j, st) in stats.iter().enumerate() {
            total += s.values[s.configuration[j]].ln_likelihood(st);
        }
        total -= self.data.n() as f64 * m.ln();
        let a = s.alpha;
        total += s.k() as f64 * a.ln() + ln_gamma(a) - ln_gamma(a + m);
        total += s.occupancy().iter().map(|&c| ln_gamma(c as f64)).sum::<f64>();
        for v in &s.values {
            total += self.base.ln_density(v)?;
        }
        let (shape, rate) = (self.config.alpha_shape, self.config.alpha_rate);
        total += shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * a.ln() - rate * a;
        Ok(total)
    }
}

fn check_dim(config: &ModelConfig, data: &Dataset) -> Result<()> {
    if config.dim() != data.d() {
        return Err(Error::invalid(format!(
            "model has dimension {}, data has {} columns",
            config.dim(),
            data.d()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RunSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            iterations: 6000,
            burn_in: 1000,
            thinning: 5,
            seed: 0,
        }
    }
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::invalid(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thinning == 0 {
            return Err(Error::invalid("thinning must be at least 1"));
        }
        Ok(())
    }
}

/// Runs a chain and records the clustering of every kept iteration:
/// iterations are numbered from 1 and iteration `t` is kept when
/// `t > burn_in` and `(t - burn_in) % thinning == 0`.
pub fn run_chain(config: &ModelConfig, data: &Dataset, settings: &RunSettings) -> Result<ClusteringTrace> {
    run_chain_with(config, data, settings, |_, _| Ok(()))
}

/// [`run_chain`] with a callback invoked after every iteration.
pub fn run_chain_with<F>(
    config: &ModelConfig,
    data: &Dataset,
    settings: &RunSettings,
    mut inspect: F,
) -> Result<ClusteringTrace>
where
    F: FnMut(usize, &GibbsSampler<'_>) -> Result<()>,
{
    settings.validate()?;
    let mut sampler = GibbsSampler::new(config.clone(), data, settings.seed)?;
    let mut trace = ClusteringTrace::new(TraceMeta {
        n: data.n(),
        seed: settings.seed,
        config_hash: Some(config.fingerprint()),
        burn_in: settings.burn_in,
        thinning: settings.thinning,
    });
    for t in 1..=settings.iterations {
        let wrap = |source: Error| Error::Chain {
            iteration: t,
            source: Box::new(source),
        };
        sampler.step().map_err(wrap)?;
        inspect(t, &sampler).map_err(wrap)?;
        if t > settings.burn_in && (t - settings.burn_in) % settings.thinning == 0 {
            let clustering = sampler.state().clustering();
            trace.entries.push(TraceEntry {
                iteration: t,
                k: clustering.num_clusters(),
                clustering,
                alpha: sampler.state().alpha,
            });
        }
    }
    Ok(trace)
}
