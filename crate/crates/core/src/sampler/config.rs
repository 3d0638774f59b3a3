use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sampler::normal_wishart::NormalWishart;

/// Hyperparameters of the finite-`M` Dirichlet-process mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of component slots `M`.
    pub max_components: usize,
    /// Wishart degrees of freedom `s`.
    pub dof: f64,
    /// Row-major `d x d` matrix `S`.
    pub scale: Vec<f64>,
    pub mu0: Vec<f64>,
    /// Mean covariance multiplier: `μ | Λ ~ N(μ0, ψ Λ⁻¹)`.
    pub psi: f64,
    pub alpha_shape: f64,
    pub alpha_rate: f64,
}

impl ModelConfig {
    /// Data-driven defaults: `μ0` and `S` are the data mean and covariance
    /// (with a small ridge when the covariance is singular), `s = max(4, d)`,
    /// `ψ = 1`, `M = 30`, `α ~ Gamma(0.1, 0.1)`.
    pub fn default_for(data: &Dataset) -> Self {
        let d = data.d();
        let mut scale = data.covariance();
        let as_matrix = DMatrix::from_row_slice(d, d, &scale);
        if Cholesky::new(as_matrix).is_none() {
            let trace: f64 = (0..d).map(|i| scale[i * d + i]).sum();
            let ridge = if trace > 0.0 { 1e-8 * trace / d as f64 } else { 1e-8 };
            for i in 0..d {
                scale[i * d + i] += ridge;
            }
        }
        ModelConfig {
            max_components: 30,
            dof: (d as f64).max(4.0),
            scale,
            mu0: data.mean(),
            psi: 1.0,
            alpha_shape: 0.1,
            alpha_rate: 0.1,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::invalid("mu0 must have at least one coordinate"));
        }
        if self.max_components == 0 {
            return Err(Error::invalid("max_components must be at least 1"));
        }
        if self.scale.len() != d * d {
            return Err(Error::invalid(format!(
                "scale has {} entries, expected {}",
                self.scale.len(),
                d * d
            )));
        }
        if !(self.dof >= d as f64) {
            return Err(Error::invalid(format!("dof {} must be at least d = {d}", self.dof)));
        }
        for (name, v) in [("psi", self.psi), ("alpha_shape", self.alpha_shape), ("alpha_rate", self.alpha_rate)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.mu0.iter().chain(&self.scale).any(|v| !v.is_finite()) {
            return Err(Error::invalid("mu0 and scale must be finite"));
        }
        let s = DMatrix::from_row_slice(d, d, &self.scale);
        if (&s - s.transpose()).amax() > 1e-12 * s.amax().max(1.0) {
            return Err(Error::invalid("scale matrix must be symmetric"));
        }
        self.base_measure().map(|_| ())
    }

    /// The base measure `G0` as a Normal–Wishart.
    pub fn base_measure(&self) -> Result<NormalWishart> {
        let d = self.dim();
        NormalWishart::new(
            DVector::from_column_slice(&self.mu0),
            1.0 / self.psi,
            self.dof,
            DMatrix::from_row_slice(d, d, &self.scale),
        )
    }

    /// Stable 64-bit FNV-1a fingerprint of every field.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(&(self.max_components as u64).to_le_bytes());
        for v in [self.dof, self.psi, self.alpha_shape, self.alpha_rate] {
            eat(&v.to_bits().to_le_bytes());
        }
        for v in self.scale.iter().chain(&self.mu0) {
            eat(&v.to_bits().to_le_bytes());
        }
        h
    }
}
