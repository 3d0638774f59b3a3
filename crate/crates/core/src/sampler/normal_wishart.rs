//! Normal–Wishart base measure and its conjugate algebra.
//!
//! Parameterization: the precision `Λ` has density proportional to
//! `|Λ|^{(ν-d-1)/2} exp(-tr(S Λ)/2)` (so `E[Λ] = ν S⁻¹`), and the mean given
//! the precision is `N(m, (κ Λ)⁻¹)`. With the model's `ψ` multiplying the
//! mean covariance, the prior has `κ = 1/ψ`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `ln Γ_d(a)`, the multivariate log-gamma function.
pub fn ln_multigamma(d: usize, a: f64) -> f64 {
    let df = d as f64;
    df * (df - 1.0) / 4.0 * PI.ln() + (0..d).map(|j| ln_gamma(a - j as f64 / 2.0)).sum::<f64>()
}

fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(format!("{what}: {m:.6}")))
}

fn ln_det_from_cholesky(ch: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>()
}

/// Count, mean and scatter matrix `Σ (y - ȳ)(y - ȳ)'` of a group of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SuffStats {
    pub n: usize,
    pub mean: DVector<f64>,
    pub scatter: DMatrix<f64>,
}

impl SuffStats {
    pub fn empty(d: usize) -> Self {
        SuffStats {
            n: 0,
            mean: DVector::zeros(d),
            scatter: DMatrix::zeros(d, d),
        }
    }

    /// Two-pass statistics over `rows`, each of length `d`.
    pub fn from_rows<'a>(d: usize, rows: impl Iterator<Item = &'a [f64]> + Clone) -> Self {
        let mut stats = Self::empty(d);
        for r in rows.clone() {
            stats.n += 1;
            for (m, v) in stats.mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        if stats.n == 0 {
            return stats;
        }
        stats.mean /= stats.n as f64;
        let mut dev = DVector::zeros(d);
        for r in rows {
            for (k, v) in r.iter().enumerate() {
                dev[k] = v - stats.mean[k];
            }
            stats.scatter.ger(1.0, &dev, &dev, 1.0);
        }
        stats
    }

    /// Pools two groups.
    pub fn merge(&self, other: &SuffStats) -> SuffStats {
        if self.n == 0 {
            return other.clone();
        }
        if other.n == 0 {
            return self.clone();
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta = &other.mean - &self.mean;
        let mean = &self.mean + &delta * (nb / n);
        let scatter = &self.scatter + &other.scatter + &delta * delta.transpose() * (na * nb / n);
        SuffStats {
            n: self.n + other.n,
            mean,
            scatter,
        }
    }
}

/// A Gaussian component with cached precision factorization.
#[derive(Clone, Debug)]
pub struct Component {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
    // upper factor U = L' with precision = L L'
    chol_upper: DMatrix<f64>,
    ln_det: f64,
}

impl Component {
    pub fn new(mean: DVector<f64>, precision: DMatrix<f64>) -> Result<Self> {
        let ch = cholesky(&precision, "component precision")?;
        let ln_det = ln_det_from_cholesky(&ch);
        Ok(Component {
            mean,
            chol_upper: ch.l().transpose(),
            precision,
            ln_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn ln_det_precision(&self) -> f64 {
        self.ln_det
    }

    /// `(y - μ)' Λ (y - μ)`.
    fn mahalanobis(&self, y: &[f64]) -> f64 {
        let d = self.dim();
        let mut q = 0.0;
        for a in 0..d {
            let mut s = 0.0;
            for b in a..d {
                s += self.chol_upper[(a, b)] * (y[b] - self.mean[b]);
            }
            q += s * s;
        }
        q
    }

    /// Log density of one observation.
    pub fn ln_pdf(&self, y: &[f64]) -> f64 {
        let d = self.dim() as f64;
        -0.5 * d * LN_2PI + 0.5 * self.ln_det - 0.5 * self.mahalanobis(y)
    }

    /// Log of the product of densities over a group summarized by `stats`.
    pub fn ln_likelihood(&self, stats: &SuffStats) -> f64 {
        if stats.n == 0 {
            return 0.0;
        }
        let n = stats.n as f64;
        let d = self.dim() as f64;
        let trace_term = self.precision.component_mul(&stats.scatter).sum();
        let q = self.mahalanobis(stats.mean.as_slice());
        -0.5 * n * d * LN_2PI + 0.5 * n * self.ln_det - 0.5 * (trace_term + n * q)
    }
}

/// Normal–Wishart distribution over `(μ, Λ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalWishart {
    pub mean: DVector<f64>,
    /// Scalar precision multiplier of the mean.
    pub kappa: f64,
    pub dof: f64,
    /// `S` in `exp(-tr(S Λ)/2)`.
    pub scale: DMatrix<f64>,
}

impl NormalWishart {
    pub fn new(mean: DVector<f64>, kappa: f64, dof: f64, scale: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if scale.nrows() != d || scale.ncols() != d {
            return Err(Error::invalid(format!(
                "scale matrix is {}x{}, expected {d}x{d}",
                scale.nrows(),
                scale.ncols()
            )));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid(format!("kappa must be positive, got {kappa}")));
        }
        if !(dof > d as f64 - 1.0) {
            return Err(Error::invalid(format!("degrees of freedom {dof} must exceed d - 1 = {}", d - 1)));
        }
        cholesky(&scale, "Wishart scale")?;
        Ok(NormalWishart {
            mean,
            kappa,
            dof,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Conjugate update; an empty group returns the distribution unchanged.
    pub fn posterior(&self, stats: &SuffStats) -> NormalWishart {
        if stats.n == 0 {
            return self.clone();
        }
        let n = stats.n as f64;
        let kappa = self.kappa + n;
        let mean = (&self.mean * self.kappa + &stats.mean * n) / kappa;
        let diff = &stats.mean - &self.mean;
        let mut scale = &self.scale + &stats.scatter + &diff * diff.transpose() * (self.kappa * n / kappa);
        // keep exact symmetry against rounding in the outer products
        scale = (&scale + scale.transpose()) * 0.5;
        NormalWishart {
            mean,
            kappa,
            dof: self.dof + n,
            scale,
        }
    }

    /// `ln ∫ Π_i N(y_i | μ, Λ⁻¹) dNW(μ, Λ)`; zero for an empty group.
    pub fn ln_marginal(&self, stats: &SuffStats) -> Result<f64> {
        if stats.n == 0 {
            return Ok(0.0);
        }
        let d = self.dim();
        let post = self.posterior(stats);
        let ln_det_prior = ln_det_from_cholesky(&cholesky(&self.scale, "prior scale")?);
        let ln_det_post = ln_det_from_cholesky(&cholesky(&post.scale, "posterior scale")?);
        let n = stats.n as f64;
        let df = d as f64;
        Ok(-0.5 * n * df * PI.ln() + ln_multigamma(d, post.dof / 2.0) - ln_multigamma(d, self.dof / 2.0)
            + 0.5 * self.dof * ln_det_prior
            - 0.5 * post.dof * ln_det_post
            + 0.5 * df * (self.kappa.ln() - post.kappa.ln()))
    }

    /// Log posterior-predictive density of a single new observation.
    pub fn ln_predictive(&self, y: &[f64]) -> Result<f64> {
        let one = SuffStats::from_rows(self.dim(), std::iter::once(y));
        self.ln_marginal(&one)
    }

    /// Bartlett draw of the precision matrix.
    pub fn sample_precision<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let inv_scale = cholesky(&self.scale, "Wishart scale")?.inverse();
        let l = cholesky(&inv_scale, "inverse Wishart scale")?.unpack();
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            let chi = ChiSquared::new(self.dof - i as f64).map_err(|e| Error::invalid(e.to_string()))?;
            a[(i, i)] = chi.sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let la = l * a;
        let lambda = &la * la.transpose();
        Ok((&lambda + lambda.transpose()) * 0.5)
    }

    /// Draws `(μ, Λ)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Component> {
        let d = self.dim();
        let precision = self.sample_precision(rng)?;
        let scaled = &precision * self.kappa;
        let ch = cholesky(&scaled, "mean precision")?;
        // x = L'^{-1} z has covariance (L L')^{-1}
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = ch
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::NotPositiveDefinite("singular mean precision".into()))?;
        Component::new(&self.mean + x, precision)
    }

    /// Log density of `(μ, Λ)` under this distribution.
    pub fn ln_density(&self, component: &Component) -> Result<f64> {
        let d = self.dim();
        let df = d as f64;
        let ln_det_scale = ln_det_from_cholesky(&cholesky(&self.scale, "Wishart scale")?);
        let ln_det_lambda = component.ln_det_precision();
        let ln_wishart = 0.5 * (self.dof - df - 1.0) * ln_det_lambda
            - 0.5 * self.scale.component_mul(&component.precision).sum()
            + 0.5 * self.dof * ln_det_scale
            - 0.5 * self.dof * df * 2f64.ln()
            - ln_multigamma(d, self.dof / 2.0);
        let diff = &component.mean - &self.mean;
        let q = (diff.transpose() * &component.precision * &diff)[(0, 0)];
        let ln_normal = -0.5 * df * LN_2PI + 0.5 * (df * self.kappa.ln() + ln_det_lambda) - 0.5 * self.kappa * q;
        Ok(ln_wishart + ln_normal)
    }
}
