//! Sampling from unnormalized log weights.

use rand::Rng;

/// Relative log weights below this are floored rather than flushed to zero.
pub const LN_WEIGHT_FLOOR: f64 = -700.0;

pub fn ln_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalized probabilities from log weights. Finite weights far below the
/// maximum keep a tiny positive mass.
pub fn normalize_ln_weights(ln_w: &[f64]) -> Vec<f64> {
    let max = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ln_w.iter().map(|x| relative_weight(*x, max)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

#[inline]
pub(crate) fn relative_weight(ln_w: f64, max: f64) -> f64 {
    if ln_w == f64::NEG_INFINITY {
        0.0
    } else {
        (ln_w - max).max(LN_WEIGHT_FLOOR).exp()
    }
}

/// Draws an index with probability proportional to `exp(ln_w[i])`.
pub fn sample_ln_weights<R: Rng + ?Sized>(rng: &mut R, ln_w: &[f64]) -> usize {
    let max = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ln_w.iter().map(|x| relative_weight(*x, max)).collect();
    sample_weights(rng, &w)
}

/// Draws an index with probability proportional to non-negative `w[i]`.
pub fn sample_weights<R: Rng + ?Sized>(rng: &mut R, w: &[f64]) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, &wi) in w.iter().enumerate() {
        if wi > 0.0 {
            if u < wi {
                return i;
            }
            last_positive = i;
        }
        u -= wi;
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ln_sum_exp_is_stable() {
        assert!((ln_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((ln_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(ln_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn floor_keeps_mass_positive() {
        let p = normalize_ln_weights(&[0.0, -5000.0]);
        assert!(p[1] > 0.0);
        assert!(p[0] > 0.999_999);
        assert_eq!(normalize_ln_weights(&[0.0, f64::NEG_INFINITY])[1], 0.0);
    }

    #[test]
    fn sampling_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ln_w = [0.0, 2f64.ln(), f64::NEG_INFINITY, 1f64.ln()];
        let mut counts = [0usize; 4];
        let draws = 40_000;
        for _ in 0..draws {
            counts[sample_ln_weights(&mut rng, &ln_w)] += 1;
        }
        assert_eq!(counts[2], 0);
        for (i, expected) in [(0, 0.25), (1, 0.5), (3, 0.25)] {
            let f = counts[i] as f64 / draws as f64;
            assert!((f - expected).abs() < 0.01, "{i}: {f}");
        }
    }
}
