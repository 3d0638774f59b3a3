//! Shared fixtures and independent numerical oracles for integration tests.
#![allow(dead_code)]

use statrs::function::gamma::ln_gamma;

pub mod brute;

/// Two K-means runs on the 5-component normal mixture with unit variance.
pub const TABLE_MIXTURE_5: [[u64; 5]; 5] = [
    [0, 0, 0, 60, 639],
    [0, 229, 1086, 0, 0],
    [639, 0, 0, 0, 0],
    [0, 0, 143, 1103, 0],
    [166, 935, 0, 0, 0],
];
pub const TABLE_MIXTURE_5_ROWS: [u64; 5] = [699, 1315, 639, 1246, 1101];
pub const TABLE_MIXTURE_5_COLS: [u64; 5] = [805, 1164, 1229, 1163, 639];

/// Two K-means runs (different starts) on 51,834 four-variate observations.
pub const TABLE_STARTS_11: [[u64; 11]; 11] = [
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2],
    [0, 0, 0, 0, 0, 0, 0, 0, 886, 57, 0],
    [0, 2, 0, 0, 0, 0, 711, 1432, 1940, 15, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 48],
    [0, 3, 0, 1781, 0, 0, 86, 0, 2, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0],
    [0, 198, 1076, 86, 77, 0, 6053, 1877, 0, 0, 0],
    [0, 516, 6859, 4630, 3683, 0, 2, 0, 0, 0, 0],
    [182, 5, 0, 0, 0, 102, 0, 474, 0, 1920, 0],
    [502, 317, 0, 0, 5686, 10271, 0, 127, 0, 0, 0],
    [214, 2, 0, 1, 0, 0, 0, 0, 0, 0, 7],
];
pub const TABLE_STARTS_11_ROWS: [u64; 11] = [2, 943, 4100, 48, 1872, 2, 9367, 15690, 2683, 16903, 224];
pub const TABLE_STARTS_11_COLS: [u64; 11] = [898, 1043, 7935, 6498, 9446, 10373, 6852, 3910, 2830, 1992, 57];

/// K-means with three variables (rows) against four variables (columns).
pub const TABLE_VARIABLES_11: [[u64; 11]; 11] = [
    [0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0],
    [0, 929, 158, 0, 2, 0, 0, 0, 1, 0, 0],
    [0, 0, 3814, 0, 6, 0, 252, 0, 0, 0, 0],
    [0, 0, 0, 39, 1796, 0, 78, 1085, 0, 0, 1],
    [0, 0, 0, 0, 23, 0, 8663, 3, 0, 0, 1],
    [0, 0, 0, 0, 0, 0, 0, 0, 197, 4067, 45],
    [0, 0, 0, 0, 41, 0, 44, 9622, 0, 0, 1],
    [0, 14, 128, 0, 0, 0, 49, 0, 2451, 30, 7],
    [0, 0, 0, 0, 0, 0, 0, 0, 1, 9737, 0],
    [2, 0, 0, 9, 0, 0, 0, 0, 33, 13, 156],
    [0, 0, 0, 0, 4, 0, 281, 4980, 0, 3056, 13],
];
pub const TABLE_VARIABLES_11_ROWS: [u64; 11] = [2, 1090, 4072, 2999, 8690, 4309, 9708, 2679, 9738, 213, 8334];
pub const TABLE_VARIABLES_11_COLS: [u64; 11] = [2, 943, 4100, 48, 1872, 2, 9367, 15690, 2683, 16903, 224];

pub fn to_rows<const N: usize>(t: &[[u64; N]; N]) -> Vec<Vec<u64>> {
    t.iter().map(|r| r.to_vec()).collect()
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// `∫∫ Π_i N(y_i | μ, 1/λ) · N(μ | m0, 1/(κλ)) · Gamma(λ | s/2, rate S/2) dμ dλ`
/// by nested quadrature, with `λ = e^t`.
pub fn univariate_marginal_by_quadrature(ys: &[f64], m0: f64, kappa: f64, s: f64, scale: f64) -> f64 {
    let ln_norm = |x: f64, mean: f64, prec: f64| 0.5 * (prec / (2.0 * std::f64::consts::PI)).ln() - 0.5 * prec * (x - mean) * (x - mean);
    let shape = s / 2.0;
    let rate = scale / 2.0;
    let ln_gamma_pdf = |l: f64| shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * l.ln() - rate * l;
    let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
    let outer = |t: f64| {
        let lambda = t.exp();
        // the μ-integrand is concentrated near a precision-weighted centre
        let n = ys.len() as f64;
        let centre = (kappa * m0 + n * ybar) / (kappa + n);
        let width = 40.0 / (lambda * (kappa + n)).sqrt();
        let inner = |mu: f64| {
            let ll: f64 = ys.iter().map(|&y| ln_norm(y, mu, lambda)).sum();
            (ll + ln_norm(mu, m0, kappa * lambda)).exp()
        };
        let peak = inner(centre).max(1e-300);
        let v = integrate(&inner, centre - width, centre + width, peak * width * 1e-12);
        v * ln_gamma_pdf(lambda).exp() * lambda
    };
    integrate(&outer, -40.0, 12.0, 1e-16)
}

/// Mann–Whitney `z` statistic for `a` tending to exceed `b`.
pub fn mann_whitney_z(a: &[f64], b: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut rank_sum_a = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for item in &all[i..=j] {
            if item.1 {
                rank_sum_a += avg_rank;
            }
        }
        i = j + 1;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let u = rank_sum_a - na * (na + 1.0) / 2.0;
    let mean = na * nb / 2.0;
    let sd = (na * nb * (na + nb + 1.0) / 12.0).sqrt();
    (u - mean) / sd
}
