//! Information-theoretic primitives shared across the crate.
//!
//! All quantities are in nats. Probabilities entering a logarithm are
//! clamped to [`PROB_FLOOR`, 1 - `PROB_FLOOR`] (scalar events) or floored
//! at [`PROB_FLOOR`] (categorical vectors) because KL divergences of
//! near-one-hot distributions are numerically unbounded.

/// Floor applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-9;

/// Scores smaller than this are reported as exactly zero.
pub const SCORE_EPSILON: f64 = 1e-12;

/// In-place softmax with max-subtraction; output sums to 1 up to f64
/// rounding.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}

/// Shannon entropy of a distribution, with 0 ln 0 = 0.
pub fn entropy(dist: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in dist {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// Binary entropy h_b(p) = -p ln p - (1-p) ln(1-p), with h_b(0) = h_b(1) = 0.
pub fn binary_entropy(p: f64) -> f64 {
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.ln();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).ln();
    }
    h
}

#[inline]
fn clamp_unit(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// KL divergence between two Bernoulli distributions with success
/// probabilities `a` and `b`, floored for numerical stability. Values
/// below [`SCORE_EPSILON`] collapse to exactly zero so that analytic
/// zeros survive the flooring.
pub fn binary_kl(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (a, b) = (clamp_unit(a), clamp_unit(b));
    let kl = a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln();
    if kl.abs() < SCORE_EPSILON {
        0.0
    } else {
        kl.max(0.0)
    }
}

/// KL divergence between two categorical distributions of equal length.
/// The second argument is floored before the log; zero mass in `p`
/// contributes nothing.
pub fn categorical_kl(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            kl += pi * (pi / qi.max(PROB_FLOOR)).ln();
        }
    }
    if kl.abs() < SCORE_EPSILON {
        0.0
    } else {
        kl.max(0.0)
    }
}

/// Mean and sample standard deviation (n-1 denominator; 0 when n < 2).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Standard error of the mean.
pub fn standard_error(values: &[f64]) -> f64 {
    let (_, sd) = mean_std(values);
    if values.is_empty() {
        0.0
    } else {
        sd / (values.len() as f64).sqrt()
    }
}
