use statrs::function::erf::erfc;

use super::EvaluationError;

/// Largest `n` evaluated by exact summation; above it the normal
/// approximation with continuity correction is used.
pub const EXACT_LIMIT: u64 = 10_000;

/// `ln C(n, i)` for every `i`, built outward from both ends so that
/// `C(n, i)` and `C(n, n - i)` are bit-identical.
fn ln_binomials(n: u64) -> Vec<f64> {
    let n_us = n as usize;
    let mut out = vec![0.0; n_us + 1];
    let mut acc = 0.0;
    for i in 1..=n_us / 2 {
        acc += ((n - i as u64 + 1) as f64).ln() - (i as f64).ln();
        out[i] = acc;
        out[n_us - i] = acc;
    }
    out
}

/// Two-sided binomial test of `k` successes in `n` trials against success
/// probability `p0`.
///
/// Up to [`EXACT_LIMIT`] trials the p-value sums the probabilities of all
/// outcomes no more likely than `k`. Beyond it,
/// `erfc(z / √2)` with `z = (|k − n·p0| − ½) / √(n·p0·(1 − p0))`.
pub fn binomial_pvalue(n: u64, k: u64, p0: f64) -> Result<f64, EvaluationError> {
    if n == 0 {
        return Err(EvaluationError::NoTrials);
    }
    if k > n {
        return Err(EvaluationError::InvalidCount { n, k });
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(EvaluationError::InvalidProbability(p0));
    }
    if n > EXACT_LIMIT {
        let nf = n as f64;
        let sd = (nf * p0 * (1.0 - p0)).sqrt();
        let z = (((k as f64) - nf * p0).abs() - 0.5).max(0.0) / sd;
        return Ok(erfc(z / std::f64::consts::SQRT_2).min(1.0));
    }
    let lc = ln_binomials(n);
    let (lp, lq) = (p0.ln(), (1.0 - p0).ln());
    let pmf = |i: u64| (lc[i as usize] + i as f64 * lp + (n - i) as f64 * lq).exp();
    let threshold = pmf(k) * (1.0 + 1e-7);
    let mut terms: Vec<f64> = (0..=n).map(pmf).filter(|&p| p <= threshold).collect();
    terms.sort_by(|a, b| a.partial_cmp(b).expect("finite probabilities"));
    Ok(terms.iter().sum::<f64>().min(1.0))
}
