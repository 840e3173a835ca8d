//! Log-domain arithmetic and multinomial resampling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// `log(sum(exp(v)))`, exact `-inf` when every entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Two-term `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log(mean(exp(v)))`.
pub fn log_mean_exp(values: &[f64]) -> Result<f64> {
    Ok(log_sum_exp(values)? - (values.len() as f64).ln())
}

/// Probabilities proportional to `exp(v)`.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(values.len());
    normalize_into(values, &mut out)?;
    Ok(out)
}

/// [`normalize`] into a caller-owned buffer; returns the log normalizer
/// `log(sum(exp(v)))`. One `exp` per entry.
pub fn normalize_into(values: &[f64], out: &mut Vec<f64>) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights { step: None });
    }
    if !max.is_finite() {
        return Err(Error::InvalidProbabilities(format!(
            "log-weights normalize to {max}"
        )));
    }
    out.clear();
    out.extend(values.iter().map(|&v| (v - max).exp()));
    let sum: f64 = out.iter().sum();
    let inv = 1.0 / sum;
    out.iter_mut().for_each(|p| *p *= inv);
    Ok(max + sum.ln())
}

/// `count` i.i.d. draws from the categorical law `probs`.
pub fn resample_multinomial(probs: &[f64], count: usize, rng: &mut RandomSource) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(count);
    let mut cdf = Vec::with_capacity(probs.len());
    resample_multinomial_into(probs, count, rng, &mut cdf, &mut out)?;
    Ok(out)
}

const PROB_SUM_TOL: f64 = 1e-9;

/// [`resample_multinomial`] with reusable scratch (`cdf`) and output buffers.
///
/// Each index is drawn independently by inverting the cumulative sum, so
/// the output sequence is exchangeable (not sorted).
pub fn resample_multinomial_into(
    probs: &[f64],
    count: usize,
    rng: &mut RandomSource,
    cdf: &mut Vec<f64>,
    out: &mut Vec<usize>,
) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if count == 0 {
        return Err(Error::InvalidArgument("resample count must be >= 1".into()));
    }
    cdf.clear();
    let mut acc = 0.0;
    for &p in probs {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::InvalidProbabilities(format!("entry {p}")));
        }
        acc += p;
        cdf.push(acc);
    }
    if (acc - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidProbabilities(format!("sum is {acc}")));
    }
    let last = probs.len() - 1;
    out.clear();
    out.reserve(count);
    for _ in 0..count {
        let u = rng.random::<f64>() * acc;
        let i = cdf.partition_point(|&c| c <= u);
        out.push(i.min(last));
    }
    Ok(())
}

/// Resamples `count` indices with probabilities proportional to
/// `exp(log_weights)` without materializing the normalized vector; returns
/// `log(sum(exp(log_weights)))`. One `exp` per entry.
pub fn resample_log_weights_into(
    log_weights: &[f64],
    count: usize,
    rng: &mut RandomSource,
    cdf: &mut Vec<f64>,
    out: &mut Vec<usize>,
) -> Result<f64> {
    if log_weights.is_empty() {
        return Err(Error::EmptyInput);
    }
    if count == 0 {
        return Err(Error::InvalidArgument("resample count must be >= 1".into()));
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights { step: None });
    }
    if !max.is_finite() {
        return Err(Error::InvalidProbabilities(format!("log-weight {max}")));
    }
    cdf.clear();
    let mut acc = 0.0;
    for &v in log_weights {
        acc += (v - max).exp();
        cdf.push(acc);
    }
    let last = log_weights.len() - 1;
    out.clear();
    out.reserve(count);
    for _ in 0..count {
        let u = rng.random::<f64>() * acc;
        let i = cdf.partition_point(|&c| c <= u);
        out.push(i.min(last));
    }
    Ok(max + acc.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn log_sum_exp_examples() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]).unwrap(), 0.0);
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]).unwrap() - (1000.0 + LN2)).abs() < 1e-12);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap(),
            f64::NEG_INFINITY
        );
        assert_eq!(log_sum_exp(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn log_mean_exp_examples() {
        assert_eq!(log_mean_exp(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let v = log_mean_exp(&[2f64.ln(), 4f64.ln()]).unwrap();
        assert!((v - 3f64.ln()).abs() < 1e-15);
        assert!((log_mean_exp(&[f64::NEG_INFINITY, 0.0]).unwrap() + LN2).abs() < 1e-15);
        assert_eq!(log_mean_exp(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn log_add_exp_matches_vector_form() {
        for &(a, b) in &[(0.0, 0.0), (-3.0, 2.5), (700.0, -700.0), (f64::NEG_INFINITY, 1.0)] {
            let v = log_sum_exp(&[a, b]).unwrap();
            assert!((log_add_exp(a, b) - v).abs() < 1e-12);
        }
        assert_eq!(
            log_add_exp(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = normalize(&[3f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        assert_eq!(
            normalize(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            Err(Error::DegenerateWeights { step: None })
        );
    }

    #[test]
    fn resample_examples() {
        let mut rng = derive_stream(1, 0);
        assert_eq!(
            resample_multinomial(&[1.0, 0.0, 0.0], 5, &mut rng).unwrap(),
            vec![0; 5]
        );
        assert_eq!(resample_multinomial(&[1.0], 3, &mut rng).unwrap(), vec![0; 3]);
        assert!(matches!(
            resample_multinomial(&[0.7, 0.7], 3, &mut rng),
            Err(Error::InvalidProbabilities(_))
        ));
        assert!(matches!(
            resample_multinomial(&[-0.5, 1.5], 3, &mut rng),
            Err(Error::InvalidProbabilities(_))
        ));
        assert!(resample_multinomial(&[1.0], 0, &mut rng).is_err());
    }

    #[test]
    fn resample_never_picks_zero_probability() {
        let mut rng = derive_stream(2, 0);
        let idx = resample_multinomial(&[0.0, 0.5, 0.0, 0.5, 0.0], 10_000, &mut rng).unwrap();
        assert!(idx.iter().all(|&i| i == 1 || i == 3));
    }

    #[test]
    fn resample_fair_coin_frequency() {
        // sd of the frequency is 0.5/sqrt(1e5) ~ 0.0016; 0.01 is > 6 sd.
        let mut rng = derive_stream(3, 0);
        let idx = resample_multinomial(&[0.5, 0.5], 100_000, &mut rng).unwrap();
        let freq = idx.iter().filter(|&&i| i == 0).count() as f64 / 1e5;
        assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn resample_chi_square_goodness_of_fit() {
        // 10^5 repetitions of a count-4 draw on a 4-category vector.
        let probs = [0.1, 0.2, 0.3, 0.4];
        let mut rng = derive_stream(4, 0);
        let mut counts = [0u64; 4];
        let mut cdf = Vec::new();
        let mut out = Vec::new();
        let reps = 100_000;
        for _ in 0..reps {
            resample_multinomial_into(&probs, 4, &mut rng, &mut cdf, &mut out).unwrap();
            for &i in &out {
                counts[i] += 1;
            }
        }
        let total = (reps * 4) as f64;
        let chi2: f64 = counts
            .iter()
            .zip(&probs)
            .map(|(&c, &p)| {
                let e = total * p;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // Upper 1e-4 quantile of chi-square with 3 degrees of freedom.
        assert!(chi2 < 21.108, "chi2 {chi2}");
    }

    #[test]
    fn log_weight_resampling_matches_probability_form() {
        let lw = [-1.0, f64::NEG_INFINITY, 0.5, -3.0, 0.5];
        let probs = normalize(&lw).unwrap();
        let (mut cdf, mut out) = (Vec::new(), Vec::new());
        let lse = resample_log_weights_into(&lw, 1000, &mut derive_stream(9, 0), &mut cdf, &mut out).unwrap();
        assert!((lse - log_sum_exp(&lw).unwrap()).abs() < 1e-15);
        let direct = resample_multinomial(&probs, 1000, &mut derive_stream(9, 0)).unwrap();
        // Same uniforms against the same CDF up to scaling: identical draws
        // except where a uniform lands within rounding of a boundary.
        let same = out.iter().zip(&direct).filter(|(a, b)| a == b).count();
        assert!(same >= 998, "{same}");
        assert!(out.iter().all(|&i| i != 1));
        assert_eq!(
            resample_log_weights_into(
                &[f64::NEG_INFINITY],
                2,
                &mut derive_stream(9, 0),
                &mut cdf,
                &mut out
            ),
            Err(Error::DegenerateWeights { step: None })
        );
    }

    proptest! {
        #[test]
        fn log_sum_exp_shift_and_permutation(
            v in prop::collection::vec(-50.0f64..50.0, 1..20),
            c in -500.0f64..500.0,
            rot in 0usize..20,
        ) {
            let base = log_sum_exp(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            prop_assert!((log_sum_exp(&shifted).unwrap() - (base + c)).abs() < 1e-9);
            let mut perm = v.clone();
            perm.rotate_left(rot % v.len());
            perm.reverse();
            prop_assert!((log_sum_exp(&perm).unwrap() - base).abs() < 1e-12);
        }

        #[test]
        fn normalize_sums_to_one(v in prop::collection::vec(-300.0f64..300.0, 1..50)) {
            let p = normalize(&v).unwrap();
            let s: f64 = p.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }
    }
}
