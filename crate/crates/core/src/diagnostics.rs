//! Chain diagnostics: autocorrelation, effective sample size, batch-means
//! standard errors, and interpolated quantiles.

/// Biased (length-normalised) sample autocorrelation up to `max_lag`.
/// Index 0 is lag 0 and equals 1. A constant series has zero variance; by
/// convention its ACF is 1 at lag 0 and 0 elsewhere.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Vec<f64> {
    assert!(series.len() > max_lag, "series must be longer than max_lag");
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
    let mut acf = Vec::with_capacity(max_lag + 1);
    acf.push(1.0);
    if var == 0.0 {
        acf.resize(max_lag + 1, 0.0);
        return acf;
    }
    for lag in 1..=max_lag {
        let cov: f64 = (0..n - lag)
            .map(|i| (series[i] - mean) * (series[i + lag] - mean))
            .sum();
        acf.push(cov / var);
    }
    acf
}

/// Effective sample size via the initial positive sequence of the ACF.
pub fn effective_sample_size(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return n as f64;
    }
    let max_lag = (n / 2).min(1000);
    let acf = autocorrelation(series, max_lag);
    let mut sum = 0.0;
    for &rho in acf.iter().skip(1) {
        if rho <= 0.0 {
            break;
        }
        sum += rho;
    }
    (n as f64 / (1.0 + 2.0 * sum)).min(n as f64)
}

/// Batch-means standard error of the chain mean, with ~sqrt(n) batches.
pub fn batch_means_se(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return f64::INFINITY;
    }
    let n_batches = (n as f64).sqrt().floor() as usize;
    let batch_size = n / n_batches;
    let used = n_batches * batch_size;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| {
            series[b * batch_size..(b + 1) * batch_size].iter().sum::<f64>() / batch_size as f64
        })
        .collect();
    let grand = series[..used].iter().sum::<f64>() / used as f64;
    let var_means: f64 = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
        / (n_batches - 1) as f64;
    (var_means / n_batches as f64).sqrt()
}

/// Type-7 (linear interpolation) sample quantile of a sorted slice.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}
