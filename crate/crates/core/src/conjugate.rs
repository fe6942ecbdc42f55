//! Closed-form estimation under independent gamma priors: per-bin gamma
//! posteriors, marginal credible bands, exact log marginal likelihood,
//! empirical-Bayes selection of the bin count, and the rate-hyperparameter
//! fixed point.

use crate::dist::GammaParams;
use crate::error::{Error, Result};
use crate::model::{bin_events, BinGrid, BinnedCounts, EventSeries, PiecewiseIntensity};
use crate::rng::RngStream;
use crate::special::{gamma_quantile, ln_gamma};

/// Independent G(shape, rate) prior on every bin height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndepGammaPrior {
    shape: f64,
    rate: f64,
}

impl IndepGammaPrior {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        GammaParams::new(shape, rate)?;
        Ok(Self { shape, rate })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }
}

/// Product-gamma posterior: bin k carries G(shape + H_k, rate + n Delta_k).
#[derive(Debug, Clone, PartialEq)]
pub struct IndepGammaPosterior {
    grid: BinGrid,
    per_bin: Vec<GammaParams>,
}

impl IndepGammaPosterior {
    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn per_bin(&self) -> &[GammaParams] {
        &self.per_bin
    }
}

/// One credible level: pointwise lower/upper quantile curves.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLevel {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Pointwise posterior mean plus credible bands at the requested levels.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorBand {
    grid: BinGrid,
    mean: Vec<f64>,
    levels: Vec<BandLevel>,
}

impl PosteriorBand {
    pub fn new(grid: BinGrid, mean: Vec<f64>, levels: Vec<BandLevel>) -> Result<Self> {
        let n = grid.n_bins();
        if mean.len() != n {
            return Err(Error::Config("band mean length does not match grid".into()));
        }
        for band in &levels {
            if !(band.level > 0.0 && band.level < 1.0) {
                return Err(Error::Parameter(format!(
                    "credibility level must be in (0,1), got {}",
                    band.level
                )));
            }
            if band.lower.len() != n || band.upper.len() != n {
                return Err(Error::Config("band curve length does not match grid".into()));
            }
            for (lo, hi) in band.lower.iter().zip(&band.upper) {
                if lo > hi {
                    return Err(Error::Numerical(format!("band lower {lo} exceeds upper {hi}")));
                }
            }
        }
        Ok(Self { grid, mean, levels })
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn levels(&self) -> &[BandLevel] {
        &self.levels
    }

    pub fn mean_intensity(&self) -> PiecewiseIntensity {
        PiecewiseIntensity::new(self.grid.clone(), self.mean.clone())
            .expect("means are valid heights")
    }
}

/// Conjugate update: pure function of the sufficient statistics.
pub fn fit_conjugate(counts: &BinnedCounts, prior: IndepGammaPrior) -> IndepGammaPosterior {
    let n = counts.n_replicates() as f64;
    let per_bin = counts
        .counts()
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            GammaParams::new(prior.shape + h as f64, prior.rate + n * counts.grid().width(k))
                .expect("posterior parameters are positive")
        })
        .collect();
    IndepGammaPosterior { grid: counts.grid().clone(), per_bin }
}

/// Posterior mean step function: (H_k + shape) / (n Delta_k + rate).
pub fn posterior_mean(post: &IndepGammaPosterior) -> PiecewiseIntensity {
    let heights = post.per_bin.iter().map(GammaParams::mean).collect();
    PiecewiseIntensity::new(post.grid.clone(), heights).expect("posterior means are valid heights")
}

/// Marginal credible bands from the per-bin gamma quantiles: at credibility
/// g the band is [(1-g)/2, (1+g)/2] pointwise.
pub fn credible_band(post: &IndepGammaPosterior, levels: &[f64]) -> Result<PosteriorBand> {
    let mut bands = Vec::with_capacity(levels.len());
    for &level in levels {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Parameter(format!("credibility level must be in (0,1), got {level}")));
        }
        let mut lower = Vec::with_capacity(post.per_bin.len());
        let mut upper = Vec::with_capacity(post.per_bin.len());
        for &params in &post.per_bin {
            lower.push(gamma_quantile((1.0 - level) / 2.0, params)?);
            upper.push(gamma_quantile((1.0 + level) / 2.0, params)?);
        }
        bands.push(BandLevel { level, lower, upper });
    }
    let mean = post.per_bin.iter().map(GammaParams::mean).collect();
    PosteriorBand::new(post.grid.clone(), mean, bands)
}

/// One draw of the whole step intensity from the product posterior.
pub fn sample_posterior(post: &IndepGammaPosterior, rng: &mut RngStream) -> PiecewiseIntensity {
    let heights = post
        .per_bin
        .iter()
        .map(|&p| crate::dist::sample_gamma(rng, p))
        .collect();
    PiecewiseIntensity::new(post.grid.clone(), heights).expect("gamma draws are valid heights")
}

/// Exact log marginal likelihood of the binned data under the product prior,
/// including the data-only exposure constant T*n.
pub fn log_marginal_likelihood(counts: &BinnedCounts, prior: IndepGammaPrior) -> f64 {
    log_marginal_likelihood_with(counts, prior, true)
}

/// Log marginal likelihood with the T*n term optional: that term does not
/// depend on the number of bins, so profile comparisons may drop it.
pub fn log_marginal_likelihood_with(
    counts: &BinnedCounts,
    prior: IndepGammaPrior,
    include_data_const: bool,
) -> f64 {
    let n = counts.n_replicates() as f64;
    let n_bins = counts.grid().n_bins() as f64;
    let mut lml = n_bins * (prior.shape * prior.rate.ln() - ln_gamma(prior.shape));
    if include_data_const {
        lml += counts.grid().horizon() * n;
    }
    for (k, &h) in counts.counts().iter().enumerate() {
        let shape = prior.shape + h as f64;
        lml += ln_gamma(shape) - shape * (n * counts.grid().width(k) + prior.rate).ln();
    }
    lml
}

/// Evidence profile over candidate uniform bin counts and its argmax.
/// Ties break toward the smaller count.
pub fn select_bins_empirical_bayes(
    data: &EventSeries,
    prior: IndepGammaPrior,
    candidates: &[usize],
) -> Result<(usize, Vec<(usize, f64)>)> {
    if candidates.is_empty() {
        return Err(Error::Config("empty candidate bin range".into()));
    }
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted[0] == 0 {
        return Err(Error::Config("candidate bin counts must be >= 1".into()));
    }
    let mut profile = Vec::with_capacity(sorted.len());
    let mut best = (sorted[0], f64::NEG_INFINITY);
    for &n_bins in &sorted {
        let counts = bin_events(data, &BinGrid::uniform(data.horizon(), n_bins)?)?;
        let lml = log_marginal_likelihood(&counts, prior);
        if lml > best.1 {
            best = (n_bins, lml);
        }
        profile.push((n_bins, lml));
    }
    Ok((best.0, profile))
}

/// Default candidate range for the evidence sweep: 1 ..= min(200, total events).
pub fn default_bin_candidates(data: &EventSeries) -> Vec<usize> {
    let hi = data.total_events().clamp(1, 200);
    (1..=hi).collect()
}

/// Rate hyperparameter solving the stability relation
/// shape/rate = (1/N) sum_k (H_k + shape)/(n Delta_k + rate),
/// i.e. the prior mean equals the average posterior mean. Unique positive
/// root; found by bracketed bisection/Newton to residual < 1e-12.
pub fn calibrate_beta(counts: &BinnedCounts, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    if counts.total() == 0 {
        return Err(Error::Config(
            "all bin counts are zero: the stability relation has no positive root; set beta manually"
                .into(),
        ));
    }
    let n = counts.n_replicates() as f64;
    let n_bins = counts.grid().n_bins() as f64;
    let avg_post_mean = |beta: f64| -> f64 {
        counts
            .counts()
            .iter()
            .enumerate()
            .map(|(k, &h)| (h as f64 + alpha) / (n * counts.grid().width(k) + beta))
            .sum::<f64>()
            / n_bins
    };
    // g(beta) = alpha - beta * avg_post_mean(beta): strictly decreasing from
    // alpha at 0+ to -mean(H) as beta grows, so a sign change always exists.
    let g = |beta: f64| alpha - beta * avg_post_mean(beta);
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    for _ in 0..4_000 {
        if g(hi) < 0.0 {
            break;
        }
        hi *= 2.0;
    }
    if g(hi) >= 0.0 {
        return Err(Error::Numerical("failed to bracket the beta fixed point".into()));
    }
    let mut beta = 0.5 * hi;
    for _ in 0..500 {
        let residual = alpha / beta - avg_post_mean(beta);
        if residual.abs() < 1e-13 {
            break;
        }
        let gb = g(beta);
        if gb > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        // Newton on g; g'(beta) = -avg_post_mean - beta * d/dbeta avg.
        let d_avg = -counts
            .counts()
            .iter()
            .enumerate()
            .map(|(k, &h)| {
                let denom = n * counts.grid().width(k) + beta;
                (h as f64 + alpha) / (denom * denom)
            })
            .sum::<f64>()
            / n_bins;
        let dg = -avg_post_mean(beta) - beta * d_avg;
        let mut next = beta - gb / dg;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if next == beta {
            break;
        }
        beta = next;
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::bin_events;

    fn grid(t: f64, n: usize) -> BinGrid {
        BinGrid::uniform(t, n).unwrap()
    }

    #[test]
    fn conjugate_update_direct_substitution() {
        // H_k = 5, n = 2, width 0.5, shape = rate = 0.1 -> G(5.1, 1.1).
        let counts = BinnedCounts::new(grid(0.5, 1), vec![5], 2).unwrap();
        let prior = IndepGammaPrior::new(0.1, 0.1).unwrap();
        let post = fit_conjugate(&counts, prior);
        assert!((post.per_bin()[0].shape() - 5.1).abs() < 1e-15);
        assert!((post.per_bin()[0].rate() - 1.1).abs() < 1e-15);
    }

    #[test]
    fn empty_bins_keep_prior_shape() {
        let counts = BinnedCounts::new(grid(2.0, 4), vec![0, 3, 0, 1], 5).unwrap();
        let prior = IndepGammaPrior::new(0.7, 0.9).unwrap();
        let post = fit_conjugate(&counts, prior);
        for (k, p) in post.per_bin().iter().enumerate() {
            if counts.counts()[k] == 0 {
                assert_eq!(p.shape(), 0.7);
            } else {
                assert!(p.shape() > 0.7);
            }
            assert!((p.rate() - (0.9 + 5.0 * 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn posterior_mean_hand_value() {
        let counts = BinnedCounts::new(grid(0.5, 1), vec![5], 2).unwrap();
        let prior = IndepGammaPrior::new(0.1, 0.1).unwrap();
        let mean = posterior_mean(&fit_conjugate(&counts, prior));
        assert!((mean.heights()[0] - 51.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn diffuse_limit_recovers_frequentist_estimator() {
        let counts = BinnedCounts::new(grid(3.0, 3), vec![4, 9, 1], 7).unwrap();
        let prior = IndepGammaPrior::new(1e-12, 1e-12).unwrap();
        let mean = posterior_mean(&fit_conjugate(&counts, prior));
        for (k, &h) in counts.counts().iter().enumerate() {
            let freq = h as f64 / (7.0 * 1.0);
            assert!(
                ((mean.heights()[k] - freq) / freq).abs() < 1e-9,
                "bin {k}: {} vs {freq}",
                mean.heights()[k]
            );
        }
    }

    #[test]
    fn band_exponential_quantiles() {
        // A G(1,1) bin at level 0.95: [-ln 0.975, -ln 0.025].
        let counts = BinnedCounts::new(grid(1.0, 1), vec![0], 0).unwrap();
        let prior = IndepGammaPrior::new(1.0, 1.0).unwrap();
        let band = credible_band(&fit_conjugate(&counts, prior), &[0.95]).unwrap();
        let lo = band.levels()[0].lower[0];
        let hi = band.levels()[0].upper[0];
        assert!((lo - -(0.975_f64.ln())).abs() < 1e-9, "lower {lo}");
        assert!((hi - -(0.025_f64.ln())).abs() < 1e-9, "upper {hi}");
        assert!(lo <= band.mean()[0] && band.mean()[0] <= hi);
    }

    #[test]
    fn bands_nest_across_levels() {
        let counts = BinnedCounts::new(grid(2.0, 5), vec![3, 0, 11, 2, 7], 4).unwrap();
        let prior = IndepGammaPrior::new(0.1, 0.1).unwrap();
        let band = credible_band(&fit_conjugate(&counts, prior), &[0.5, 0.95]).unwrap();
        let narrow = &band.levels()[0];
        let wide = &band.levels()[1];
        for k in 0..5 {
            assert!(wide.lower[k] <= narrow.lower[k]);
            assert!(narrow.upper[k] <= wide.upper[k]);
            assert!(narrow.lower[k] <= band.mean()[k] && band.mean()[k] <= narrow.upper[k]);
        }
    }

    #[test]
    fn band_rejects_bad_level() {
        let counts = BinnedCounts::new(grid(1.0, 1), vec![1], 1).unwrap();
        let post = fit_conjugate(&counts, IndepGammaPrior::new(1.0, 1.0).unwrap());
        assert!(credible_band(&post, &[1.0]).is_err());
        assert!(credible_band(&post, &[0.0]).is_err());
    }

    #[test]
    fn lml_empty_data_closed_form() {
        // T = 1, n = 1, no events, shape = rate = 1, uniform grid:
        // LML(N) = 1 + N ln(N/(N+1)), strictly decreasing in N.
        let prior = IndepGammaPrior::new(1.0, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for n_bins in 1..=12usize {
            let counts = BinnedCounts::new(grid(1.0, n_bins), vec![0; n_bins], 1).unwrap();
            let lml = log_marginal_likelihood(&counts, prior);
            let expect = 1.0 + n_bins as f64 * (n_bins as f64 / (n_bins as f64 + 1.0)).ln();
            assert!((lml - expect).abs() < 1e-12, "N={n_bins}: {lml} vs {expect}");
            assert!(lml < prev);
            prev = lml;
        }
        let one = BinnedCounts::new(grid(1.0, 1), vec![0], 1).unwrap();
        assert!((log_marginal_likelihood(&one, prior) - 0.306_852_819_440_054_7).abs() < 1e-12);
        let two = BinnedCounts::new(grid(1.0, 2), vec![0, 0], 1).unwrap();
        assert!((log_marginal_likelihood(&two, prior) - 0.189_069_783_783_671_2).abs() < 1e-12);
    }

    #[test]
    fn lml_single_bin_hand_value() {
        // N=1, T=1, n=1, H=3, shape=rate=1: 1 + ln Gamma(4) - 4 ln 2.
        let counts = BinnedCounts::new(grid(1.0, 1), vec![3], 1).unwrap();
        let prior = IndepGammaPrior::new(1.0, 1.0).unwrap();
        let lml = log_marginal_likelihood(&counts, prior);
        let expect = 1.0 + 6.0_f64.ln() - 4.0 * 2.0_f64.ln();
        assert!((lml - expect).abs() < 1e-12, "{lml} vs {expect}");
    }

    #[test]
    fn lml_data_const_flag() {
        let counts = BinnedCounts::new(grid(2.0, 3), vec![1, 0, 4], 5).unwrap();
        let prior = IndepGammaPrior::new(0.5, 0.5).unwrap();
        let with = log_marginal_likelihood_with(&counts, prior, true);
        let without = log_marginal_likelihood_with(&counts, prior, false);
        assert!((with - without - 2.0 * 5.0).abs() < 1e-12);
    }

    #[test]
    fn lml_invariant_under_bin_permutation() {
        // On a uniform grid the per-bin terms only depend on the multiset of counts.
        let prior = IndepGammaPrior::new(0.3, 1.7).unwrap();
        let a = BinnedCounts::new(grid(3.0, 4), vec![5, 0, 2, 9], 3).unwrap();
        let b = BinnedCounts::new(grid(3.0, 4), vec![9, 2, 5, 0], 3).unwrap();
        let la = log_marginal_likelihood(&a, prior);
        let lb = log_marginal_likelihood(&b, prior);
        assert!((la - lb).abs() < 1e-12);
    }

    #[test]
    fn sufficiency_identical_counts_identical_inference() {
        // Two distinct datasets with the same binned counts give the same
        // posterior, evidence, and bands.
        let g = grid(2.0, 2);
        let d1 = EventSeries::new(2.0, vec![vec![0.1, 0.2, 1.5]]).unwrap();
        let d2 = EventSeries::new(2.0, vec![vec![0.7, 0.9, 1.1]]).unwrap();
        let c1 = bin_events(&d1, &g).unwrap();
        let c2 = bin_events(&d2, &g).unwrap();
        assert_eq!(c1, c2);
        let prior = IndepGammaPrior::new(0.1, 0.1).unwrap();
        assert_eq!(fit_conjugate(&c1, prior), fit_conjugate(&c2, prior));
        assert_eq!(log_marginal_likelihood(&c1, prior), log_marginal_likelihood(&c2, prior));
        assert_eq!(
            credible_band(&fit_conjugate(&c1, prior), &[0.95]).unwrap(),
            credible_band(&fit_conjugate(&c2, prior), &[0.95]).unwrap()
        );
    }

    #[test]
    fn select_bins_empty_data_picks_one() {
        let data = EventSeries::new(1.0, vec![vec![]]).unwrap();
        let prior = IndepGammaPrior::new(1.0, 1.0).unwrap();
        let candidates: Vec<usize> = (1..=50).collect();
        let (best, profile) = select_bins_empirical_bayes(&data, prior, &candidates).unwrap();
        assert_eq!(best, 1);
        assert_eq!(profile.len(), 50);
        for w in profile.windows(2) {
            assert!(w[1].1 < w[0].1, "profile must decrease on empty data");
        }
    }

    #[test]
    fn select_bins_four_event_hand_construction() {
        // Four events in [0, 0.5) on T = 1, shape = rate = 1. Evidence at
        // N = 1,2,3 evaluates to 1 + lnGamma(5) - 5 ln 2, 1 + lnGamma(5) - 6 ln 1.5,
        // and 1 + ln 6 - 7 ln(4/3); the middle one wins.
        let data = EventSeries::new(1.0, vec![vec![0.1, 0.2, 0.3, 0.4]]).unwrap();
        let prior = IndepGammaPrior::new(1.0, 1.0).unwrap();
        let (best, profile) = select_bins_empirical_bayes(&data, prior, &[1, 2, 3]).unwrap();
        assert_eq!(best, 2);
        let expected = [0.712_317_798_3, 1.745_263_181_7, 0.777_984_962_4];
        for ((_, lml), want) in profile.iter().zip(expected) {
            assert!((lml - want).abs() < 1e-9, "{lml} vs {want}");
        }
    }

    #[test]
    fn select_bins_rejects_bad_candidates() {
        let data = EventSeries::new(1.0, vec![vec![0.5]]).unwrap();
        let prior = IndepGammaPrior::new(1.0, 1.0).unwrap();
        assert!(select_bins_empirical_bayes(&data, prior, &[]).is_err());
        assert!(select_bins_empirical_bayes(&data, prior, &[0, 1]).is_err());
    }

    #[test]
    fn default_candidates_capped() {
        let data = EventSeries::new(1.0, vec![vec![0.5; 300]]).unwrap();
        assert_eq!(default_bin_candidates(&data).len(), 200);
        let small = EventSeries::new(1.0, vec![vec![]]).unwrap();
        assert_eq!(default_bin_candidates(&small), vec![1]);
    }

    #[test]
    fn calibrate_beta_single_bin_closed_form() {
        // N=1: alpha n Delta = beta H, so beta = alpha n Delta / H = 1/3.
        let counts = BinnedCounts::new(grid(1.0, 1), vec![3], 1).unwrap();
        let beta = calibrate_beta(&counts, 1.0).unwrap();
        assert!(((beta - 1.0 / 3.0) / (1.0 / 3.0)).abs() < 1e-14, "{beta}");
    }

    #[test]
    fn calibrate_beta_inverse_construction() {
        // Choose H = alpha n Delta / beta0 and recover beta0.
        let alpha = 2.0;
        let beta0 = 0.5;
        let h = (alpha * 4.0 * 1.0 / beta0) as u64; // = 16
        let counts = BinnedCounts::new(grid(1.0, 1), vec![h], 4).unwrap();
        let beta = calibrate_beta(&counts, alpha).unwrap();
        assert!(((beta - beta0) / beta0).abs() < 1e-12, "{beta}");
    }

    #[test]
    fn calibrate_beta_residual_small() {
        let counts = BinnedCounts::new(grid(1.0, 3), vec![2, 0, 5], 2).unwrap();
        let alpha = 0.1;
        let beta = calibrate_beta(&counts, alpha).unwrap();
        let avg: f64 = counts
            .counts()
            .iter()
            .map(|&h| (h as f64 + alpha) / (2.0 / 3.0 + beta))
            .sum::<f64>()
            / 3.0;
        assert!((alpha / beta - avg).abs() < 1e-12, "residual {}", alpha / beta - avg);
    }

    #[test]
    fn calibrate_beta_refuses_empty_counts() {
        let counts = BinnedCounts::new(grid(1.0, 2), vec![0, 0], 3).unwrap();
        assert!(matches!(calibrate_beta(&counts, 0.5), Err(Error::Config(_))));
    }
}
