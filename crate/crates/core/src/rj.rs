//! Reversible-jump sampler over the number of bins under the independent
//! gamma prior. The per-model evidence is available in closed form, so the
//! model score R(N) = log evidence + log prior mass is computed exactly and
//! memoised; the sampler walks the model index with a +-1 proposal.

use crate::conjugate::{
    fit_conjugate, log_marginal_likelihood, sample_posterior, IndepGammaPosterior,
    IndepGammaPrior,
};
use crate::error::{Error, Result};
use crate::gmc::rule_of_thumb_bins;
use crate::model::{bin_events, BinGrid, EventSeries, PiecewiseIntensity};
use crate::rng::RngStream;
use crate::special::ln_gamma;

/// Prior on the model index N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelIndexPrior {
    /// DiscreteUniform over 1..=n_max.
    Uniform { n_max: usize },
    /// Poisson(mean) restricted to {1, 2, ...}, truncated at n_max and
    /// renormalised.
    ShiftedPoisson { mean: f64, n_max: usize },
}

impl ModelIndexPrior {
    pub fn n_max(&self) -> usize {
        match *self {
            ModelIndexPrior::Uniform { n_max } => n_max,
            ModelIndexPrior::ShiftedPoisson { n_max, .. } => n_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max() == 0 {
            return Err(Error::Config("model prior needs n_max >= 1".into()));
        }
        if let ModelIndexPrior::ShiftedPoisson { mean, .. } = *self {
            if !(mean > 0.0) || !mean.is_finite() {
                return Err(Error::Parameter(format!("Poisson mean must be positive, got {mean}")));
            }
        }
        Ok(())
    }

    /// Log prior mass of model n, normalised over the truncated support.
    pub fn log_mass(&self, n: usize) -> Result<f64> {
        if n < 1 || n > self.n_max() {
            return Err(Error::Config(format!("model index {n} outside 1..={}", self.n_max())));
        }
        match *self {
            ModelIndexPrior::Uniform { n_max } => Ok(-(n_max as f64).ln()),
            ModelIndexPrior::ShiftedPoisson { mean, n_max } => {
                let raw = |k: usize| k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0);
                let raws: Vec<f64> = (1..=n_max).map(raw).collect();
                Ok(raw(n) - log_sum_exp(&raws))
            }
        }
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Reversible-jump run configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RjConfig {
    /// Up/down proposal probability, in (0, 1/2).
    pub eta: f64,
    /// Independent gamma prior on the heights within each model.
    pub prior: IndepGammaPrior,
    pub model_prior: ModelIndexPrior,
    pub iterations: usize,
    pub burn_in: usize,
    /// Also draw the step intensity from the within-model posterior at each
    /// kept iteration.
    pub draw_heights: bool,
    /// Initial model index; defaults to the rule-of-thumb bin count capped
    /// at n_max.
    pub init: Option<usize>,
}

impl RjConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(Error::Parameter(format!("eta must lie in (0, 1/2), got {}", self.eta)));
        }
        self.model_prior.validate()?;
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "need iterations > burn_in >= 0, got {} and {}",
                self.iterations, self.burn_in
            )));
        }
        if let Some(init) = self.init {
            if init < 1 || init > self.model_prior.n_max() {
                return Err(Error::Config(format!(
                    "initial model index {init} outside 1..={}",
                    self.model_prior.n_max()
                )));
            }
        }
        Ok(())
    }
}

/// Memoising evaluator of R(N) = log evidence + log prior mass; each model's
/// binning and evidence are computed at most once per run.
pub struct ModelScores<'a> {
    data: &'a EventSeries,
    prior: IndepGammaPrior,
    model_prior: ModelIndexPrior,
    cache: Vec<Option<f64>>,
    posterior_cache: Vec<Option<IndepGammaPosterior>>,
}

impl<'a> ModelScores<'a> {
    pub fn new(data: &'a EventSeries, prior: IndepGammaPrior, model_prior: ModelIndexPrior) -> Self {
        let n_max = model_prior.n_max();
        Self {
            data,
            prior,
            model_prior,
            cache: vec![None; n_max],
            posterior_cache: vec![None; n_max],
        }
    }

    pub fn score(&mut self, n: usize) -> Result<f64> {
        if n < 1 || n > self.model_prior.n_max() {
            return Err(Error::Config(format!(
                "model index {n} outside 1..={}",
                self.model_prior.n_max()
            )));
        }
        if let Some(score) = self.cache[n - 1] {
            return Ok(score);
        }
        let counts = bin_events(self.data, &BinGrid::uniform(self.data.horizon(), n)?)?;
        let score = log_marginal_likelihood(&counts, self.prior) + self.model_prior.log_mass(n)?;
        self.cache[n - 1] = Some(score);
        Ok(score)
    }

    fn posterior(&mut self, n: usize) -> Result<IndepGammaPosterior> {
        if self.posterior_cache[n - 1].is_none() {
            let counts = bin_events(self.data, &BinGrid::uniform(self.data.horizon(), n)?)?;
            self.posterior_cache[n - 1] = Some(fit_conjugate(&counts, self.prior));
        }
        Ok(self.posterior_cache[n - 1].clone().expect("just inserted"))
    }

    /// R(N) values computed so far, as (N, score) pairs.
    pub fn computed(&self) -> Vec<(usize, f64)> {
        self.cache
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|v| (i + 1, v)))
            .collect()
    }
}

/// One-shot R(N) without memoisation.
pub fn log_model_score(
    data: &EventSeries,
    n: usize,
    prior: IndepGammaPrior,
    model_prior: ModelIndexPrior,
) -> Result<f64> {
    ModelScores::new(data, prior, model_prior).score(n)
}

/// log q(from | to) - log q(to | from) for the +-1 proposal with boundary
/// mirroring: at index 1 (and at n_max) the walker stays or steps inward
/// with probability 1/2 each, interior moves carry probability eta each way.
pub fn proposal_log_ratio(from: usize, to: usize, eta: f64, n_max: usize) -> Result<f64> {
    if from < 1 || to < 1 || from > n_max || to > n_max {
        return Err(Error::Config(format!("indices {from} -> {to} outside 1..={n_max}")));
    }
    if from == to {
        return Ok(0.0);
    }
    if from.abs_diff(to) != 1 {
        return Err(Error::Config(format!("non-adjacent proposal {from} -> {to}")));
    }
    // Probability of proposing the adjacent index from a.
    let q = |a: usize| -> f64 {
        if a == 1 || a == n_max {
            0.5
        } else {
            eta
        }
    };
    Ok(q(to, from).ln() - q(from, to).ln())
}

/// Draw the proposal index from q(. | current).
fn propose(rng: &mut RngStream, current: usize, n_max: usize, eta: f64) -> usize {
    if n_max == 1 {
        return 1;
    }
    let u = rng.uniform();
    if current == 1 {
        if u < 0.5 {
            1
        } else {
            2
        }
    } else if current == n_max {
        if u < 0.5 {
            n_max
        } else {
            n_max - 1
        }
    } else if u < eta {
        current - 1
    } else if u < 2.0 * eta {
        current + 1
    } else {
        current
    }
}

/// One accept/reject step of the model-index walk.
fn walk_step(
    rng: &mut RngStream,
    current: usize,
    n_max: usize,
    eta: f64,
    score: &mut impl FnMut(usize) -> Result<f64>,
) -> Result<usize> {
    let proposal = propose(rng, current, n_max, eta);
    if proposal == current {
        return Ok(current);
    }
    let log_accept = score(proposal)? - score(current)?
        + proposal_log_ratio(current, proposal, eta, n_max)?;
    let accept = if log_accept >= 0.0 {
        true
    } else {
        rng.uniform_open().ln() < log_accept
    };
    Ok(if accept { proposal } else { current })
}

/// Run the index walk against a fixed table of scores (one per model,
/// index 0 holding R(1)). Returns the full chain including the initial
/// state. This is the same stepping code `run_rj` uses.
pub fn run_index_walk_on_scores(
    scores: &[f64],
    eta: f64,
    init: usize,
    iterations: usize,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    let n_max = scores.len();
    if init < 1 || init > n_max {
        return Err(Error::Config(format!("initial index {init} outside 1..={n_max}")));
    }
    let mut chain = Vec::with_capacity(iterations + 1);
    let mut current = init;
    chain.push(current);
    let mut score = |n: usize| -> Result<f64> { Ok(scores[n - 1]) };
    for _ in 0..iterations {
        current = walk_step(rng, current, n_max, eta, &mut score)?;
        chain.push(current);
    }
    Ok(chain)
}

/// Output of a reversible-jump run.
#[derive(Debug, Clone, PartialEq)]
pub struct RjOutput {
    /// Post-burn-in model-index chain.
    pub chain: Vec<usize>,
    /// Visit counts per model over the kept chain; they sum to the kept
    /// iteration count.
    pub frequencies: Vec<(usize, usize)>,
    /// Within-model posterior draws, when requested.
    pub heights: Option<Vec<PiecewiseIntensity>>,
    /// The R(N) values that were actually computed.
    pub scores: Vec<(usize, f64)>,
}

impl RjOutput {
    /// Kept-chain relative frequencies over 1..=n_max.
    pub fn relative_frequencies(&self) -> Vec<(usize, f64)> {
        let total: usize = self.frequencies.iter().map(|(_, c)| c).sum();
        self.frequencies
            .iter()
            .map(|&(n, c)| (n, c as f64 / total as f64))
            .collect()
    }
}

/// Run the reversible-jump sampler over the model index.
pub fn run_rj(data: &EventSeries, cfg: &RjConfig, rng: RngStream) -> Result<RjOutput> {
    cfg.validate()?;
    let n_max = cfg.model_prior.n_max();
    let mut rng = rng;
    let mut scores = ModelScores::new(data, cfg.prior, cfg.model_prior);
    let init = cfg.init.unwrap_or_else(|| rule_of_thumb_bins(data).min(n_max));

    let kept = cfg.iterations - cfg.burn_in;
    let mut chain = Vec::with_capacity(kept);
    let mut counts = vec![0usize; n_max];
    let mut heights = if cfg.draw_heights { Some(Vec::with_capacity(kept)) } else { None };

    let mut current = init;
    for t in 0..cfg.iterations {
        current = walk_step(&mut rng, current, n_max, cfg.eta, &mut |n| scores.score(n))?;
        if t >= cfg.burn_in {
            chain.push(current);
            counts[current - 1] += 1;
            if let Some(hs) = heights.as_mut() {
                let posterior = scores.posterior(current)?;
                hs.push(sample_posterior(&posterior, &mut rng));
            }
        }
    }
    Ok(RjOutput {
        chain,
        frequencies: (1..=n_max).map(|n| (n, counts[n - 1])).collect(),
        heights,
        scores: scores.computed(),
    })
}

/// Exact posterior over the model index by enumeration, the oracle the
/// sampler is checked against: softmax of R(N) over 1..=n_max.
pub fn exact_model_posterior(
    data: &EventSeries,
    prior: IndepGammaPrior,
    model_prior: ModelIndexPrior,
) -> Result<Vec<(usize, f64)>> {
    let n_max = model_prior.n_max();
    let mut scores = ModelScores::new(data, prior, model_prior);
    let values: Vec<f64> = (1..=n_max).map(|n| scores.score(n)).collect::<Result<_>>()?;
    let norm = log_sum_exp(&values);
    Ok((1..=n_max).map(|n| (n, (values[n - 1] - norm).exp())).collect())
}
