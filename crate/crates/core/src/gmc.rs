//! Gamma-Markov-chain prior and its Gibbs sampler.
//!
//! The prior couples neighbouring bin heights through latent inverse-gamma
//! variables: psi_1 ~ G(a1, b1), then zeta_k | psi_{k-1} ~ IG(az, az psi_{k-1})
//! and psi_k | zeta_k ~ G(ap, ap / zeta_k) along the bin ordering. The
//! coupling strength (az, ap), when tied to a single value, gets a prior of
//! its own and is updated by a Metropolis-within-Gibbs random walk on the
//! log scale.

use crate::conjugate::{fit_conjugate, sample_posterior, BandLevel, IndepGammaPrior, PosteriorBand};
use crate::diagnostics::quantile_type7;
use crate::dist::{sample_gamma, sample_inverse_gamma, GammaParams};
use crate::error::{Error, Result};
use crate::model::{bin_events, BinGrid, BinnedCounts, EventSeries, PiecewiseIntensity};
use crate::rng::RngStream;
use crate::special::ln_gamma;

/// Positivity floor for chain state; gamma draws at extremely diffuse shapes
/// can round to zero in f64.
const STATE_FLOOR: f64 = 1e-300;
const STATE_CEIL: f64 = 1e300;

/// Prior on the tied coupling strength alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaPrior {
    /// Density rate * exp(-rate * a).
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Uniform { upper: f64 },
    /// Standard Levy distribution, i.e. IG(1/2, 1/2).
    Levy,
}

impl AlphaPrior {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AlphaPrior::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            AlphaPrior::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
            AlphaPrior::Uniform { upper } => upper > 0.0 && upper.is_finite(),
            AlphaPrior::Levy => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid alpha prior {self:?}")))
        }
    }

    /// Log density at a > 0 (-inf outside the support).
    pub fn log_density(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            AlphaPrior::Exponential { rate } => rate.ln() - rate * a,
            AlphaPrior::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * a.ln() - rate * a
            }
            AlphaPrior::Uniform { upper } => {
                if a <= upper {
                    -upper.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            AlphaPrior::Levy => {
                // IG(1/2, 1/2): (1/2)^{1/2} / Gamma(1/2) a^{-3/2} e^{-1/(2a)}.
                -0.5 * (2.0 * std::f64::consts::PI).ln() - 1.5 * a.ln() - 0.5 / a
            }
        }
    }

    /// Draw from the prior (used to initialise chains and by joint-
    /// consistency tests).
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            AlphaPrior::Exponential { rate } => -rng.uniform_open().ln() / rate,
            AlphaPrior::Gamma { shape, rate } => {
                sample_gamma(rng, GammaParams::new(shape, rate).expect("validated"))
            }
            AlphaPrior::Uniform { upper } => rng.uniform() * upper,
            AlphaPrior::Levy => sample_inverse_gamma(rng, 0.5, 0.5).expect("valid parameters"),
        }
    }
}

/// Coupling specification for (alpha_zeta, alpha_psi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    /// alpha_zeta = alpha_psi = alpha with a prior; alpha is sampled.
    Tied { prior: AlphaPrior, init: f64 },
    /// Both fixed, no alpha update. The values may differ.
    Fixed { alpha_zeta: f64, alpha_psi: f64 },
}

/// Hyperparameters of the chain prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmcHyperparams {
    alpha1: f64,
    beta1: f64,
    coupling: Coupling,
}

impl GmcHyperparams {
    pub fn new(alpha1: f64, beta1: f64, coupling: Coupling) -> Result<Self> {
        GammaParams::new(alpha1, beta1)?;
        match coupling {
            Coupling::Tied { prior, init } => {
                prior.validate()?;
                if !(init > 0.0) || !init.is_finite() {
                    return Err(Error::Parameter(format!("alpha init must be positive, got {init}")));
                }
            }
            Coupling::Fixed { alpha_zeta, alpha_psi } => {
                GammaParams::new(alpha_zeta, alpha_psi)?;
            }
        }
        Ok(Self { alpha1, beta1, coupling })
    }

    /// Field defaults: a diffuse release at the origin and an Exp(0.1)
    /// prior on the tied coupling strength.
    pub fn default_tied() -> Self {
        Self {
            alpha1: 0.1,
            beta1: 0.1,
            coupling: Coupling::Tied { prior: AlphaPrior::Exponential { rate: 0.1 }, init: 1.0 },
        }
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    fn resolve_alphas(&self, state_alpha: Option<f64>) -> (f64, f64) {
        match self.coupling {
            Coupling::Tied { init, .. } => {
                let a = state_alpha.unwrap_or(init);
                (a, a)
            }
            Coupling::Fixed { alpha_zeta, alpha_psi } => (alpha_zeta, alpha_psi),
        }
    }
}

/// Mutable sampler state: current heights, latent variables, tied alpha,
/// random-walk step, and the owned random stream.
#[derive(Debug, Clone)]
pub struct GmcState {
    psi: Vec<f64>,
    zeta: Vec<f64>,
    alpha: Option<f64>,
    mwg_log_step: f64,
    rng: RngStream,
}

impl GmcState {
    pub fn new(psi: Vec<f64>, alpha: Option<f64>, rng: RngStream) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::Config("state needs at least one bin".into()));
        }
        for &p in &psi {
            if !(p > 0.0) {
                return Err(Error::Config(format!("state heights must be positive, got {p}")));
            }
        }
        let zeta = vec![1.0; psi.len().saturating_sub(1)];
        Ok(Self { psi, zeta, alpha, mwg_log_step: 1.0, rng })
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn mwg_log_step(&self) -> f64 {
        self.mwg_log_step
    }
}

/// Parameters of the latent full conditional
/// zeta_k | psi_k, psi_{k-1} ~ IG(az + ap, az psi_{k-1} + ap psi_k);
/// returns (shape, scale).
pub fn zeta_conditional(az: f64, ap: f64, psi_prev: f64, psi_cur: f64) -> (f64, f64) {
    (az + ap, az * psi_prev + ap * psi_cur)
}

/// Full conditional of the first height given zeta_2 and the data.
pub fn psi_first_conditional(
    alpha1: f64,
    beta1: f64,
    az: f64,
    h1: u64,
    n_delta1: f64,
    zeta2: f64,
) -> GammaParams {
    GammaParams::new(alpha1 + az + h1 as f64, beta1 + az / zeta2 + n_delta1)
        .expect("conditional parameters positive")
}

/// Full conditional of an interior height given its two neighbours' latents.
pub fn psi_interior_conditional(
    az: f64,
    ap: f64,
    h: u64,
    n_delta: f64,
    zeta_k: f64,
    zeta_next: f64,
) -> GammaParams {
    GammaParams::new(ap + az + h as f64, ap / zeta_k + az / zeta_next + n_delta)
        .expect("conditional parameters positive")
}

/// Full conditional of the last height.
pub fn psi_last_conditional(ap: f64, h: u64, n_delta: f64, zeta_last: f64) -> GammaParams {
    GammaParams::new(ap + h as f64, ap / zeta_last + n_delta)
        .expect("conditional parameters positive")
}

/// Draw one chain realisation from the prior at explicit coupling values.
/// Returns the heights and the latent variables.
pub fn sample_gmc_chain(
    rng: &mut RngStream,
    alpha1: f64,
    beta1: f64,
    az: f64,
    ap: f64,
    n_bins: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut psi = Vec::with_capacity(n_bins);
    let mut zeta = Vec::with_capacity(n_bins.saturating_sub(1));
    let first = sample_gamma(rng, GammaParams::new(alpha1, beta1).expect("validated"));
    psi.push(first.max(STATE_FLOOR));
    for k in 1..n_bins {
        let z = sample_inverse_gamma(rng, az, az * psi[k - 1])
            .expect("valid parameters")
            .clamp(STATE_FLOOR, STATE_CEIL);
        zeta.push(z);
        let p = sample_gamma(rng, GammaParams::new(ap, ap / z).expect("validated"));
        psi.push(p.max(STATE_FLOOR));
    }
    (psi, zeta)
}

/// Draw a step intensity from the GMC prior on the given grid. Under tied
/// coupling the strength is first drawn from its prior, so the draw comes
/// from the full joint prior.
pub fn sample_gmc_prior(
    rng: &mut RngStream,
    hp: &GmcHyperparams,
    grid: &BinGrid,
) -> Result<(PiecewiseIntensity, Vec<f64>)> {
    let (az, ap) = match hp.coupling {
        Coupling::Tied { prior, .. } => {
            let a = prior.sample(rng).max(STATE_FLOOR);
            (a, a)
        }
        Coupling::Fixed { alpha_zeta, alpha_psi } => (alpha_zeta, alpha_psi),
    };
    let (psi, zeta) = sample_gmc_chain(rng, hp.alpha1, hp.beta1, az, ap, grid.n_bins());
    Ok((PiecewiseIntensity::new(grid.clone(), psi)?, zeta))
}

/// One full Gibbs sweep: all latents zeta_2..zeta_N from their conditionals,
/// then psi_1..psi_N left to right. With a single bin the model collapses to
/// the conjugate update G(a1 + H_1, b1 + n Delta_1).
pub fn gibbs_sweep(
    state: &mut GmcState,
    counts: &BinnedCounts,
    hp: &GmcHyperparams,
) -> Result<()> {
    let n_bins = counts.grid().n_bins();
    if state.psi.len() != n_bins {
        return Err(Error::Config(format!(
            "state has {} bins but counts have {n_bins}",
            state.psi.len()
        )));
    }
    let n = counts.n_replicates() as f64;
    let h = counts.counts();
    if n_bins == 1 {
        let params = GammaParams::new(
            hp.alpha1 + h[0] as f64,
            hp.beta1 + n * counts.grid().width(0),
        )?;
        state.psi[0] = sample_gamma(&mut state.rng, params).max(STATE_FLOOR);
        return Ok(());
    }
    let (az, ap) = hp.resolve_alphas(state.alpha);

    for k in 1..n_bins {
        let (shape, scale) = zeta_conditional(az, ap, state.psi[k - 1], state.psi[k]);
        state.zeta[k - 1] = sample_inverse_gamma(&mut state.rng, shape, scale)?
            .clamp(STATE_FLOOR, STATE_CEIL);
    }

    let first = psi_first_conditional(
        hp.alpha1,
        hp.beta1,
        az,
        h[0],
        n * counts.grid().width(0),
        state.zeta[0],
    );
    state.psi[0] = sample_gamma(&mut state.rng, first).max(STATE_FLOOR);
    for k in 1..n_bins - 1 {
        let params = psi_interior_conditional(
            az,
            ap,
            h[k],
            n * counts.grid().width(k),
            state.zeta[k - 1],
            state.zeta[k],
        );
        state.psi[k] = sample_gamma(&mut state.rng, params).max(STATE_FLOOR);
    }
    let last = psi_last_conditional(
        ap,
        h[n_bins - 1],
        n * counts.grid().width(n_bins - 1),
        state.zeta[n_bins - 2],
    );
    state.psi[n_bins - 1] = sample_gamma(&mut state.rng, last).max(STATE_FLOOR);
    Ok(())
}

/// Unnormalised log full conditional of log(alpha) given the chain state.
///
/// With a = exp(a_tilde) and the coupling tied, this is
/// a_tilde + log pi(a) + 2(N-1)(a ln a - ln Gamma(a))
///         + a * sum_k [ln psi_{k-1} + ln psi_k - 2 ln zeta_k - (psi_{k-1}+psi_k)/zeta_k].
pub fn log_alpha_conditional(
    alpha_tilde: f64,
    psi: &[f64],
    zeta: &[f64],
    prior: &AlphaPrior,
) -> f64 {
    debug_assert_eq!(zeta.len() + 1, psi.len());
    let a = alpha_tilde.exp();
    let mut coupling_sum = 0.0;
    for (k, &z) in zeta.iter().enumerate() {
        let prev = psi[k];
        let cur = psi[k + 1];
        coupling_sum += prev.ln() + cur.ln() - 2.0 * z.ln() - (prev + cur) / z;
    }
    let n_links = zeta.len() as f64;
    alpha_tilde
        + prior.log_density(a)
        + 2.0 * n_links * (a * a.ln() - ln_gamma(a))
        + a * coupling_sum
}

/// Metropolis-within-Gibbs update of the tied coupling strength on the log
/// scale with a Gaussian random-walk proposal. Returns whether the proposal
/// was accepted. Proposals with a non-finite target are rejected.
pub fn mwg_alpha_update(state: &mut GmcState, hp: &GmcHyperparams) -> Result<bool> {
    let prior = match hp.coupling {
        Coupling::Tied { prior, .. } => prior,
        Coupling::Fixed { .. } => {
            return Err(Error::Config("alpha update requires tied coupling".into()))
        }
    };
    if state.psi.len() < 2 {
        return Err(Error::Config("alpha update needs at least two bins".into()));
    }
    let alpha = state.alpha.ok_or_else(|| Error::Config("state carries no alpha".into()))?;
    let current = alpha.ln();
    let proposal = current + state.mwg_log_step * state.rng.standard_normal();
    let log_ratio = log_alpha_conditional(proposal, &state.psi, &state.zeta, &prior)
        - log_alpha_conditional(current, &state.psi, &state.zeta, &prior);
    let accept = if !log_ratio.is_finite() {
        false
    } else if log_ratio >= 0.0 {
        true
    } else {
        state.rng.uniform_open().ln() < log_ratio
    };
    if accept {
        state.alpha = Some(proposal.exp().max(STATE_FLOOR));
    }
    Ok(accept)
}

/// Run options for the Gibbs sampler.
#[derive(Debug, Clone)]
pub struct GmcOptions {
    pub iterations: usize,
    pub burn_in: usize,
    /// Optional explicit initial heights; defaults to one draw from the
    /// conjugate posterior under a diffuse G(0.1, 0.1) prior.
    pub init: Option<PiecewiseIntensity>,
    /// Adapt the random-walk step during burn-in (Robbins-Monro toward the
    /// target acceptance rate), frozen afterwards.
    pub adapt_step: bool,
}

impl GmcOptions {
    /// 30000 iterations with the first half discarded.
    pub fn standard() -> Self {
        Self { iterations: 30_000, burn_in: 15_000, init: None, adapt_step: true }
    }

    pub fn with_iterations(iterations: usize, burn_in: usize) -> Self {
        Self { iterations, burn_in, init: None, adapt_step: true }
    }
}

/// Acceptance-rate target for the step adaptation, inside the 25-50% window
/// the update is tuned for.
const MWG_TARGET_ACCEPTANCE: f64 = 0.35;

/// Stored sampler output: kept draws and Metropolis bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    n_bins: usize,
    kept_psi: Vec<f64>,
    kept_alpha: Vec<f64>,
    iterations: usize,
    burn_in: usize,
    accepted_post: usize,
    attempts_post: usize,
    accepted_total: usize,
    attempts_total: usize,
    final_step: f64,
}

impl ChainOutput {
    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn kept(&self) -> usize {
        self.iterations - self.burn_in
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    /// Kept draw i as a row of bin heights.
    pub fn psi_row(&self, i: usize) -> &[f64] {
        &self.kept_psi[i * self.n_bins..(i + 1) * self.n_bins]
    }

    /// Kept trace of one bin.
    pub fn bin_series(&self, k: usize) -> Vec<f64> {
        (0..self.kept()).map(|i| self.kept_psi[i * self.n_bins + k]).collect()
    }

    /// Kept alpha trace (empty when the coupling is fixed).
    pub fn alpha_series(&self) -> &[f64] {
        &self.kept_alpha
    }

    /// Post-burn-in Metropolis acceptance rate, if alpha was updated.
    pub fn mwg_acceptance_rate(&self) -> Option<f64> {
        if self.attempts_post == 0 {
            None
        } else {
            Some(self.accepted_post as f64 / self.attempts_post as f64)
        }
    }

    pub fn mwg_acceptance_rate_total(&self) -> Option<f64> {
        if self.attempts_total == 0 {
            None
        } else {
            Some(self.accepted_total as f64 / self.attempts_total as f64)
        }
    }

    /// Random-walk standard deviation after adaptation froze.
    pub fn final_step(&self) -> f64 {
        self.final_step
    }

    /// Pointwise posterior mean of the kept draws.
    pub fn mean_heights(&self) -> Vec<f64> {
        let kept = self.kept() as f64;
        let mut mean = vec![0.0; self.n_bins];
        for i in 0..self.kept() {
            for (m, &x) in mean.iter_mut().zip(self.psi_row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= kept);
        mean
    }
}

/// Bin the data once and run the sampler.
pub fn run_gmc(
    data: &EventSeries,
    grid: &BinGrid,
    hp: &GmcHyperparams,
    opts: &GmcOptions,
    rng: RngStream,
) -> Result<ChainOutput> {
    let counts = bin_events(data, grid)?;
    run_gmc_counts(&counts, hp, opts, rng)
}

/// Run the sampler on pre-binned counts. Alternates a Gibbs sweep with
/// (under tied coupling, N >= 2) a Metropolis update of alpha; stores the
/// post-burn-in draws.
pub fn run_gmc_counts(
    counts: &BinnedCounts,
    hp: &GmcHyperparams,
    opts: &GmcOptions,
    rng: RngStream,
) -> Result<ChainOutput> {
    if opts.iterations == 0 || opts.burn_in >= opts.iterations {
        return Err(Error::Config(format!(
            "need iterations > burn_in >= 0, got {} and {}",
            opts.iterations, opts.burn_in
        )));
    }
    let n_bins = counts.grid().n_bins();
    let mut rng = rng;
    let init = match &opts.init {
        Some(intensity) => {
            if intensity.grid() != counts.grid() {
                return Err(Error::Config("initial intensity is on a different grid".into()));
            }
            intensity.heights().iter().map(|&p| p.max(STATE_FLOOR)).collect()
        }
        None => {
            let diffuse = IndepGammaPrior::new(0.1, 0.1).expect("valid");
            let draw = sample_posterior(&fit_conjugate(counts, diffuse), &mut rng);
            draw.heights().iter().map(|&p| p.max(STATE_FLOOR)).collect()
        }
    };
    let alpha = match hp.coupling {
        Coupling::Tied { init, .. } => Some(init),
        Coupling::Fixed { .. } => None,
    };
    let mut state = GmcState::new(init, alpha, rng)?;

    let kept = opts.iterations - opts.burn_in;
    let mut out = ChainOutput {
        n_bins,
        kept_psi: Vec::with_capacity(kept * n_bins),
        kept_alpha: Vec::with_capacity(if state.alpha.is_some() { kept } else { 0 }),
        iterations: opts.iterations,
        burn_in: opts.burn_in,
        accepted_post: 0,
        attempts_post: 0,
        accepted_total: 0,
        attempts_total: 0,
        final_step: state.mwg_log_step,
    };

    let update_alpha = matches!(hp.coupling, Coupling::Tied { .. }) && n_bins >= 2;
    for t in 0..opts.iterations {
        gibbs_sweep(&mut state, counts, hp)?;
        if update_alpha {
            let accepted = mwg_alpha_update(&mut state, hp)?;
            out.attempts_total += 1;
            out.accepted_total += accepted as usize;
            if t < opts.burn_in {
                if opts.adapt_step {
                    // Robbins-Monro on the log step toward the target rate.
                    let gain = 1.0 / (out.attempts_total as f64).powf(0.6);
                    let direction = accepted as u8 as f64 - MWG_TARGET_ACCEPTANCE;
                    state.mwg_log_step = (state.mwg_log_step.ln() + gain * direction)
                        .exp()
                        .clamp(1e-3, 1e3);
                }
            } else {
                out.attempts_post += 1;
                out.accepted_post += accepted as usize;
            }
        }
        if t >= opts.burn_in {
            out.kept_psi.extend_from_slice(&state.psi);
            if let Some(a) = state.alpha {
                if update_alpha || n_bins >= 2 {
                    out.kept_alpha.push(a);
                }
            }
        }
    }
    out.final_step = state.mwg_log_step;
    Ok(out)
}

/// Rule-of-thumb bin count: nearest integer to total/4, capped (default 50),
/// floored at 1.
pub fn rule_of_thumb_bins(data: &EventSeries) -> usize {
    rule_of_thumb_from_total(data.total_events() as u64, 50)
}

/// Rule-of-thumb with an explicit cap, for callers that want more bins.
pub fn rule_of_thumb_from_total(total_events: u64, cap: usize) -> usize {
    let rounded = (total_events as f64 / 4.0).round() as usize;
    rounded.min(cap).max(1)
}

/// Pointwise mean and type-7 empirical quantile bands of the kept draws.
pub fn summarize_chain(
    out: &ChainOutput,
    grid: &BinGrid,
    levels: &[f64],
) -> Result<PosteriorBand> {
    if grid.n_bins() != out.n_bins() {
        return Err(Error::Config("summary grid does not match the chain".into()));
    }
    if out.kept() == 0 {
        return Err(Error::Config("no kept samples to summarise".into()));
    }
    for &level in levels {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Parameter(format!("credibility level must be in (0,1), got {level}")));
        }
    }
    let mean = out.mean_heights();
    let mut lowers = vec![Vec::with_capacity(out.n_bins()); levels.len()];
    let mut uppers = vec![Vec::with_capacity(out.n_bins()); levels.len()];
    for k in 0..out.n_bins() {
        let mut series = out.bin_series(k);
        series.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, &level) in levels.iter().enumerate() {
            lowers[i].push(quantile_type7(&series, (1.0 - level) / 2.0));
            uppers[i].push(quantile_type7(&series, (1.0 + level) / 2.0));
        }
    }
    let bands = levels
        .iter()
        .zip(lowers)
        .zip(uppers)
        .map(|((&level, lower), upper)| BandLevel { level, lower, upper })
        .collect();
    PosteriorBand::new(grid.clone(), mean, bands)
}
