//! Synthetic data: benchmark intensity functions, a thinning-based Poisson
//! process simulator, and the consistency/contraction experiment harness.

use crate::conjugate::{fit_conjugate, posterior_mean, sample_posterior, IndepGammaPrior};
use crate::error::{Error, Result};
use crate::model::{bin_events, l2_distance, BinGrid, EventSeries, PiecewiseIntensity};
use crate::quad::composite_gl10;
use crate::rng::RngStream;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// Normal density with mean mu and standard deviation sigma.
fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Benchmark intensity functions with known horizons and upper bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedIntensity {
    /// 2 e^{-x/5} (5 + 4 cos x) on [0, 10]: decaying envelope with a slope
    /// of changing sign.
    OscillatingExponential,
    /// Half a unit Gaussian plus five narrow bumps on [0, 6].
    BartSimpson,
    /// 2 + 0.2 sin(30x) + 1_{[0.7, 1]}(x) on [0, 1]: oscillation plus a jump.
    StepSine,
    Constant { level: f64, horizon: f64 },
    Linear { intercept: f64, slope: f64, horizon: f64 },
    /// Arbitrary step function.
    Step(PiecewiseIntensity),
}

impl NamedIntensity {
    pub fn constant(level: f64, horizon: f64) -> Result<Self> {
        if !(level >= 0.0) || !level.is_finite() {
            return Err(Error::Parameter(format!("constant level must be >= 0, got {level}")));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
        }
        Ok(NamedIntensity::Constant { level, horizon })
    }

    pub fn linear(intercept: f64, slope: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
        }
        if !(intercept >= 0.0) || !(intercept + slope * horizon >= 0.0) {
            return Err(Error::Parameter(
                "linear intensity must stay nonnegative on its window".into(),
            ));
        }
        Ok(NamedIntensity::Linear { intercept, slope, horizon })
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            NamedIntensity::OscillatingExponential => {
                2.0 * (-x / 5.0).exp() * (5.0 + 4.0 * x.cos())
            }
            NamedIntensity::BartSimpson => {
                let mut v = 0.5 * normal_pdf(x, 3.0, 1.0);
                for j in 0..5 {
                    v += 0.1 * normal_pdf(x, j as f64 / 2.0 + 2.0, 0.1);
                }
                v
            }
            NamedIntensity::StepSine => {
                2.0 + 0.2 * (30.0 * x).sin() + if (0.7..=1.0).contains(&x) { 1.0 } else { 0.0 }
            }
            NamedIntensity::Constant { level, .. } => *level,
            NamedIntensity::Linear { intercept, slope, .. } => intercept + slope * x,
            NamedIntensity::Step(step) => step.evaluate(x),
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            NamedIntensity::OscillatingExponential => 10.0,
            NamedIntensity::BartSimpson => 6.0,
            NamedIntensity::StepSine => 1.0,
            NamedIntensity::Constant { horizon, .. } => *horizon,
            NamedIntensity::Linear { horizon, .. } => *horizon,
            NamedIntensity::Step(step) => step.grid().horizon(),
        }
    }

    /// Finite upper bound for the thinning simulator; at least sup lambda.
    pub fn lambda_max(&self) -> f64 {
        match self {
            // Value at x = 0; the envelope decays from there.
            NamedIntensity::OscillatingExponential => 18.0,
            // Peak at x = 3 is ~0.5984.
            NamedIntensity::BartSimpson => 0.61,
            // 2 + 0.2 + 1, attained where the sine peaks inside the step.
            NamedIntensity::StepSine => 3.2,
            NamedIntensity::Constant { level, .. } => *level,
            NamedIntensity::Linear { intercept, slope, horizon } => {
                intercept.max(intercept + slope * horizon)
            }
            NamedIntensity::Step(step) => {
                step.heights().iter().cloned().fold(0.0, f64::max)
            }
        }
    }

    /// Integral over the window (exact for steps, composite quadrature
    /// otherwise).
    pub fn integral(&self) -> f64 {
        match self {
            NamedIntensity::Step(step) => step.integral(),
            NamedIntensity::Constant { level, horizon } => level * horizon,
            NamedIntensity::Linear { intercept, slope, horizon } => {
                (intercept + 0.5 * slope * horizon) * horizon
            }
            _ => composite_gl10(|x| self.evaluate(x), 0.0, self.horizon(), 400),
        }
    }

    pub fn name(&self) -> String {
        match self {
            NamedIntensity::OscillatingExponential => "oscillating_exponential".into(),
            NamedIntensity::BartSimpson => "bart_simpson".into(),
            NamedIntensity::StepSine => "step_sine".into(),
            NamedIntensity::Constant { level, horizon } => format!("constant:{level}:{horizon}"),
            NamedIntensity::Linear { intercept, slope, horizon } => {
                format!("linear:{intercept}:{slope}:{horizon}")
            }
            NamedIntensity::Step(_) => "custom_step".into(),
        }
    }

    /// Parse a CLI intensity spec: a bare name or `constant:level:horizon` /
    /// `linear:intercept:slope:horizon`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || Error::Config(format!("unknown intensity spec '{spec}'"));
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{s}' in '{spec}'")))
        };
        match parts.as_slice() {
            ["oscillating_exponential"] => Ok(NamedIntensity::OscillatingExponential),
            ["bart_simpson"] => Ok(NamedIntensity::BartSimpson),
            ["step_sine"] => Ok(NamedIntensity::StepSine),
            ["constant", level, horizon] => NamedIntensity::constant(num(level)?, num(horizon)?),
            ["linear", intercept, slope, horizon] => {
                NamedIntensity::linear(num(intercept)?, num(slope)?, num(horizon)?)
            }
            _ => Err(bad()),
        }
    }
}

/// Uniformly placed candidate points of a homogeneous Poisson(rate) process
/// on [0, horizon], sorted.
pub fn homogeneous_candidates(rng: &mut RngStream, rate: f64, horizon: f64) -> Vec<f64> {
    let mean = rate * horizon;
    if mean <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
    let mut points: Vec<f64> = (0..count).map(|_| rng.random::<f64>() * horizon).collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points
}

/// Split candidates into accepted and rejected by the thinning probability
/// lambda(x)/lambda_max. The two halves partition the input exactly.
pub fn thin_candidates(
    rng: &mut RngStream,
    candidates: &[f64],
    intensity: &NamedIntensity,
    lambda_max: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for &x in candidates {
        if rng.uniform() * lambda_max < intensity.evaluate(x) {
            kept.push(x);
        } else {
            rejected.push(x);
        }
    }
    (kept, rejected)
}

/// Simulate n independent replicates of the process by thinning a
/// homogeneous Poisson(lambda_max) proposal.
pub fn simulate_poisson(
    rng: &mut RngStream,
    intensity: &NamedIntensity,
    n_replicates: usize,
) -> Result<EventSeries> {
    if n_replicates == 0 {
        return Err(Error::Config("need at least one replicate".into()));
    }
    let lambda_max = intensity.lambda_max();
    if !(lambda_max >= 0.0) || !lambda_max.is_finite() {
        return Err(Error::Parameter(format!("lambda_max must be finite, got {lambda_max}")));
    }
    let mut replicates = Vec::with_capacity(n_replicates);
    for _ in 0..n_replicates {
        let candidates = homogeneous_candidates(rng, lambda_max, intensity.horizon());
        let (kept, _) = thin_candidates(rng, &candidates, intensity, lambda_max);
        replicates.push(kept);
    }
    EventSeries::new(intensity.horizon(), replicates)
}

/// Bin-count schedule for the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinRule {
    /// N = round(c * n^{1/(2h+1)}) for regularity h.
    RateScaled { h: f64, c: f64 },
    Fixed(usize),
}

impl BinRule {
    pub fn bins_for(&self, n: usize) -> usize {
        match *self {
            BinRule::RateScaled { h, c } => {
                ((c * (n as f64).powf(1.0 / (2.0 * h + 1.0))).round() as usize).max(1)
            }
            BinRule::Fixed(n_bins) => n_bins.max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub n: usize,
    pub n_bins: usize,
    /// Mean over replications of the squared L2 distance between the
    /// posterior-mean fit and the truth.
    pub mean_sq_error: f64,
}

/// Monte Carlo mean squared L2 error of the conjugate posterior mean across
/// sample sizes. Replications use independent sub-streams, so the result
/// only depends on the seed.
pub fn mse_experiment(
    intensity: &NamedIntensity,
    sample_sizes: &[usize],
    rule: BinRule,
    replications: usize,
    prior: IndepGammaPrior,
    rng: &RngStream,
) -> Result<Vec<MseRow>> {
    if replications == 0 {
        return Err(Error::Config("need at least one replication".into()));
    }
    let mut rows = Vec::with_capacity(sample_sizes.len());
    for (i, &n) in sample_sizes.iter().enumerate() {
        let n_bins = rule.bins_for(n);
        let grid = BinGrid::uniform(intensity.horizon(), n_bins)?;
        let mut total = 0.0;
        for r in 0..replications {
            let mut stream = rng.substream((i as u64) << 32 | r as u64);
            let data = simulate_poisson(&mut stream, intensity, n)?;
            let counts = bin_events(&data, &grid)?;
            let fit = posterior_mean(&fit_conjugate(&counts, prior));
            let d = l2_distance(&fit, |x| intensity.evaluate(x));
            total += d * d;
        }
        rows.push(MseRow { n, n_bins, mean_sq_error: total / replications as f64 });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionRow {
    pub n: usize,
    pub n_bins: usize,
    pub epsilon: f64,
    /// Estimated posterior mass of {dist(lambda, truth) >= m * epsilon}.
    pub mass_outside: f64,
}

/// Posterior mass outside a shrinking L2 ball around the truth, estimated by
/// sampling the conjugate posterior: epsilon_n = n^{-h/(2h+1)} and
/// N = round(c n^{1/(2h+1)}).
pub fn contraction_experiment(
    intensity: &NamedIntensity,
    sample_sizes: &[usize],
    h: f64,
    c: f64,
    m: f64,
    posterior_draws: usize,
    prior: IndepGammaPrior,
    rng: &RngStream,
) -> Result<Vec<ContractionRow>> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Parameter(format!("regularity h must be in (0,1], got {h}")));
    }
    if posterior_draws == 0 {
        return Err(Error::Config("need at least one posterior draw".into()));
    }
    let rule = BinRule::RateScaled { h, c };
    let mut rows = Vec::with_capacity(sample_sizes.len());
    for (i, &n) in sample_sizes.iter().enumerate() {
        let n_bins = rule.bins_for(n);
        let epsilon = (n as f64).powf(-h / (2.0 * h + 1.0));
        let grid = BinGrid::uniform(intensity.horizon(), n_bins)?;
        let mut stream = rng.substream(0xC0_0000 | i as u64);
        let data = simulate_poisson(&mut stream, intensity, n)?;
        let post = fit_conjugate(&bin_events(&data, &grid)?, prior);
        let mut outside = 0usize;
        for _ in 0..posterior_draws {
            let draw = sample_posterior(&post, &mut stream);
            if l2_distance(&draw, |x| intensity.evaluate(x)) >= m * epsilon {
                outside += 1;
            }
        }
        rows.push(ContractionRow {
            n,
            n_bins,
            epsilon,
            mass_outside: outside as f64 / posterior_draws as f64,
        });
    }
    Ok(rows)
}

/// L2-best step approximation of an intensity on a grid: bin averages by
/// quadrature. This is the large-n limit of the posterior mean, so it serves
/// as the bias oracle for the fixed-N experiment.
pub fn best_step_approximation(
    intensity: &NamedIntensity,
    grid: &BinGrid,
) -> Result<PiecewiseIntensity> {
    let heights = (0..grid.n_bins())
        .map(|k| {
            let lo = grid.edges()[k];
            let hi = grid.edges()[k + 1];
            (composite_gl10(|x| intensity.evaluate(x), lo, hi, 64) / (hi - lo)).max(0.0)
        })
        .collect();
    PiecewiseIntensity::new(grid.clone(), heights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_named() -> Vec<NamedIntensity> {
        vec![
            NamedIntensity::OscillatingExponential,
            NamedIntensity::BartSimpson,
            NamedIntensity::StepSine,
            NamedIntensity::constant(2.5, 4.0).unwrap(),
            NamedIntensity::linear(1.0, 1.0, 1.0).unwrap(),
        ]
    }

    #[test]
    fn lambda_max_dominates_on_grid() {
        // The bound must sit above the evaluator on a 1e4-point grid.
        for intensity in all_named() {
            let t = intensity.horizon();
            let max = intensity.lambda_max();
            for i in 0..=10_000 {
                let x = t * i as f64 / 10_000.0;
                let v = intensity.evaluate(x);
                assert!(v >= 0.0, "{} negative at {x}", intensity.name());
                assert!(v <= max, "{} exceeds bound at {x}: {v} > {max}", intensity.name());
            }
        }
    }

    #[test]
    fn oscillating_exponential_integral_closed_form() {
        // 2[25(1 - e^{-2}) + 4 * (25/26)(e^{-2}(sin 10 - cos 10 / 5) + 1/5)].
        let inner = (-2.0_f64).exp() * (10.0_f64.sin() - 10.0_f64.cos() / 5.0) + 0.2;
        let expect = 2.0 * (25.0 * (1.0 - (-2.0_f64).exp()) + 4.0 * inner * 25.0 / 26.0);
        let got = NamedIntensity::OscillatingExponential.integral();
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
        assert!((got - 44.380_048).abs() < 1e-4);
    }

    #[test]
    fn bart_simpson_mass_nearly_one() {
        // Over the window the mixture mass is 0.5*(2 Phi(3) - 1) + 0.5.
        let got = NamedIntensity::BartSimpson.integral();
        assert!((got - 0.998_650_1).abs() < 1e-6, "{got}");
    }

    #[test]
    fn zero_intensity_produces_no_events() {
        let zero = NamedIntensity::constant(0.0, 5.0).unwrap();
        let mut rng = RngStream::new(1);
        let data = simulate_poisson(&mut rng, &zero, 10).unwrap();
        assert_eq!(data.total_events(), 0);
        assert_eq!(data.n_replicates(), 10);
    }

    #[test]
    fn thinning_partitions_candidates_exactly() {
        let intensity = NamedIntensity::OscillatingExponential;
        let mut rng = RngStream::new(42);
        let candidates = homogeneous_candidates(&mut rng, intensity.lambda_max(), 10.0);
        assert!(!candidates.is_empty());
        let (kept, rejected) = thin_candidates(&mut rng, &candidates, &intensity, 18.0);
        assert_eq!(kept.len() + rejected.len(), candidates.len());
        let grid = BinGrid::uniform(10.0, 13).unwrap();
        let count = |points: &[f64]| -> Vec<u64> {
            let mut c = vec![0u64; 13];
            for &x in points {
                c[grid.bin_index(x).unwrap()] += 1;
            }
            c
        };
        let sum: Vec<u64> = count(&kept)
            .iter()
            .zip(count(&rejected))
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(sum, count(&candidates));
    }

    #[test]
    fn simulation_is_reproducible() {
        let intensity = NamedIntensity::BartSimpson;
        let a = simulate_poisson(&mut RngStream::new(9), &intensity, 5).unwrap();
        let b = simulate_poisson(&mut RngStream::new(9), &intensity, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parse_round_trips() {
        for intensity in all_named() {
            let parsed = NamedIntensity::parse(&intensity.name()).unwrap();
            assert_eq!(parsed, intensity);
        }
        assert!(NamedIntensity::parse("no_such_thing").is_err());
        assert!(NamedIntensity::parse("constant:abc:1").is_err());
        assert!(NamedIntensity::parse("linear:1:-2:1").is_err());
    }

    #[test]
    fn bin_rule_schedules() {
        let rate = BinRule::RateScaled { h: 1.0, c: 1.0 };
        assert_eq!(rate.bins_for(50), 4); // 50^(1/3) = 3.68
        assert_eq!(rate.bins_for(500), 8); // 7.94
        assert_eq!(rate.bins_for(5000), 17); // 17.10
        assert_eq!(BinRule::Fixed(12).bins_for(10_000), 12);
        assert_eq!(rate.bins_for(1), 1);
    }

    #[test]
    fn experiment_rows_are_reproducible() {
        let intensity = NamedIntensity::constant(2.0, 1.0).unwrap();
        let prior = IndepGammaPrior::new(0.1, 0.1).unwrap();
        let root = RngStream::new(77);
        let a = mse_experiment(&intensity, &[20, 40], BinRule::Fixed(3), 5, prior, &root).unwrap();
        let b = mse_experiment(&intensity, &[20, 40], BinRule::Fixed(3), 5, prior, &root).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn best_step_approximation_of_linear_is_midpoints() {
        let intensity = NamedIntensity::linear(0.0, 1.0, 1.0).unwrap();
        let grid = BinGrid::uniform(1.0, 2).unwrap();
        let step = best_step_approximation(&intensity, &grid).unwrap();
        assert!((step.heights()[0] - 0.25).abs() < 1e-12);
        assert!((step.heights()[1] - 0.75).abs() < 1e-12);
    }
}
