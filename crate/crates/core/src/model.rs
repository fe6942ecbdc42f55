//! Observations, bin grids, step intensity functions, and the binning and
//! likelihood primitives every estimator shares.
//!
//! Conventions: the observation window is [0, T]; interior bins are
//! half-open [b_{k-1}, b_k) and the last bin is closed, so an event at
//! exactly t = T is counted.

use crate::error::{Error, Result};
use crate::quad::gl10;

/// n replicated point-pattern realisations on [0, T].
///
/// Raw event times are kept (rather than pre-binned counts) so one dataset
/// can be re-binned under many grids, e.g. during empirical-Bayes sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    horizon: f64,
    replicates: Vec<Vec<f64>>,
}

impl EventSeries {
    /// Build a series, validating that every event time lies in [0, T].
    /// Replicate event lists are sorted ascending.
    pub fn new(horizon: f64, mut replicates: Vec<Vec<f64>>) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!("horizon must be positive and finite, got {horizon}")));
        }
        if replicates.is_empty() {
            return Err(Error::Data("an event series needs at least one replicate".into()));
        }
        for (j, events) in replicates.iter().enumerate() {
            for &t in events {
                if !t.is_finite() || t < 0.0 || t > horizon {
                    return Err(Error::Data(format!(
                        "event time {t} in replicate {} lies outside [0, {horizon}]",
                        j + 1
                    )));
                }
            }
        }
        for events in &mut replicates {
            events.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        Ok(Self { horizon, replicates })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of replicates n.
    pub fn n_replicates(&self) -> usize {
        self.replicates.len()
    }

    pub fn replicates(&self) -> &[Vec<f64>] {
        &self.replicates
    }

    /// Total number of events across replicates.
    pub fn total_events(&self) -> usize {
        self.replicates.iter().map(Vec::len).sum()
    }
}

/// Strictly increasing grid 0 = b_0 < b_1 < ... < b_N = T defining N bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BinGrid {
    edges: Vec<f64>,
}

impl BinGrid {
    /// Uniform grid with N bins of width T/N.
    pub fn uniform(horizon: f64, n_bins: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!("horizon must be positive and finite, got {horizon}")));
        }
        if n_bins == 0 {
            return Err(Error::Config("grid needs at least one bin".into()));
        }
        let edges = (0..=n_bins)
            .map(|k| {
                if k == n_bins {
                    horizon
                } else {
                    horizon * k as f64 / n_bins as f64
                }
            })
            .collect();
        Ok(Self { edges })
    }

    /// Grid from explicit edges; must start at 0 and be strictly increasing.
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Config("grid needs at least two edges".into()));
        }
        if edges[0] != 0.0 {
            return Err(Error::Config(format!("grid must start at 0, got {}", edges[0])));
        }
        for w in edges.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Config(format!(
                    "grid edges must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { edges })
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn horizon(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// Width of bin k (0-based).
    pub fn width(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// 0-based index of the bin containing t. Interior bins are
    /// left-closed/right-open; the last bin is closed at T.
    pub fn bin_index(&self, t: f64) -> Option<usize> {
        if t < 0.0 || t > self.horizon() {
            return None;
        }
        let idx = self.edges.partition_point(|&e| e <= t);
        Some(idx.saturating_sub(1).min(self.n_bins() - 1))
    }
}

/// Per-bin event counts: the sufficient statistics of the step model.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCounts {
    grid: BinGrid,
    counts: Vec<u64>,
    n_replicates: usize,
}

impl BinnedCounts {
    /// Assemble counts directly. `n_replicates = 0` is allowed and means
    /// "no exposure": samplers then target the prior.
    pub fn new(grid: BinGrid, counts: Vec<u64>, n_replicates: usize) -> Result<Self> {
        if counts.len() != grid.n_bins() {
            return Err(Error::Config(format!(
                "{} counts for a grid of {} bins",
                counts.len(),
                grid.n_bins()
            )));
        }
        Ok(Self { grid, counts, n_replicates })
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_replicates(&self) -> usize {
        self.n_replicates
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Step intensity: height psi_k on bin k, in events per time unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseIntensity {
    grid: BinGrid,
    heights: Vec<f64>,
}

impl PiecewiseIntensity {
    pub fn new(grid: BinGrid, heights: Vec<f64>) -> Result<Self> {
        if heights.len() != grid.n_bins() {
            return Err(Error::Config(format!(
                "{} heights for a grid of {} bins",
                heights.len(),
                grid.n_bins()
            )));
        }
        for &h in &heights {
            if !(h >= 0.0) || !h.is_finite() {
                return Err(Error::Config(format!("intensity heights must be finite and >= 0, got {h}")));
            }
        }
        Ok(Self { grid, heights })
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    /// Value at x, using the shared bin convention. 0 outside [0, T].
    pub fn evaluate(&self, x: f64) -> f64 {
        match self.grid.bin_index(x) {
            Some(k) => self.heights[k],
            None => 0.0,
        }
    }

    /// Exact integral over [0, T]: sum of height * width.
    pub fn integral(&self) -> f64 {
        self.heights
            .iter()
            .zip(self.grid.widths())
            .map(|(h, w)| h * w)
            .sum()
    }
}

/// Count events of `data` into the bins of `grid`.
pub fn bin_events(data: &EventSeries, grid: &BinGrid) -> Result<BinnedCounts> {
    if data.horizon() != grid.horizon() {
        return Err(Error::Config(format!(
            "data horizon {} does not match grid horizon {}",
            data.horizon(),
            grid.horizon()
        )));
    }
    let mut counts = vec![0u64; grid.n_bins()];
    for (j, events) in data.replicates().iter().enumerate() {
        for &t in events {
            let k = grid.bin_index(t).ok_or_else(|| {
                Error::Data(format!("event time {t} in replicate {} outside [0, {}]", j + 1, grid.horizon()))
            })?;
            counts[k] += 1;
        }
    }
    BinnedCounts::new(grid.clone(), counts, data.n_replicates())
}

/// Log-likelihood of a step intensity given binned counts, up to the
/// data-only constant: sum_k [H_k ln psi_k - n Delta_k psi_k].
///
/// A zero height over a bin with events gives a zero-density observation;
/// that is reported as -inf rather than an error.
pub fn log_likelihood(counts: &BinnedCounts, lambda: &PiecewiseIntensity) -> Result<f64> {
    if counts.grid() != lambda.grid() {
        return Err(Error::Config("counts and intensity are on different grids".into()));
    }
    let n = counts.n_replicates() as f64;
    let mut acc = 0.0;
    for (k, (&h, &psi)) in counts.counts().iter().zip(lambda.heights()).enumerate() {
        if h > 0 {
            if psi == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            acc += h as f64 * psi.ln();
        }
        acc -= n * counts.grid().width(k) * psi;
    }
    Ok(acc)
}

/// L2 distance between a step intensity and an arbitrary reference
/// function, by 10-node Gauss-Legendre quadrature per bin.
pub fn l2_distance(a: &PiecewiseIntensity, reference: impl Fn(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for (k, &h) in a.heights().iter().enumerate() {
        let lo = a.grid().edges()[k];
        let hi = a.grid().edges()[k + 1];
        let mut f = |x: f64| {
            let d = h - reference(x);
            d * d
        };
        acc += gl10(&mut f, lo, hi);
    }
    acc.max(0.0).sqrt()
}

/// Exact L2 distance between two step intensities on the same horizon,
/// computed on the common refinement of the two grids.
pub fn l2_distance_steps(a: &PiecewiseIntensity, b: &PiecewiseIntensity) -> Result<f64> {
    if a.grid().horizon() != b.grid().horizon() {
        return Err(Error::Config("step intensities live on different horizons".into()));
    }
    let mut edges: Vec<f64> = a.grid().edges().iter().chain(b.grid().edges()).copied().collect();
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
    edges.dedup();
    let mut acc = 0.0;
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let d = a.evaluate(mid) - b.evaluate(mid);
        acc += d * d * (w[1] - w[0]);
    }
    Ok(acc.max(0.0).sqrt())
}

/// Wrap event times modulo `period`, so the result carries the one-period
/// intensity. Each full period of each input replicate becomes one output
/// replicate: n_out = n * ceil(T / period).
pub fn fold_periodic(data: &EventSeries, period: f64) -> Result<EventSeries> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::Config(format!("period must be positive, got {period}")));
    }
    let periods_per_replicate = (data.horizon() / period).ceil().max(1.0) as usize;
    let mut replicates: Vec<Vec<f64>> =
        vec![Vec::new(); data.n_replicates() * periods_per_replicate];
    for (j, events) in data.replicates().iter().enumerate() {
        for &t in events {
            // An event at an exact period boundary (including t = T) closes
            // the preceding period rather than opening the next.
            let mut idx = (t / period).floor() as usize;
            let mut offset = t - idx as f64 * period;
            if idx >= periods_per_replicate || (offset == 0.0 && idx > 0) {
                idx -= 1;
                offset = period;
            }
            replicates[j * periods_per_replicate + idx].push(offset);
        }
    }
    EventSeries::new(period, replicates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(horizon: f64, events: Vec<Vec<f64>>) -> EventSeries {
        EventSeries::new(horizon, events).unwrap()
    }

    #[test]
    fn bin_membership_with_closed_last_bin() {
        let grid = BinGrid::uniform(10.0, 4).unwrap();
        let data = series(10.0, vec![vec![0.1, 2.5, 9.9, 10.0]]);
        let counts = bin_events(&data, &grid).unwrap();
        assert_eq!(counts.counts(), &[1, 1, 0, 2]);
    }

    #[test]
    fn single_bin_collects_everything() {
        let grid = BinGrid::uniform(3.0, 1).unwrap();
        let data = series(3.0, vec![vec![0.0, 1.0, 2.0], vec![0.5]]);
        let counts = bin_events(&data, &grid).unwrap();
        assert_eq!(counts.counts(), &[4]);
        assert_eq!(counts.total() as usize, data.total_events());
    }

    #[test]
    fn horizon_mismatch_is_config_error() {
        let grid = BinGrid::uniform(5.0, 2).unwrap();
        let data = series(3.0, vec![vec![1.0]]);
        assert!(matches!(bin_events(&data, &grid), Err(Error::Config(_))));
    }

    #[test]
    fn event_outside_window_is_data_error() {
        let err = EventSeries::new(2.0, vec![vec![2.5]]).unwrap_err();
        match err {
            Error::Data(msg) => {
                assert!(msg.contains("2.5") && msg.contains("replicate 1"), "{msg}");
            }
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn log_likelihood_empty_data() {
        let grid = BinGrid::uniform(2.0, 4).unwrap();
        let counts = BinnedCounts::new(grid.clone(), vec![0; 4], 3).unwrap();
        let lambda = PiecewiseIntensity::new(grid, vec![1.0, 2.0, 0.5, 4.0]).unwrap();
        let expect = -3.0 * 0.5 * (1.0 + 2.0 + 0.5 + 4.0);
        assert!((log_likelihood(&counts, &lambda).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn log_likelihood_hand_value() {
        // N=1, H=3, n=1, width 1, psi=3: 3 ln 3 - 3.
        let grid = BinGrid::uniform(1.0, 1).unwrap();
        let counts = BinnedCounts::new(grid.clone(), vec![3], 1).unwrap();
        let lambda = PiecewiseIntensity::new(grid, vec![3.0]).unwrap();
        let got = log_likelihood(&counts, &lambda).unwrap();
        assert!((got - (3.0 * 3.0_f64.ln() - 3.0)).abs() < 1e-12, "{got}");
    }

    #[test]
    fn log_likelihood_zero_height_with_events() {
        let grid = BinGrid::uniform(1.0, 2).unwrap();
        let counts = BinnedCounts::new(grid.clone(), vec![1, 0], 1).unwrap();
        let lambda = PiecewiseIntensity::new(grid, vec![0.0, 1.0]).unwrap();
        assert_eq!(log_likelihood(&counts, &lambda).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn log_likelihood_matches_unbinned_oracle() {
        // For a step intensity the unbinned form sum_ij ln lambda(X_ij) -
        // n * integral(lambda) must agree with the binned sufficient-statistic
        // form to machine precision.
        let grid = BinGrid::uniform(4.0, 5).unwrap();
        let lambda =
            PiecewiseIntensity::new(grid.clone(), vec![0.7, 2.1, 1.3, 0.2, 3.9]).unwrap();
        let data = series(
            4.0,
            vec![vec![0.3, 1.1, 2.6, 3.9, 4.0], vec![0.05, 0.81, 1.59, 2.41, 3.2, 3.99]],
        );
        let counts = bin_events(&data, &grid).unwrap();
        let binned = log_likelihood(&counts, &lambda).unwrap();
        let unbinned: f64 = data
            .replicates()
            .iter()
            .flatten()
            .map(|&t| lambda.evaluate(t).ln())
            .sum::<f64>()
            - data.n_replicates() as f64 * lambda.integral();
        assert!((binned - unbinned).abs() < 1e-12, "binned {binned} unbinned {unbinned}");
    }

    #[test]
    fn log_likelihood_gradient_and_maximizer() {
        // d/dpsi_k = H_k/psi_k - n Delta_k, checked by central differences at
        // a few points; the zero-gradient point is H_k/(n Delta_k).
        let grid = BinGrid::uniform(2.0, 3).unwrap();
        let counts = BinnedCounts::new(grid.clone(), vec![4, 0, 7], 3).unwrap();
        let n = 3.0;
        let points = [
            vec![0.5, 0.2, 1.0],
            vec![2.0, 3.0, 0.4],
            vec![1.3, 0.05, 2.8],
            vec![0.9, 1.9, 0.33],
            vec![4.2, 0.6, 1.6],
        ];
        for psi in &points {
            for k in 0..3 {
                let h = 1e-6 * psi[k];
                let mut up = psi.clone();
                up[k] += h;
                let mut dn = psi.clone();
                dn[k] -= h;
                let f_up = log_likelihood(
                    &counts,
                    &PiecewiseIntensity::new(grid.clone(), up).unwrap(),
                )
                .unwrap();
                let f_dn = log_likelihood(
                    &counts,
                    &PiecewiseIntensity::new(grid.clone(), dn).unwrap(),
                )
                .unwrap();
                let fd = (f_up - f_dn) / (2.0 * h);
                let analytic = counts.counts()[k] as f64 / psi[k] - n * grid.width(k);
                let scale = analytic.abs().max(1.0);
                assert!(
                    ((fd - analytic) / scale).abs() < 1e-6,
                    "bin {k} at {psi:?}: fd {fd} vs {analytic}"
                );
            }
        }
        // The stationary point maximises the likelihood bin by bin.
        let opt: Vec<f64> = (0..3)
            .map(|k| counts.counts()[k] as f64 / (n * grid.width(k)))
            .map(|v| v.max(1e-12))
            .collect();
        let best = log_likelihood(
            &counts,
            &PiecewiseIntensity::new(grid.clone(), opt.clone()).unwrap(),
        )
        .unwrap();
        for psi in &points {
            let other = log_likelihood(
                &counts,
                &PiecewiseIntensity::new(grid.clone(), psi.clone()).unwrap(),
            )
            .unwrap();
            assert!(best >= other);
        }
    }

    #[test]
    fn l2_same_step_function_is_zero() {
        let grid = BinGrid::uniform(1.0, 3).unwrap();
        let a = PiecewiseIntensity::new(grid, vec![1.0, 0.5, 2.0]).unwrap();
        let b = a.clone();
        assert_eq!(l2_distance_steps(&a, &b).unwrap(), 0.0);
        assert!(l2_distance(&a, |x| a.evaluate(x)) < 1e-12);
    }

    #[test]
    fn l2_unit_box() {
        let grid = BinGrid::uniform(1.0, 1).unwrap();
        let a = PiecewiseIntensity::new(grid, vec![1.0]).unwrap();
        let d = l2_distance(&a, |_| 0.0);
        assert!((d - 1.0).abs() < 1e-13);
    }

    #[test]
    fn l2_against_linear_reference() {
        // Step approx of x on [0,1] with heights (0.25, 0.75):
        // integral of (x - step)^2 = 1/48.
        let grid = BinGrid::uniform(1.0, 2).unwrap();
        let a = PiecewiseIntensity::new(grid, vec![0.25, 0.75]).unwrap();
        let d = l2_distance(&a, |x| x);
        assert!((d - (1.0_f64 / 48.0).sqrt()).abs() < 1e-13, "{d}");
    }

    #[test]
    fn l2_steps_on_different_grids() {
        let a = PiecewiseIntensity::new(BinGrid::uniform(1.0, 2).unwrap(), vec![1.0, 3.0]).unwrap();
        let b = PiecewiseIntensity::new(BinGrid::uniform(1.0, 1).unwrap(), vec![2.0]).unwrap();
        // |a-b| = 1 everywhere.
        let d = l2_distance_steps(&a, &b).unwrap();
        assert!((d - 1.0).abs() < 1e-13);
        // Quadrature route agrees with the exact route here.
        let dq = l2_distance(&a, |x| b.evaluate(x));
        assert!((dq - d).abs() < 1e-12);
    }

    #[test]
    fn fold_exact_thirds() {
        let data = series(3.0, vec![vec![0.5, 1.5, 2.5]]);
        let folded = fold_periodic(&data, 1.0).unwrap();
        assert_eq!(folded.n_replicates(), 3);
        for rep in folded.replicates() {
            assert_eq!(rep.len(), 1);
            assert!((rep[0] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn fold_empty_scales_replicates() {
        let data = series(10.0, vec![vec![], vec![]]);
        let folded = fold_periodic(&data, 3.0).unwrap();
        assert_eq!(folded.n_replicates(), 2 * 4); // ceil(10/3) = 4
        assert_eq!(folded.total_events(), 0);
        assert_eq!(folded.horizon(), 3.0);
    }

    #[test]
    fn fold_modular_arithmetic() {
        let data = series(48.0, vec![vec![25.0]]);
        let folded = fold_periodic(&data, 24.0).unwrap();
        assert_eq!(folded.n_replicates(), 2);
        assert!(folded.replicates()[0].is_empty());
        assert_eq!(folded.replicates()[1], vec![1.0]);
    }

    #[test]
    fn fold_boundary_goes_to_preceding_period() {
        // Events exactly at a period boundary close the preceding period.
        let data = series(48.0, vec![vec![24.0, 48.0]]);
        let folded = fold_periodic(&data, 24.0).unwrap();
        assert_eq!(folded.replicates()[0], vec![24.0]);
        assert_eq!(folded.replicates()[1], vec![24.0]);
    }

    #[test]
    fn grid_uniform_widths() {
        let grid = BinGrid::uniform(10.0, 7).unwrap();
        for w in grid.widths() {
            assert!((w - 10.0 / 7.0).abs() < 1e-12);
        }
        assert_eq!(grid.edges()[0], 0.0);
        assert_eq!(grid.horizon(), 10.0);
    }

    #[test]
    fn grid_rejects_bad_edges() {
        assert!(BinGrid::from_edges(vec![0.0]).is_err());
        assert!(BinGrid::from_edges(vec![0.1, 1.0]).is_err());
        assert!(BinGrid::from_edges(vec![0.0, 1.0, 1.0]).is_err());
        assert!(BinGrid::uniform(1.0, 0).is_err());
    }

    #[test]
    fn intensity_evaluate_and_integral() {
        let grid = BinGrid::from_edges(vec![0.0, 1.0, 4.0]).unwrap();
        let lam = PiecewiseIntensity::new(grid, vec![2.0, 0.5]).unwrap();
        assert_eq!(lam.evaluate(0.0), 2.0);
        assert_eq!(lam.evaluate(1.0), 0.5);
        assert_eq!(lam.evaluate(4.0), 0.5);
        assert_eq!(lam.evaluate(4.1), 0.0);
        assert!((lam.integral() - (2.0 + 1.5)).abs() < 1e-15);
    }
}
