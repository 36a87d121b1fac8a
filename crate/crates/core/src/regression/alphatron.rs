//! Primal Alphatron with holdout iterate selection.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Result};
use crate::sampling::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphatronConfig {
    /// Learning rate `λ`.
    pub lambda: f64,
    /// Iteration count `T`; `None` picks [`default_iterations`] of the shot count.
    pub iterations: Option<usize>,
    /// Fraction of shots held out for iterate selection.
    pub holdout_fraction: f64,
    /// Largest monomial size among the features; `None` means `|N₂(u)|`.
    pub feature_order_cap: Option<usize>,
    /// Seed for the train/holdout split.
    pub seed: u64,
}

impl Default for AlphatronConfig {
    fn default() -> Self {
        Self { lambda: 1.0, iterations: None, holdout_fraction: 0.2, feature_order_cap: None, seed: 0 }
    }
}

/// Iterations used when the configuration leaves `T` open and the data are
/// exact rather than sampled.
pub const EXACT_MODE_ITERATIONS: usize = 10_000;

/// `max(100, 10⌈√M⌉)`.
pub fn default_iterations(shots: usize) -> usize {
    let root = (shots as f64).sqrt().ceil() as usize;
    (10 * root).max(100)
}

impl AlphatronConfig {
    pub fn iterations_for(&self, shots: usize) -> usize {
        self.iterations.unwrap_or_else(|| default_iterations(shots))
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return precondition(format!("lambda = {} must be finite and non-negative", self.lambda));
        }
        if self.iterations == Some(0) {
            return precondition("Alphatron needs at least one iteration");
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return precondition(format!("holdout_fraction = {} must lie in (0, 1)", self.holdout_fraction));
        }
        Ok(())
    }
}

/// `(1 + tanh z) / 2`.
#[inline]
pub fn u_link(z: f64) -> f64 {
    0.5 * (1.0 + z.tanh())
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return precondition(format!("{} entries do not form rows of width {dim}", data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return domain("features must be finite");
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Weighted rows with (conditional mean) targets. Squared loss against the
/// underlying 0/1 labels equals `offset + Σ_i weight_i (target_i - h_i)²`.
#[derive(Debug, Clone)]
pub(crate) struct Population {
    pub features: FeatureMatrix,
    pub weights: Vec<f64>,
    pub targets: Vec<f64>,
    pub offset: f64,
}

impl Population {
    fn predict(&self, w: &[f64], i: usize) -> f64 {
        u_link(dot(w, self.features.row(i)))
    }

    fn loss(&self, w: &[f64]) -> f64 {
        self.offset
            + (0..self.weights.len())
                .map(|i| {
                    let r = self.targets[i] - self.predict(w, i);
                    self.weights[i] * r * r
                })
                .sum::<f64>()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of a fit: the selected iterate and the loss of every iterate
/// `w_0 … w_T` on the holdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphatronFit {
    pub weights: Vec<f64>,
    pub holdout_curve: Vec<f64>,
    pub chosen_iteration: usize,
}

/// Runs `T` updates `w ← w + λ Σ_i weight_i (y_i - h(x_i)) φ(x_i)` from
/// `w = 0` and keeps the iterate with the lowest holdout loss (earliest on
/// ties).
pub(crate) fn fit_population(train: &Population, holdout: &Population, lambda: f64, iterations: usize) -> AlphatronFit {
    let dim = train.features.dim();
    let mut w = vec![0.0; dim];
    let mut best = w.clone();
    let mut best_loss = holdout.loss(&w);
    let mut best_t = 0;
    let mut curve = Vec::with_capacity(iterations + 1);
    curve.push(best_loss);
    let mut step = vec![0.0; dim];
    for t in 1..=iterations {
        step.iter_mut().for_each(|s| *s = 0.0);
        for i in 0..train.weights.len() {
            let phi = train.features.row(i);
            let r = train.weights[i] * (train.targets[i] - u_link(dot(&w, phi)));
            for (s, f) in step.iter_mut().zip(phi) {
                *s += r * f;
            }
        }
        for (wi, s) in w.iter_mut().zip(&step) {
            *wi += lambda * s;
        }
        let loss = holdout.loss(&w);
        curve.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best.copy_from_slice(&w);
            best_t = t;
        }
    }
    AlphatronFit { weights: best, holdout_curve: curve, chosen_iteration: best_t }
}

/// Deterministic shuffle of `0..m` split into `(train, holdout)`.
pub(crate) fn split_indices(m: usize, holdout_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if m < 2 {
        return domain(format!("{m} shots cannot be split into train and holdout"));
    }
    let held = ((holdout_fraction * m as f64).round() as usize).clamp(1, m - 1);
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let train = idx.split_off(held);
    Ok((train, idx))
}

fn rows_population(features: &FeatureMatrix, targets: &[f64], idx: &[usize]) -> Population {
    let dim = features.dim();
    let data = idx.iter().flat_map(|&i| features.row(i).iter().copied()).collect();
    let w = 1.0 / idx.len() as f64;
    Population {
        features: FeatureMatrix { dim, data },
        weights: vec![w; idx.len()],
        targets: idx.iter().map(|&i| targets[i]).collect(),
        offset: 0.0,
    }
}

/// Alphatron on explicit feature rows and `[0, 1]` targets.
pub fn alphatron_fit(features: &FeatureMatrix, targets: &[f64], cfg: &AlphatronConfig) -> Result<AlphatronFit> {
    cfg.check()?;
    if targets.len() != features.rows() {
        return precondition(format!("{} targets for {} feature rows", targets.len(), features.rows()));
    }
    if targets.iter().any(|y| !(0.0..=1.0).contains(y)) {
        return domain("targets must lie in [0, 1]");
    }
    let (train, hold) = split_indices(targets.len(), cfg.holdout_fraction, cfg.seed)?;
    let train = rows_population(features, targets, &train);
    let hold = rows_population(features, targets, &hold);
    Ok(fit_population(&train, &hold, cfg.lambda, cfg.iterations_for(targets.len())))
}

/// Alphatron on a weighted population (weights summing to one) whose
/// targets are exact conditional means; the population itself serves as
/// the holdout.
pub fn alphatron_fit_weighted(
    features: &FeatureMatrix,
    targets: &[f64],
    weights: &[f64],
    cfg: &AlphatronConfig,
) -> Result<AlphatronFit> {
    cfg.check()?;
    if targets.len() != features.rows() || weights.len() != features.rows() {
        return precondition("targets, weights and feature rows differ in length");
    }
    if targets.iter().any(|y| !(0.0..=1.0).contains(y)) || weights.iter().any(|w| !(*w >= 0.0)) {
        return domain("targets must lie in [0, 1] and weights be non-negative");
    }
    let pop = Population {
        features: features.clone(),
        weights: weights.to_vec(),
        targets: targets.to_vec(),
        offset: 0.0,
    };
    Ok(fit_population(&pop, &pop, cfg.lambda, cfg.iterations.unwrap_or(EXACT_MODE_ITERATIONS)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::new(rows[0].len(), rows.iter().flat_map(|r| r.iter().copied()).collect()).unwrap()
    }

    #[test]
    fn zero_rate_keeps_half() {
        let f = matrix(&[&[1.0], &[1.0], &[1.0]]);
        let cfg = AlphatronConfig { lambda: 0.0, iterations: Some(1), ..Default::default() };
        let fit = alphatron_fit(&f, &[1.0, 0.0, 1.0], &cfg).unwrap();
        assert_eq!(fit.weights, vec![0.0]);
        assert_eq!(fit.chosen_iteration, 0);
        assert_eq!(u_link(0.0), 0.5);
    }

    #[test]
    fn rejects_bad_configs() {
        let f = matrix(&[&[1.0], &[1.0]]);
        let bad_t = AlphatronConfig { iterations: Some(0), ..Default::default() };
        assert!(alphatron_fit(&f, &[1.0, 0.0], &bad_t).is_err());
        let bad_h = AlphatronConfig { holdout_fraction: 1.0, ..Default::default() };
        assert!(alphatron_fit(&f, &[1.0, 0.0], &bad_h).is_err());
        assert!(alphatron_fit(&f, &[1.5, 0.0], &AlphatronConfig::default()).is_err());
        let one = matrix(&[&[1.0]]);
        assert!(alphatron_fit(&one, &[1.0], &AlphatronConfig::default()).is_err());
    }

    #[test]
    fn constant_targets_grow_constant_weight() {
        let f = FeatureMatrix::new(1, vec![1.0; 10]).unwrap();
        let cfg = AlphatronConfig { iterations: Some(50), ..Default::default() };
        let fit = alphatron_fit(&f, &[1.0; 10], &cfg).unwrap();
        assert!(fit.holdout_curve.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(fit.chosen_iteration, 50);
        assert!(fit.weights[0] > 1.0);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let (a, b) = split_indices(10, 0.2, 7).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(split_indices(10, 0.2, 7).unwrap(), (a.clone(), b.clone()));
        let mut all: Vec<usize> = a.into_iter().chain(b).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(default_iterations(4000), 640);
        assert_eq!(default_iterations(1), 100);
    }

    #[test]
    fn weighted_fit_recovers_realizable_weight() {
        let f = matrix(&[&[1.0, 1.0], &[1.0, -1.0]]);
        let targets = [u_link(0.2 + 0.7), u_link(0.2 - 0.7)];
        let fit = alphatron_fit_weighted(&f, &targets, &[0.5, 0.5], &AlphatronConfig::default()).unwrap();
        assert!((fit.weights[0] - 0.2).abs() < 1e-9 && (fit.weights[1] - 0.7).abs() < 1e-9);
    }
}
