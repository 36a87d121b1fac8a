//! Exact probability tables over the spin cube `{±1}^n`.
//!
//! Configuration index `k` encodes spin `x_b` in bit `b`: a clear bit is
//! `-1`, a set bit is `+1`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Default ceiling on the number of variables for exhaustive enumeration.
/// At 24 variables a table holds 2^24 doubles (128 MiB).
pub const DEFAULT_ENUMERATION_LIMIT: usize = 24;

/// Normalization tolerance accepted by [`DistributionTable::new`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Spin of variable `b` in configuration `index`.
#[inline]
pub fn spin(index: usize, b: usize) -> i8 {
    if (index >> b) & 1 == 1 {
        1
    } else {
        -1
    }
}

/// Full spin vector for configuration `index`.
pub fn spins_of(index: usize, n: usize) -> Vec<i8> {
    (0..n).map(|b| spin(index, b)).collect()
}

/// Configuration index of a spin vector. Entries must be ±1.
pub fn index_of(x: &[i8]) -> Result<usize> {
    let mut idx = 0usize;
    for (b, &s) in x.iter().enumerate() {
        match s {
            1 => idx |= 1 << b,
            -1 => {}
            other => return domain(format!("spin value {other} at position {b} is not ±1")),
        }
    }
    Ok(idx)
}

pub(crate) fn check_enumerable(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::Capacity { n, limit })
    } else {
        Ok(())
    }
}

/// Numerically stable `ln Σ exp(v)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Probability vector over all `2^n` spin configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct DistributionTable {
    n: usize,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTable {
    n: usize,
    probs: Vec<f64>,
}

impl TryFrom<RawTable> for DistributionTable {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        DistributionTable::new(raw.n, raw.probs)
    }
}

impl DistributionTable {
    /// Builds a table from an already normalized probability vector.
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        if n >= usize::BITS as usize || probs.len() != 1usize << n {
            return Err(Error::Structural(format!(
                "table for n = {n} needs 2^n entries, got {}",
                probs.len()
            )));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return domain(format!("entry {i} = {p} is not a finite non-negative probability"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return domain(format!("probabilities sum to {total}, not 1"));
        }
        Ok(Self { n, probs })
    }

    /// Normalizes non-negative weights into a table.
    pub fn from_weights(n: usize, mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return domain("weights must be finite and non-negative");
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return domain("all weights are zero");
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(n, weights)
    }

    /// Normalizes unnormalized log-weights, subtracting the maximum first.
    pub fn from_log_weights(n: usize, log_weights: &[f64]) -> Result<Self> {
        if log_weights.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return domain("log-weights must not be NaN or +inf");
        }
        let lse = log_sum_exp(log_weights);
        if !lse.is_finite() {
            return domain("all log-weights are -inf");
        }
        let probs = log_weights.iter().map(|v| (v - lse).exp()).collect();
        Self::from_weights(n, probs)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        check_enumerable(n, DEFAULT_ENUMERATION_LIMIT)?;
        let len = 1usize << n;
        Self::new(n, vec![1.0 / len as f64; len])
    }

    /// Point mass on a single configuration.
    pub fn point_mass(x: &[i8]) -> Result<Self> {
        let n = x.len();
        check_enumerable(n, DEFAULT_ENUMERATION_LIMIT)?;
        let mut probs = vec![0.0; 1 << n];
        probs[index_of(x)?] = 1.0;
        Self::new(n, probs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: &[i8]) -> Result<f64> {
        if x.len() != self.n {
            return domain(format!("configuration has {} spins, table has {}", x.len(), self.n));
        }
        Ok(self.probs[index_of(x)?])
    }

    /// Probability that every variable in `mask` takes the value encoded by
    /// the same bits of `values`.
    pub fn mass_where(&self, mask: usize, values: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(k, _)| k & mask == values & mask)
            .map(|(_, p)| p)
            .sum()
    }

    /// Marginal over the listed variables, returned as a table on
    /// `vars.len()` variables in the listed order.
    pub fn marginal(&self, vars: &[usize]) -> Result<DistributionTable> {
        if let Some(&v) = vars.iter().find(|&&v| v >= self.n) {
            return domain(format!("variable {v} out of range for n = {}", self.n));
        }
        let mut out = vec![0.0; 1 << vars.len()];
        for (k, p) in self.probs.iter().enumerate() {
            let mut j = 0usize;
            for (b, &v) in vars.iter().enumerate() {
                j |= ((k >> v) & 1) << b;
            }
            out[j] += p;
        }
        DistributionTable::from_weights(vars.len(), out)
    }
}
