//! Restricted Boltzmann machines with ±1 visible and hidden units.
//!
//! The joint law is `P(x, y) ∝ exp(xᵀJy + hᵀx + gᵀy)`; summing out the hidden
//! layer gives the visible marginal `p(x) ∝ exp(hᵀx) Π_j 2cosh((Jᵀx)_j + g_j)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{structural, Error, Result};
use crate::graph::TwoHopGraph;
use crate::table::{check_enumerable, DistributionTable, DEFAULT_ENUMERATION_LIMIT};

/// `ln(2 cosh a)` without overflow.
#[inline]
pub fn ln_2cosh(a: f64) -> f64 {
    let a = a.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Logistic function `1 / (1 + e^{-z})`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RbmFile", into = "RbmFile")]
pub struct RbmModel {
    n: usize,
    m: usize,
    /// Row-major `n × m`.
    weights: Vec<f64>,
    h: Vec<f64>,
    g: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RbmFile {
    n: usize,
    m: usize,
    #[serde(rename = "J")]
    j: Vec<Vec<f64>>,
    h: Vec<f64>,
    g: Vec<f64>,
}

impl TryFrom<RbmFile> for RbmModel {
    type Error = Error;

    fn try_from(f: RbmFile) -> Result<Self> {
        if f.j.len() != f.n {
            return structural(format!("J has {} rows, n = {}", f.j.len(), f.n));
        }
        let model = RbmModel::new(f.j, f.h, f.g)?;
        if model.m != f.m {
            return structural(format!("J has {} columns, m = {}", model.m, f.m));
        }
        Ok(model)
    }
}

impl From<RbmModel> for RbmFile {
    fn from(model: RbmModel) -> Self {
        RbmFile {
            n: model.n,
            m: model.m,
            j: (0..model.n).map(|i| model.row(i).to_vec()).collect(),
            h: model.h,
            g: model.g,
        }
    }
}

impl RbmModel {
    /// Builds a model from `n` weight rows of length `m`, visible fields `h`
    /// (length `n`) and hidden fields `g` (length `m`).
    pub fn new(j: Vec<Vec<f64>>, h: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        let n = h.len();
        let m = g.len();
        if j.len() != n {
            return structural(format!("J has {} rows but h has length {n}", j.len()));
        }
        if let Some((i, row)) = j.iter().enumerate().find(|(_, r)| r.len() != m) {
            return structural(format!("row {i} of J has length {}, expected m = {m}", row.len()));
        }
        let weights: Vec<f64> = j.into_iter().flatten().collect();
        if weights.iter().chain(&h).chain(&g).any(|v| !v.is_finite()) {
            return structural("model parameters must be finite");
        }
        Ok(Self { n, m, weights, h, g })
    }

    /// Model with all couplings zero.
    pub fn independent(h: Vec<f64>, g: Vec<f64>) -> Self {
        let (n, m) = (h.len(), g.len());
        Self { n, m, weights: vec![0.0; n * m], h, g }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn weight(&self, i: usize, k: usize) -> f64 {
        self.weights[i * self.m + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.m..(i + 1) * self.m]
    }

    pub fn visible_fields(&self) -> &[f64] {
        &self.h
    }

    pub fn hidden_fields(&self) -> &[f64] {
        &self.g
    }

    /// `(Jᵀx)_k + g_k` for every hidden unit.
    pub fn hidden_activations(&self, x: &[i8]) -> Vec<f64> {
        let mut act = self.g.clone();
        for (i, &xi) in x.iter().enumerate() {
            let xi = f64::from(xi);
            for (a, w) in act.iter_mut().zip(self.row(i)) {
                *a += w * xi;
            }
        }
        act
    }

    /// `(Jy)_i + h_i` for every visible unit.
    pub fn visible_activations(&self, y: &[i8]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.h[i] + self.row(i).iter().zip(y).map(|(w, &yk)| w * f64::from(yk)).sum::<f64>())
            .collect()
    }

    /// Unnormalized log marginal `hᵀx + Σ_k ln 2cosh((Jᵀx)_k + g_k)`.
    pub fn log_marginal_weight(&self, x: &[i8]) -> f64 {
        let field: f64 = self.h.iter().zip(x).map(|(h, &xi)| h * f64::from(xi)).sum();
        field + self.hidden_activations(x).into_iter().map(ln_2cosh).sum::<f64>()
    }

    /// Exact visible marginal with the default enumeration limit.
    pub fn marginal_distribution(&self) -> Result<DistributionTable> {
        self.marginal_distribution_with_limit(DEFAULT_ENUMERATION_LIMIT)
    }

    pub fn marginal_distribution_with_limit(&self, limit: usize) -> Result<DistributionTable> {
        check_enumerable(self.n, limit)?;
        let mut x = vec![-1i8; self.n];
        let log_w: Vec<f64> = (0..1usize << self.n)
            .map(|k| {
                for (b, s) in x.iter_mut().enumerate() {
                    *s = if (k >> b) & 1 == 1 { 1 } else { -1 };
                }
                self.log_marginal_weight(&x)
            })
            .collect();
        DistributionTable::from_log_weights(self.n, &log_w)
    }

    /// Two-hop graph: `i ~ j` iff some hidden unit has nonzero weight to both.
    /// Weights are compared to zero exactly.
    pub fn two_hop(&self) -> TwoHopGraph {
        let mut sets = vec![BTreeSet::new(); self.n];
        for k in 0..self.m {
            let attached: Vec<usize> = (0..self.n).filter(|&i| self.weight(i, k) != 0.0).collect();
            for &a in &attached {
                for &b in &attached {
                    if a != b {
                        sets[a].insert(b);
                    }
                }
            }
        }
        TwoHopGraph::from_sets(self.n, sets)
    }

    /// Tight class parameters plus checks against the requested `(alpha, beta)`.
    pub fn validate(&self, alpha: f64, beta: f64) -> ModelClassReport {
        let nonzero = self.weights.iter().filter(|w| **w != 0.0).map(|w| w.abs());
        let tight_alpha = nonzero.clone().fold(f64::INFINITY, f64::min);
        let tight_alpha = if tight_alpha.is_finite() { tight_alpha } else { 0.0 };
        let row_strength = (0..self.n).map(|i| self.row(i).iter().map(|w| w.abs()).sum::<f64>() + self.h[i].abs());
        let col_strength =
            (0..self.m).map(|k| (0..self.n).map(|i| self.weight(i, k).abs()).sum::<f64>() + self.g[k].abs());
        let tight_beta = row_strength.chain(col_strength).fold(0.0, f64::max);

        let is_locally_consistent = (0..self.m).all(|k| {
            let col = (0..self.n).map(|i| self.weight(i, k));
            col.clone().all(|w| w >= 0.0) || col.clone().all(|w| w <= 0.0)
        });
        let is_ferromagnetic = self.weights.iter().chain(&self.h).chain(&self.g).all(|v| *v >= 0.0);

        ModelClassReport {
            alpha: tight_alpha,
            beta: tight_beta,
            requested_alpha: alpha,
            requested_beta: beta,
            is_nondegenerate: nonzero.clone().all(|w| w >= alpha) && tight_beta <= beta,
            is_locally_consistent,
            is_ferromagnetic,
            d2: self.two_hop().max_degree(),
        }
    }
}

/// Class membership of a model.
///
/// `alpha` is the smallest nonzero `|J_ij|` (0 when every coupling is zero)
/// and `beta` the largest row or column strength, so the model is
/// `(alpha, beta)`-non-degenerate for exactly these values and any looser pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelClassReport {
    pub alpha: f64,
    pub beta: f64,
    pub requested_alpha: f64,
    pub requested_beta: f64,
    /// Whether the model is `(requested_alpha, requested_beta)`-non-degenerate.
    pub is_nondegenerate: bool,
    pub is_locally_consistent: bool,
    pub is_ferromagnetic: bool,
    pub d2: usize,
}
