//! Exact rational probability tables for infinite-sample runs.
//!
//! The smallest covariance thresholds of the class (`½α²e^{-12β}` near
//! `β = 3`) sit below the rounding noise of an `f64` table, and the matching
//! perturbation budgets are below its resolution. Here every configuration
//! weight is the exact product of its `f64` factors (`e^{h_i x_i}` and
//! `2cosh(a_k)`), held as a big integer over a common power-of-two scale, and
//! all statistics are evaluated in rational arithmetic. Conditional
//! independences implied by the factorization therefore hold exactly.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{domain, precondition, Result};
use crate::model::RbmModel;
use crate::sampling::rng_from_seed;
use crate::structure::StatisticSource;
use crate::table::{check_enumerable, spin, DistributionTable, DEFAULT_ENUMERATION_LIMIT};

/// `p(x) = weights[x] / total`, exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTable {
    n: usize,
    weights: Vec<BigInt>,
    total: BigInt,
}

/// `f = mantissa · 2^exponent` for finite `f`.
fn dyadic(f: f64) -> (BigInt, i64) {
    let (mantissa, exponent, sign) = f.integer_decode();
    (BigInt::from(mantissa) * i64::from(sign), i64::from(exponent))
}

/// Scales dyadic values to integers over the smallest common exponent.
fn align(values: Vec<(BigInt, i64)>) -> Vec<BigInt> {
    let min = values.iter().filter(|(m, _)| !m.is_zero()).map(|v| v.1).min().unwrap_or(0);
    values.into_iter().map(|(m, e)| if m.is_zero() { m } else { m << (e - min) as usize }).collect()
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl ExactTable {
    fn from_weights(n: usize, weights: Vec<BigInt>) -> Result<Self> {
        if weights.iter().any(Signed::is_negative) {
            return domain("weights must be non-negative");
        }
        let total: BigInt = weights.iter().sum();
        if total.is_zero() {
            return domain("weights must not all vanish");
        }
        Ok(Self { n, weights, total })
    }

    /// Visible marginal of `model` with weights
    /// `Π_i e^{h_i x_i} Π_k 2cosh(Σ_i J_ik x_i + g_k)`, each factor rounded
    /// once to `f64` and then multiplied exactly.
    pub fn from_model(model: &RbmModel) -> Result<Self> {
        let n = model.n();
        check_enumerable(n, DEFAULT_ENUMERATION_LIMIT)?;
        let field_terms: Vec<[(BigInt, i64); 2]> =
            model.visible_fields().iter().map(|&h| [dyadic((-h).exp()), dyadic(h.exp())]).collect();
        let raw = (0..1usize << n)
            .map(|k| {
                let mut m = BigInt::from(1);
                let mut e = 0i64;
                for (i, t) in field_terms.iter().enumerate() {
                    let (fm, fe) = &t[(k >> i) & 1];
                    m *= fm;
                    e += fe;
                }
                for (j, &g) in model.hidden_fields().iter().enumerate() {
                    let a = (0..n).fold(g, |acc, i| acc + model.weight(i, j) * f64::from(spin(k, i)));
                    let (fm, fe) = dyadic(a.exp() + (-a).exp());
                    m *= fm;
                    e += fe;
                }
                (m, e)
            })
            .collect();
        Self::from_weights(n, align(raw))
    }

    /// Exact lift of an `f64` table.
    pub fn from_table(table: &DistributionTable) -> Result<Self> {
        Self::from_weights(table.n(), align(table.probs().iter().map(|&p| dyadic(p)).collect()))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prob(&self, index: usize) -> BigRational {
        BigRational::new(self.weights[index].clone(), self.total.clone())
    }

    /// Probabilities rounded to `f64`.
    pub fn to_table(&self) -> Result<DistributionTable> {
        DistributionTable::from_weights(self.n, (0..self.weights.len()).map(|k| to_f64(&self.prob(k))).collect())
    }

    /// Largest absolute entrywise difference, evaluated exactly and rounded.
    pub fn linf_distance(&self, other: &ExactTable) -> Result<f64> {
        if self.n != other.n {
            return domain(format!("tables over {} and {} variables", self.n, other.n));
        }
        let max = (0..self.weights.len())
            .map(|k| (self.prob(k) - other.prob(k)).abs())
            .max()
            .unwrap_or_else(BigRational::zero);
        Ok(to_f64(&max))
    }

    /// Adds independent uniform noise in `[-eps_inf, eps_inf]` to every
    /// probability, clips at zero and renormalizes, all exactly. Uses the
    /// same random stream as [`crate::sampling::perturb_linf`]. Returns the
    /// achieved `L_∞` distance.
    pub fn perturb_linf(&self, eps_inf: f64, seed: u64) -> Result<(ExactTable, f64)> {
        if !(eps_inf >= 0.0 && eps_inf.is_finite()) {
            return precondition("eps_inf must be finite and non-negative");
        }
        if eps_inf == 0.0 {
            return Ok((self.clone(), 0.0));
        }
        let mut rng = rng_from_seed(seed);
        // W + Z·δ is proportional to p + δ; both terms are dyadic.
        let raw = self
            .weights
            .iter()
            .map(|w| {
                let (dm, de) = dyadic(rng.gen_range(-eps_inf..=eps_inf));
                let (shift, scaled_w) = if de < 0 { (0, w << (-de) as usize) } else { (de as usize, w.clone()) };
                let v = scaled_w + ((&self.total * dm) << shift);
                let v = if v.is_negative() { BigInt::zero() } else { v };
                (v, de.min(0))
            })
            .collect();
        let out = Self::from_weights(self.n, align(raw))?;
        let achieved = self.linf_distance(&out)?;
        Ok((out, achieved))
    }

    fn mass_where(&self, mask: usize, values: usize) -> BigInt {
        self.weights.iter().enumerate().filter(|(k, _)| k & mask == values & mask).map(|(_, w)| w).sum()
    }
}

fn check_nodes(n: usize, nodes: &[usize], s: &[usize]) -> Result<()> {
    if nodes.iter().chain(s).any(|&i| i >= n) {
        return precondition(format!("node index out of range for n = {n}"));
    }
    if nodes.iter().any(|u| s.contains(u)) || (nodes.len() == 2 && nodes[0] == nodes[1]) {
        return precondition("query nodes must be distinct and outside the conditioning set");
    }
    Ok(())
}

impl StatisticSource for ExactTable {
    fn num_nodes(&self) -> usize {
        self.n
    }

    fn cond_cov_avg(&self, u: usize, v: usize, s: &[usize]) -> Result<f64> {
        check_nodes(self.n, &[u, v], s)?;
        let mut masses = vec![[BigInt::zero(), BigInt::zero(), BigInt::zero(), BigInt::zero()]; 1 << s.len()];
        for (k, w) in self.weights.iter().enumerate() {
            let key = s.iter().enumerate().fold(0usize, |acc, (b, &i)| acc | (((k >> i) & 1) << b));
            let cell = usize::from((k >> u) & 1 == 0) * 2 + usize::from((k >> v) & 1 == 0);
            masses[key][cell] += w;
        }
        let sum = masses.into_iter().fold(BigRational::zero(), |acc, [a, b, c, d]| {
            let stratum = &a + &b + &c + &d;
            if stratum.is_zero() {
                return acc;
            }
            let det = a * d - b * c;
            if det.is_zero() {
                return acc;
            }
            acc + BigRational::new(det * 4, stratum * &self.total)
        });
        Ok(to_f64(&sum))
    }

    fn influence(&self, u: usize, s: &[usize]) -> Result<Option<f64>> {
        check_nodes(self.n, &[u], s)?;
        let mask = s.iter().fold(0usize, |m, &i| m | (1 << i));
        let cond = self.mass_where(mask, mask);
        if cond.is_zero() {
            return Ok(None);
        }
        let with_u = mask | (1 << u);
        let value = BigRational::new(self.mass_where(with_u, with_u) * 2 - &cond, cond);
        Ok(Some(to_f64(&value)))
    }
}
