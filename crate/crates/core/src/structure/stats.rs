//! Average conditional covariance and discrete influence, both empirical
//! (from shots) and exact (from a probability table).
//!
//! Within a stratum with joint masses `a = P(++)`, `b = P(+-)`, `c = P(-+)`,
//! `d = P(--)` of `(X_u, X_v)` and total `N`, the covariance of two ±1
//! variables is `4(ad - bc)/N²`; the stratum-weighted average over `x_S` is
//! therefore `Σ_s 4(a_s d_s - b_s c_s) / N_s` (divided by the shot count for
//! empirical strata). This is algebraically the plug-in
//! `Ê[x_u x_v] - Ê[x_u] Ê[x_v]` and avoids its cancellation.

use std::collections::HashMap;

use crate::error::{domain, precondition, Result};
use crate::sampling::SampleSet;
use crate::table::DistributionTable;

/// Anything that can answer the two statistics the greedy learners query.
pub trait StatisticSource: Sync {
    fn num_nodes(&self) -> usize;

    /// `Cov^avg(u, v | S)`.
    fn cond_cov_avg(&self, u: usize, v: usize, s: &[usize]) -> Result<f64>;

    /// `I_u(S) = E[X_u | X_S = 1]`, or `None` when the conditioning event is
    /// never observed.
    fn influence(&self, u: usize, s: &[usize]) -> Result<Option<f64>>;
}

fn check_pair(n: usize, u: usize, v: usize, s: &[usize]) -> Result<()> {
    if u >= n || v >= n || s.iter().any(|&i| i >= n) {
        return precondition(format!("node index out of range for n = {n}"));
    }
    if u == v {
        return precondition("u and v must differ");
    }
    if s.contains(&u) || s.contains(&v) {
        return precondition(format!("conditioning set {s:?} contains u = {u} or v = {v}"));
    }
    Ok(())
}

fn check_influence_args(n: usize, u: usize, s: &[usize]) -> Result<()> {
    if u >= n || s.iter().any(|&i| i >= n) {
        return precondition(format!("node index out of range for n = {n}"));
    }
    if s.contains(&u) {
        return precondition(format!("conditioning set {s:?} contains u = {u}"));
    }
    Ok(())
}

/// Dense stratum keys are used up to this many conditioning variables.
const DENSE_STRATA_LIMIT: usize = 20;

#[inline]
fn stratum_key(row: &[i8], s: &[usize]) -> usize {
    s.iter().enumerate().fold(0usize, |k, (b, &i)| k | (usize::from(row[i] > 0) << b))
}

/// Joint counts `[n(++), n(+-), n(-+), n(--)]` of `(x_u, x_v)` per stratum.
fn stratum_counts(samples: &SampleSet, u: usize, v: usize, s: &[usize]) -> Vec<[u64; 4]> {
    let cell = |row: &[i8]| usize::from(row[u] < 0) * 2 + usize::from(row[v] < 0);
    if s.len() <= DENSE_STRATA_LIMIT {
        let mut counts = vec![[0u64; 4]; 1 << s.len()];
        for row in samples.rows() {
            counts[stratum_key(row, s)][cell(row)] += 1;
        }
        counts
    } else {
        let mut counts: HashMap<Vec<i8>, [u64; 4]> = HashMap::new();
        for row in samples.rows() {
            let key = s.iter().map(|&i| row[i]).collect();
            counts.entry(key).or_default()[cell(row)] += 1;
        }
        counts.into_values().collect()
    }
}

/// Empirical `Ĉov^avg(u, v | S)`. Strata never observed carry no weight and
/// single-shot strata contribute zero.
pub fn empirical_cond_covariance_avg(samples: &SampleSet, u: usize, v: usize, s: &[usize]) -> Result<f64> {
    if samples.is_empty() {
        return domain("empty sample set");
    }
    check_pair(samples.n(), u, v, s)?;
    let total = samples.count() as f64;
    let sum: f64 = stratum_counts(samples, u, v, s)
        .into_iter()
        .filter(|c| c.iter().sum::<u64>() > 1)
        .map(|[a, b, c, d]| {
            let det = (a as i128) * (d as i128) - (b as i128) * (c as i128);
            4.0 * det as f64 / (a + b + c + d) as f64
        })
        .sum();
    Ok(sum / total)
}

/// Empirical influence and the number of shots with `X_S` all ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalInfluence {
    /// `None` when no shot satisfies the conditioning event.
    pub value: Option<f64>,
    pub support_count: usize,
}

/// `Î_u(S) = 2 p̂(X_{S∪{u}} = 1) / p̂(X_S = 1) - 1`.
pub fn empirical_influence(samples: &SampleSet, u: usize, s: &[usize]) -> Result<EmpiricalInfluence> {
    if samples.is_empty() {
        return domain("empty sample set");
    }
    check_influence_args(samples.n(), u, s)?;
    let mut support = 0usize;
    let mut with_u = 0usize;
    for row in samples.rows() {
        if s.iter().all(|&i| row[i] > 0) {
            support += 1;
            if row[u] > 0 {
                with_u += 1;
            }
        }
    }
    let value = (support > 0).then(|| 2.0 * with_u as f64 / support as f64 - 1.0);
    Ok(EmpiricalInfluence { value, support_count: support })
}

#[inline]
fn table_key(k: usize, s: &[usize]) -> usize {
    s.iter().enumerate().fold(0usize, |acc, (b, &i)| acc | (((k >> i) & 1) << b))
}

/// Exact `Cov^avg(u, v | S)` by enumeration of the table.
pub fn exact_cond_covariance_avg(table: &DistributionTable, u: usize, v: usize, s: &[usize]) -> Result<f64> {
    check_pair(table.n(), u, v, s)?;
    let mut masses = vec![[0.0f64; 4]; 1 << s.len()];
    for (k, p) in table.probs().iter().enumerate() {
        let cell = usize::from((k >> u) & 1 == 0) * 2 + usize::from((k >> v) & 1 == 0);
        masses[table_key(k, s)][cell] += p;
    }
    Ok(masses
        .into_iter()
        .map(|[a, b, c, d]| {
            let total = a + b + c + d;
            if total > 0.0 {
                4.0 * (a * d - b * c) / total
            } else {
                0.0
            }
        })
        .sum())
}

/// Exact `I_u(S)`; errors when `P(X_S = 1) = 0`.
pub fn exact_influence(table: &DistributionTable, u: usize, s: &[usize]) -> Result<f64> {
    check_influence_args(table.n(), u, s)?;
    let mask = s.iter().fold(0usize, |m, &i| m | (1 << i));
    let cond = table.mass_where(mask, mask);
    if cond <= 0.0 {
        return domain(format!("P(X_S = 1) is zero for S = {s:?}"));
    }
    let joint = table.mass_where(mask | (1 << u), mask | (1 << u));
    Ok(2.0 * joint / cond - 1.0)
}

impl StatisticSource for SampleSet {
    fn num_nodes(&self) -> usize {
        self.n()
    }

    fn cond_cov_avg(&self, u: usize, v: usize, s: &[usize]) -> Result<f64> {
        empirical_cond_covariance_avg(self, u, v, s)
    }

    fn influence(&self, u: usize, s: &[usize]) -> Result<Option<f64>> {
        Ok(empirical_influence(self, u, s)?.value)
    }
}

/// Infinite-sample mode: statistics read off the exact table.
impl StatisticSource for DistributionTable {
    fn num_nodes(&self) -> usize {
        self.n()
    }

    fn cond_cov_avg(&self, u: usize, v: usize, s: &[usize]) -> Result<f64> {
        exact_cond_covariance_avg(self, u, v, s)
    }

    fn influence(&self, u: usize, s: &[usize]) -> Result<Option<f64>> {
        check_influence_args(self.n(), u, s)?;
        let mask = s.iter().fold(0usize, |m, &i| m | (1 << i));
        if self.mass_where(mask, mask) <= 0.0 {
            return Ok(None);
        }
        exact_influence(self, u, s).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_correlated_pair() {
        let s = SampleSet::from_rows(&[vec![1, 1], vec![-1, -1]], 0).unwrap();
        assert_eq!(empirical_cond_covariance_avg(&s, 0, 1, &[]).unwrap(), 1.0);
    }

    #[test]
    fn covariance_preconditions() {
        let s = SampleSet::from_rows(&[vec![1, 1, 1]], 0).unwrap();
        assert!(empirical_cond_covariance_avg(&s, 0, 1, &[1]).is_err());
        assert!(empirical_cond_covariance_avg(&s, 0, 0, &[]).is_err());
        assert!(empirical_cond_covariance_avg(&s, 0, 3, &[]).is_err());
        let t = DistributionTable::uniform(3).unwrap();
        assert!(exact_cond_covariance_avg(&t, 0, 1, &[0]).is_err());
    }

    #[test]
    fn single_shot_strata_contribute_zero() {
        let s = SampleSet::from_rows(&[vec![1, 1, 1], vec![-1, -1, -1]], 0).unwrap();
        assert_eq!(empirical_cond_covariance_avg(&s, 0, 1, &[2]).unwrap(), 0.0);
    }

    #[test]
    fn influence_hand_computations() {
        let all_up = SampleSet::from_rows(&[vec![1, -1], vec![1, 1]], 0).unwrap();
        assert_eq!(empirical_influence(&all_up, 0, &[]).unwrap().value, Some(1.0));
        let s = SampleSet::from_rows(&[vec![1, 1], vec![-1, 1]], 0).unwrap();
        let inf = empirical_influence(&s, 0, &[1]).unwrap();
        assert_eq!(inf.value, Some(0.0));
        assert_eq!(inf.support_count, 2);
    }

    #[test]
    fn influence_without_support() {
        let s = SampleSet::from_rows(&[vec![1, -1], vec![-1, -1]], 0).unwrap();
        let inf = empirical_influence(&s, 0, &[1]).unwrap();
        assert_eq!(inf, EmpiricalInfluence { value: None, support_count: 0 });
        let t = DistributionTable::point_mass(&[1, -1]).unwrap();
        assert!(exact_influence(&t, 0, &[1]).is_err());
        assert_eq!(t.influence(0, &[1]).unwrap(), None);
    }

    #[test]
    fn point_mass_influence_is_one() {
        let t = DistributionTable::point_mass(&[1, 1, 1]).unwrap();
        for s in [vec![], vec![1], vec![1, 2]] {
            assert_eq!(exact_influence(&t, 0, &s).unwrap(), 1.0);
        }
    }

    #[test]
    fn empirical_matches_exact_on_empirical_table() {
        let s = SampleSet::from_rows(
            &[vec![1, 1, -1], vec![1, -1, -1], vec![-1, -1, 1], vec![1, 1, 1], vec![-1, 1, 1], vec![1, 1, -1]],
            0,
        )
        .unwrap();
        let t = s.empirical_table().unwrap();
        for cond in [vec![], vec![2]] {
            let a = empirical_cond_covariance_avg(&s, 0, 1, &cond).unwrap();
            let b = exact_cond_covariance_avg(&t, 0, 1, &cond).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            let a = empirical_influence(&s, 0, &cond).unwrap().value.unwrap();
            let b = exact_influence(&t, 0, &cond).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}
