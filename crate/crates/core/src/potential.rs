//! Multilinear potentials of Markov random fields on `{±1}^n`.
//!
//! A potential is `q(x) = Σ_I q_I Π_{i∈I} x_i` over nonempty variable subsets
//! `I`. The constant term is never stored: it is absorbed by the partition
//! function. [`PartialPotential`] is the discrete derivative `∂_u q` and is the
//! one object that carries a constant.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, structural, Error, Result};
use crate::graph::TwoHopGraph;
use crate::table::{check_enumerable, DistributionTable, DEFAULT_ENUMERATION_LIMIT};

/// Sorted, duplicate-free list of 0-based variable indices.
pub type VarSet = Vec<usize>;

fn normalize_vars(n: usize, vars: &[usize]) -> Result<VarSet> {
    let mut v = vars.to_vec();
    v.sort_unstable();
    if v.windows(2).any(|w| w[0] == w[1]) {
        return domain(format!("variable set {vars:?} repeats an index"));
    }
    if let Some(&last) = v.last() {
        if last >= n {
            return domain(format!("variable {last} out of range for n = {n}"));
        }
    }
    Ok(v)
}

fn check_spins(n: usize, x: &[i8]) -> Result<()> {
    if x.len() != n {
        return domain(format!("spin vector has length {}, expected {n}", x.len()));
    }
    if let Some((i, s)) = x.iter().enumerate().find(|(_, s)| **s != 1 && **s != -1) {
        return domain(format!("spin value {s} at position {i} is not ±1"));
    }
    Ok(())
}

fn monomial(vars: &[usize], x: &[i8]) -> f64 {
    let neg = vars.iter().filter(|&&i| x[i] < 0).count();
    if neg % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn mask_of(vars: &[usize]) -> usize {
    vars.iter().fold(0usize, |m, &i| m | (1 << i))
}

/// Value of the monomial with variable mask `mask` at configuration `index`.
#[inline]
fn monomial_at_index(mask: usize, index: usize) -> f64 {
    // A clear bit is spin -1, so the sign is the parity of the clear bits.
    let neg = (mask & !index).count_ones();
    if neg % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Multilinear potential without a constant term.
#[derive(Debug, Clone, PartialEq)]
pub struct MrfPotential {
    n: usize,
    terms: BTreeMap<VarSet, f64>,
}

impl MrfPotential {
    /// Zero potential on `n` variables.
    pub fn zero(n: usize) -> Self {
        Self { n, terms: BTreeMap::new() }
    }

    /// Builds a potential, rejecting empty or repeated subsets.
    pub fn from_terms<I, V>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (V, f64)>,
        V: AsRef<[usize]>,
    {
        let mut q = Self::zero(n);
        for (vars, coef) in terms {
            let key = normalize_vars(n, vars.as_ref())?;
            if key.is_empty() {
                return domain("the empty subset is not a valid potential term");
            }
            if !coef.is_finite() {
                return domain(format!("coefficient of {key:?} is not finite"));
            }
            if q.terms.insert(key.clone(), coef).is_some() {
                return domain(format!("subset {key:?} appears twice"));
            }
        }
        Ok(q)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sets (or overwrites) the coefficient of `vars`.
    pub fn set(&mut self, vars: &[usize], coef: f64) -> Result<()> {
        let key = normalize_vars(self.n, vars)?;
        if key.is_empty() {
            return domain("the empty subset is not a valid potential term");
        }
        self.terms.insert(key, coef);
        Ok(())
    }

    /// Coefficient of `vars`, zero when absent.
    pub fn coef(&self, vars: &[usize]) -> f64 {
        let mut key = vars.to_vec();
        key.sort_unstable();
        self.terms.get(&key).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&VarSet, f64)> {
        self.terms.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest subset size among stored terms.
    pub fn order(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Copy without terms whose magnitude is at most `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            n: self.n,
            terms: self.terms.iter().filter(|(_, c)| c.abs() > tol).map(|(k, c)| (k.clone(), *c)).collect(),
        }
    }

    /// `q(x) = Σ_I q_I x_I`.
    pub fn eval(&self, x: &[i8]) -> Result<f64> {
        check_spins(self.n, x)?;
        Ok(self.terms.iter().map(|(vars, c)| c * monomial(vars, x)).sum())
    }

    /// Discrete derivative with respect to `u`: every term `q_I` with `u ∈ I`
    /// contributes `q_I x_{I\{u}}`.
    pub fn partial(&self, u: usize) -> Result<PartialPotential> {
        if u >= self.n {
            return precondition(format!("node {u} out of range for n = {}", self.n));
        }
        let mut out = PartialPotential::zero(self.n, u);
        for (vars, c) in self.terms.iter().filter(|(v, _)| v.contains(&u)) {
            let rest: VarSet = vars.iter().copied().filter(|&i| i != u).collect();
            out.set(&rest, *c)?;
        }
        Ok(out)
    }

    /// Log-weights `q(x)` for every configuration index.
    pub fn log_weights(&self) -> Result<Vec<f64>> {
        check_enumerable(self.n, DEFAULT_ENUMERATION_LIMIT)?;
        let masked: Vec<(usize, f64)> = self.terms.iter().map(|(v, c)| (mask_of(v), *c)).collect();
        Ok((0..1usize << self.n)
            .map(|k| masked.iter().map(|&(m, c)| c * monomial_at_index(m, k)).sum())
            .collect())
    }

    /// `p(x) = exp(q(x)) / Z`, evaluated in log space.
    pub fn distribution(&self) -> Result<DistributionTable> {
        DistributionTable::from_log_weights(self.n, &self.log_weights()?)
    }

    /// Graph connecting every pair of variables that share a term.
    pub fn support_graph(&self) -> TwoHopGraph {
        let mut nbrs = vec![BTreeSet::new(); self.n];
        for vars in self.terms.keys() {
            for &a in vars {
                for &b in vars {
                    if a != b {
                        nbrs[a].insert(b);
                    }
                }
            }
        }
        TwoHopGraph::from_sets(self.n, nbrs)
    }

    /// Multilinear expansion of `ln p`: `q_I = 2^{-n} Σ_x x_I ln p(x)` for all
    /// nonempty `I`, via a fast Walsh–Hadamard transform. Coefficients that
    /// come out exactly zero are not stored.
    pub fn induced_from_distribution(table: &DistributionTable) -> Result<Self> {
        let n = table.n();
        check_enumerable(n, DEFAULT_ENUMERATION_LIMIT)?;
        if let Some((k, _)) = table.probs().iter().enumerate().find(|(_, p)| **p <= 0.0) {
            return domain(format!("configuration {k} has zero probability; log undefined"));
        }
        let mut coeffs: Vec<f64> = table.probs().iter().map(|p| p.ln()).collect();
        walsh_hadamard_in_place(&mut coeffs);
        let scale = 1.0 / (1usize << n) as f64;
        let mut q = Self::zero(n);
        for (mask, c) in coeffs.into_iter().enumerate().skip(1) {
            // The transform uses (-1)^{<I,k>} with a set bit giving -1, while
            // x_i = +1 on a set bit; the two differ by (-1)^{|I|}.
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            let v = sign * c * scale;
            if v != 0.0 {
                let vars: VarSet = (0..n).filter(|b| (mask >> b) & 1 == 1).collect();
                q.terms.insert(vars, v);
            }
        }
        Ok(q)
    }
}

/// Unnormalized in-place Walsh–Hadamard transform; `data.len()` must be a
/// power of two.
pub fn walsh_hadamard_in_place(data: &mut [f64]) {
    let len = data.len();
    debug_assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        for block in (0..len).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (data[i], data[i + h]);
                data[i] = a + b;
                data[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Partial potential `q_u(x_{≠u})` of node `u`; the only potential that may
/// carry an empty-subset (constant) coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialPotential {
    n: usize,
    node: usize,
    terms: BTreeMap<VarSet, f64>,
}

impl PartialPotential {
    pub fn zero(n: usize, node: usize) -> Self {
        Self { n, node, terms: BTreeMap::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node(&self) -> usize {
        self.node
    }

    /// Sets the coefficient of `vars` (may be empty, must not contain the node).
    pub fn set(&mut self, vars: &[usize], coef: f64) -> Result<()> {
        let key = normalize_vars(self.n, vars)?;
        if key.contains(&self.node) {
            return domain(format!("partial potential of node {} cannot contain it", self.node));
        }
        self.terms.insert(key, coef);
        Ok(())
    }

    pub fn coef(&self, vars: &[usize]) -> f64 {
        let mut key = vars.to_vec();
        key.sort_unstable();
        self.terms.get(&key).copied().unwrap_or(0.0)
    }

    pub fn constant(&self) -> f64 {
        self.coef(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = (&VarSet, f64)> {
        self.terms.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Variables appearing in any term.
    pub fn support(&self) -> BTreeSet<usize> {
        self.terms.keys().flatten().copied().collect()
    }

    /// Evaluates at a full spin vector; the node's own entry is ignored.
    pub fn eval(&self, x: &[i8]) -> Result<f64> {
        check_spins(self.n, x)?;
        Ok(self.terms.iter().map(|(vars, c)| c * monomial(vars, x)).sum())
    }

    /// Euclidean distance between coefficient vectors (absent terms are zero).
    pub fn coef_distance(&self, other: &PartialPotential) -> f64 {
        let keys: BTreeSet<&VarSet> = self.terms.keys().chain(other.terms.keys()).collect();
        keys.into_iter()
            .map(|k| {
                let d = self.terms.get(k).unwrap_or(&0.0) - other.terms.get(k).unwrap_or(&0.0);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct TermRecord {
    pub vars: Vec<usize>,
    pub coef: f64,
}

pub(crate) fn terms_to_records<'a>(terms: impl Iterator<Item = (&'a VarSet, f64)>) -> Vec<TermRecord> {
    terms.map(|(v, c)| TermRecord { vars: v.iter().map(|i| i + 1).collect(), coef: c }).collect()
}

pub(crate) fn records_to_terms(records: &[TermRecord]) -> Result<Vec<(VarSet, f64)>> {
    records
        .iter()
        .map(|r| {
            if r.vars.contains(&0) {
                return structural("variable indices in files are 1-based");
            }
            if r.vars.windows(2).any(|w| w[0] >= w[1]) {
                return structural(format!("term variables {:?} are not sorted and unique", r.vars));
            }
            Ok((r.vars.iter().map(|i| i - 1).collect(), r.coef))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PotentialFile {
    n: usize,
    terms: Vec<TermRecord>,
}

impl Serialize for MrfPotential {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PotentialFile { n: self.n, terms: terms_to_records(self.terms()) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MrfPotential {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PotentialFile::deserialize(d)?;
        let parsed = records_to_terms(&raw.terms)
            .and_then(|terms| MrfPotential::from_terms(raw.n, terms))
            .map_err(|e: Error| serde::de::Error::custom(e.to_string()))?;
        Ok(parsed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_monomial_and_sign_product() {
        let q = MrfPotential::from_terms(1, [(vec![0], 0.7)]).unwrap();
        assert_eq!(q.eval(&[1]).unwrap(), 0.7);
        let q = MrfPotential::from_terms(2, [(vec![0, 1], 0.3)]).unwrap();
        assert_eq!(q.eval(&[1, -1]).unwrap(), -0.3);
    }

    #[test]
    fn eval_rejects_non_spins() {
        let q = MrfPotential::zero(2);
        assert!(matches!(q.eval(&[1, 0]), Err(Error::Domain(_))));
        assert!(matches!(q.eval(&[1]), Err(Error::Domain(_))));
    }

    #[test]
    fn construction_rejects_duplicates_and_empty() {
        assert!(MrfPotential::from_terms(2, [(vec![0, 1], 1.0), (vec![1, 0], 2.0)]).is_err());
        assert!(MrfPotential::from_terms(2, [(Vec::<usize>::new(), 1.0)]).is_err());
        assert!(MrfPotential::from_terms(2, [(vec![2], 1.0)]).is_err());
    }

    #[test]
    fn partial_unrolls_definition() {
        let (a, b, c) = (0.4, -0.9, 1.3);
        let q = MrfPotential::from_terms(3, [(vec![0], a), (vec![0, 1], b), (vec![1, 2], c)]).unwrap();
        let p = q.partial(0).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.constant(), a);
        assert_eq!(p.coef(&[1]), b);
        let none = MrfPotential::from_terms(3, [(vec![1, 2], c)]).unwrap().partial(0).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn zero_potential_is_uniform() {
        let t = MrfPotential::zero(3).distribution().unwrap();
        assert!(t.probs().iter().all(|p| (p - 0.125).abs() < 1e-15));
    }

    #[test]
    fn single_field_is_logistic() {
        let b0 = 0.37;
        let t = MrfPotential::from_terms(1, [(vec![0], b0)]).unwrap().distribution().unwrap();
        let sigma = 1.0 / (1.0 + (-2.0 * b0).exp());
        assert!((t.prob(&[1]).unwrap() - sigma).abs() < 1e-15);
    }

    #[test]
    fn uniform_table_induces_zero_potential() {
        let q = MrfPotential::induced_from_distribution(&DistributionTable::uniform(4).unwrap()).unwrap();
        assert!(q.terms().all(|(_, c)| c.abs() < 1e-15));
    }

    #[test]
    fn induced_rejects_zero_probability() {
        let t = DistributionTable::point_mass(&[1, 1]).unwrap();
        assert!(matches!(MrfPotential::induced_from_distribution(&t), Err(Error::Domain(_))));
    }

    #[test]
    fn support_graph_links_term_members() {
        let q = MrfPotential::from_terms(4, [(vec![0, 2], 1.0), (vec![3], 1.0)]).unwrap();
        let g = q.support_graph();
        assert_eq!(g.neighbors(0), &[2]);
        assert!(g.neighbors(3).is_empty());
    }

    #[test]
    fn json_uses_one_based_indices() {
        let q = MrfPotential::from_terms(3, [(vec![0, 2], 0.1)]).unwrap();
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"n":3,"terms":[{"vars":[1,3],"coef":0.1}]}"#);
        let back: MrfPotential = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<MrfPotential>(r#"{"n":3,"terms":[{"vars":[0],"coef":1}]}"#).is_err());
    }
}
