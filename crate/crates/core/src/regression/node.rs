//! Per-node regression of the partial potential `q_u` onto parity features
//! of the two-hop neighborhood.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Error, Result};
use crate::graph::TwoHopGraph;
use crate::potential::{records_to_terms, terms_to_records, PartialPotential, TermRecord};
use crate::sampling::{derive_seed, SampleSet};
use crate::table::DistributionTable;

use super::alphatron::{
    fit_population, split_indices, AlphatronConfig, AlphatronFit, FeatureMatrix, Population, EXACT_MODE_ITERATIONS,
};

/// Largest neighborhood the dense feature expansion accepts.
pub const MAX_NEIGHBORHOOD: usize = 20;

/// Subsets of the neighborhood used as features, as bit masks over the
/// sorted neighborhood, in increasing mask order (mask 0 is the constant).
pub fn feature_masks(neighborhood_size: usize, order_cap: Option<usize>) -> Vec<usize> {
    let cap = order_cap.unwrap_or(neighborhood_size);
    (0..1usize << neighborhood_size).filter(|m| m.count_ones() as usize <= cap).collect()
}

fn check_neighborhood(n: usize, u: usize, n2u: &[usize]) -> Result<Vec<usize>> {
    if u >= n || n2u.iter().any(|&v| v >= n) {
        return precondition(format!("node index out of range for n = {n}"));
    }
    if n2u.contains(&u) {
        return precondition(format!("neighborhood of {u} contains {u}"));
    }
    let mut sorted = n2u.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() > MAX_NEIGHBORHOOD {
        return Err(Error::Capacity { n: sorted.len(), limit: MAX_NEIGHBORHOOD });
    }
    Ok(sorted)
}

/// Product of the spins selected by `mask` in configuration `config`.
#[inline]
fn parity(config: usize, mask: usize) -> f64 {
    if (!config & mask).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn config_features(masks: &[usize], configs: impl Iterator<Item = usize>) -> Vec<f64> {
    configs.flat_map(|c| masks.iter().map(move |&m| parity(c, m))).collect()
}

#[inline]
fn neighborhood_key(row: &[i8], nbhd: &[usize]) -> usize {
    nbhd.iter().enumerate().fold(0, |k, (b, &i)| k | (usize::from(row[i] > 0) << b))
}

/// Feature rows `(Π_{s∈S} x_s)_{S ⊆ N₂(u)}` and targets `(x_u + 1) / 2`.
pub fn build_node_features(
    samples: &SampleSet,
    u: usize,
    n2u: &[usize],
    order_cap: Option<usize>,
) -> Result<(FeatureMatrix, Vec<f64>)> {
    let nbhd = check_neighborhood(samples.n(), u, n2u)?;
    let masks = feature_masks(nbhd.len(), order_cap);
    let data = config_features(&masks, samples.rows().map(|r| neighborhood_key(r, &nbhd)));
    let targets = samples.rows().map(|r| f64::from(r[u] + 1) / 2.0).collect();
    Ok((FeatureMatrix::new(masks.len(), data)?, targets))
}

/// Learned `q̃_u` with the holdout trace that selected it.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRegressionResult {
    pub partial: PartialPotential,
    pub holdout_curve: Vec<f64>,
    pub chosen_iteration: usize,
}

impl NodeRegressionResult {
    pub fn node(&self) -> usize {
        self.partial.node()
    }
}

#[derive(Serialize, Deserialize)]
struct NodeResultFile {
    n: usize,
    node: usize,
    terms: Vec<TermRecord>,
    chosen_iteration: usize,
    holdout_curve: Vec<f64>,
}

impl Serialize for NodeRegressionResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NodeResultFile {
            n: self.partial.n(),
            node: self.partial.node() + 1,
            terms: terms_to_records(self.partial.terms()),
            chosen_iteration: self.chosen_iteration,
            holdout_curve: self.holdout_curve.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NodeRegressionResult {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = NodeResultFile::deserialize(d)?;
        let build = || -> Result<Self> {
            if raw.node == 0 || raw.node > raw.n {
                return crate::error::structural(format!("node {} outside 1..={}", raw.node, raw.n));
            }
            let mut partial = PartialPotential::zero(raw.n, raw.node - 1);
            for (vars, c) in records_to_terms(&raw.terms)? {
                partial.set(&vars, c)?;
            }
            Ok(Self { partial, holdout_curve: raw.holdout_curve.clone(), chosen_iteration: raw.chosen_iteration })
        };
        build().map_err(|e| serde::de::Error::custom(e.to_string()))
    }
}

fn to_result(n: usize, u: usize, nbhd: &[usize], masks: &[usize], fit: AlphatronFit) -> Result<NodeRegressionResult> {
    let mut partial = PartialPotential::zero(n, u);
    for (&m, &w) in masks.iter().zip(&fit.weights) {
        let vars: Vec<usize> = (0..nbhd.len()).filter(|b| m >> b & 1 == 1).map(|b| nbhd[b]).collect();
        partial.set(&vars, w)?;
    }
    Ok(NodeRegressionResult { partial, holdout_curve: fit.holdout_curve, chosen_iteration: fit.chosen_iteration })
}

/// Aggregates shots by neighborhood configuration. Squared loss over the
/// individual 0/1 targets is preserved through the `offset` term.
fn aggregate(samples: &SampleSet, idx: &[usize], u: usize, nbhd: &[usize], masks: &[usize]) -> Population {
    let mut counts = vec![(0u64, 0u64); 1 << nbhd.len()];
    for &i in idx {
        let row = samples.row(i);
        let c = &mut counts[neighborhood_key(row, nbhd)];
        c.0 += 1;
        c.1 += u64::from(row[u] > 0);
    }
    weighted_population(
        counts.iter().map(|&(total, up)| (total as f64, if total > 0 { up as f64 / total as f64 } else { 0.0 })),
        masks,
    )
}

/// Population from per-configuration `(mass, conditional mean)` pairs.
fn weighted_population(cells: impl Iterator<Item = (f64, f64)>, masks: &[usize]) -> Population {
    let cells: Vec<(usize, f64, f64)> =
        cells.enumerate().filter(|(_, (m, _))| *m > 0.0).map(|(c, (m, t))| (c, m, t)).collect();
    let total: f64 = cells.iter().map(|c| c.1).sum();
    let data = config_features(masks, cells.iter().map(|c| c.0));
    Population {
        features: FeatureMatrix::new(masks.len(), data).expect("parity features are finite"),
        weights: cells.iter().map(|c| c.1 / total).collect(),
        targets: cells.iter().map(|c| c.2).collect(),
        offset: cells.iter().map(|&(_, m, t)| m / total * t * (1.0 - t)).sum(),
    }
}

/// Alphatron fit of `q̃_u` from shots. Shots are split into train and
/// holdout by `cfg.seed`; identical neighborhood configurations are pooled,
/// which leaves every update and holdout loss unchanged.
pub fn learn_node_potential(
    samples: &SampleSet,
    u: usize,
    n2u: &[usize],
    cfg: &AlphatronConfig,
) -> Result<NodeRegressionResult> {
    cfg.check()?;
    if samples.is_empty() {
        return domain("empty sample set");
    }
    let nbhd = check_neighborhood(samples.n(), u, n2u)?;
    let masks = feature_masks(nbhd.len(), cfg.feature_order_cap);
    let (train, hold) = split_indices(samples.count(), cfg.holdout_fraction, cfg.seed)?;
    let train = aggregate(samples, &train, u, &nbhd, &masks);
    let hold = aggregate(samples, &hold, u, &nbhd, &masks);
    let fit = fit_population(&train, &hold, cfg.lambda, cfg.iterations_for(samples.count()));
    to_result(samples.n(), u, &nbhd, &masks, fit)
}

/// Infinite-sample variant: each neighborhood configuration is weighted by
/// its exact probability and carries the exact conditional mean of
/// `(x_u + 1) / 2` as target. The reported curve is the population loss.
pub fn learn_node_potential_exact(
    table: &DistributionTable,
    u: usize,
    n2u: &[usize],
    cfg: &AlphatronConfig,
) -> Result<NodeRegressionResult> {
    cfg.check()?;
    let nbhd = check_neighborhood(table.n(), u, n2u)?;
    let masks = feature_masks(nbhd.len(), cfg.feature_order_cap);
    let mut vars = nbhd.clone();
    vars.push(u);
    let joint = table.marginal(&vars)?;
    let half = 1usize << nbhd.len();
    let cells = (0..half).map(|c| {
        let up = joint.probs()[c | half];
        let total = up + joint.probs()[c];
        (total, if total > 0.0 { up / total } else { 0.0 })
    });
    let pop = weighted_population(cells, &masks);
    let fit = fit_population(&pop, &pop, cfg.lambda, cfg.iterations.unwrap_or(EXACT_MODE_ITERATIONS));
    to_result(table.n(), u, &nbhd, &masks, fit)
}

/// Learns every listed node in parallel, node `u` using split seed
/// `derive_seed([cfg.seed, u])`.
pub fn learn_potentials(
    samples: &SampleSet,
    graph: &TwoHopGraph,
    nodes: &[usize],
    cfg: &AlphatronConfig,
) -> Result<Vec<NodeRegressionResult>> {
    if graph.n() != samples.n() {
        return precondition(format!("graph on {} nodes for {} spins", graph.n(), samples.n()));
    }
    nodes
        .par_iter()
        .map(|&u| {
            if u >= graph.n() {
                return precondition(format!("node {u} out of range"));
            }
            let node_cfg = AlphatronConfig { seed: derive_seed(&[cfg.seed, u as u64]), ..cfg.clone() };
            learn_node_potential(samples, u, graph.neighbors(u), &node_cfg)
        })
        .collect()
}

/// Exact-table counterpart of [`learn_potentials`].
pub fn learn_potentials_exact(
    table: &DistributionTable,
    graph: &TwoHopGraph,
    nodes: &[usize],
    cfg: &AlphatronConfig,
) -> Result<Vec<NodeRegressionResult>> {
    if graph.n() != table.n() {
        return precondition(format!("graph on {} nodes for {} spins", graph.n(), table.n()));
    }
    nodes
        .par_iter()
        .map(|&u| {
            if u >= graph.n() {
                return precondition(format!("node {u} out of range"));
            }
            learn_node_potential_exact(table, u, graph.neighbors(u), cfg)
        })
        .collect()
}
