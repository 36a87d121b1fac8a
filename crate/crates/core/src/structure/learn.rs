//! The two greedy per-node learners and the full-graph driver.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::graph::TwoHopGraph;

use super::stats::StatisticSource;

/// What a single-node run did, kept for the learned-graph file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLearnOutcome {
    pub node: usize,
    /// Final neighborhood, sorted.
    pub neighbors: Vec<usize>,
    /// Nodes in the order the greedy phase added them.
    pub added_order: Vec<usize>,
    /// Nodes removed by pruning.
    pub pruned: Vec<usize>,
    /// Statistic value of each added node at the time it was added.
    pub statistic_values: Vec<f64>,
    /// Set when the ferromagnetic learner ran out of supported candidates.
    #[serde(default)]
    pub early_stop: bool,
}

/// Greedy first index attaining the maximum; NaN never wins.
fn argmax(values: impl IntoIterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        if best.map_or(!v.is_nan(), |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

fn without(s: &[usize], v: usize) -> Vec<usize> {
    s.iter().copied().filter(|&x| x != v).collect()
}

/// Covariance learner for locally consistent models.
pub fn learn_structure_lc<S: StatisticSource + ?Sized>(
    source: &S,
    u: usize,
    tau: f64,
    max_set: usize,
) -> Result<NodeLearnOutcome> {
    let n = source.num_nodes();
    if u >= n {
        return precondition(format!("node {u} out of range for n = {n}"));
    }
    if !(tau > 0.0) || max_set == 0 {
        return precondition("tau must be positive and max_set at least 1");
    }
    let mut set: Vec<usize> = Vec::new();
    let mut values = Vec::new();
    while set.len() < max_set {
        let candidates: Vec<usize> = (0..n).filter(|&v| v != u && !set.contains(&v)).collect();
        if candidates.is_empty() {
            break;
        }
        let scored = candidates
            .iter()
            .map(|&v| source.cond_cov_avg(u, v, &set).map(|c| (v, c)))
            .collect::<Result<Vec<_>>>()?;
        match argmax(scored) {
            Some((v, c)) if c >= tau => {
                set.push(v);
                values.push(c);
            }
            _ => break,
        }
    }
    let mut keep = Vec::new();
    let mut pruned = Vec::new();
    for &v in &set {
        if source.cond_cov_avg(u, v, &without(&set, v))? >= tau {
            keep.push(v);
        } else {
            pruned.push(v);
        }
    }
    keep.sort_unstable();
    Ok(NodeLearnOutcome {
        node: u,
        neighbors: keep,
        added_order: set,
        pruned,
        statistic_values: values,
        early_stop: false,
    })
}

/// Influence-maximization learner for ferromagnetic models.
pub fn learn_structure_ferro<S: StatisticSource + ?Sized>(
    source: &S,
    u: usize,
    eta: f64,
    k: usize,
) -> Result<NodeLearnOutcome> {
    let n = source.num_nodes();
    if u >= n {
        return precondition(format!("node {u} out of range for n = {n}"));
    }
    if !(eta > 0.0) {
        return precondition("eta must be positive");
    }
    let mut set: Vec<usize> = Vec::new();
    let mut values = Vec::new();
    let mut early_stop = false;
    for _ in 0..k {
        let mut scored = Vec::new();
        for j in (0..n).filter(|&j| j != u && !set.contains(&j)) {
            let mut trial = set.clone();
            trial.push(j);
            if let Some(value) = source.influence(u, &trial)? {
                scored.push((j, value));
            }
        }
        match argmax(scored) {
            Some((j, value)) => {
                set.push(j);
                values.push(value);
            }
            None => {
                early_stop = (0..n).any(|j| j != u && !set.contains(&j));
                break;
            }
        }
    }
    let mut keep = Vec::new();
    let mut pruned = Vec::new();
    if !set.is_empty() {
        let full = source.influence(u, &set)?;
        for &j in &set {
            let reduced = source.influence(u, &without(&set, j))?;
            match (full, reduced) {
                (Some(a), Some(b)) if a - b >= eta => keep.push(j),
                _ => pruned.push(j),
            }
        }
    }
    keep.sort_unstable();
    Ok(NodeLearnOutcome {
        node: u,
        neighbors: keep,
        added_order: set,
        pruned,
        statistic_values: values,
        early_stop,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerConfig {
    Lc { tau: f64, max_set: usize },
    Ferro { eta: f64, k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetrization {
    /// Edge present if either endpoint selected the other.
    #[default]
    Or,
    /// Edge present only if both endpoints selected each other.
    And,
}

/// A learned graph together with every per-node outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedStructure {
    pub graph: TwoHopGraph,
    pub diagnostics: Vec<NodeLearnOutcome>,
}

pub fn learn_node<S: StatisticSource + ?Sized>(source: &S, u: usize, config: &LearnerConfig) -> Result<NodeLearnOutcome> {
    match *config {
        LearnerConfig::Lc { tau, max_set } => learn_structure_lc(source, u, tau, max_set),
        LearnerConfig::Ferro { eta, k } => learn_structure_ferro(source, u, eta, k),
    }
}

/// Runs the per-node learner for every node in parallel and symmetrizes.
pub fn learn_full_structure<S: StatisticSource + ?Sized>(
    source: &S,
    config: &LearnerConfig,
    symmetrization: Symmetrization,
) -> Result<LearnedStructure> {
    let n = source.num_nodes();
    let diagnostics = (0..n)
        .into_par_iter()
        .map(|u| learn_node(source, u, config))
        .collect::<Result<Vec<_>>>()?;
    let mut sets = vec![BTreeSet::new(); n];
    for out in &diagnostics {
        for &v in &out.neighbors {
            let mutual = diagnostics[v].neighbors.contains(&out.node);
            if symmetrization == Symmetrization::Or || mutual {
                sets[out.node].insert(v);
                sets[v].insert(out.node);
            }
        }
    }
    Ok(LearnedStructure { graph: TwoHopGraph::from_sets(n, sets), diagnostics })
}

#[derive(Serialize, Deserialize)]
struct DiagnosticRecord {
    added_order: Vec<usize>,
    pruned: Vec<usize>,
    statistic_values: Vec<f64>,
    #[serde(default)]
    early_stop: bool,
}

#[derive(Serialize, Deserialize)]
struct LearnedFile {
    n: usize,
    neighbors: Vec<Vec<usize>>,
    #[serde(default)]
    diagnostics: Vec<DiagnosticRecord>,
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}

fn zero_based(v: &[usize], n: usize) -> Result<Vec<usize>> {
    v.iter()
        .map(|&i| {
            if i == 0 || i > n {
                crate::error::structural(format!("node index {i} outside 1..={n}"))
            } else {
                Ok(i - 1)
            }
        })
        .collect()
}

impl LearnedStructure {
    /// JSON with 1-based node indices.
    pub fn to_json(&self) -> Result<String> {
        let file = LearnedFile {
            n: self.graph.n(),
            neighbors: (0..self.graph.n()).map(|i| one_based(self.graph.neighbors(i))).collect(),
            diagnostics: self
                .diagnostics
                .iter()
                .map(|d| DiagnosticRecord {
                    added_order: one_based(&d.added_order),
                    pruned: one_based(&d.pruned),
                    statistic_values: d.statistic_values.clone(),
                    early_stop: d.early_stop,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Reads either a learned-graph file or a bare graph file.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: LearnedFile = serde_json::from_str(text)?;
        let n = file.n;
        if file.neighbors.len() != n {
            return crate::error::structural(format!("{} neighbor lists for n = {n}", file.neighbors.len()));
        }
        let neighbors = file.neighbors.iter().map(|v| zero_based(v, n)).collect::<Result<Vec<_>>>()?;
        let graph = TwoHopGraph::from_neighbors(neighbors)?;
        let diagnostics = file
            .diagnostics
            .into_iter()
            .enumerate()
            .map(|(node, d)| {
                let added_order = zero_based(&d.added_order, n)?;
                let pruned = zero_based(&d.pruned, n)?;
                let mut neighbors: Vec<usize> = added_order.iter().copied().filter(|v| !pruned.contains(v)).collect();
                neighbors.sort_unstable();
                Ok(NodeLearnOutcome {
                    node,
                    neighbors,
                    added_order,
                    pruned,
                    statistic_values: d.statistic_values,
                    early_stop: d.early_stop,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { graph, diagnostics })
    }
}
