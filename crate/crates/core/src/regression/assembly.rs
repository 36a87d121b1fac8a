//! Stitching partial potentials into a global potential, and querying it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, structural, Error, Result};
use crate::graph::TwoHopGraph;
use crate::potential::{MrfPotential, VarSet};
use crate::table::{log_sum_exp, DistributionTable};

use super::node::NodeRegressionResult;

/// Which partials supply the coefficient of a monomial `x_S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyMode {
    /// Read `x_{S\{u}}` from the partial of `u = min(S)`.
    #[default]
    MinNode,
    /// Average over every available `u ∈ S` whose closed neighborhood holds `S`.
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssemblyConfig {
    pub mode: AssemblyMode,
    /// Monomials with `|coef| < floor` are dropped; 0 keeps everything.
    pub coefficient_floor: f64,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self { mode: AssemblyMode::MinNode, coefficient_floor: 0.0 }
    }
}

fn index_results<'a>(
    results: &'a [NodeRegressionResult],
    graph: &TwoHopGraph,
) -> Result<BTreeMap<usize, &'a NodeRegressionResult>> {
    let mut by_node = BTreeMap::new();
    for r in results {
        let u = r.node();
        if r.partial.n() != graph.n() || u >= graph.n() {
            return structural(format!("partial of node {u} does not match a graph on {} nodes", graph.n()));
        }
        if let Some(v) = r.partial.support().into_iter().find(|v| !graph.contains(u, *v)) {
            return structural(format!("partial of node {u} uses {v}, outside its neighborhood"));
        }
        if by_node.insert(u, r).is_some() {
            return structural(format!("two partials for node {u}"));
        }
    }
    Ok(by_node)
}

/// Assembles from the partials of `nodes` only: a monomial is kept if it
/// touches some listed node, and its coefficient comes from the smallest
/// listed node in it (or the average over the listed nodes in it).
pub fn assemble_partial_potential(
    results: &[NodeRegressionResult],
    graph: &TwoHopGraph,
    nodes: &[usize],
    cfg: &AssemblyConfig,
) -> Result<MrfPotential> {
    let by_node = index_results(results, graph)?;
    let wanted: BTreeSet<usize> = nodes.iter().copied().collect();
    if let Some(u) = wanted.iter().find(|u| !by_node.contains_key(u)) {
        return structural(format!("no partial potential for node {u}"));
    }
    let mut sums: BTreeMap<VarSet, (f64, usize)> = BTreeMap::new();
    for &u in &wanted {
        for (rest, c) in by_node[&u].partial.terms() {
            let mut s = rest.clone();
            s.push(u);
            s.sort_unstable();
            let owner = *s.iter().find(|v| wanted.contains(v)).expect("u is in S");
            if cfg.mode == AssemblyMode::MinNode && owner != u {
                continue;
            }
            let e = sums.entry(s).or_insert((0.0, 0));
            e.0 += c;
            e.1 += 1;
        }
    }
    let mut q = MrfPotential::zero(graph.n());
    for (s, (sum, count)) in sums {
        let c = match cfg.mode {
            AssemblyMode::MinNode => sum,
            AssemblyMode::Average => {
                let eligible =
                    s.iter().filter(|&&u| wanted.contains(&u) && s.iter().all(|&v| v == u || graph.contains(u, v)));
                sum / eligible.count().max(count) as f64
            }
        };
        if c.abs() >= cfg.coefficient_floor {
            q.set(&s, c)?;
        }
    }
    Ok(q)
}

/// Global potential from one partial per node.
pub fn assemble_potential(
    results: &[NodeRegressionResult],
    graph: &TwoHopGraph,
    cfg: &AssemblyConfig,
) -> Result<MrfPotential> {
    let all: Vec<usize> = (0..graph.n()).collect();
    assemble_partial_potential(results, graph, &all, cfg)
}

/// `p̃(x) = e^{q(x)} / Z`.
pub fn reconstruct_distribution(q: &MrfPotential) -> Result<DistributionTable> {
    q.distribution()
}

/// Largest query set accepted by [`conditional_query`].
pub const MAX_QUERY_NODES: usize = 20;

/// Conditional distribution over the query nodes; variable `b` of `table`
/// is `nodes[b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub nodes: Vec<usize>,
    pub table: DistributionTable,
}

/// `p(x_J | x_{N₂(J)})` from the monomials of `q` that touch `J`.
/// `boundary` must assign every node of `N₂(J)` in `q`'s support graph and
/// no node of `J`; assignments to other nodes are ignored.
pub fn conditional_query(q: &MrfPotential, query: &[usize], boundary: &BTreeMap<usize, i8>) -> Result<ConditionalTable> {
    let nodes: Vec<usize> = query.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if nodes.len() > MAX_QUERY_NODES {
        return Err(Error::Capacity { n: nodes.len(), limit: MAX_QUERY_NODES });
    }
    if nodes.iter().any(|&u| u >= q.n()) {
        return precondition(format!("query node out of range for n = {}", q.n()));
    }
    if let Some(u) = nodes.iter().find(|u| boundary.contains_key(u)) {
        return domain(format!("boundary assigns query node {u}"));
    }
    if let Some((v, s)) = boundary.iter().find(|(_, s)| **s != 1 && **s != -1) {
        return domain(format!("boundary value {s} at node {v} is not a spin"));
    }
    let needed = q.support_graph().boundary_of(&nodes);
    if let Some(v) = needed.iter().find(|v| !boundary.contains_key(v)) {
        return domain(format!("boundary misses node {v}"));
    }
    let position: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(b, &u)| (u, b)).collect();
    let mut restricted: Vec<(usize, f64)> = Vec::new();
    for (vars, c) in q.terms() {
        let mut mask = 0usize;
        let mut coef = c;
        for v in vars {
            match position.get(v) {
                Some(&b) => mask |= 1 << b,
                None => coef *= f64::from(boundary[v]),
            }
        }
        if mask != 0 {
            restricted.push((mask, coef));
        }
    }
    let log_w: Vec<f64> = (0..1usize << nodes.len())
        .map(|a| {
            restricted
                .iter()
                .map(|&(mask, c)| if (!a & mask).count_ones() % 2 == 0 { c } else { -c })
                .sum()
        })
        .collect();
    let lse = log_sum_exp(&log_w);
    let probs = log_w.iter().map(|l| (l - lse).exp()).collect();
    Ok(ConditionalTable { table: DistributionTable::from_weights(nodes.len(), probs)?, nodes })
}
