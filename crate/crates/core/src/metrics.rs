//! Distances between magnitude distributions and structure scores.

use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Result};
use crate::graph::TwoHopGraph;
use crate::table::DistributionTable;

fn same_n(a: &DistributionTable, b: &DistributionTable) -> Result<()> {
    if a.n() != b.n() {
        return domain(format!("tables over {} and {} variables", a.n(), b.n()));
    }
    Ok(())
}

/// Entrywise `L_p` distance; `p = ∞` gives the largest absolute difference.
pub fn lp_distance(a: &DistributionTable, b: &DistributionTable, p: f64) -> Result<f64> {
    same_n(a, b)?;
    if !(p >= 1.0) {
        return precondition(format!("p = {p} must be at least 1"));
    }
    let diffs = a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs());
    Ok(if p.is_infinite() {
        diffs.fold(0.0, f64::max)
    } else if p == 1.0 {
        diffs.sum()
    } else {
        diffs.map(|d| d.powf(p)).sum::<f64>().powf(1.0 / p)
    })
}

/// Bhattacharyya overlap `Σ_x √(a(x) b(x))`, i.e. `⟨ψ_a|ψ_b⟩` for real
/// non-negative amplitudes.
pub fn overlap(a: &DistributionTable, b: &DistributionTable) -> Result<f64> {
    same_n(a, b)?;
    let s: f64 = a.probs().iter().zip(b.probs()).map(|(x, y)| (x * y).sqrt()).sum();
    Ok(s.min(1.0))
}

/// Squared overlap `|⟨ψ_a|ψ_b⟩|²`.
pub fn fidelity(a: &DistributionTable, b: &DistributionTable) -> Result<f64> {
    Ok(overlap(a, b)?.powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureScore {
    pub exact_match: bool,
    pub precision: f64,
    pub recall: f64,
}

/// Edge-set comparison. An empty prediction has precision 1; an empty truth
/// has recall 1.
pub fn structure_score(learned: &TwoHopGraph, truth: &TwoHopGraph) -> Result<StructureScore> {
    if learned.n() != truth.n() {
        return domain(format!("graphs over {} and {} nodes", learned.n(), truth.n()));
    }
    let predicted = learned.edges();
    let actual = truth.edges();
    let hits = predicted.iter().filter(|(i, j)| truth.contains(*i, *j)).count();
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(StructureScore {
        exact_match: predicted == actual,
        precision: ratio(hits, predicted.len()),
        recall: ratio(hits, actual.len()),
    })
}

/// Summary of a learned distribution (and optionally a learned graph)
/// against the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub l1: f64,
    pub lp: f64,
    #[serde(with = "crate::pnorm")]
    pub p_norm: f64,
    pub linf: f64,
    pub fidelity: f64,
    /// Unsquared overlap, reported next to the squared fidelity.
    pub overlap: f64,
    pub structure_exact_match: Option<bool>,
    pub edge_precision: Option<f64>,
    pub edge_recall: Option<f64>,
}

pub fn evaluate(
    learned: &DistributionTable,
    truth: &DistributionTable,
    p_norm: f64,
    graphs: Option<(&TwoHopGraph, &TwoHopGraph)>,
) -> Result<EvalReport> {
    let score = graphs.map(|(l, t)| structure_score(l, t)).transpose()?;
    let ov = overlap(learned, truth)?;
    Ok(EvalReport {
        l1: lp_distance(learned, truth, 1.0)?,
        lp: lp_distance(learned, truth, p_norm)?,
        p_norm,
        linf: lp_distance(learned, truth, f64::INFINITY)?,
        fidelity: ov * ov,
        overlap: ov,
        structure_exact_match: score.map(|s| s.exact_match),
        edge_precision: score.map(|s| s.precision),
        edge_recall: score.map(|s| s.recall),
    })
}
