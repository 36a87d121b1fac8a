use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{structural, Error, Result};

/// Symmetric neighborhood graph over visible nodes (the two-hop graph of an
/// RBM, or a learned estimate of it).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoHopGraph {
    n: usize,
    neighbors: Vec<Vec<usize>>,
}

impl TwoHopGraph {
    pub fn empty(n: usize) -> Self {
        Self { n, neighbors: vec![Vec::new(); n] }
    }

    /// Builds a graph from per-node sets, which must already be symmetric.
    pub(crate) fn from_sets(n: usize, sets: Vec<BTreeSet<usize>>) -> Self {
        let neighbors = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let g = Self { n, neighbors };
        debug_assert!(g.check().is_ok());
        g
    }

    /// Builds and validates a graph from neighbor lists.
    pub fn from_neighbors(neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        let neighbors = neighbors
            .into_iter()
            .map(|mut v| {
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        let g = Self { n, neighbors };
        g.check()?;
        Ok(g)
    }

    /// Graph with an undirected edge for every listed pair.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut sets = vec![BTreeSet::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n || a == b {
                return structural(format!("invalid edge ({a}, {b}) for n = {n}"));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        Ok(Self::from_sets(n, sets))
    }

    fn check(&self) -> Result<()> {
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &j in nb {
                if j >= self.n || j == i {
                    return structural(format!("node {i} lists invalid neighbor {j}"));
                }
                if self.neighbors[j].binary_search(&i).is_err() {
                    return structural(format!("edge ({i}, {j}) is not symmetric"));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Maximum neighborhood size.
    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }

    /// `(∪_{u∈J} N(u)) \ J`.
    pub fn boundary_of(&self, nodes: &[usize]) -> Vec<usize> {
        let inside: BTreeSet<usize> = nodes.iter().copied().collect();
        let out: BTreeSet<usize> =
            nodes.iter().flat_map(|&u| self.neighbors[u].iter().copied()).filter(|v| !inside.contains(v)).collect();
        out.into_iter().collect()
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    neighbors: Vec<Vec<usize>>,
}

impl Serialize for TwoHopGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphFile {
            n: self.n,
            neighbors: self.neighbors.iter().map(|nb| nb.iter().map(|j| j + 1).collect()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TwoHopGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = GraphFile::deserialize(d)?;
        if raw.neighbors.len() != raw.n {
            return Err(D::Error::custom(format!("expected {} neighbor lists, got {}", raw.n, raw.neighbors.len())));
        }
        let lists = raw
            .neighbors
            .into_iter()
            .map(|nb| nb.into_iter().map(|j| j.checked_sub(1)).collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| D::Error::custom("node indices in files are 1-based"))?;
        TwoHopGraph::from_neighbors(lists).map_err(|e: Error| D::Error::custom(e.to_string()))
    }
}
