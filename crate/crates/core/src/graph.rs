//! Instance-time and summary causal graphs.
//!
//! An instance graph lives on the time indices of one sequence; all its
//! edges point forward in time, so it is acyclic by construction. The
//! summary graph is its projection onto event types and may contain
//! cycles and self-loops. Both carry the set of pairs that were actually
//! testable, so scoring can be restricted to a common support.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A weighted directed edge between two time indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: u32,
    pub dst: u32,
    pub weight: f64,
}

/// The ordered pairs `(j, i)` a discovery run scored. Kept explicit so
/// graphs from perturbed sequences can be mapped back onto original
/// indices and intersected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairMask {
    pairs: Vec<(u32, u32)>,
}

impl PairMask {
    pub fn from_pairs(mut pairs: Vec<(u32, u32)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        PairMask { pairs }
    }

    /// All pairs `context <= j < i < len` with `i - j <= max_lag`.
    pub fn banded(context: usize, len: usize, max_lag: Option<usize>) -> Self {
        let mut pairs = Vec::new();
        for j in context..len.saturating_sub(1) {
            let hi = match max_lag {
                Some(m) => (j + m).min(len - 1),
                None => len - 1,
            };
            for i in (j + 1)..=hi {
                pairs.push((j as u32, i as u32));
            }
        }
        PairMask { pairs }
    }

    pub fn empty() -> Self {
        PairMask { pairs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, src: u32, dst: u32) -> bool {
        self.pairs.binary_search(&(src, dst)).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn intersect(&self, other: &PairMask) -> PairMask {
        let pairs = self.pairs.iter().copied().filter(|&(j, i)| other.contains(j, i)).collect();
        PairMask { pairs }
    }

    /// Maps local indices through `kept[local] = original`.
    pub fn remap(&self, kept: &[u32]) -> PairMask {
        let pairs = self
            .pairs
            .iter()
            .map(|&(j, i)| (kept[j as usize], kept[i as usize]))
            .collect();
        PairMask::from_pairs(pairs)
    }
}

/// Time-unrolled causal graph of one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceGraph {
    pub n_nodes: usize,
    /// Sorted by (src, dst); every edge satisfies src < dst.
    pub edges: Vec<Edge>,
    pub mask: PairMask,
}

impl InstanceGraph {
    pub fn new(n_nodes: usize, mut edges: Vec<Edge>, mask: PairMask) -> Result<Self> {
        edges.sort_by_key(|e| (e.src, e.dst));
        for e in &edges {
            if e.src >= e.dst {
                return Err(Error::input(format!(
                    "edge {} -> {} violates temporal precedence",
                    e.src, e.dst
                )));
            }
            if e.dst as usize >= n_nodes {
                return Err(Error::input("edge endpoint outside the graph"));
            }
        }
        Ok(InstanceGraph { n_nodes, edges, mask })
    }

    pub fn edge_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edges.iter().map(|e| (e.src, e.dst))
    }

    pub fn has_edge(&self, src: u32, dst: u32) -> bool {
        self.edges.binary_search_by_key(&(src, dst), |e| (e.src, e.dst)).is_ok()
    }

    /// Rewrites node indices through `kept[local] = original` (drop
    /// perturbations) into a graph over `n_nodes` original positions.
    pub fn remap_nodes(&self, kept: &[u32], n_nodes: usize) -> Result<InstanceGraph> {
        if kept.len() != self.n_nodes {
            return Err(Error::mismatch("kept-index map length does not match graph"));
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                src: kept[e.src as usize],
                dst: kept[e.dst as usize],
                weight: e.weight,
            })
            .collect();
        InstanceGraph::new(n_nodes, edges, self.mask.remap(kept))
    }

    /// Graphviz rendering; labels carry the score with 3 significant
    /// digits. Token labels are added when the sequence is given.
    pub fn to_dot(&self, tokens: Option<&[u32]>) -> String {
        let mut out = String::from("digraph instance {\n  rankdir=LR;\n");
        let mut used: Vec<u32> = self.edges.iter().flat_map(|e| [e.src, e.dst]).collect();
        used.sort_unstable();
        used.dedup();
        for &n in &used {
            match tokens {
                Some(t) => out.push_str(&format!(
                    "  t{} [label=\"t{} : {}\"];\n",
                    n, n, t[n as usize]
                )),
                None => out.push_str(&format!("  t{n};\n")),
            }
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  t{} -> t{} [label=\"{:.2e}\"];\n",
                e.src, e.dst, e.weight
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// A type-level edge with its aggregated evidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryEdge {
    pub src: u32,
    pub dst: u32,
    /// Maximum score over the supporting instance edges.
    pub weight: f64,
    /// Number of supporting instance edges.
    pub support: u32,
}

/// Projection of an [`InstanceGraph`] onto event types. Cycles and
/// self-loops are permitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryGraph {
    /// Unique token types of the sequence, ascending.
    pub nodes: Vec<u32>,
    /// Sorted by (src, dst).
    pub edges: Vec<SummaryEdge>,
}

impl SummaryGraph {
    /// Projects instance edges onto the token types they connect.
    pub fn project(graph: &InstanceGraph, tokens: &[u32]) -> Result<SummaryGraph> {
        if graph.n_nodes != tokens.len() {
            return Err(Error::mismatch("graph was not built from this sequence"));
        }
        let mut nodes: Vec<u32> = tokens.to_vec();
        nodes.sort_unstable();
        nodes.dedup();

        let mut acc: BTreeMap<(u32, u32), (f64, u32)> = BTreeMap::new();
        for e in &graph.edges {
            let key = (tokens[e.src as usize], tokens[e.dst as usize]);
            let entry = acc.entry(key).or_insert((f64::NEG_INFINITY, 0));
            entry.0 = entry.0.max(e.weight);
            entry.1 += 1;
        }
        let edges = acc
            .into_iter()
            .map(|((src, dst), (weight, support))| SummaryEdge { src, dst, weight, support })
            .collect();
        Ok(SummaryGraph { nodes, edges })
    }

    pub fn has_edge(&self, src: u32, dst: u32) -> bool {
        self.edges.iter().any(|e| e.src == src && e.dst == dst)
    }

    /// Graphviz rendering; parallel instance edges are already merged,
    /// labels carry score and support count.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph summary {\n");
        for &n in &self.nodes {
            out.push_str(&format!("  v{n};\n"));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  v{} -> v{} [label=\"{:.2e} (x{})\"];\n",
                e.src, e.dst, e.weight, e.support
            ));
        }
        out.push_str("}\n");
        out
    }
}
