//! Structural-balance analysis over a snapshot: triad census, balance
//! index, and balance-based sign prediction for unobserved edges.
//!
//! Strong (Heider) balance: a triangle is balanced iff the product of its
//! edge signs is +1.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{discretize_weight, NetworkSnapshot};
use crate::relations::EntityPair;

/// Sign-only graph: zeros dropped at the discretization threshold.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DiscretizedGraph {
    pub nodes: BTreeSet<String>,
    pub signed_edges: BTreeMap<EntityPair, i8>,
}

impl DiscretizedGraph {
    pub fn from_edges(edges: impl IntoIterator<Item = (EntityPair, i8)>) -> Self {
        let mut graph = DiscretizedGraph::default();
        for (pair, sign) in edges {
            graph.insert(pair, sign);
        }
        graph
    }

    pub fn insert(&mut self, pair: EntityPair, sign: i8) {
        assert!(sign == 1 || sign == -1, "signs are +1 or -1");
        self.nodes.insert(pair.a().to_string());
        self.nodes.insert(pair.b().to_string());
        self.signed_edges.insert(pair, sign);
    }

    pub fn sign(&self, a: &str, b: &str) -> Option<i8> {
        let pair = EntityPair::new(a, b).ok()?;
        self.signed_edges.get(&pair).copied()
    }

    /// Neighbors of `node` with the connecting edge sign.
    pub fn neighbors(&self, node: &str) -> BTreeMap<&str, i8> {
        let mut out = BTreeMap::new();
        for (pair, sign) in &self.signed_edges {
            if pair.a() == node {
                out.insert(pair.b(), *sign);
            } else if pair.b() == node {
                out.insert(pair.a(), *sign);
            }
        }
        out
    }

    /// Flip the sign of every edge.
    pub fn flipped(&self) -> Self {
        DiscretizedGraph {
            nodes: self.nodes.clone(),
            signed_edges: self
                .signed_edges
                .iter()
                .map(|(p, s)| (p.clone(), -s))
                .collect(),
        }
    }
}

/// Keep each snapshot edge with its weight sign iff |weight| >= tau.
pub fn discretize(snapshot: &NetworkSnapshot, tau: f64) -> DiscretizedGraph {
    let mut graph = DiscretizedGraph {
        nodes: snapshot.nodes.clone(),
        signed_edges: BTreeMap::new(),
    };
    for edge in &snapshot.edges {
        let sign = discretize_weight(edge.weight, tau);
        if sign != 0 {
            graph.signed_edges.insert(edge.pair.clone(), sign);
        }
    }
    graph
}

/// Triangle classes by sign multiset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TriadKind {
    /// +++
    AllPositive,
    /// ++-
    OneNegative,
    /// +--
    TwoNegative,
    /// ---
    AllNegative,
}

impl TriadKind {
    pub fn from_negative_count(negatives: usize) -> Self {
        match negatives {
            0 => TriadKind::AllPositive,
            1 => TriadKind::OneNegative,
            2 => TriadKind::TwoNegative,
            3 => TriadKind::AllNegative,
            n => unreachable!("a triangle has 3 edges, got {n} negatives"),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            TriadKind::AllPositive => "+++",
            TriadKind::OneNegative => "++-",
            TriadKind::TwoNegative => "+--",
            TriadKind::AllNegative => "---",
        }
    }

    /// Balanced iff the product of the three signs is +1.
    pub fn is_balanced(self) -> bool {
        matches!(self, TriadKind::AllPositive | TriadKind::TwoNegative)
    }

    pub const ALL: [TriadKind; 4] = [
        TriadKind::AllPositive,
        TriadKind::OneNegative,
        TriadKind::TwoNegative,
        TriadKind::AllNegative,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TriadCensus {
    counts: [u64; 4],
}

impl TriadCensus {
    pub fn from_counts(
        all_positive: u64,
        one_negative: u64,
        two_negative: u64,
        all_negative: u64,
    ) -> Self {
        TriadCensus {
            counts: [all_positive, one_negative, two_negative, all_negative],
        }
    }

    fn bump(&mut self, kind: TriadKind) {
        self.counts[kind as usize] += 1;
    }

    pub fn get(&self, kind: TriadKind) -> u64 {
        self.counts[kind as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn balanced(&self) -> u64 {
        self.get(TriadKind::AllPositive) + self.get(TriadKind::TwoNegative)
    }
}

/// Count every closed triangle once, categorized by its sign multiset.
///
/// Walks each edge (u, v) and intersects the neighbor sets above v, so a
/// triangle {u < v < w} is visited exactly once, from its (u, v) edge.
pub fn triad_census(graph: &DiscretizedGraph) -> TriadCensus {
    let mut adjacency: BTreeMap<&str, BTreeMap<&str, i8>> = BTreeMap::new();
    for (pair, sign) in &graph.signed_edges {
        adjacency.entry(pair.a()).or_default().insert(pair.b(), *sign);
        adjacency.entry(pair.b()).or_default().insert(pair.a(), *sign);
    }
    let mut census = TriadCensus::default();
    for (pair, sign_uv) in &graph.signed_edges {
        let (u, v) = (pair.a(), pair.b());
        let Some(nu) = adjacency.get(u) else { continue };
        let Some(nv) = adjacency.get(v) else { continue };
        for (w, sign_uw) in
            nu.range::<&str, _>((std::ops::Bound::Excluded(&v), std::ops::Bound::Unbounded))
        {
            if let Some(sign_vw) = nv.get(w) {
                let negatives = [*sign_uv, *sign_uw, *sign_vw]
                    .iter()
                    .filter(|s| **s == -1)
                    .count();
                census.bump(TriadKind::from_negative_count(negatives));
            }
        }
    }
    census
}

/// Fraction of balanced triangles; undefined (None) when there are none.
pub fn balance_index(census: &TriadCensus) -> Option<f64> {
    let total = census.total();
    if total == 0 {
        None
    } else {
        Some(census.balanced() as f64 / total as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictedSign {
    Positive,
    Negative,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgePrediction {
    pub pair: EntityPair,
    pub predicted: PredictedSign,
    /// (positive votes, negative votes) over common neighbors.
    pub votes: (u32, u32),
}

/// Predict the sign of a non-edge from its common neighbors: each neighbor
/// k votes sign(a,k) * sign(b,k); the majority wins, ties and isolated
/// pairs stay Unknown.
pub fn predict_edge_sign(graph: &DiscretizedGraph, pair: &EntityPair) -> Result<EdgePrediction> {
    if graph.signed_edges.contains_key(pair) {
        return Err(Error::InvalidArgument(format!(
            "pair {pair} is already an edge; prediction applies to non-edges"
        )));
    }
    let neighbors_a = graph.neighbors(pair.a());
    let neighbors_b = graph.neighbors(pair.b());
    let mut positive = 0u32;
    let mut negative = 0u32;
    for (node, sign_a) in &neighbors_a {
        if let Some(sign_b) = neighbors_b.get(node) {
            if sign_a * sign_b > 0 {
                positive += 1;
            } else {
                negative += 1;
            }
        }
    }
    let predicted = match positive.cmp(&negative) {
        std::cmp::Ordering::Greater => PredictedSign::Positive,
        std::cmp::Ordering::Less => PredictedSign::Negative,
        std::cmp::Ordering::Equal => PredictedSign::Unknown,
    };
    Ok(EdgePrediction {
        pair: pair.clone(),
        predicted,
        votes: (positive, negative),
    })
}
