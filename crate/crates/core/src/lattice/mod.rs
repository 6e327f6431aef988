//! Node-labelled token lattices.
//!
//! Each node carries one token; edges carry a natural-log transition score.
//! The start and end nodes are epsilon sentinels. A [`Lattice`] is validated
//! on construction and immutable afterwards.

mod convert;
mod oracle;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use convert::{
    lattice_from_nbest, retokenize_lattice, word_lattice_from_subword, CharTokenizer,
    IdentityTokenizer, MarkerConvention, TokenizerAdapter, VocabTokenizer,
};
pub use oracle::{lattice_oracle_wer, LatticeOracle};

pub type NodeId = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("edge references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("duplicate edge {from} -> {to}")]
    DuplicateEdge { from: NodeId, to: NodeId },
    #[error("cycle detected through edge {from} -> {to}")]
    Cycle { from: NodeId, to: NodeId },
    #[error("start and end must be distinct nodes")]
    StartIsEnd,
    #[error("start node has an incoming edge from {0}")]
    StartHasIncoming(NodeId),
    #[error("end node has an outgoing edge to {0}")]
    EndHasOutgoing(NodeId),
    #[error("node {0} is not reachable from start")]
    Unreachable(NodeId),
    #[error("node {0} cannot reach end")]
    DeadEnd(NodeId),
    #[error("edge start -> end would encode an empty path")]
    EmptyPath,
    #[error("interior node {0} has an empty token")]
    EmptyToken(NodeId),
    #[error("edge {from} -> {to} has a NaN score")]
    NanScore { from: NodeId, to: NodeId },
    #[error("subword token {token:?} at node {node} cannot be grouped into a word")]
    DanglingPiece { node: NodeId, token: String },
    #[error("tokenizer {tokenizer} does not round-trip word {word:?}: got {pieces:?}")]
    Tokenizer {
        tokenizer: String,
        word: String,
        pieces: Vec<String>,
    },
    #[error("hypothesis at rank {0} is empty")]
    EmptyHypothesis(usize),
    #[error("reference must be non-empty")]
    EmptyReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub score: f64,
}

/// Wire form of a lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeJson {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub start: NodeId,
    pub end: NodeId,
}

/// Outgoing arc in index space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub to: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeJson", into = "LatticeJson")]
pub struct Lattice {
    nodes: Vec<Node>,
    start: usize,
    end: usize,
    out: Vec<Vec<Arc>>,
    inc: Vec<Vec<Arc>>,
    order: Vec<usize>,
}

impl TryFrom<LatticeJson> for Lattice {
    type Error = LatticeError;

    fn try_from(j: LatticeJson) -> Result<Self, LatticeError> {
        Lattice::new(j.nodes, j.edges, j.start, j.end)
    }
}

impl From<Lattice> for LatticeJson {
    fn from(l: Lattice) -> Self {
        let edges = l
            .edge_indices()
            .map(|(f, a)| Edge {
                from: l.nodes[f].id,
                to: l.nodes[a.to].id,
                score: a.score,
            })
            .collect();
        LatticeJson {
            start: l.nodes[l.start].id,
            end: l.nodes[l.end].id,
            nodes: l.nodes,
            edges,
        }
    }
}

impl Lattice {
    /// Validates and builds a lattice. Sentinel tokens are forced to empty.
    pub fn new(
        mut nodes: Vec<Node>,
        edges: Vec<Edge>,
        start: NodeId,
        end: NodeId,
    ) -> Result<Self, LatticeError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(LatticeError::DuplicateNode(n.id));
            }
        }
        let s = *index.get(&start).ok_or(LatticeError::UnknownNode(start))?;
        let e = *index.get(&end).ok_or(LatticeError::UnknownNode(end))?;
        if s == e {
            return Err(LatticeError::StartIsEnd);
        }
        nodes[s].token.clear();
        nodes[e].token.clear();

        let mut out: Vec<Vec<Arc>> = vec![Vec::new(); nodes.len()];
        let mut inc: Vec<Vec<Arc>> = vec![Vec::new(); nodes.len()];
        let mut seen = HashSet::with_capacity(edges.len());
        for ed in &edges {
            let f = *index
                .get(&ed.from)
                .ok_or(LatticeError::UnknownNode(ed.from))?;
            let t = *index.get(&ed.to).ok_or(LatticeError::UnknownNode(ed.to))?;
            if !seen.insert((f, t)) {
                return Err(LatticeError::DuplicateEdge {
                    from: ed.from,
                    to: ed.to,
                });
            }
            if ed.score.is_nan() {
                return Err(LatticeError::NanScore {
                    from: ed.from,
                    to: ed.to,
                });
            }
            if f == t {
                return Err(LatticeError::Cycle {
                    from: ed.from,
                    to: ed.to,
                });
            }
            out[f].push(Arc {
                to: t,
                score: ed.score,
            });
            inc[t].push(Arc {
                to: f,
                score: ed.score,
            });
        }
        for arcs in out.iter_mut().chain(inc.iter_mut()) {
            arcs.sort_by_key(|a| nodes[a.to].id);
        }

        let order = topo_order(&nodes, &out, &inc)?;

        if let Some(a) = inc[s].first() {
            return Err(LatticeError::StartHasIncoming(nodes[a.to].id));
        }
        if let Some(a) = out[e].first() {
            return Err(LatticeError::EndHasOutgoing(nodes[a.to].id));
        }
        if out[s].iter().any(|a| a.to == e) {
            return Err(LatticeError::EmptyPath);
        }
        let fwd = reach(s, &out);
        if let Some(i) = (0..nodes.len()).find(|&i| !fwd[i]) {
            return Err(LatticeError::Unreachable(nodes[i].id));
        }
        let bwd = reach(e, &inc);
        if let Some(i) = (0..nodes.len()).find(|&i| !bwd[i]) {
            return Err(LatticeError::DeadEnd(nodes[i].id));
        }
        if let Some(n) = nodes
            .iter()
            .enumerate()
            .find(|(i, n)| *i != s && *i != e && n.token.is_empty())
        {
            return Err(LatticeError::EmptyToken(n.1.id));
        }

        Ok(Lattice {
            nodes,
            start: s,
            end: e,
            out,
            inc,
            order,
        })
    }

    pub fn from_json(s: &str) -> Result<Self, crate::Error> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("lattice serialization is infallible")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_edges(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.end
    }

    pub fn token(&self, ix: usize) -> &str {
        &self.nodes[ix].token
    }

    pub fn id(&self, ix: usize) -> NodeId {
        self.nodes[ix].id
    }

    pub fn successors(&self, ix: usize) -> &[Arc] {
        &self.out[ix]
    }

    /// Incoming arcs; `Arc::to` holds the source node here.
    pub fn predecessors(&self, ix: usize) -> &[Arc] {
        &self.inc[ix]
    }

    /// Topological order of node indices; ties broken by node id.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Topological order as node ids.
    pub fn topo_sort(&self) -> Vec<NodeId> {
        self.order.iter().map(|&i| self.nodes[i].id).collect()
    }

    /// All `(from, arc)` pairs, grouped by source in node order.
    pub fn edge_indices(&self) -> impl Iterator<Item = (usize, Arc)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(f, arcs)| arcs.iter().map(move |a| (f, *a)))
    }

    /// Number of start-to-end paths, saturating at `u128::MAX`.
    pub fn num_paths(&self) -> u128 {
        let mut count = vec![0u128; self.nodes.len()];
        count[self.start] = 1;
        for &v in &self.order {
            let c = count[v];
            for a in &self.out[v] {
                count[a.to] = count[a.to].saturating_add(c);
            }
        }
        count[self.end]
    }
}

fn reach(from: usize, adj: &[Vec<Arc>]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(v) = stack.pop() {
        for a in &adj[v] {
            if !seen[a.to] {
                seen[a.to] = true;
                stack.push(a.to);
            }
        }
    }
    seen
}

/// Kahn's algorithm with a min-heap on node id.
fn topo_order(
    nodes: &[Node],
    out: &[Vec<Arc>],
    inc: &[Vec<Arc>],
) -> Result<Vec<usize>, LatticeError> {
    let mut indeg: Vec<usize> = inc.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<(NodeId, usize)>> = indeg
        .iter()
        .enumerate()
        .filter(|(_, d)| **d == 0)
        .map(|(i, _)| Reverse((nodes[i].id, i)))
        .collect();
    let mut order = Vec::with_capacity(nodes.len());
    while let Some(Reverse((_, v))) = ready.pop() {
        order.push(v);
        for a in &out[v] {
            indeg[a.to] -= 1;
            if indeg[a.to] == 0 {
                ready.push(Reverse((nodes[a.to].id, a.to)));
            }
        }
    }
    if order.len() == nodes.len() {
        return Ok(order);
    }
    // Every leftover node has a leftover predecessor; walk back until a repeat.
    let mut visited = HashMap::new();
    let mut v = (0..nodes.len())
        .find(|&i| indeg[i] > 0)
        .expect("leftover node");
    let mut step = 0usize;
    loop {
        visited.insert(v, step);
        let p = inc[v]
            .iter()
            .map(|a| a.to)
            .find(|&p| indeg[p] > 0)
            .expect("leftover node has a leftover predecessor");
        if visited.contains_key(&p) {
            return Err(LatticeError::Cycle {
                from: nodes[p].id,
                to: nodes[v].id,
            });
        }
        v = p;
        step += 1;
    }
}

/// Sequential-id builder used by the conversions.
#[derive(Debug, Default)]
pub(crate) struct Builder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl Builder {
    pub fn node(&mut self, token: impl Into<String>) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node {
            id,
            token: token.into(),
        });
        id
    }

    pub fn edge(&mut self, from: NodeId, to: NodeId, score: f64) {
        self.edges.push(Edge { from, to, score });
    }

    pub fn build(self, start: NodeId, end: NodeId) -> Result<Lattice, LatticeError> {
        Lattice::new(self.nodes, self.edges, start, end)
    }
}
