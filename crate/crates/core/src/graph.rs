//! Simple k-graphs and the `khg` edge-list format.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sequence::{edge_key, EdgeKey, Sequence};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("edge {0:?} does not have k distinct vertices")]
    NotProper(Vec<u32>),
    #[error("edge {0:?} appears more than once")]
    Duplicate(Vec<u32>),
    #[error("vertex {vertex} out of range 1..={n}")]
    VertexRange { vertex: i64, n: usize },
    #[error("edge has {got} vertices, expected {k}")]
    Arity { got: usize, k: usize },
    #[error("malformed edge list: {0}")]
    Parse(String),
}

/// A set of `k`-element vertex subsets of `0..n`, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SimpleGraph {
    pub n: usize,
    pub k: usize,
    edges: Vec<EdgeKey>,
}

impl SimpleGraph {
    pub fn empty(n: usize, k: usize) -> Self {
        SimpleGraph {
            n,
            k,
            edges: Vec::new(),
        }
    }

    pub fn from_edges<I, E>(n: usize, k: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = E>,
        E: AsRef<[u32]>,
    {
        let mut keys = Vec::new();
        for e in edges {
            let e = e.as_ref();
            if e.len() != k {
                return Err(GraphError::Arity { got: e.len(), k });
            }
            if let Some(&v) = e.iter().find(|&&v| v as usize >= n) {
                return Err(GraphError::VertexRange {
                    vertex: v as i64 + 1,
                    n,
                });
            }
            let key = edge_key(e);
            if key.windows(2).any(|w| w[0] == w[1]) {
                return Err(GraphError::NotProper(key.to_vec()));
            }
            keys.push(key);
        }
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::Duplicate(w[0].to_vec()));
        }
        Ok(SimpleGraph { n, k, edges: keys })
    }

    /// `H(y)` for a sequence whose multigraph is simple.
    pub fn from_sequence(seq: &Sequence) -> Result<Self, GraphError> {
        let p = seq.params();
        SimpleGraph::from_edges(p.n, p.k, seq.edges())
    }

    pub fn edges(&self) -> &[EdgeKey] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, edge: &[u32]) -> bool {
        self.edges.binary_search_by(|e| e.as_slice().cmp(edge)).is_ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for e in &self.edges {
            for &v in e {
                deg[v as usize] += 1;
            }
        }
        deg
    }

    pub fn is_regular(&self, d: usize) -> bool {
        self.degrees().iter().all(|&x| x == d)
    }

    pub fn is_subgraph_of(&self, other: &SimpleGraph) -> bool {
        self.edges.iter().all(|e| other.contains(e))
    }

    /// Apply `perm` (0-based image of each vertex) and re-canonicalise.
    pub fn relabel(&self, perm: &[u32]) -> SimpleGraph {
        let mut edges: Vec<EdgeKey> = self
            .edges
            .iter()
            .map(|e| edge_key(&e.iter().map(|&v| perm[v as usize]).collect::<Vec<_>>()))
            .collect();
        edges.sort_unstable();
        SimpleGraph {
            n: self.n,
            k: self.k,
            edges,
        }
    }

    pub fn vertex_set(&self) -> HashSet<u32> {
        self.edges.iter().flatten().copied().collect()
    }

    /// `khg k n M` then one ascending 1-based edge per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("khg {} {} {}\n", self.k, self.n, self.edges.len());
        for e in &self.edges {
            let mut first = true;
            for v in e {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{}", v + 1).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut all = SimpleGraph::parse_edge_lists(text)?;
        match all.len() {
            1 => Ok(all.pop().unwrap()),
            got => Err(GraphError::Parse(format!("expected one block, found {got}"))),
        }
    }

    /// Parse a stream of consecutive `khg` blocks.
    pub fn parse_edge_lists(text: &str) -> Result<Vec<Self>, GraphError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut out = Vec::new();
        while let Some(header) = lines.next() {
            let f: Vec<&str> = header.split_whitespace().collect();
            if f.len() != 4 || f[0] != "khg" {
                return Err(GraphError::Parse(format!("bad header {header:?}")));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|e| GraphError::Parse(format!("{s:?}: {e}")));
            let (k, n, m) = (num(f[1])?, num(f[2])?, num(f[3])?);
            let mut edges = Vec::with_capacity(m);
            for _ in 0..m {
                let line = lines
                    .next()
                    .ok_or_else(|| GraphError::Parse("truncated edge list".into()))?;
                let mut e = Vec::with_capacity(k);
                for tok in line.split_whitespace() {
                    let id: i64 = tok
                        .parse()
                        .map_err(|err| GraphError::Parse(format!("{tok:?}: {err}")))?;
                    if id < 1 || id as usize > n {
                        return Err(GraphError::VertexRange { vertex: id, n });
                    }
                    e.push((id - 1) as u32);
                }
                edges.push(e);
            }
            out.push(SimpleGraph::from_edges(n, k, edges)?);
        }
        Ok(out)
    }
}
