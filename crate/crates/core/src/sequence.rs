//! The sequence model: a length-`nd` vertex sequence read as `M` consecutive
//! `k`-blocks, the first `red_edges` of them red and the rest green.
//!
//! Vertices are `0..n` in memory and `1..=n` in every text format.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::params::{Params, ParamsError};

/// Sorted vertex multiset of one edge.
pub type EdgeKey = SmallVec<[u32; 8]>;

pub fn edge_key(edge: &[u32]) -> EdgeKey {
    let mut key: EdgeKey = edge.iter().copied().collect();
    key.sort_unstable();
    key
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("sequence has length {got}, expected n*d = {expected}")]
    Length { got: usize, expected: usize },
    #[error("vertex id {vertex} at position {position} is out of range 1..={n}")]
    VertexRange { position: usize, vertex: i64, n: usize },
    #[error("malformed sequence text: {0}")]
    Parse(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sequence {
    params: Params,
    entries: Vec<u32>,
}

impl Sequence {
    pub fn new(params: Params, entries: Vec<u32>) -> Result<Self, SequenceError> {
        if entries.len() != params.sequence_len() {
            return Err(SequenceError::Length {
                got: entries.len(),
                expected: params.sequence_len(),
            });
        }
        if let Some((position, &v)) = entries.iter().enumerate().find(|(_, &v)| v as usize >= params.n) {
            return Err(SequenceError::VertexRange {
                position,
                vertex: v as i64 + 1,
                n: params.n,
            });
        }
        Ok(Sequence { params, entries })
    }

    /// Build from 1-based vertex ids.
    pub fn from_one_based(params: Params, ids: &[i64]) -> Result<Self, SequenceError> {
        let mut entries = Vec::with_capacity(ids.len());
        for (position, &id) in ids.iter().enumerate() {
            if id < 1 || id as usize > params.n {
                return Err(SequenceError::VertexRange {
                    position,
                    vertex: id,
                    n: params.n,
                });
            }
            entries.push((id - 1) as u32);
        }
        Sequence::new(params, entries)
    }

    pub(crate) fn from_raw(params: Params, entries: Vec<u32>) -> Self {
        debug_assert_eq!(entries.len(), params.sequence_len());
        Sequence { params, entries }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [u32] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<u32> {
        self.entries
    }

    pub fn edge(&self, i: usize) -> &[u32] {
        let k = self.params.k;
        &self.entries[k * i..k * i + k]
    }

    pub fn edges(&self) -> std::slice::ChunksExact<'_, u32> {
        self.entries.chunks_exact(self.params.k)
    }

    pub fn edge_count(&self) -> usize {
        self.params.edges
    }

    pub fn is_red(&self, i: usize) -> bool {
        i < self.params.red_edges
    }

    pub fn red_prefix(&self) -> &[u32] {
        &self.entries[..self.params.red_prefix_len()]
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.params.n];
        for &v in &self.entries {
            deg[v as usize] += 1;
        }
        deg
    }

    /// First vertex whose multiplicity differs from `d`, if any.
    pub fn regularity_violation(&self) -> Option<u32> {
        let d = self.params.d;
        self.degrees().iter().position(|&c| c != d).map(|v| v as u32)
    }

    pub fn is_regular(&self) -> bool {
        self.regularity_violation().is_none()
    }

    /// The underlying multigraph: all edge keys, sorted.
    pub fn edge_multiset(&self) -> Vec<EdgeKey> {
        let mut keys: Vec<EdgeKey> = self.edges().map(edge_key).collect();
        keys.sort_unstable();
        keys
    }

    pub fn green_degrees(&self) -> Vec<u64> {
        let mut g = vec![0u64; self.params.n];
        for &v in &self.entries[self.params.red_prefix_len()..] {
            g[v as usize] += 1;
        }
        g
    }

    /// `sum_v g_v (g_v - 1)` over green degrees, loop occurrences included.
    pub fn phi(&self) -> u64 {
        self.green_degrees().iter().map(|&g| g * g.saturating_sub(1)).sum()
    }

    pub fn classify_edges(&self) -> EdgeClassification {
        let mut kinds = Vec::with_capacity(self.edge_count());
        let mut groups: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
        let mut lambda = 0;
        let mut red_loop_indices = Vec::new();
        let mut green_proper_indices = Vec::new();
        for (i, edge) in self.edges().enumerate() {
            let key = edge_key(edge);
            let kind = kind_of_sorted(&key);
            if kind.is_loop() {
                lambda += 1;
                if self.is_red(i) {
                    red_loop_indices.push(i);
                }
            } else if !self.is_red(i) {
                green_proper_indices.push(i);
            }
            kinds.push(kind);
            groups.entry(key).or_default().push(i);
        }
        let mut duplicate_groups: Vec<Vec<usize>> = groups.into_values().filter(|g| g.len() > 1).collect();
        duplicate_groups.sort_unstable();
        EdgeClassification {
            kinds,
            lambda,
            duplicate_groups,
            red_loop_indices,
            green_proper_indices,
        }
    }

    pub fn membership(&self, expected_phi: &Ratio<i128>) -> MembershipReport {
        let cls = self.classify_edges();
        let phi = self.phi();
        let in_tilde_s = phi_within_window(&self.params, phi, expected_phi);

        let mut witness = None;
        if let Some(v) = self.regularity_violation() {
            witness = Some(Witness::NotRegular { vertex: v });
        } else if let Some(edge) = cls.kinds.iter().position(|k| k.is_bad_loop()) {
            witness = Some(Witness::BadLoop { edge });
        } else if let Some(group) = cls.duplicate_groups.first() {
            witness = Some(Witness::Duplicate {
                first: group[0],
                second: group[1],
            });
        } else if !self.params.within_loop_budget(cls.lambda) {
            // the first loop that no longer fits under L
            let allowed = (0..=cls.lambda)
                .take_while(|&l| self.params.within_loop_budget(l))
                .count()
                - 1;
            let edge = cls
                .kinds
                .iter()
                .enumerate()
                .filter(|(_, k)| k.is_loop())
                .nth(allowed)
                .map(|(i, _)| i)
                .unwrap_or(0);
            witness = Some(Witness::TooManyLoops { edge });
        }
        let in_e = witness.is_none();
        if in_e {
            if let Some(&edge) = cls.red_loop_indices.first() {
                witness = Some(Witness::RedLoop { edge });
            }
        }
        let in_g = in_e && cls.red_loop_indices.is_empty();
        if witness.is_none() && !in_tilde_s {
            witness = Some(Witness::PhiDeviation { phi });
        }
        MembershipReport {
            in_e,
            loop_level: cls.lambda,
            in_g,
            phi,
            in_tilde_s,
            witness,
        }
    }

    /// `seq k n d` header followed by the 1-based entries on one line.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = format!("seq {} {} {}\n", p.k, p.n, p.d);
        for (i, v) in self.entries.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{}", v + 1).unwrap();
        }
        out.push('\n');
        out
    }

    pub fn parse_text(text: &str) -> Result<Self, SequenceError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| SequenceError::Parse("empty input".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "seq" {
            return Err(SequenceError::Parse(format!("bad header {header:?}")));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| SequenceError::Parse(format!("{s:?}: {e}")))
        };
        let (k, n, d) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        let params = Params::derive(n, d, k)?;
        let ids = lines
            .flat_map(|l| l.split_whitespace())
            .map(|s| {
                s.parse::<i64>()
                    .map_err(|e| SequenceError::Parse(format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Sequence::from_one_based(params, &ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Proper,
    /// Exactly one vertex doubled, all others distinct.
    SimpleLoop,
    /// Some vertex with multiplicity at least 3.
    BadLoopMult3,
    /// At least two doubled vertices.
    BadLoopTwoDoubles,
}

impl EdgeKind {
    pub fn is_loop(self) -> bool {
        self != EdgeKind::Proper
    }

    pub fn is_bad_loop(self) -> bool {
        matches!(self, EdgeKind::BadLoopMult3 | EdgeKind::BadLoopTwoDoubles)
    }
}

pub fn edge_kind(edge: &[u32]) -> EdgeKind {
    kind_of_sorted(&edge_key(edge))
}

pub(crate) fn kind_of_sorted(key: &[u32]) -> EdgeKind {
    let mut doubled = 0;
    let mut run = 1;
    for w in key.windows(2) {
        if w[0] == w[1] {
            run += 1;
            if run == 3 {
                return EdgeKind::BadLoopMult3;
            }
            if run == 2 {
                doubled += 1;
            }
        } else {
            run = 1;
        }
    }
    match doubled {
        0 => EdgeKind::Proper,
        1 => EdgeKind::SimpleLoop,
        _ => EdgeKind::BadLoopTwoDoubles,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeClassification {
    pub kinds: Vec<EdgeKind>,
    pub lambda: usize,
    /// Groups (ascending) of edge indices with identical multisets.
    pub duplicate_groups: Vec<Vec<usize>>,
    pub red_loop_indices: Vec<usize>,
    pub green_proper_indices: Vec<usize>,
}

impl EdgeClassification {
    pub fn has_duplicates(&self) -> bool {
        !self.duplicate_groups.is_empty()
    }

    pub fn loop_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| k.is_loop())
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Vertex (0-based) whose multiplicity is not `d`.
    NotRegular {
        vertex: u32,
    },
    BadLoop {
        edge: usize,
    },
    Duplicate {
        first: usize,
        second: usize,
    },
    TooManyLoops {
        edge: usize,
    },
    RedLoop {
        edge: usize,
    },
    PhiDeviation {
        phi: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub in_e: bool,
    pub loop_level: usize,
    pub in_g: bool,
    pub phi: u64,
    pub in_tilde_s: bool,
    pub witness: Option<Witness>,
}

/// `n (d)_2 (kM - krm)_2 / (kM)_2`.
pub fn expected_phi(p: &Params) -> Ratio<i128> {
    let n = p.n as i128;
    let d = p.d as i128;
    let total = p.sequence_len() as i128;
    let green = (p.sequence_len() - p.red_prefix_len()) as i128;
    Ratio::new(n * d * (d - 1) * green * (green - 1), total * (total - 1))
}

/// `|phi - E phi| <= n^(3/4) d`, as `(q phi - p)^4 <= n^3 d^4 q^4`.
pub fn phi_within_window(params: &Params, phi: u64, expected: &Ratio<i128>) -> bool {
    let q = BigInt::from(*expected.denom());
    let dev = (BigInt::from(phi) * &q - BigInt::from(*expected.numer())).abs();
    let lhs = dev.pow(4u32);
    let rhs = BigInt::from(params.phi_window_fourth_power()) * q.pow(4u32);
    lhs <= rhs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(n: usize, d: usize, k: usize, ids: &[i64]) -> Sequence {
        Sequence::from_one_based(Params::derive(n, d, k).unwrap(), ids).unwrap()
    }

    #[test]
    fn kinds() {
        assert_eq!(edge_kind(&[0, 0, 1]), EdgeKind::SimpleLoop);
        assert_eq!(edge_kind(&[2, 3, 4]), EdgeKind::Proper);
        assert_eq!(edge_kind(&[6, 6, 6]), EdgeKind::BadLoopMult3);
        assert_eq!(edge_kind(&[0, 1, 0, 1]), EdgeKind::BadLoopTwoDoubles);
        assert_eq!(edge_kind(&[3, 1, 3, 3]), EdgeKind::BadLoopMult3);
    }

    #[test]
    fn classify_loop_and_proper() {
        let s = seq(6, 1, 3, &[1, 1, 2, 3, 4, 5]);
        let c = s.classify_edges();
        assert_eq!(c.kinds, vec![EdgeKind::SimpleLoop, EdgeKind::Proper]);
        assert_eq!(c.lambda, 1);
        assert!(!c.has_duplicates());
    }

    #[test]
    fn classify_duplicates() {
        let s = seq(3, 2, 3, &[1, 2, 3, 3, 1, 2]);
        let c = s.classify_edges();
        assert_eq!(c.duplicate_groups, vec![vec![0, 1]]);
        assert_eq!(c.lambda, 0);
    }

    #[test]
    fn classify_bad_loops() {
        let s = seq(3, 3, 3, &[3, 3, 3, 1, 1, 2, 1, 2, 2]);
        assert_eq!(s.classify_edges().kinds[0], EdgeKind::BadLoopMult3);
        let s = seq(4, 2, 4, &[1, 1, 2, 2, 3, 4, 3, 4]);
        assert_eq!(s.classify_edges().kinds[0], EdgeKind::BadLoopTwoDoubles);
    }

    #[test]
    fn phi_values() {
        // k=3, n=3, d=2, m=0: every vertex has green degree 2
        let s = seq(3, 2, 3, &[1, 1, 2, 2, 3, 3]);
        assert_eq!(s.phi(), 6);
        let s = seq(6, 1, 3, &[1, 2, 3, 4, 5, 6]);
        assert_eq!(s.phi(), 0);
        // green degrees (3, 3, 0, ...)
        let s = seq(3, 3, 3, &[1, 1, 1, 2, 2, 2, 3, 3, 3]);
        assert_eq!(s.green_degrees(), vec![3, 3, 3]);
        assert_eq!(s.phi(), 18);
        let p = Params::derive(3, 3, 3).unwrap().with_red_edges(1);
        let s = Sequence::from_one_based(p, &[3, 3, 3, 1, 2, 1, 2, 1, 2]).unwrap();
        assert_eq!(s.green_degrees(), vec![3, 3, 0]);
        assert_eq!(s.phi(), 12);
    }

    #[test]
    fn expected_phi_values() {
        let p = Params::derive(6, 2, 3).unwrap();
        assert_eq!(expected_phi(&p), Ratio::from_integer(12));
        let p = Params::derive(9, 1, 3).unwrap();
        assert_eq!(expected_phi(&p), Ratio::from_integer(0));
        let p = Params::derive(19, 3, 3).unwrap();
        assert_eq!(expected_phi(&p), Ratio::new(19 * 6 * 30 * 29, 57 * 56));
    }

    #[test]
    fn membership_simple() {
        let p = Params::derive(6, 2, 3).unwrap();
        let s = seq(6, 2, 3, &[1, 2, 3, 4, 5, 6, 1, 2, 4, 3, 5, 6]);
        let r = s.membership(&expected_phi(&p));
        assert!(r.in_e && r.in_g && r.in_tilde_s);
        assert_eq!(r.loop_level, 0);
        assert_eq!(r.witness, None);
    }

    #[test]
    fn membership_rejects_bad_loop() {
        let p = Params::derive(3, 3, 3).unwrap();
        let s = seq(3, 3, 3, &[1, 3, 3, 2, 2, 2, 1, 3, 1]);
        let r = s.membership(&expected_phi(&p));
        assert!(!r.in_e && !r.in_g);
        assert_eq!(r.witness, Some(Witness::BadLoop { edge: 1 }));
    }

    #[test]
    fn membership_rejects_too_many_loops() {
        // n d^2 = 12, so at most one loop fits
        let p = Params::derive(3, 2, 3).unwrap();
        let s = seq(3, 2, 3, &[1, 1, 2, 2, 3, 3]);
        let r = s.membership(&expected_phi(&p));
        assert_eq!(r.loop_level, 2);
        assert!(!r.in_e);
        assert_eq!(r.witness, Some(Witness::TooManyLoops { edge: 1 }));
    }

    #[test]
    fn red_loop_blocks_g() {
        let p = Params::derive(4, 3, 3).unwrap().with_red_edges(1);
        let s = Sequence::from_one_based(p, &[1, 1, 2, 3, 3, 4, 1, 2, 4, 2, 3, 4]).unwrap();
        let r = s.membership(&expected_phi(&p));
        assert!(r.in_e && !r.in_g);
        assert_eq!(r.loop_level, 2);
        assert_eq!(r.witness, Some(Witness::RedLoop { edge: 0 }));

        let s = Sequence::from_one_based(p, &[1, 1, 1, 1, 3, 4, 2, 3, 4, 2, 3, 4]).unwrap();
        assert!(!s.is_regular());
        let r = s.membership(&expected_phi(&p));
        assert_eq!(r.witness, Some(Witness::NotRegular { vertex: 0 }));
    }

    #[test]
    fn text_round_trip() {
        let s = seq(6, 2, 3, &[1, 2, 3, 4, 5, 6, 1, 2, 4, 3, 5, 6]);
        let text = s.to_text();
        assert!(text.starts_with("seq 3 6 2\n1 2 3 4 5 6"));
        assert_eq!(Sequence::parse_text(&text).unwrap(), s);
        assert!(matches!(
            Sequence::parse_text("seq 3 6 2\n1 2 3"),
            Err(SequenceError::Length { .. })
        ));
        assert!(matches!(
            Sequence::parse_text("seq 3 6 2\n0 2 3 4 5 6 1 2 4 3 5 6"),
            Err(SequenceError::VertexRange { .. })
        ));
    }
}
