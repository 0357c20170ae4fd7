//! Forward and backward switchings on green edges.
//!
//! A forward switching takes a green loop `f = v v x_1 .. x_{k-2}` and an
//! ordered pair `(e1, e2)` of distinct green proper edges, picks `y* in e1`
//! outside `e2` and `z* in e2` outside `e1`, and exchanges `y*` with the left
//! copy of `v` and `z*` with the right copy. It is admissible when the three
//! rewritten edges are proper, pairwise distinct and distinct from every other
//! edge, so the result has exactly one loop fewer.
//!
//! A backward switching picks a vertex `v`, an ordered pair `(e1, e2)` of
//! green proper edges through `v`, a third green proper edge `e3` and two
//! positions of `e3`; the vertex at `p_y` moves into `e1`, the one at `p_z`
//! into `e2`, and `e3` becomes a loop on `v`. It is admissible when it is the
//! inverse of an admissible forward switching. The tuples
//! `(v, e1, e2, e3, p_y, p_z)` and `(v, e2, e1, e3, p_z, p_y)` perform the same
//! exchanges, so `B` counts ordered tuples halved.
//!
//! Every move is a pair of positional transpositions inside the green region,
//! so per-vertex green degrees, and hence `phi`, never change.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::params::Params;
use crate::sequence::{edge_key, EdgeKey, EdgeKind, Sequence};

pub const DEFAULT_MAX_REJECTS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SwitchError {
    #[error("sequence is not regular")]
    NotRegular,
    #[error("edge {edge} is a loop of a type other than v v x_1 .. x_(k-2)")]
    BadLoop { edge: usize },
    #[error("edges {first} and {second} coincide as multisets")]
    Duplicate { first: usize, second: usize },
    #[error("red edge {edge} is a loop")]
    RedLoop { edge: usize },
    #[error("no loops left to switch")]
    NoLoops,
    #[error("no admissible switching found in {budget} proposals")]
    RejectBudget { budget: u64 },
    #[error("switching is not admissible")]
    Inadmissible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Switching {
    pub loop_edge: usize,
    pub e1: usize,
    pub e2: usize,
    pub y_pos: usize,
    pub z_pos: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BackSwitching {
    /// 0-based vertex.
    pub v: u32,
    pub e1: usize,
    pub e2: usize,
    pub e3: usize,
    pub p_y: usize,
    pub p_z: usize,
}

/// Pass-through hasher for keys that are already uniformly mixed.
#[derive(Default)]
struct Passthrough(u64);

impl Hasher for Passthrough {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = self.0.rotate_left(8) ^ b as u64;
        }
    }
    fn write_u64(&mut self, x: u64) {
        self.0 = x;
    }
}

type HashIndex = HashMap<u64, SmallVec<[u32; 2]>, BuildHasherDefault<Passthrough>>;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

const NONE: usize = usize::MAX;

/// A sequence in some `G_l` together with the indexes needed to test and
/// apply switchings in `O(k)` expected time.
#[derive(Debug, Clone)]
pub struct SwitchState {
    seq: Sequence,
    vertex_hash: Vec<u64>,
    edge_hash: Vec<u64>,
    index: HashIndex,
    loops: Vec<usize>,
    loop_slot: Vec<usize>,
    green_proper: Vec<usize>,
    green_slot: Vec<usize>,
}

/// The loop `f` split into its doubled vertex and tail.
#[derive(Debug, Clone, Copy)]
struct LoopShape {
    v: u32,
    left: usize,
    right: usize,
}

impl SwitchState {
    /// Requires a regular sequence with only simple loops, no multiple edges
    /// and no red loops.
    pub fn new(seq: Sequence) -> Result<Self, SwitchError> {
        if !seq.is_regular() {
            return Err(SwitchError::NotRegular);
        }
        let p = *seq.params();
        let cls = seq.classify_edges();
        if let Some(edge) = cls.kinds.iter().position(|k| k.is_bad_loop()) {
            return Err(SwitchError::BadLoop { edge });
        }
        if let Some(g) = cls.duplicate_groups.first() {
            return Err(SwitchError::Duplicate {
                first: g[0],
                second: g[1],
            });
        }
        if let Some(&edge) = cls.red_loop_indices.first() {
            return Err(SwitchError::RedLoop { edge });
        }
        let vertex_hash: Vec<u64> = (0..p.n as u64).map(|v| splitmix(v ^ 0x5DEE_CE66_D1CE_4E5B)).collect();
        let mut state = SwitchState {
            vertex_hash,
            edge_hash: Vec::with_capacity(p.edges),
            index: HashIndex::default(),
            loops: Vec::new(),
            loop_slot: vec![NONE; p.edges],
            green_proper: Vec::new(),
            green_slot: vec![NONE; p.edges],
            seq,
        };
        for i in 0..p.edges {
            let h = state.hash_of(state.seq.edge(i));
            state.edge_hash.push(h);
            state.index.entry(h).or_default().push(i as u32);
            match cls.kinds[i] {
                EdgeKind::SimpleLoop => {
                    state.loop_slot[i] = state.loops.len();
                    state.loops.push(i);
                }
                EdgeKind::Proper if i >= p.red_edges => {
                    state.green_slot[i] = state.green_proper.len();
                    state.green_proper.push(i);
                }
                _ => {}
            }
        }
        Ok(state)
    }

    pub fn sequence(&self) -> &Sequence {
        &self.seq
    }

    pub fn into_sequence(self) -> Sequence {
        self.seq
    }

    pub fn params(&self) -> &Params {
        self.seq.params()
    }

    pub fn lambda(&self) -> usize {
        self.loops.len()
    }

    pub fn loop_edges(&self) -> &[usize] {
        &self.loops
    }

    pub fn green_proper_edges(&self) -> &[usize] {
        &self.green_proper
    }

    fn k(&self) -> usize {
        self.seq.params().k
    }

    fn hash_of(&self, edge: &[u32]) -> u64 {
        edge.iter()
            .fold(0u64, |acc, &v| acc.wrapping_add(self.vertex_hash[v as usize]))
    }

    fn vh(&self, v: u32) -> u64 {
        self.vertex_hash[v as usize]
    }

    fn is_green_proper(&self, i: usize) -> bool {
        i < self.green_slot.len() && self.green_slot[i] != NONE
    }

    fn loop_shape(&self, f: usize) -> Option<LoopShape> {
        if f >= self.loop_slot.len() || self.loop_slot[f] == NONE {
            return None;
        }
        let edge = self.seq.edge(f);
        for left in 0..edge.len() {
            for right in left + 1..edge.len() {
                if edge[left] == edge[right] {
                    return Some(LoopShape {
                        v: edge[left],
                        left,
                        right,
                    });
                }
            }
        }
        None
    }

    /// Whether some edge outside `exclude` has hash `h` and multiset `key()`.
    fn occupied<F>(&self, h: u64, exclude: [usize; 3], key: F) -> bool
    where
        F: Fn() -> EdgeKey,
    {
        let Some(bucket) = self.index.get(&h) else {
            return false;
        };
        let mut target = None;
        for &j in bucket {
            let j = j as usize;
            if exclude.contains(&j) {
                continue;
            }
            let t = target.get_or_insert_with(&key);
            if edge_key(self.seq.edge(j)) == *t {
                return true;
            }
        }
        false
    }

    pub fn is_admissible_forward(&self, sw: &Switching) -> bool {
        let k = self.k();
        let Some(shape) = self.loop_shape(sw.loop_edge) else {
            return false;
        };
        if sw.e1 == sw.e2
            || !self.is_green_proper(sw.e1)
            || !self.is_green_proper(sw.e2)
            || sw.y_pos >= k
            || sw.z_pos >= k
        {
            return false;
        }
        if !self.params().within_loop_budget(self.lambda() - 1) {
            return false;
        }
        self.forward_ok(sw.loop_edge, shape, sw.e1, sw.e2, sw.y_pos, sw.z_pos)
    }

    fn forward_ok(&self, f: usize, shape: LoopShape, e1: usize, e2: usize, y_pos: usize, z_pos: usize) -> bool {
        let LoopShape { v, left, right } = shape;
        let fe = self.seq.edge(f);
        let a = self.seq.edge(e1);
        let b = self.seq.edge(e2);
        let y = a[y_pos];
        let z = b[z_pos];
        // y* from e1 \ e2, z* from e2 \ e1
        if b.contains(&y) || a.contains(&z) {
            return false;
        }
        // e1' = e1 - y* + v and e2' = e2 - z* + v stay proper
        if y != v && a.contains(&v) {
            return false;
        }
        if z != v && b.contains(&v) {
            return false;
        }
        // e3' = tail + y* + z*
        if y == z {
            return false;
        }
        let in_tail = |u: u32| fe.iter().enumerate().any(|(i, &x)| i != left && i != right && x == u);
        if in_tail(y) || in_tail(z) {
            return false;
        }

        let h1 = self.edge_hash[e1].wrapping_sub(self.vh(y)).wrapping_add(self.vh(v));
        let h2 = self.edge_hash[e2].wrapping_sub(self.vh(z)).wrapping_add(self.vh(v));
        let h3 = self.edge_hash[f]
            .wrapping_sub(self.vh(v).wrapping_mul(2))
            .wrapping_add(self.vh(y))
            .wrapping_add(self.vh(z));
        let k1 = || replaced(a, &[(y_pos, v)]);
        let k2 = || replaced(b, &[(z_pos, v)]);
        let k3 = || replaced(fe, &[(left, y), (right, z)]);
        if (h1 == h2 && k1() == k2()) || (h1 == h3 && k1() == k3()) || (h2 == h3 && k2() == k3()) {
            return false;
        }
        let exclude = [f, e1, e2];
        !(self.occupied(h1, exclude, k1) || self.occupied(h2, exclude, k2) || self.occupied(h3, exclude, k3))
    }

    /// Exact number of admissible forward switchings, `F`.
    pub fn count_forward(&self) -> u64 {
        let mut count = 0;
        self.visit_forward(|_| count += 1);
        count
    }

    /// Every admissible forward switching, in enumeration order.
    pub fn admissible_forward(&self) -> Vec<Switching> {
        let mut out = Vec::new();
        self.visit_forward(|sw| out.push(sw));
        out
    }

    fn visit_forward<V: FnMut(Switching)>(&self, mut visit: V) {
        if self.loops.is_empty() || !self.params().within_loop_budget(self.lambda() - 1) {
            return;
        }
        let k = self.k();
        for &f in &self.loops {
            let shape = self.loop_shape(f).expect("indexed loop");
            for &e1 in &self.green_proper {
                for &e2 in &self.green_proper {
                    if e1 == e2 {
                        continue;
                    }
                    for y_pos in 0..k {
                        for z_pos in 0..k {
                            if self.forward_ok(f, shape, e1, e2, y_pos, z_pos) {
                                visit(Switching {
                                    loop_edge: f,
                                    e1,
                                    e2,
                                    y_pos,
                                    z_pos,
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn is_admissible_backward(&self, bs: &BackSwitching) -> bool {
        let k = self.k();
        if bs.e1 == bs.e2
            || bs.e3 == bs.e1
            || bs.e3 == bs.e2
            || !self.is_green_proper(bs.e1)
            || !self.is_green_proper(bs.e2)
            || !self.is_green_proper(bs.e3)
            || bs.p_y >= k
            || bs.p_z >= k
            || bs.p_y == bs.p_z
            || bs.v as usize >= self.params().n
        {
            return false;
        }
        let (Some(q1), Some(q2)) = (
            self.seq.edge(bs.e1).iter().position(|&x| x == bs.v),
            self.seq.edge(bs.e2).iter().position(|&x| x == bs.v),
        ) else {
            return false;
        };
        if !self.params().within_loop_budget(self.lambda() + 1) {
            return false;
        }
        self.backward_ok(bs.v, bs.e1, q1, bs.e2, q2, bs.e3, bs.p_y, bs.p_z)
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_ok(
        &self,
        v: u32,
        e1: usize,
        q1: usize,
        e2: usize,
        q2: usize,
        e3: usize,
        p_y: usize,
        p_z: usize,
    ) -> bool {
        let a = self.seq.edge(e1);
        let b = self.seq.edge(e2);
        let c = self.seq.edge(e3);
        let y = c[p_y];
        let z = c[p_z];
        // new e1 = e1 - v + y and new e2 = e2 - v + z stay proper
        if y != v && a.contains(&y) {
            return false;
        }
        if z != v && b.contains(&z) {
            return false;
        }
        // new loop at e3 has v exactly twice
        if c.iter().enumerate().any(|(i, &x)| i != p_y && i != p_z && x == v) {
            return false;
        }
        // the inverse forward draws y from new e1 \ new e2, z from new e2 \ new e1
        if (y != v && b.contains(&y)) || (z != v && a.contains(&z)) {
            return false;
        }
        let h1 = self.edge_hash[e1].wrapping_sub(self.vh(v)).wrapping_add(self.vh(y));
        let h2 = self.edge_hash[e2].wrapping_sub(self.vh(v)).wrapping_add(self.vh(z));
        let h3 = self.edge_hash[e3]
            .wrapping_sub(self.vh(y))
            .wrapping_sub(self.vh(z))
            .wrapping_add(self.vh(v).wrapping_mul(2));
        let k1 = || replaced(a, &[(q1, y)]);
        let k2 = || replaced(b, &[(q2, z)]);
        let k3 = || replaced(c, &[(p_y, v), (p_z, v)]);
        if (h1 == h2 && k1() == k2()) || (h1 == h3 && k1() == k3()) || (h2 == h3 && k2() == k3()) {
            return false;
        }
        let exclude = [e1, e2, e3];
        !(self.occupied(h1, exclude, k1) || self.occupied(h2, exclude, k2) || self.occupied(h3, exclude, k3))
    }

    /// Number of admissible ordered backward tuples; always even.
    pub fn count_backward_ordered(&self) -> u64 {
        if !self.params().within_loop_budget(self.lambda() + 1) {
            return 0;
        }
        let p = self.params();
        let k = p.k;
        let mut through: Vec<Vec<(usize, usize)>> = vec![Vec::new(); p.n];
        for &e in &self.green_proper {
            for (q, &v) in self.seq.edge(e).iter().enumerate() {
                through[v as usize].push((e, q));
            }
        }
        let mut count = 0;
        for (v, list) in through.iter().enumerate() {
            let v = v as u32;
            for &(e1, q1) in list {
                for &(e2, q2) in list {
                    if e1 == e2 {
                        continue;
                    }
                    for &e3 in &self.green_proper {
                        if e3 == e1 || e3 == e2 {
                            continue;
                        }
                        for p_y in 0..k {
                            for p_z in 0..k {
                                if p_y != p_z && self.backward_ok(v, e1, q1, e2, q2, e3, p_y, p_z) {
                                    count += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        count
    }

    /// Exact number of admissible backward switchings, `B`.
    pub fn count_backward(&self) -> u64 {
        let ordered = self.count_backward_ordered();
        debug_assert_eq!(ordered % 2, 0);
        ordered / 2
    }

    /// Uniform over the admissible forward switchings, by rejection from
    /// uniform proposals over loops, ordered distinct pairs and positions.
    ///
    /// When the proposal space is no larger than the budget, a run of as
    /// many rejections as there are proposals falls back to exact
    /// enumeration: the pick stays uniform, and a sequence with no admissible
    /// switching fails at once instead of exhausting the budget.
    pub fn sample_forward<R: Rng + ?Sized>(&self, rng: &mut R, max_rejects: u64) -> Result<Switching, SwitchError> {
        if self.loops.is_empty() {
            return Err(SwitchError::NoLoops);
        }
        let g = self.green_proper.len();
        let k = self.k();
        if g >= 2 && self.params().within_loop_budget(self.lambda() - 1) {
            let space = (self.loops.len() * g * (g - 1) * k * k) as u64;
            let tries = if space <= max_rejects { space } else { max_rejects };
            for _ in 0..tries {
                let f = self.loops[rng.random_range(0..self.loops.len())];
                let i = rng.random_range(0..g);
                let mut j = rng.random_range(0..g - 1);
                if j >= i {
                    j += 1;
                }
                let sw = Switching {
                    loop_edge: f,
                    e1: self.green_proper[i],
                    e2: self.green_proper[j],
                    y_pos: rng.random_range(0..k),
                    z_pos: rng.random_range(0..k),
                };
                let shape = self.loop_shape(f).expect("indexed loop");
                if self.forward_ok(f, shape, sw.e1, sw.e2, sw.y_pos, sw.z_pos) {
                    return Ok(sw);
                }
            }
            if space <= max_rejects {
                let all = self.admissible_forward();
                if !all.is_empty() {
                    return Ok(all[rng.random_range(0..all.len())]);
                }
            }
        }
        Err(SwitchError::RejectBudget { budget: max_rejects })
    }

    /// Apply an admissible forward switching and return its inverse.
    pub fn apply_forward(&mut self, sw: &Switching) -> Result<BackSwitching, SwitchError> {
        if !self.is_admissible_forward(sw) {
            return Err(SwitchError::Inadmissible);
        }
        let k = self.k();
        let shape = self.loop_shape(sw.loop_edge).expect("checked above");
        let touched = [sw.loop_edge, sw.e1, sw.e2];
        self.unindex(&touched);
        let entries = self.seq.entries_mut();
        entries.swap(k * sw.e1 + sw.y_pos, k * sw.loop_edge + shape.left);
        entries.swap(k * sw.e2 + sw.z_pos, k * sw.loop_edge + shape.right);
        self.reindex(&touched);
        self.remove_loop(sw.loop_edge);
        self.add_green_proper(sw.loop_edge);
        Ok(BackSwitching {
            v: shape.v,
            e1: sw.e1,
            e2: sw.e2,
            e3: sw.loop_edge,
            p_y: shape.left,
            p_z: shape.right,
        })
    }

    /// Apply an admissible backward switching and return its inverse.
    pub fn apply_backward(&mut self, bs: &BackSwitching) -> Result<Switching, SwitchError> {
        if !self.is_admissible_backward(bs) {
            return Err(SwitchError::Inadmissible);
        }
        let k = self.k();
        let q1 = self.seq.edge(bs.e1).iter().position(|&x| x == bs.v).unwrap();
        let q2 = self.seq.edge(bs.e2).iter().position(|&x| x == bs.v).unwrap();
        let touched = [bs.e1, bs.e2, bs.e3];
        self.unindex(&touched);
        let entries = self.seq.entries_mut();
        entries.swap(k * bs.e3 + bs.p_y, k * bs.e1 + q1);
        entries.swap(k * bs.e3 + bs.p_z, k * bs.e2 + q2);
        self.reindex(&touched);
        self.remove_green_proper(bs.e3);
        self.add_loop(bs.e3);
        Ok(if bs.p_y < bs.p_z {
            Switching {
                loop_edge: bs.e3,
                e1: bs.e1,
                e2: bs.e2,
                y_pos: q1,
                z_pos: q2,
            }
        } else {
            Switching {
                loop_edge: bs.e3,
                e1: bs.e2,
                e2: bs.e1,
                y_pos: q2,
                z_pos: q1,
            }
        })
    }

    fn unindex(&mut self, edges: &[usize]) {
        for &e in edges {
            let h = self.edge_hash[e];
            let bucket = self.index.get_mut(&h).expect("indexed edge");
            let at = bucket.iter().position(|&x| x as usize == e).unwrap();
            bucket.swap_remove(at);
            if bucket.is_empty() {
                self.index.remove(&h);
            }
        }
    }

    fn reindex(&mut self, edges: &[usize]) {
        for &e in edges {
            let h = self.hash_of(self.seq.edge(e));
            self.edge_hash[e] = h;
            self.index.entry(h).or_default().push(e as u32);
        }
    }

    fn remove_loop(&mut self, e: usize) {
        let slot = std::mem::replace(&mut self.loop_slot[e], NONE);
        self.loops.swap_remove(slot);
        if let Some(&moved) = self.loops.get(slot) {
            self.loop_slot[moved] = slot;
        }
    }

    fn add_loop(&mut self, e: usize) {
        self.loop_slot[e] = self.loops.len();
        self.loops.push(e);
    }

    fn remove_green_proper(&mut self, e: usize) {
        let slot = std::mem::replace(&mut self.green_slot[e], NONE);
        self.green_proper.swap_remove(slot);
        if let Some(&moved) = self.green_proper.get(slot) {
            self.green_slot[moved] = slot;
        }
    }

    fn add_green_proper(&mut self, e: usize) {
        self.green_slot[e] = self.green_proper.len();
        self.green_proper.push(e);
    }
}

fn replaced(edge: &[u32], changes: &[(usize, u32)]) -> EdgeKey {
    let mut e: EdgeKey = edge.iter().copied().collect();
    for &(i, v) in changes {
        e[i] = v;
    }
    e.sort_unstable();
    e
}

pub fn is_admissible_forward(seq: &Sequence, sw: &Switching) -> Result<bool, SwitchError> {
    Ok(SwitchState::new(seq.clone())?.is_admissible_forward(sw))
}

pub fn is_admissible_backward(seq: &Sequence, bs: &BackSwitching) -> Result<bool, SwitchError> {
    Ok(SwitchState::new(seq.clone())?.is_admissible_backward(bs))
}

pub fn count_forward(seq: &Sequence) -> Result<u64, SwitchError> {
    Ok(SwitchState::new(seq.clone())?.count_forward())
}

pub fn count_backward(seq: &Sequence) -> Result<u64, SwitchError> {
    Ok(SwitchState::new(seq.clone())?.count_backward())
}

pub fn apply_forward(seq: &Sequence, sw: &Switching) -> Result<Sequence, SwitchError> {
    let mut s = SwitchState::new(seq.clone())?;
    s.apply_forward(sw)?;
    Ok(s.into_sequence())
}

pub fn apply_backward(seq: &Sequence, bs: &BackSwitching) -> Result<Sequence, SwitchError> {
    let mut s = SwitchState::new(seq.clone())?;
    s.apply_backward(bs)?;
    Ok(s.into_sequence())
}

pub fn sample_forward<R: Rng + ?Sized>(
    seq: &Sequence,
    rng: &mut R,
    max_rejects: u64,
) -> Result<Switching, SwitchError> {
    SwitchState::new(seq.clone())?.sample_forward(rng, max_rejects)
}

/// Apply uniformly chosen forward switchings until no loop is left.
pub fn eliminate_loops<R: Rng + ?Sized>(
    seq: Sequence,
    rng: &mut R,
    max_rejects: u64,
) -> Result<(Sequence, Vec<Switching>), SwitchError> {
    let mut state = SwitchState::new(seq)?;
    let mut trace = Vec::with_capacity(state.lambda());
    while state.lambda() > 0 {
        let sw = state.sample_forward(rng, max_rejects)?;
        state.apply_forward(&sw)?;
        trace.push(sw);
    }
    Ok((state.into_sequence(), trace))
}

/// Admissibility decided from scratch: apply the exchanges to a copy and
/// classify the result. Independent of the hashed indexes above.
pub fn forward_admissible_by_outcome(seq: &Sequence, sw: &Switching) -> bool {
    let p = *seq.params();
    let k = p.k;
    let cls = seq.classify_edges();
    let green_proper = |i: usize| i >= p.red_edges && i < p.edges && cls.kinds[i] == EdgeKind::Proper;
    if sw.loop_edge < p.red_edges
        || sw.loop_edge >= p.edges
        || cls.kinds[sw.loop_edge] != EdgeKind::SimpleLoop
        || sw.e1 == sw.e2
        || !green_proper(sw.e1)
        || !green_proper(sw.e2)
        || sw.y_pos >= k
        || sw.z_pos >= k
    {
        return false;
    }
    let f = seq.edge(sw.loop_edge);
    let (left, right) = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .find(|&(i, j)| f[i] == f[j])
        .unwrap();
    let y = seq.edge(sw.e1)[sw.y_pos];
    let z = seq.edge(sw.e2)[sw.z_pos];
    if seq.edge(sw.e2).contains(&y) || seq.edge(sw.e1).contains(&z) {
        return false;
    }
    let mut entries = seq.entries().to_vec();
    entries.swap(k * sw.e1 + sw.y_pos, k * sw.loop_edge + left);
    entries.swap(k * sw.e2 + sw.z_pos, k * sw.loop_edge + right);
    lands_in_g(&Sequence::from_raw(p, entries), cls.lambda - 1, cls.lambda)
}

pub fn backward_admissible_by_outcome(seq: &Sequence, bs: &BackSwitching) -> bool {
    let p = *seq.params();
    let k = p.k;
    let cls = seq.classify_edges();
    let green_proper = |i: usize| i >= p.red_edges && i < p.edges && cls.kinds[i] == EdgeKind::Proper;
    if bs.e1 == bs.e2
        || bs.e3 == bs.e1
        || bs.e3 == bs.e2
        || !green_proper(bs.e1)
        || !green_proper(bs.e2)
        || !green_proper(bs.e3)
        || bs.p_y >= k
        || bs.p_z >= k
        || bs.p_y == bs.p_z
    {
        return false;
    }
    let (Some(q1), Some(q2)) = (
        seq.edge(bs.e1).iter().position(|&x| x == bs.v),
        seq.edge(bs.e2).iter().position(|&x| x == bs.v),
    ) else {
        return false;
    };
    let mut entries = seq.entries().to_vec();
    entries.swap(k * bs.e3 + bs.p_y, k * bs.e1 + q1);
    entries.swap(k * bs.e3 + bs.p_z, k * bs.e2 + q2);
    let out = Sequence::from_raw(p, entries);
    if !lands_in_g(&out, cls.lambda + 1, cls.lambda) {
        return false;
    }
    // must be reachable by a forward switching that picks y* from e1 \ e2
    let fwd = if bs.p_y < bs.p_z {
        Switching {
            loop_edge: bs.e3,
            e1: bs.e1,
            e2: bs.e2,
            y_pos: q1,
            z_pos: q2,
        }
    } else {
        Switching {
            loop_edge: bs.e3,
            e1: bs.e2,
            e2: bs.e1,
            y_pos: q2,
            z_pos: q1,
        }
    };
    let y = out.edge(fwd.e1)[fwd.y_pos];
    let z = out.edge(fwd.e2)[fwd.z_pos];
    !out.edge(fwd.e2).contains(&y) && !out.edge(fwd.e1).contains(&z)
}

fn lands_in_g(out: &Sequence, lambda: usize, _from: usize) -> bool {
    let c = out.classify_edges();
    c.lambda == lambda
        && c.red_loop_indices.is_empty()
        && !c.has_duplicates()
        && c.kinds.iter().all(|k| !k.is_bad_loop())
        && out.params().within_loop_budget(lambda)
}

/// Forward count by exhaustive outcome checks; quadratic in the edge count
/// with a full classification per candidate, so only for small instances.
pub fn count_forward_by_outcome(seq: &Sequence) -> u64 {
    let p = seq.params();
    let cls = seq.classify_edges();
    let k = p.k;
    let mut count = 0;
    for f in cls.loop_indices() {
        for &e1 in &cls.green_proper_indices {
            for &e2 in &cls.green_proper_indices {
                for y_pos in 0..k {
                    for z_pos in 0..k {
                        let sw = Switching {
                            loop_edge: f,
                            e1,
                            e2,
                            y_pos,
                            z_pos,
                        };
                        if forward_admissible_by_outcome(seq, &sw) {
                            count += 1;
                        }
                    }
                }
            }
        }
    }
    count
}

pub fn count_backward_ordered_by_outcome(seq: &Sequence) -> u64 {
    let p = seq.params();
    let cls = seq.classify_edges();
    let k = p.k;
    let mut count = 0;
    for v in 0..p.n as u32 {
        for &e1 in &cls.green_proper_indices {
            for &e2 in &cls.green_proper_indices {
                for &e3 in &cls.green_proper_indices {
                    for p_y in 0..k {
                        for p_z in 0..k {
                            let bs = BackSwitching {
                                v,
                                e1,
                                e2,
                                e3,
                                p_y,
                                p_z,
                            };
                            if backward_admissible_by_outcome(seq, &bs) {
                                count += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    count
}

/// `k^2 l g^2` with `g = M - rm`.
pub fn forward_upper_bound(p: &Params, lambda: usize) -> u128 {
    let g = p.green_edges() as u128;
    (p.k as u128).pow(2) * lambda as u128 * g * g
}

/// `C(k, 2) phi (M - rm)`.
pub fn backward_upper_bound(p: &Params, phi: u64) -> u128 {
    let k = p.k as u128;
    k * (k - 1) / 2 * phi as u128 * p.green_edges() as u128
}
