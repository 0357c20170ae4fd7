//! Exhaustive ground truth for small instances.

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

use crate::graph::SimpleGraph;
use crate::params::Params;
use crate::sequence::{edge_key, EdgeKey, Sequence};

pub const DEFAULT_NODE_CEILING: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("search exceeded {ceiling} nodes")]
    NodeCeiling { ceiling: u64 },
    #[error("space of size {size} exceeds the ceiling {ceiling}")]
    SpaceTooLarge { size: u128, ceiling: u64 },
    #[error("k = {k} does not divide n d = {nd}")]
    NotDivisible { k: usize, nd: usize },
    #[error("graph is not simple: {0}")]
    NotSimple(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnumerationResult {
    pub instances: Vec<SimpleGraph>,
    pub count: usize,
}

/// All `d`-regular `k`-graphs on `[n]`, in lexicographic order of their
/// sorted edge lists.
pub fn enumerate_regular(n: usize, d: usize, k: usize, ceiling: u64) -> Result<EnumerationResult, OracleError> {
    if !(n * d).is_multiple_of(k) {
        return Err(OracleError::NotDivisible { k, nd: n * d });
    }
    struct Search {
        n: usize,
        k: usize,
        ceiling: u64,
        nodes: u64,
        residual: Vec<usize>,
        edges: Vec<EdgeKey>,
        found: Vec<SimpleGraph>,
    }
    impl Search {
        fn go(&mut self, from_lowest: usize) -> Result<(), OracleError> {
            self.nodes += 1;
            if self.nodes > self.ceiling {
                return Err(OracleError::NodeCeiling { ceiling: self.ceiling });
            }
            let Some(u) = (from_lowest..self.n).find(|&v| self.residual[v] > 0) else {
                let g = SimpleGraph::from_edges(self.n, self.k, self.edges.clone()).expect("built simple");
                self.found.push(g);
                return Ok(());
            };
            // edges through u, lexicographically after the last edge chosen
            // with the same minimum so every graph appears once
            let last = self.edges.last().filter(|e| e[0] as usize == u).cloned();
            let candidates: Vec<u32> = (u + 1..self.n)
                .filter(|&v| self.residual[v] > 0)
                .map(|v| v as u32)
                .collect();
            let mut pick = Vec::with_capacity(self.k - 1);
            self.choose(u, &candidates, 0, &mut pick, last.as_ref())
        }

        fn choose(
            &mut self,
            u: usize,
            candidates: &[u32],
            start: usize,
            pick: &mut Vec<u32>,
            last: Option<&EdgeKey>,
        ) -> Result<(), OracleError> {
            if pick.len() == self.k - 1 {
                let mut e: EdgeKey = EdgeKey::new();
                e.push(u as u32);
                e.extend(pick.iter().copied());
                if let Some(l) = last {
                    if e <= *l {
                        return Ok(());
                    }
                }
                for &v in e.iter() {
                    self.residual[v as usize] -= 1;
                }
                self.edges.push(e);
                let r = self.go(u);
                let e = self.edges.pop().unwrap();
                for &v in e.iter() {
                    self.residual[v as usize] += 1;
                }
                return r;
            }
            let need = self.k - 1 - pick.len();
            for i in start..candidates.len() {
                if candidates.len() - i < need {
                    break;
                }
                pick.push(candidates[i]);
                let r = self.choose(u, candidates, i + 1, pick, last);
                pick.pop();
                r?;
            }
            Ok(())
        }
    }
    let mut s = Search {
        n,
        k,
        ceiling,
        nodes: 0,
        residual: vec![d; n],
        edges: Vec::new(),
        found: Vec::new(),
    };
    s.go(0)?;
    let mut instances = s.found;
    instances.sort();
    Ok(EnumerationResult {
        count: instances.len(),
        instances,
    })
}

/// `(nd)! / (d!)^n`, or `None` on overflow.
pub fn sequence_space_size(p: &Params) -> Option<u128> {
    let mut acc: u128 = 1;
    let mut placed: u128 = 0;
    // product of binomials C(placed + d, d)
    for _ in 0..p.n {
        let mut b: u128 = 1;
        for i in 1..=p.d as u128 {
            b = b.checked_mul(placed + i)? / i;
        }
        acc = acc.checked_mul(b)?;
        placed += p.d as u128;
    }
    Some(acc)
}

/// Visit every element of `S` once, in lexicographic order of entries.
/// Returns the number visited.
pub fn enumerate_sequences<F>(p: &Params, ceiling: u64, mut visit: F) -> Result<u64, OracleError>
where
    F: FnMut(&Sequence),
{
    let size = sequence_space_size(p).unwrap_or(u128::MAX);
    if size > ceiling as u128 {
        return Err(OracleError::SpaceTooLarge { size, ceiling });
    }
    let mut entries: Vec<u32> = (0..p.n as u32).flat_map(|v| std::iter::repeat_n(v, p.d)).collect();
    let mut seq = Sequence::from_raw(*p, entries.clone());
    let mut count = 0;
    loop {
        visit(&seq);
        count += 1;
        if !next_permutation(&mut entries) {
            break;
        }
        seq.entries_mut().copy_from_slice(&entries);
    }
    Ok(count)
}

pub(crate) fn next_permutation<T: Ord>(a: &mut [T]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        a.reverse();
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

fn factorial(x: u128) -> Option<u128> {
    (1..=x).try_fold(1u128, |acc, i| acc.checked_mul(i))
}

/// `M! (k!)^M`.
pub fn preimage_formula(edges: usize, k: usize) -> Option<u128> {
    factorial(edges as u128)?.checked_mul(factorial(k as u128)?.checked_pow(edges as u32)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PreimageCount {
    /// Distinct sequences mapping to the graph.
    pub total: u64,
    /// Those among them in `S~`, when requested.
    pub in_tilde_s: Option<u64>,
}

/// Enumerate every ordering of the edges and of the vertices inside each
/// edge, confirm the resulting sequences are distinct, and count them.
pub fn count_preimages(h: &SimpleGraph, p: &Params, filter: bool, ceiling: u64) -> Result<PreimageCount, OracleError> {
    if h.n != p.n || h.k != p.k || h.edge_count() != p.edges || !h.is_regular(p.d) {
        return Err(OracleError::NotSimple(format!(
            "graph does not match the instance ({}, {}, {})",
            p.k, p.n, p.d
        )));
    }
    let size = preimage_formula(p.edges, p.k).unwrap_or(u128::MAX);
    if size > ceiling as u128 {
        return Err(OracleError::SpaceTooLarge { size, ceiling });
    }
    let ephi = crate::sequence::expected_phi(p);
    let k = p.k;
    let mut inner: Vec<Vec<Vec<u32>>> = Vec::new();
    for e in h.edges() {
        let mut perm = e.to_vec();
        let mut all = vec![perm.clone()];
        while next_permutation(&mut perm) {
            all.push(perm.clone());
        }
        inner.push(all);
    }
    let radix = inner[0].len();
    let mut codes: Vec<u128> = Vec::with_capacity(size as usize);
    let mut in_tilde_s = 0u64;
    let mut order: Vec<usize> = (0..p.edges).collect();
    let mut entries = vec![0u32; p.sequence_len()];
    loop {
        let mut digits = vec![0usize; p.edges];
        loop {
            for (slot, (&e, &dgt)) in order.iter().zip(&digits).enumerate() {
                entries[slot * k..slot * k + k].copy_from_slice(&inner[e][dgt]);
            }
            codes.push(encode(&entries, p.n));
            if filter {
                // preimages of a simple graph have no loops, so only the
                // phi window can exclude them
                let seq = Sequence::from_raw(*p, entries.clone());
                in_tilde_s += crate::sequence::phi_within_window(p, seq.phi(), &ephi) as u64;
            }
            // mixed-radix increment
            let mut i = 0;
            while i < digits.len() {
                digits[i] += 1;
                if digits[i] < radix {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
            if i == digits.len() {
                break;
            }
        }
        if !next_permutation(&mut order) {
            break;
        }
    }
    codes.sort_unstable();
    codes.dedup();
    Ok(PreimageCount {
        total: codes.len() as u64,
        in_tilde_s: filter.then_some(in_tilde_s),
    })
}

fn encode(entries: &[u32], n: usize) -> u128 {
    entries
        .iter()
        .fold(0u128, |acc, &v| acc.wrapping_mul(n as u128).wrapping_add(v as u128))
}

/// Cyclically ordered edges of a loose Hamilton cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LooseCycle {
    pub edges: Vec<EdgeKey>,
}

/// Exact backtracking search for a loose Hamilton cycle.
pub fn find_loose_hamilton(h: &SimpleGraph) -> Option<LooseCycle> {
    let (n, k) = (h.n, h.k);
    if k < 2 || n % (k - 1) != 0 || n / (k - 1) < 3 {
        return None;
    }
    let len = n / (k - 1);
    let mut through: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in h.edges().iter().enumerate() {
        for &v in e {
            through[v as usize].push(i);
        }
    }
    struct Walk<'a> {
        h: &'a SimpleGraph,
        through: &'a [Vec<usize>],
        len: usize,
        used: Vec<bool>,
        path: Vec<usize>,
        entry: u32,
    }
    impl Walk<'_> {
        // `exit` is the vertex shared with the next edge
        fn extend(&mut self, exit: u32) -> bool {
            let step = self.path.len();
            let closing = step + 1 == self.len;
            for &ei in &self.through[exit as usize] {
                if self.path.contains(&ei) {
                    continue;
                }
                let e = &self.h.edges()[ei];
                let others: Vec<u32> = e.iter().copied().filter(|&x| x != exit).collect();
                if closing {
                    // k-2 fresh vertices plus the entry of the first edge
                    if !others.contains(&self.entry) {
                        continue;
                    }
                    if others.iter().all(|&x| x == self.entry || !self.used[x as usize]) {
                        self.path.push(ei);
                        return true;
                    }
                    continue;
                }
                if others.iter().any(|&x| self.used[x as usize]) {
                    continue;
                }
                for &x in &others {
                    self.used[x as usize] = true;
                }
                self.path.push(ei);
                for &next in &others {
                    if self.extend(next) {
                        return true;
                    }
                }
                self.path.pop();
                for &x in &others {
                    self.used[x as usize] = false;
                }
            }
            false
        }
    }
    // vertex 0 lies on some edge of any cycle; fix that edge and its two
    // attachment points
    for &e0 in &through[0] {
        let e = &h.edges()[e0];
        for &entry in e.iter() {
            for &exit in e.iter() {
                if entry == exit {
                    continue;
                }
                let mut walk = Walk {
                    h,
                    through: &through,
                    len,
                    used: vec![false; n],
                    path: vec![e0],
                    entry,
                };
                for &x in e.iter() {
                    walk.used[x as usize] = true;
                }
                if walk.extend(exit) {
                    let cycle = LooseCycle {
                        edges: walk.path.iter().map(|&i| h.edges()[i].clone()).collect(),
                    };
                    debug_assert!(validate_loose_cycle(h, &cycle).is_ok());
                    return Some(cycle);
                }
            }
        }
    }
    None
}

/// Check a certificate from first principles: edges of `h`, cyclically
/// consecutive edges meet in exactly one vertex, others are disjoint, and
/// the edges cover every vertex.
pub fn validate_loose_cycle(h: &SimpleGraph, cycle: &LooseCycle) -> Result<(), String> {
    let t = cycle.edges.len();
    if t < 3 {
        return Err(format!("{t} edges, need at least 3"));
    }
    let set: HashSet<&EdgeKey> = cycle.edges.iter().collect();
    if set.len() != t {
        return Err("repeated edge".into());
    }
    for e in &cycle.edges {
        if !h.contains(e) {
            return Err(format!("{e:?} is not an edge"));
        }
    }
    for i in 0..t {
        for j in i + 1..t {
            let shared = cycle.edges[i].iter().filter(|v| cycle.edges[j].contains(v)).count();
            let adjacent = j == i + 1 || (i == 0 && j == t - 1);
            let want = if adjacent { 1 } else { 0 };
            if shared != want {
                return Err(format!("edges {i} and {j} share {shared} vertices"));
            }
        }
    }
    let covered: HashSet<u32> = cycle.edges.iter().flatten().copied().collect();
    if covered.len() != h.n {
        return Err(format!("covers {} of {} vertices", covered.len(), h.n));
    }
    Ok(())
}

/// Brute force over vertex orders; `n <= 9` only.
pub fn loose_hamilton_by_orders(h: &SimpleGraph) -> bool {
    let (n, k) = (h.n, h.k);
    if n % (k - 1) != 0 || n / (k - 1) < 3 {
        return false;
    }
    let t = n / (k - 1);
    let mut order: Vec<u32> = (0..n as u32).collect();
    loop {
        let ok = (0..t).all(|i| {
            let e: Vec<u32> = (0..k).map(|j| order[(i * (k - 1) + j) % n]).collect();
            h.contains(&edge_key(&e))
        });
        if ok {
            return true;
        }
        if !next_permutation(&mut order) {
            return false;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineLaw {
    /// Output probabilities aligned with the enumerated instances,
    /// conditional on the pass succeeding.
    pub probabilities: Vec<f64>,
    /// Probability that a pass is rejected at the `E` gate.
    pub rejected_e: f64,
    /// Probability that a pass is rejected at the `S~` gate.
    pub rejected_tilde_s: f64,
    /// Probability that elimination reaches a sequence with loops but no
    /// admissible switching.
    pub dead_end: f64,
    /// Half the l1 distance between the output law and the uniform law.
    pub total_variation_from_uniform: f64,
}

/// Exact output law of one pipeline pass, by pushing probability mass from
/// every sequence of `S` through the red swap and the switching chain.
pub fn pipeline_law(p: &Params, space: &EnumerationResult, ceiling: u64) -> Result<PipelineLaw, OracleError> {
    use crate::redswap::swap_with_targets;
    use crate::switching::SwitchState;
    use std::collections::HashMap;

    let ephi = crate::sequence::expected_phi(p);
    let total = sequence_space_size(p).unwrap_or(u128::MAX) as f64;
    let mut layers: Vec<HashMap<u128, f64>> = Vec::new();
    let mut rejected_e = 0.0;
    let mut rejected_tilde_s = 0.0;
    let unit = 1.0 / total;
    enumerate_sequences(p, ceiling, |y| {
        let cls = y.classify_edges();
        if cls.kinds.iter().any(|k| k.is_bad_loop()) || cls.has_duplicates() || !p.within_loop_budget(cls.lambda) {
            rejected_e += unit;
            return;
        }
        let loops = &cls.red_loop_indices;
        let green = &cls.green_proper_indices;
        if loops.len() > green.len() {
            return;
        }
        let subsets = subsets_of(green.len(), loops.len());
        let w = unit / subsets.len() as f64;
        for chosen in subsets {
            let targets: Vec<usize> = chosen.iter().map(|&j| green[j]).collect();
            let (y1, _) = swap_with_targets(y, loops, &targets);
            if !crate::sequence::phi_within_window(p, y1.phi(), &ephi) {
                rejected_tilde_s += w;
                continue;
            }
            while layers.len() <= cls.lambda {
                layers.push(HashMap::new());
            }
            *layers[cls.lambda].entry(encode(y1.entries(), p.n)).or_default() += w;
        }
    })?;
    let mut dead_end = 0.0;
    for l in (1..layers.len()).rev() {
        let layer = std::mem::take(&mut layers[l]);
        for (code, w) in layer {
            let y = Sequence::from_raw(*p, decode(code, p.n, p.sequence_len()));
            let st = SwitchState::new(y).expect("member of G_l");
            let moves = st.admissible_forward();
            if moves.is_empty() {
                dead_end += w;
                continue;
            }
            let share = w / moves.len() as f64;
            for sw in moves {
                let mut next = st.clone();
                next.apply_forward(&sw).expect("admissible");
                *layers[l - 1].entry(encode(next.sequence().entries(), p.n)).or_default() += share;
            }
        }
    }
    let index: HashMap<&SimpleGraph, usize> = space.instances.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let mut probabilities = vec![0.0; space.count];
    if let Some(layer) = layers.first() {
        for (&code, &w) in layer {
            let y = Sequence::from_raw(*p, decode(code, p.n, p.sequence_len()));
            let g = SimpleGraph::from_sequence(&y).expect("G_0 is simple");
            probabilities[index[&g]] += w;
        }
    }
    let mass: f64 = probabilities.iter().sum();
    for q in probabilities.iter_mut() {
        *q /= mass;
    }
    let u = 1.0 / space.count as f64;
    let total_variation_from_uniform = probabilities.iter().map(|q| (q - u).abs()).sum::<f64>() / 2.0;
    Ok(PipelineLaw {
        probabilities,
        rejected_e,
        rejected_tilde_s,
        dead_end,
        total_variation_from_uniform,
    })
}

fn subsets_of(n: usize, j: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut pick: Vec<usize> = (0..j).collect();
    if j > n {
        return out;
    }
    loop {
        out.push(pick.clone());
        let mut i = j;
        while i > 0 && pick[i - 1] == n - j + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        pick[i - 1] += 1;
        for t in i..j {
            pick[t] = pick[t - 1] + 1;
        }
    }
}

fn decode(mut code: u128, n: usize, len: usize) -> Vec<u32> {
    let mut out = vec![0u32; len];
    for slot in out.iter_mut().rev() {
        *slot = (code % n as u128) as u32;
        code /= n as u128;
    }
    out
}
