//! Joint construction of the i.i.d. sequence `X` and the uniform regular
//! sequence `Y` so that they share most red edges.
//!
//! At each step `t` of the red prefix, a fair selector `I_t` decides whether
//! `Y_t` copies `X_t` or is drawn from the complementary law
//! `2(d - deg_t(v))/(nd - t) - 1/n`. The mixture reproduces the step law of
//! `Y` exactly, so `Y` stays uniform over regular sequences. When the
//! complementary law is not a distribution, `Y_t` is drawn from the step law
//! directly. Beyond the red prefix only the step law is used.

use std::collections::HashSet;

use rand::Rng;
use serde::Serialize;

use crate::generate::GenState;
use crate::graph::SimpleGraph;
use crate::params::Params;
use crate::sequence::{edge_key, kind_of_sorted, EdgeKey, Sequence};

#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub x: Sequence,
    pub y: Sequence,
    pub selectors: Vec<bool>,
    /// Red edge indices whose `k` selectors are all 1, ascending.
    pub w: Vec<usize>,
    pub x_has_multiple_edges: bool,
    pub x_lambda: usize,
    pub event_a: bool,
    pub event_b: bool,
    /// Largest `T <= krm` such that the mixture was feasible at every `t < T`.
    pub condition_held_through: usize,
}

pub fn coupled_generate<R: Rng + ?Sized>(p: &Params, rng: &mut R) -> CoupledRun {
    let len = p.sequence_len();
    let red_len = p.red_prefix_len();
    let n = p.n as u32;
    let mut state = GenState::new(p);
    let mut x = Vec::with_capacity(len);
    let mut y = Vec::with_capacity(len);
    let mut selectors = Vec::with_capacity(len);
    let mut held_through = None;

    for t in 0..len {
        let xt = rng.random_range(0..n);
        let it: bool = rng.random();
        x.push(xt);
        selectors.push(it);
        let yt = if t < red_len && state.mixture_feasible() {
            if it {
                xt
            } else {
                state.draw_mixture_complement(rng)
            }
        } else {
            if t < red_len && held_through.is_none() {
                held_through = Some(t);
            }
            state.draw_step(rng)
        };
        state.record(yt);
        y.push(yt);
    }
    let condition_held_through = held_through.unwrap_or(red_len);

    let k = p.k;
    let w: Vec<usize> = (0..p.red_edges)
        .filter(|&i| selectors[k * i..k * i + k].iter().all(|&b| b))
        .collect();

    let x = Sequence::from_raw(*p, x);
    let mut seen = HashSet::with_capacity(p.edges);
    let mut x_has_multiple_edges = false;
    let mut x_lambda = 0;
    for e in x.edges() {
        let key = edge_key(e);
        if kind_of_sorted(&key).is_loop() {
            x_lambda += 1;
        }
        if !seen.insert(key) {
            x_has_multiple_edges = true;
        }
    }
    let event_a =
        !x_has_multiple_edges && p.within_loop_budget(x_lambda) && p.at_least_loop_budget(w.len() as i64 - p.m as i64);

    CoupledRun {
        x,
        y: Sequence::from_raw(*p, y),
        selectors,
        w,
        x_has_multiple_edges,
        x_lambda,
        event_a,
        event_b: condition_held_through == red_len,
        condition_held_through,
    }
}

/// The uniform `m`-edge graph carried by the run.
///
/// Under event A, the first `m` proper `X`-edges indexed by `W`. Otherwise an
/// independent uniform `m`-subset of all proper `k`-sets.
pub fn extract_hnm<R: Rng + ?Sized>(run: &CoupledRun, p: &Params, rng: &mut R) -> SimpleGraph {
    if p.m == 0 {
        return SimpleGraph::empty(p.n, p.k);
    }
    if run.event_a {
        let edges: Vec<EdgeKey> = run
            .w
            .iter()
            .map(|&i| edge_key(run.x.edge(i)))
            .filter(|key| !kind_of_sorted(key).is_loop())
            .take(p.m)
            .collect();
        debug_assert_eq!(edges.len(), p.m);
        return SimpleGraph::from_edges(p.n, p.k, edges).expect("event A guarantees distinct proper edges");
    }
    sample_uniform_graph(p.n, p.k, p.m, rng)
}

/// Uniform `m`-subset of the `C(n, k)` proper edges.
pub fn sample_uniform_graph<R: Rng + ?Sized>(n: usize, k: usize, m: usize, rng: &mut R) -> SimpleGraph {
    let total = binomial(n as u128, k as u128);
    let total = usize::try_from(total).expect("C(n, k) exceeds the address space");
    assert!(m <= total, "cannot pick {m} distinct edges out of {total}");
    let edges: Vec<Vec<u32>> = rand::seq::index::sample(rng, total, m)
        .into_iter()
        .map(|rank| unrank_combination(rank as u128, k))
        .collect();
    SimpleGraph::from_edges(n, k, edges).expect("distinct ranks give distinct edges")
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Colexicographic unranking: the `rank`-th `k`-subset of `0..`.
fn unrank_combination(mut rank: u128, k: usize) -> Vec<u32> {
    let mut out = vec![0u32; k];
    for i in (1..=k).rev() {
        // largest c with C(c, i) <= rank
        let mut c = i as u128 - 1;
        let mut step = 1u128;
        while binomial(c + step, i as u128) <= rank {
            c += step;
            step *= 2;
        }
        while step > 0 {
            if binomial(c + step, i as u128) <= rank {
                c += step;
            }
            step /= 2;
        }
        rank -= binomial(c, i as u128);
        out[i - 1] = c as u32;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmbeddingCheck {
    pub embedded: bool,
    /// First edge of the graph not found among the red edges (0-based).
    pub missing: Option<Vec<u32>>,
}

pub fn check_embedding(g: &SimpleGraph, seq: &Sequence) -> EmbeddingCheck {
    let red: HashSet<EdgeKey> = (0..seq.params().red_edges).map(|i| edge_key(seq.edge(i))).collect();
    let missing = g.edges().iter().find(|e| !red.contains(*e)).map(|e| e.to_vec());
    EmbeddingCheck {
        embedded: missing.is_none(),
        missing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    #[test]
    fn unranking_is_a_bijection() {
        let n = 9;
        let k = 3;
        let total = binomial(n, k as u128);
        let mut seen = HashSet::new();
        for rank in 0..total {
            let c = unrank_combination(rank, k);
            assert!(c.windows(2).all(|w| w[0] < w[1]));
            assert!(c.iter().all(|&v| (v as u128) < n));
            assert!(seen.insert(c));
        }
        assert_eq!(seen.len(), 84);
    }

    #[test]
    fn y_is_regular_and_selected_edges_agree() {
        let p = Params::derive(60, 6, 3).unwrap();
        let mut rng = trial_rng(3, 0);
        for _ in 0..200 {
            let run = coupled_generate(&p, &mut rng);
            assert!(run.y.is_regular());
            assert!(run.w.iter().all(|&i| i < p.red_edges));
            if run.event_b {
                for &i in &run.w {
                    assert_eq!(run.x.edge(i), run.y.edge(i));
                }
            }
            let h = extract_hnm(&run, &p, &mut rng);
            assert_eq!(h.edge_count(), p.m);
            if run.event_a && run.event_b {
                assert!(check_embedding(&h, &run.y).embedded);
            }
        }
    }

    #[test]
    fn zero_m_gives_empty_graph() {
        let p = Params::derive(6, 2, 3).unwrap();
        let mut rng = trial_rng(0, 0);
        let run = coupled_generate(&p, &mut rng);
        assert_eq!(extract_hnm(&run, &p, &mut rng).edge_count(), 0);
        assert!(run.event_b);
    }

    #[test]
    fn embedding_check() {
        let p = Params::derive(6, 2, 3).unwrap().with_red_edges(2);
        let y = Sequence::from_one_based(p, &[1, 2, 3, 4, 5, 6, 1, 2, 4, 3, 5, 6]).unwrap();
        assert!(check_embedding(&SimpleGraph::empty(6, 3), &y).embedded);
        let g = SimpleGraph::from_edges(6, 3, [[5, 4, 3]]).unwrap();
        assert!(check_embedding(&g, &y).embedded);
        let g = SimpleGraph::from_edges(6, 3, [[0, 1, 3]]).unwrap();
        let c = check_embedding(&g, &y);
        assert!(!c.embedded);
        assert_eq!(c.missing, Some(vec![0, 1, 3]));
    }
}
