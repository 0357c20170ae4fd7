//! Generators for the i.i.d. sequence `X`, the uniform regular sequence `Y`,
//! and the step-level conditional law used while revealing `Y`.

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::params::Params;
use crate::sequence::Sequence;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("all {len} positions already revealed")]
    Exhausted { len: usize },
}

/// Fenwick tree over nonnegative integer weights with O(log n) sampling.
#[derive(Debug, Clone)]
pub struct ResidualTree {
    tree: Vec<u64>,
    total: u64,
    top: usize,
}

impl ResidualTree {
    pub fn new(weights: &[u64]) -> Self {
        let n = weights.len();
        let mut tree = vec![0u64; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            tree[i + 1] += w;
            let parent = (i + 1) + ((i + 1) & (i + 1).wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i + 1];
            }
        }
        let top = if n == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - n.leading_zeros())
        };
        ResidualTree {
            tree,
            total: weights.iter().sum(),
            top,
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn decrement(&mut self, index: usize) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] -= 1;
            i += i & i.wrapping_neg();
        }
        self.total -= 1;
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    pub fn find(&self, mut target: u64) -> usize {
        debug_assert!(target < self.total);
        let mut pos = 0;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Partial state of a sequence being revealed left to right.
#[derive(Debug, Clone)]
pub struct GenState {
    pub t: usize,
    pub deg: Vec<u32>,
    pub max_deg: u32,
    residual: ResidualTree,
    n: usize,
    d: usize,
}

impl GenState {
    pub fn new(p: &Params) -> Self {
        GenState {
            t: 0,
            deg: vec![0; p.n],
            max_deg: 0,
            residual: ResidualTree::new(&vec![p.d as u64; p.n]),
            n: p.n,
            d: p.d,
        }
    }

    pub fn remaining(&self) -> usize {
        self.n * self.d - self.t
    }

    pub fn record(&mut self, v: u32) {
        let dv = &mut self.deg[v as usize];
        debug_assert!((*dv as usize) < self.d);
        *dv += 1;
        self.max_deg = self.max_deg.max(*dv);
        self.residual.decrement(v as usize);
        self.t += 1;
    }

    /// Whether `2(d - deg_t(v))/(nd - t) - 1/n >= 0` for every `v`, checked
    /// as `2n(d - max_deg) >= nd - t`.
    pub fn mixture_feasible(&self) -> bool {
        2 * self.n * (self.d - self.max_deg as usize) >= self.remaining()
    }

    /// Draw from `P(v) = (d - deg_t(v)) / (nd - t)`.
    pub fn draw_step<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u = rng.random_range(0..self.residual.total());
        self.residual.find(u) as u32
    }

    /// Draw from `P(v) = 2(d - deg_t(v))/(nd - t) - 1/n`. Requires
    /// [`GenState::mixture_feasible`].
    ///
    /// Proposes from the step law and accepts `v` with probability
    /// `1 - (nd - t) / (2n (d - deg_t(v)))`; the overall acceptance rate is 1/2.
    pub fn draw_mixture_complement<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        debug_assert!(self.mixture_feasible());
        let remaining = self.remaining() as u64;
        loop {
            let v = self.draw_step(rng);
            let scale = 2 * self.n as u64 * (self.d as u64 - self.deg[v as usize] as u64);
            if rng.random_range(0..scale) >= remaining {
                return v;
            }
        }
    }
}

/// An exact discrete law over `0..n`: `P(v) = weights[v] / total`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepDistribution {
    pub weights: Vec<u64>,
    pub total: u64,
}

impl StepDistribution {
    pub fn prob(&self, v: usize) -> Ratio<u64> {
        Ratio::new(self.weights[v], self.total)
    }

    pub fn sums_to_one(&self) -> bool {
        self.weights.iter().sum::<u64>() == self.total
    }
}

pub fn step_distribution(state: &GenState, p: &Params) -> Result<StepDistribution, GenError> {
    if state.t >= p.sequence_len() {
        return Err(GenError::Exhausted { len: p.sequence_len() });
    }
    Ok(StepDistribution {
        weights: state.deg.iter().map(|&x| (p.d - x as usize) as u64).collect(),
        total: (p.sequence_len() - state.t) as u64,
    })
}

/// The auxiliary law `2(d - deg_t(v))/(nd - t) - 1/n` over the common
/// denominator `n (nd - t)`, or `None` when some weight would be negative.
pub fn mixture_complement_distribution(state: &GenState, p: &Params) -> Result<Option<StepDistribution>, GenError> {
    if state.t >= p.sequence_len() {
        return Err(GenError::Exhausted { len: p.sequence_len() });
    }
    let remaining = (p.sequence_len() - state.t) as i64;
    let weights: Vec<i64> = state
        .deg
        .iter()
        .map(|&x| 2 * p.n as i64 * (p.d as i64 - x as i64) - remaining)
        .collect();
    if weights.iter().any(|&w| w < 0) {
        return Ok(None);
    }
    Ok(Some(StepDistribution {
        weights: weights.into_iter().map(|w| w as u64).collect(),
        total: p.n as u64 * remaining as u64,
    }))
}

pub fn sample_iid<R: Rng + ?Sized>(p: &Params, rng: &mut R) -> Sequence {
    let n = p.n as u32;
    let entries = (0..p.sequence_len()).map(|_| rng.random_range(0..n)).collect();
    Sequence::from_raw(*p, entries)
}

/// Uniform over all sequences with every vertex exactly `d` times.
pub fn sample_regular<R: Rng + ?Sized>(p: &Params, rng: &mut R) -> Sequence {
    let mut entries: Vec<u32> = (0..p.n as u32).flat_map(|v| std::iter::repeat_n(v, p.d)).collect();
    entries.shuffle(rng);
    Sequence::from_raw(*p, entries)
}

/// Same law as [`sample_regular`], revealed one position at a time.
pub fn sample_regular_sequential<R: Rng + ?Sized>(p: &Params, rng: &mut R) -> Sequence {
    let mut state = GenState::new(p);
    let mut entries = Vec::with_capacity(p.sequence_len());
    for _ in 0..p.sequence_len() {
        let v = state.draw_step(rng);
        state.record(v);
        entries.push(v);
    }
    Sequence::from_raw(*p, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    #[test]
    fn fenwick_find_matches_linear_scan() {
        let weights = [3u64, 0, 2, 5, 0, 1, 4];
        let mut tree = ResidualTree::new(&weights);
        let mut w = weights.to_vec();
        for round in 0..6 {
            let total: u64 = w.iter().sum();
            assert_eq!(tree.total(), total);
            for target in 0..total {
                let mut acc = 0;
                let expected = w
                    .iter()
                    .position(|&x| {
                        acc += x;
                        acc > target
                    })
                    .unwrap();
                assert_eq!(tree.find(target), expected, "round {round} target {target}");
            }
            let i = w.iter().position(|&x| x > 0).unwrap() + round % 2;
            if w[i] > 0 {
                w[i] -= 1;
                tree.decrement(i);
            }
        }
    }

    #[test]
    fn step_law_edges() {
        let p = Params::derive(6, 2, 3).unwrap();
        let mut s = GenState::new(&p);
        let dist = step_distribution(&s, &p).unwrap();
        assert!((0..6).all(|v| dist.prob(v) == Ratio::new(1, 6)));
        s.record(2);
        s.record(2);
        let dist = step_distribution(&s, &p).unwrap();
        assert_eq!(dist.prob(2), Ratio::from_integer(0));
        assert!(dist.sums_to_one());
        for v in [0, 0, 1, 1, 3, 3, 4, 4, 5] {
            s.record(v);
        }
        let dist = step_distribution(&s, &p).unwrap();
        assert_eq!(dist.prob(5), Ratio::from_integer(1));
        s.record(5);
        assert_eq!(step_distribution(&s, &p), Err(GenError::Exhausted { len: 12 }));
    }

    #[test]
    fn mixture_law_starts_uniform() {
        let p = Params::derive(6, 2, 3).unwrap();
        let s = GenState::new(&p);
        let z = mixture_complement_distribution(&s, &p).unwrap().unwrap();
        assert!(z.sums_to_one());
        assert!((0..6).all(|v| z.prob(v) == Ratio::new(1, 6)));
    }

    #[test]
    fn mixture_feasibility_matches_weights() {
        let p = Params::derive(9, 4, 3).unwrap();
        let mut rng = trial_rng(11, 0);
        for _ in 0..50 {
            let mut s = GenState::new(&p);
            for _ in 0..p.sequence_len() - 1 {
                let z = mixture_complement_distribution(&s, &p).unwrap();
                assert_eq!(z.is_some(), s.mixture_feasible());
                if let Some(z) = z {
                    assert!(z.sums_to_one());
                }
                let v = s.draw_step(&mut rng);
                s.record(v);
            }
        }
    }

    #[test]
    fn regular_sample_counts() {
        let p = Params::derive(30, 4, 3).unwrap();
        let mut rng = trial_rng(1, 0);
        for _ in 0..20 {
            assert!(sample_regular(&p, &mut rng).is_regular());
            assert!(sample_regular_sequential(&p, &mut rng).is_regular());
            let x = sample_iid(&p, &mut rng);
            assert_eq!(x.entries().len(), 120);
        }
        assert_eq!(
            sample_iid(&p, &mut trial_rng(5, 2)),
            sample_iid(&p, &mut trial_rng(5, 2))
        );
    }
}
