//! Moving red loops into the green region.
//!
//! Each red loop trades places, block for block, with a green proper edge
//! drawn uniformly without replacement. The multiset of edges is unchanged.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sequence::{EdgeClassification, Sequence};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SwapError {
    #[error("{loops} red loops but only {green} green proper edges")]
    InsufficientGreen { loops: usize, green: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapPair {
    pub red_loop_index: usize,
    pub green_target_index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapRecord {
    pub pairs: Vec<SwapPair>,
}

pub fn swap_red_loops<R: Rng + ?Sized>(
    seq: &Sequence,
    cls: &EdgeClassification,
    rng: &mut R,
) -> Result<(Sequence, SwapRecord), SwapError> {
    let loops = &cls.red_loop_indices;
    let green = &cls.green_proper_indices;
    if loops.len() > green.len() {
        return Err(SwapError::InsufficientGreen {
            loops: loops.len(),
            green: green.len(),
        });
    }
    if loops.is_empty() {
        return Ok((seq.clone(), SwapRecord::default()));
    }
    let mut chosen = rand::seq::index::sample(rng, green.len(), loops.len()).into_vec();
    chosen.sort_unstable();
    let targets: Vec<usize> = chosen.iter().map(|&j| green[j]).collect();
    Ok(swap_with_targets(seq, loops, &targets))
}

/// Exchange the `i`-th red loop with the `i`-th target edge, block for block.
/// Targets must be green and in increasing order.
pub fn swap_with_targets(seq: &Sequence, loops: &[usize], targets: &[usize]) -> (Sequence, SwapRecord) {
    let mut out = seq.clone();
    let k = seq.params().k;
    let entries = out.entries_mut();
    let mut pairs = Vec::with_capacity(loops.len());
    for (&f, &e) in loops.iter().zip(targets) {
        debug_assert!(f < e);
        let (head, tail) = entries.split_at_mut(k * e);
        head[k * f..k * f + k].swap_with_slice(&mut tail[..k]);
        pairs.push(SwapPair {
            red_loop_index: f,
            green_target_index: e,
        });
    }
    (out, SwapRecord { pairs })
}
