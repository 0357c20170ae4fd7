//! Instance-level constants for an `(n, d, k)` problem.
//!
//! Every constant is an exact function of the triple. The two irrational
//! thresholds, the loop budget `L = n^(1/4) d^(1/2)` and the concentration
//! window `n^(3/4) d`, are never materialised as floats: comparisons against
//! them are done on fourth powers over integers.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamsError {
    #[error("edge size k = {k} is below 3")]
    EdgeSizeTooSmall { k: usize },
    #[error("vertex count n = {n} is smaller than the edge size k = {k}")]
    TooFewVertices { n: usize, k: usize },
    #[error("degree must be at least 1")]
    ZeroDegree,
    #[error("k = {k} does not divide n*d = {nd}")]
    NotDivisible { k: usize, nd: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Params {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    /// Number of edges `M = nd/k`.
    pub edges: usize,
    /// `r = 2^k + 1`.
    pub r: usize,
    /// Size of the embedded uniform graph, `m = floor(M / (2r + 1))`.
    pub m: usize,
    /// Number of red edges. Equals `r * m` for derived parameters.
    pub red_edges: usize,
}

impl Params {
    pub fn derive(n: usize, d: usize, k: usize) -> Result<Self, ParamsError> {
        if k < 3 {
            return Err(ParamsError::EdgeSizeTooSmall { k });
        }
        if n < k {
            return Err(ParamsError::TooFewVertices { n, k });
        }
        if d == 0 {
            return Err(ParamsError::ZeroDegree);
        }
        let nd = n * d;
        if !nd.is_multiple_of(k) {
            return Err(ParamsError::NotDivisible { k, nd });
        }
        let edges = nd / k;
        let r = (1usize << k) + 1;
        let m = edges / (2 * r + 1);
        Ok(Params {
            k,
            n,
            d,
            edges,
            r,
            m,
            red_edges: r * m,
        })
    }

    /// Same instance with an explicit red/green split. Used to exercise the
    /// red-loop machinery on spaces too small for a nonzero derived `m`.
    pub fn with_red_edges(mut self, red_edges: usize) -> Self {
        assert!(red_edges <= self.edges, "red region larger than the sequence");
        self.red_edges = red_edges;
        self
    }

    /// `c = 1/(2r+1)`, exact.
    pub fn c(&self) -> Ratio<u64> {
        Ratio::new(1, 2 * self.r as u64 + 1)
    }

    /// `nd`, the number of entries in a sequence.
    pub fn sequence_len(&self) -> usize {
        self.n * self.d
    }

    pub fn red_prefix_len(&self) -> usize {
        self.k * self.red_edges
    }

    pub fn green_edges(&self) -> usize {
        self.edges - self.red_edges
    }

    /// `n d^2`, the fourth power of `L`.
    pub fn loop_budget_fourth_power(&self) -> u128 {
        self.n as u128 * (self.d as u128).pow(2)
    }

    /// `l <= L`, decided exactly as `l^4 <= n d^2`.
    pub fn within_loop_budget(&self, l: usize) -> bool {
        fourth_power(l as u128).is_some_and(|p| p <= self.loop_budget_fourth_power())
    }

    /// `x >= L` for a signed integer `x`.
    pub fn at_least_loop_budget(&self, x: i64) -> bool {
        if x < 0 {
            return false;
        }
        fourth_power(x as u128).is_none_or(|p| p >= self.loop_budget_fourth_power())
    }

    /// `n^3 d^4`, the fourth power of the concentration window `n^(3/4) d`.
    pub fn phi_window_fourth_power(&self) -> u128 {
        (self.n as u128).pow(3) * (self.d as u128).pow(4)
    }

    pub fn to_json(&self) -> ParamsJson {
        ParamsJson {
            k: self.k,
            n: self.n,
            d: self.d,
            edges: self.edges,
            r: self.r,
            c: format!("1/{}", 2 * self.r + 1),
            m: self.m,
            red_edges: self.red_edges,
            red_prefix_len: self.red_prefix_len(),
            loop_budget_fourth_power: self.loop_budget_fourth_power().to_string(),
        }
    }
}

fn fourth_power(x: u128) -> Option<u128> {
    x.checked_mul(x).and_then(|s| s.checked_mul(s))
}

/// Serialized form embedded in every report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamsJson {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "M")]
    pub edges: usize,
    pub r: usize,
    pub c: String,
    pub m: usize,
    pub red_edges: usize,
    pub red_prefix_len: usize,
    /// Decimal string since `n d^2` can exceed the JSON-safe integer range.
    #[serde(rename = "L_fourth_power")]
    pub loop_budget_fourth_power: String,
}
