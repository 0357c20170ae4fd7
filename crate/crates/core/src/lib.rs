//! Coupling the uniform random k-graph with `m` edges inside the random
//! `d`-regular k-graph.
//!
//! The pipeline reveals a uniform regular vertex sequence `Y` jointly with an
//! i.i.d. sequence `X` so that a red prefix of `Y` carries a uniform `m`-edge
//! graph, moves red loops into the green region, and removes the remaining
//! loops one at a time with switchings that never touch red edges. Small
//! instances come with exhaustive oracles; larger ones with a Monte Carlo
//! harness.

pub mod coupling;
pub mod generate;
pub mod graph;
pub mod oracle;
pub mod params;
pub mod pipeline;
pub mod redswap;
pub mod rng;
pub mod sequence;
pub mod stats;
pub mod switching;

pub use coupling::{check_embedding, coupled_generate, extract_hnm, CoupledRun};
pub use graph::SimpleGraph;
pub use params::{Params, ParamsError};
pub use sequence::{expected_phi, EdgeClassification, EdgeKind, MembershipReport, Sequence};
pub use switching::{BackSwitching, SwitchState, Switching};
