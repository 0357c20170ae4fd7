//! One pass of the construction: coupled generation, the `E` gate, the red
//! swap, the `S~` gate and loop elimination.

use rand::Rng;
use serde::{Deserialize, Serialize};

use num_rational::Ratio;

use crate::coupling::{check_embedding, coupled_generate, extract_hnm, CoupledRun};
use crate::graph::SimpleGraph;
use crate::params::Params;
use crate::redswap::{swap_red_loops, SwapRecord};
use crate::sequence::{expected_phi, phi_within_window};
use crate::switching::{eliminate_loops, SwitchError, Switching, DEFAULT_MAX_REJECTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStatus {
    Ok,
    #[serde(rename = "rejected_E")]
    RejectedE,
    #[serde(rename = "rejected_tildeS")]
    RejectedTildeS,
    AbortedRejects,
    /// More red loops than green proper edges to trade with.
    AbortedSwap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMode {
    SingleShot,
    Resample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    pub max_rejects: u64,
    /// Resample mode gives up after this many passes.
    pub max_passes: u64,
}

impl PipelineConfig {
    pub fn single_shot() -> Self {
        PipelineConfig {
            mode: PipelineMode::SingleShot,
            max_rejects: DEFAULT_MAX_REJECTS,
            max_passes: 1,
        }
    }

    pub fn resample() -> Self {
        PipelineConfig {
            mode: PipelineMode::Resample,
            max_rejects: DEFAULT_MAX_REJECTS,
            max_passes: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub swap: Vec<crate::redswap::SwapPair>,
    pub switchings: Vec<Switching>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineResult {
    pub status: PipelineStatus,
    pub hnm: SimpleGraph,
    pub tilde_h: Option<SimpleGraph>,
    pub event_a: bool,
    pub event_b: bool,
    pub embedded: bool,
    pub lambda_y: usize,
    pub phi: Option<u64>,
    pub trace: PipelineTrace,
    pub passes: u64,
    pub rejected_e: u64,
    pub rejected_tilde_s: u64,
    pub aborted: u64,
    pub seed: Option<u64>,
    pub stream: Option<u64>,
    /// `phi` and the red prefix agree before and after elimination, and one
    /// switching was applied per loop.
    pub invariants_held: bool,
}

impl PipelineResult {
    pub fn is_ok(&self) -> bool {
        self.status == PipelineStatus::Ok
    }
}

pub fn run_pipeline<R: Rng + ?Sized>(p: &Params, rng: &mut R, config: &PipelineConfig) -> PipelineResult {
    let ephi = expected_phi(p);
    let mut rejected_e = 0;
    let mut rejected_tilde_s = 0;
    let mut aborted = 0;
    let mut passes = 0;
    loop {
        passes += 1;
        let mut out = single_pass(p, rng, config.max_rejects, &ephi);
        match out.status {
            PipelineStatus::Ok => {}
            PipelineStatus::RejectedE => rejected_e += 1,
            PipelineStatus::RejectedTildeS => rejected_tilde_s += 1,
            PipelineStatus::AbortedRejects | PipelineStatus::AbortedSwap => aborted += 1,
        }
        if out.is_ok() || config.mode == PipelineMode::SingleShot || passes >= config.max_passes {
            out.passes = passes;
            out.rejected_e = rejected_e;
            out.rejected_tilde_s = rejected_tilde_s;
            out.aborted = aborted;
            return out;
        }
    }
}

fn single_pass<R: Rng + ?Sized>(p: &Params, rng: &mut R, max_rejects: u64, ephi: &Ratio<i128>) -> PipelineResult {
    let run = coupled_generate(p, rng);
    finish_pass(p, &run, rng, max_rejects, ephi)
}

/// Everything after coupled generation, for callers that also inspect the
/// run itself.
pub fn finish_pass<R: Rng + ?Sized>(
    p: &Params,
    run: &CoupledRun,
    rng: &mut R,
    max_rejects: u64,
    ephi: &Ratio<i128>,
) -> PipelineResult {
    let hnm = extract_hnm(run, p, rng);
    let mut result = PipelineResult {
        status: PipelineStatus::RejectedE,
        hnm,
        tilde_h: None,
        event_a: run.event_a,
        event_b: run.event_b,
        embedded: false,
        lambda_y: 0,
        phi: None,
        trace: PipelineTrace {
            swap: Vec::new(),
            switchings: Vec::new(),
        },
        passes: 1,
        rejected_e: 0,
        rejected_tilde_s: 0,
        aborted: 0,
        seed: None,
        stream: None,
        invariants_held: true,
    };
    let y = &run.y;
    let cls = y.classify_edges();
    result.lambda_y = cls.lambda;
    let in_e = y.is_regular()
        && cls.kinds.iter().all(|k| !k.is_bad_loop())
        && !cls.has_duplicates()
        && p.within_loop_budget(cls.lambda);
    if !in_e {
        return result;
    }
    let (y1, record): (_, SwapRecord) = match swap_red_loops(y, &cls, rng) {
        Ok(v) => v,
        Err(_) => {
            result.status = PipelineStatus::AbortedSwap;
            return result;
        }
    };
    result.trace.swap = record.pairs;
    let phi = y1.phi();
    result.phi = Some(phi);
    if !phi_within_window(p, phi, ephi) {
        result.status = PipelineStatus::RejectedTildeS;
        return result;
    }
    let red = y1.red_prefix().to_vec();
    let (y2, trace) = match eliminate_loops(y1, rng, max_rejects) {
        Ok(v) => v,
        Err(SwitchError::RejectBudget { .. }) => {
            result.status = PipelineStatus::AbortedRejects;
            return result;
        }
        Err(e) => unreachable!("sequence in G_l rejected by the switching state: {e}"),
    };
    result.invariants_held =
        y2.red_prefix() == &red[..] && y2.phi() == phi && trace.len() == cls.lambda && y2.classify_edges().lambda == 0;
    result.trace.switchings = trace;
    result.embedded = check_embedding(&result.hnm, &y2).embedded;
    result.tilde_h = Some(SimpleGraph::from_sequence(&y2).expect("G_0 sequences are simple"));
    result.status = PipelineStatus::Ok;
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    #[test]
    fn ok_results_are_simple_and_regular() {
        let p = Params::derive(30, 3, 3).unwrap();
        let mut seen_ok = 0;
        for s in 0..50 {
            let r = run_pipeline(&p, &mut trial_rng(11, s), &PipelineConfig::single_shot());
            assert_eq!(r.passes, 1);
            if let Some(h) = &r.tilde_h {
                assert!(r.is_ok());
                assert!(r.invariants_held);
                assert!(h.is_regular(p.d));
                assert_eq!(h.edge_count(), p.edges);
                if r.embedded {
                    assert!(r.hnm.is_subgraph_of(h));
                }
                seen_ok += 1;
            }
        }
        assert!(seen_ok > 0);
    }

    #[test]
    fn resample_always_ends_ok() {
        let p = Params::derive(6, 2, 3).unwrap();
        for s in 0..200 {
            let r = run_pipeline(&p, &mut trial_rng(3, s), &PipelineConfig::resample());
            assert!(r.is_ok());
            assert_eq!(r.passes, 1 + r.rejected_e + r.rejected_tilde_s + r.aborted);
        }
    }

    #[test]
    fn embedding_with_red_region() {
        let p = Params::derive(120, 12, 3).unwrap();
        assert!(p.m > 0);
        let r = run_pipeline(&p, &mut trial_rng(5, 0), &PipelineConfig::resample());
        let h = r.tilde_h.as_ref().unwrap();
        assert_eq!(r.hnm.edge_count(), p.m);
        if r.embedded {
            assert!(r.hnm.is_subgraph_of(h));
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let p = Params::derive(24, 3, 3).unwrap();
        let a = run_pipeline(&p, &mut trial_rng(9, 9), &PipelineConfig::resample());
        let b = run_pipeline(&p, &mut trial_rng(9, 9), &PipelineConfig::resample());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
