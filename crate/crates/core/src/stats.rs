//! Monte Carlo harness: chi-square uniformity, event frequencies,
//! expectation and tail checks, switching-count audits and exact double
//! counting on enumerated spaces.
//!
//! Every report is a deterministic function of its parameters, sample size
//! and master seed. Trial `i` always draws from stream `i`, whatever the
//! number of worker threads.

use std::collections::HashMap;

use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::coupling::coupled_generate;
use crate::generate::sample_regular;
use crate::graph::SimpleGraph;
use crate::oracle::{enumerate_sequences, EnumerationResult, OracleError};
use crate::params::{Params, ParamsJson};
use crate::pipeline::{finish_pass, run_pipeline, PipelineConfig, PipelineStatus};
use crate::redswap::swap_red_loops;
use crate::rng::trial_rng;
use crate::sequence::{edge_key, expected_phi, Sequence};
use crate::switching::{backward_upper_bound, forward_upper_bound, SwitchState, DEFAULT_MAX_REJECTS};

pub const SCHEMA_VERSION: u32 = 1;

/// Pearson's test needs this many samples per class.
pub const VALIDITY_FLOOR: u64 = 10;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("{samples} samples over {classes} classes is below the floor of {VALIDITY_FLOOR} per class")]
    BelowValidityFloor { samples: u64, classes: usize },
    #[error("need at least two classes, got {classes}")]
    TooFewClasses { classes: usize },
    #[error("sample {sample} is not in the enumerated space")]
    UnknownInstance { sample: u64 },
    #[error("sample {sample} did not finish: {status:?}")]
    PipelineFailed { sample: u64, status: PipelineStatus },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub fn run_trials<T, F>(jobs: usize, count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    if jobs <= 1 {
        return (0..count).map(f).collect();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
        .install(|| (0..count).into_par_iter().map(f).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiSquareReport {
    pub schema_version: u32,
    pub classes: usize,
    pub sample_size: u64,
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub seed: u64,
}

/// Pearson chi-square of observed counts against expected weights.
pub fn chi_square(counts: &[u64], weights: &[f64], seed: u64) -> Result<ChiSquareReport, StatsError> {
    assert_eq!(counts.len(), weights.len());
    let classes = counts.len();
    let samples: u64 = counts.iter().sum();
    if classes < 2 {
        return Err(StatsError::TooFewClasses { classes });
    }
    if samples < VALIDITY_FLOOR * classes as u64 {
        return Err(StatsError::BelowValidityFloor { samples, classes });
    }
    let total: f64 = weights.iter().sum();
    let statistic = counts
        .iter()
        .zip(weights)
        .map(|(&o, &w)| {
            let e = samples as f64 * w / total;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = classes - 1;
    let p_value = ChiSquared::new(dof as f64).expect("dof > 0").sf(statistic);
    Ok(ChiSquareReport {
        schema_version: SCHEMA_VERSION,
        classes,
        sample_size: samples,
        statistic,
        degrees_of_freedom: dof,
        p_value,
        seed,
    })
}

pub fn chi_square_uniform(counts: &[u64], seed: u64) -> Result<ChiSquareReport, StatsError> {
    chi_square(counts, &vec![1.0; counts.len()], seed)
}

/// `N = max(10 |space|, 20000)`.
pub fn auto_sample_size(classes: usize) -> u64 {
    (VALIDITY_FLOOR * classes as u64).max(20_000)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// The full construction in resample mode.
    Pipeline,
    /// A uniform draw from the enumerated space.
    Reference,
    /// Loops and repeated edges are removed by reshuffling the offending
    /// entries together with one neighbouring edge, instead of switching.
    Biased,
}

pub fn draw_graph(
    p: &Params,
    space: &EnumerationResult,
    sampler: Sampler,
    seed: u64,
    stream: u64,
) -> Result<SimpleGraph, StatsError> {
    let mut rng = trial_rng(seed, stream);
    match sampler {
        Sampler::Pipeline => {
            let r = run_pipeline(p, &mut rng, &PipelineConfig::resample());
            r.tilde_h.ok_or(StatsError::PipelineFailed {
                sample: stream,
                status: r.status,
            })
        }
        Sampler::Reference => Ok(space.instances[rng.random_range(0..space.count)].clone()),
        Sampler::Biased => Ok(biased_repair(p, &mut rng)),
    }
}

fn biased_repair<R: Rng + ?Sized>(p: &Params, rng: &mut R) -> SimpleGraph {
    let k = p.k;
    let mut seq = sample_regular(p, rng);
    loop {
        let cls = seq.classify_edges();
        let mut bad: Vec<usize> = cls.loop_indices().collect();
        bad.extend(cls.duplicate_groups.iter().flat_map(|g| g[1..].iter().copied()));
        if bad.is_empty() {
            return SimpleGraph::from_sequence(&seq).expect("no loops, no repeats");
        }
        bad.sort_unstable();
        bad.dedup();
        let mut slots: Vec<usize> = Vec::new();
        for &e in &bad {
            slots.extend(k * e..k * e + k);
            let next = (e + 1) % p.edges;
            slots.extend(k * next..k * next + k);
        }
        slots.sort_unstable();
        slots.dedup();
        let entries = seq.entries_mut();
        let mut vals: Vec<u32> = slots.iter().map(|&i| entries[i]).collect();
        vals.shuffle(rng);
        for (&i, v) in slots.iter().zip(vals) {
            entries[i] = v;
        }
    }
}

pub fn uniformity_test(
    p: &Params,
    space: &EnumerationResult,
    sampler: Sampler,
    samples: u64,
    seed: u64,
    jobs: usize,
) -> Result<ChiSquareReport, StatsError> {
    goodness_of_fit(p, space, sampler, &vec![1.0; space.count], samples, seed, jobs)
}

/// Chi-square of sampler output against arbitrary class weights, such as
/// an exact law from the oracle.
pub fn goodness_of_fit(
    p: &Params,
    space: &EnumerationResult,
    sampler: Sampler,
    weights: &[f64],
    samples: u64,
    seed: u64,
    jobs: usize,
) -> Result<ChiSquareReport, StatsError> {
    if samples < VALIDITY_FLOOR * space.count as u64 {
        return Err(StatsError::BelowValidityFloor {
            samples,
            classes: space.count,
        });
    }
    let index: HashMap<&SimpleGraph, usize> = space.instances.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let draws = run_trials(jobs, samples, |i| {
        draw_graph(p, space, sampler, seed, i)
            .and_then(|g| index.get(&g).copied().ok_or(StatsError::UnknownInstance { sample: i }))
    });
    let mut counts = vec![0u64; space.count];
    for d in draws {
        counts[d?] += 1;
    }
    chi_square(&counts, weights, seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanCheck {
    pub samples: u64,
    pub mean: f64,
    pub sd: f64,
    pub stderr: f64,
    pub expected: f64,
    /// `(mean - expected) / stderr`; zero when the sample variance is zero
    /// and the mean is exact.
    pub z: f64,
    pub within_3_sigma: bool,
}

impl MeanCheck {
    pub fn from_values(values: &[f64], expected: f64) -> MeanCheck {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let sd = var.sqrt();
        let stderr = sd / n.sqrt();
        let diff = mean - expected;
        let z = if stderr > 0.0 {
            diff / stderr
        } else if diff.abs() < 1e-9 * expected.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY * diff.signum()
        };
        MeanCheck {
            samples: values.len() as u64,
            mean,
            sd,
            stderr,
            expected,
            z,
            within_3_sigma: z.abs() <= 3.0,
        }
    }
}

/// `M (1 - (n)_k / n^k)`: loops among `M` edges of i.i.d. uniform entries.
pub fn expected_lambda_iid(p: &Params) -> f64 {
    let n = p.n as f64;
    let distinct: f64 = (0..p.k).map(|i| (n - i as f64) / n).product();
    p.edges as f64 * (1.0 - distinct)
}

/// Loops of the uniform sequence: `M (1 - prod_i (nd - id) / (nd - i))`.
pub fn expected_lambda_regular(p: &Params) -> f64 {
    let nd = (p.n * p.d) as f64;
    let d = p.d as f64;
    let distinct: f64 = (0..p.k).map(|i| (nd - i as f64 * d) / (nd - i as f64)).product();
    p.edges as f64 * (1.0 - distinct)
}

/// `(1 + 2^-k) m`.
pub fn expected_w(p: &Params) -> f64 {
    (1.0 + 0.5f64.powi(p.k as i32)) * p.m as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub claim: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialReport {
    pub schema_version: u32,
    pub params: ParamsJson,
    pub trials: u64,
    pub seed: u64,
    pub y_not_in_e: u64,
    pub y_prime_not_in_tilde_s: u64,
    pub aborted_rejects: u64,
    pub aborted_swap: u64,
    pub ok: u64,
    pub event_a: u64,
    pub event_b: u64,
    pub embedded: u64,
    pub a_and_b_and_embedded: u64,
    pub x_multiple_edges: u64,
    pub y_multiple_edges: u64,
    pub x_lambda_within_l: u64,
    pub y_lambda_within_l: u64,
    pub y_bad_loops: u64,
    pub lambda_y_histogram: Vec<u64>,
    pub lambda_x: MeanCheck,
    pub lambda_y: MeanCheck,
    pub w_size: MeanCheck,
    pub phi_y: MeanCheck,
    pub verdicts: Vec<Verdict>,
}

struct TrialRow {
    status: PipelineStatus,
    a: bool,
    b: bool,
    embedded: bool,
    x_multi: bool,
    y_multi: bool,
    x_lambda: usize,
    y_lambda: usize,
    y_bad: bool,
    w: usize,
    phi: u64,
}

fn has_repeats(seq: &Sequence) -> bool {
    let mut keys: Vec<_> = seq.edges().map(edge_key).collect();
    keys.sort_unstable();
    keys.windows(2).any(|w| w[0] == w[1])
}

pub fn event_frequencies(p: &Params, trials: u64, seed: u64, jobs: usize) -> TrialReport {
    let ephi = expected_phi(p);
    let rows = run_trials(jobs, trials, |i| {
        let mut rng = trial_rng(seed, i);
        let run = coupled_generate(p, &mut rng);
        let ycls = run.y.classify_edges();
        let res = finish_pass(p, &run, &mut rng, DEFAULT_MAX_REJECTS, &ephi);
        TrialRow {
            status: res.status,
            a: run.event_a,
            b: run.event_b,
            embedded: res.embedded,
            x_multi: run.x_has_multiple_edges,
            y_multi: has_repeats(&run.y),
            x_lambda: run.x_lambda,
            y_lambda: ycls.lambda,
            y_bad: ycls.kinds.iter().any(|k| k.is_bad_loop()),
            w: run.w.len(),
            phi: run.y.phi(),
        }
    });
    let count = |f: &dyn Fn(&TrialRow) -> bool| rows.iter().filter(|r| f(r)).count() as u64;
    let mut hist = Vec::new();
    for r in &rows {
        if hist.len() <= r.y_lambda {
            hist.resize(r.y_lambda + 1, 0);
        }
        hist[r.y_lambda] += 1;
    }
    let col = |f: &dyn Fn(&TrialRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let lambda_x = MeanCheck::from_values(&col(&|r| r.x_lambda as f64), expected_lambda_iid(p));
    let lambda_y = MeanCheck::from_values(&col(&|r| r.y_lambda as f64), expected_lambda_regular(p));
    let w_size = MeanCheck::from_values(&col(&|r| r.w as f64), expected_w(p));
    let phi_y = MeanCheck::from_values(&col(&|r| r.phi as f64), ephi.to_f64().unwrap());
    let verdicts = vec![
        Verdict {
            claim: "mean lambda(X) = M(1 - (n)_k/n^k) within 3 sigma".into(),
            pass: lambda_x.within_3_sigma,
        },
        Verdict {
            claim: "mean lambda(Y) matches the exact loop expectation within 3 sigma".into(),
            pass: lambda_y.within_3_sigma,
        },
        Verdict {
            claim: "mean |W| = (1 + 2^-k) m within 3 sigma".into(),
            pass: w_size.within_3_sigma,
        },
        Verdict {
            claim: "mean phi(Y) = E phi within 3 sigma".into(),
            pass: phi_y.within_3_sigma,
        },
    ];
    TrialReport {
        schema_version: SCHEMA_VERSION,
        params: p.to_json(),
        trials,
        seed,
        y_not_in_e: count(&|r| r.status == PipelineStatus::RejectedE),
        y_prime_not_in_tilde_s: count(&|r| r.status == PipelineStatus::RejectedTildeS),
        aborted_rejects: count(&|r| r.status == PipelineStatus::AbortedRejects),
        aborted_swap: count(&|r| r.status == PipelineStatus::AbortedSwap),
        ok: count(&|r| r.status == PipelineStatus::Ok),
        event_a: count(&|r| r.a),
        event_b: count(&|r| r.b),
        embedded: count(&|r| r.embedded),
        a_and_b_and_embedded: count(&|r| r.a && r.b && r.embedded),
        x_multiple_edges: count(&|r| r.x_multi),
        y_multiple_edges: count(&|r| r.y_multi),
        x_lambda_within_l: count(&|r| p.within_loop_budget(r.x_lambda)),
        y_lambda_within_l: count(&|r| p.within_loop_budget(r.y_lambda)),
        y_bad_loops: count(&|r| r.y_bad),
        lambda_y_histogram: hist,
        lambda_x,
        lambda_y,
        w_size,
        phi_y,
        verdicts,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailRow {
    /// `x` in units of the sample standard deviation.
    pub multiple: f64,
    pub x: f64,
    pub empirical: f64,
    /// `2 exp(-x^2 / (8 n d^3))`.
    pub bound: f64,
    pub binomial_sigma: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiReport {
    pub schema_version: u32,
    pub params: ParamsJson,
    pub seed: u64,
    pub expected_exact: String,
    pub mean: MeanCheck,
    pub tails: Vec<TailRow>,
}

pub fn phi_checks(p: &Params, samples: u64, seed: u64, jobs: usize, multiples: &[f64]) -> PhiReport {
    let ephi = expected_phi(p);
    let values: Vec<f64> = run_trials(jobs, samples, |i| {
        sample_regular(p, &mut trial_rng(seed, i)).phi() as f64
    });
    let expected = ephi.to_f64().unwrap();
    let mean = MeanCheck::from_values(&values, expected);
    let denom = 8.0 * p.n as f64 * (p.d as f64).powi(3);
    let tails = multiples
        .iter()
        .map(|&mult| {
            let x = mult * mean.sd;
            let hits = values.iter().filter(|&&v| (v - expected).abs() >= x).count();
            let empirical = hits as f64 / samples as f64;
            let bound = 2.0 * (-x * x / denom).exp();
            let q = bound.min(1.0);
            let binomial_sigma = (q * (1.0 - q) / samples as f64).sqrt();
            TailRow {
                multiple: mult,
                x,
                empirical,
                bound,
                binomial_sigma,
                pass: empirical <= bound + 3.0 * binomial_sigma,
            }
        })
        .collect();
    PhiReport {
        schema_version: SCHEMA_VERSION,
        params: p.to_json(),
        seed,
        expected_exact: format!("{}/{}", ephi.numer(), ephi.denom()),
        mean,
        tails,
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Quantiles {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(mut v: Vec<f64>) -> Quantiles {
        if v.is_empty() {
            return Quantiles::default();
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Quantiles {
            count: v.len(),
            min: v[0],
            median: v[v.len() / 2],
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FbAuditReport {
    pub schema_version: u32,
    pub params: ParamsJson,
    pub seed: u64,
    pub samples: u64,
    /// Uniform sequences drawn to collect `samples` members of the `G_l`.
    pub draws: u64,
    pub forward_violations: u64,
    pub backward_violations: u64,
    pub odd_backward_counts: u64,
    pub forward_ratio: Quantiles,
    pub backward_ratio: Quantiles,
    pub acceptance_rate: Quantiles,
    pub round_trips: u64,
    pub round_trip_failures: u64,
    pub switchings_applied: u64,
    pub phi_changes: u64,
    pub lambda_step_errors: u64,
    pub degree_changes: u64,
    pub red_prefix_changes: u64,
}

#[derive(Default)]
struct AuditRow {
    draws: u64,
    f_violation: bool,
    b_violation: bool,
    odd_b: bool,
    f_ratio: Option<f64>,
    b_ratio: Option<f64>,
    acceptance: Option<f64>,
    round_trip: Option<bool>,
    applied: u64,
    phi_changes: u64,
    lambda_errors: u64,
    degree_changes: u64,
    red_changes: u64,
}

/// A uniform sequence conditioned on `E`, after the red swap.
pub fn sample_g<R: Rng + ?Sized>(p: &Params, rng: &mut R) -> (Sequence, u64) {
    let mut draws = 0;
    loop {
        draws += 1;
        let y = sample_regular(p, rng);
        let cls = y.classify_edges();
        if cls.kinds.iter().any(|k| k.is_bad_loop()) || cls.has_duplicates() || !p.within_loop_budget(cls.lambda) {
            continue;
        }
        if let Ok((y1, _)) = swap_red_loops(&y, &cls, rng) {
            return (y1, draws);
        }
    }
}

pub fn fb_audit(p: &Params, samples: u64, seed: u64, jobs: usize) -> FbAuditReport {
    let k = p.k as f64;
    let g0 = p.green_edges() as f64;
    let l_real = (p.n as f64).powf(0.25) * (p.d as f64).sqrt();
    let rows = run_trials(jobs, samples, |i| {
        let mut rng = trial_rng(seed, i);
        let (y, draws) = sample_g(p, &mut rng);
        let mut row = AuditRow {
            draws,
            ..AuditRow::default()
        };
        let mut st = SwitchState::new(y.clone()).expect("in G_l");
        let lambda = st.lambda();
        let phi = y.phi();
        let f = st.count_forward();
        let b_ordered = st.count_backward_ordered();
        let b = b_ordered / 2;
        let g = st.green_proper_edges().len() as u128;
        row.f_violation =
            f as u128 > forward_upper_bound(p, lambda) || f as u128 > (p.k * p.k) as u128 * lambda as u128 * g * g;
        row.b_violation = b as u128 > backward_upper_bound(p, phi);
        row.odd_b = b_ordered % 2 == 1;
        if lambda > 0 {
            row.f_ratio = Some(f as f64 / (k * k * lambda as f64 * g0 * g0));
            let gg = g as f64;
            if gg >= 2.0 {
                row.acceptance = Some(f as f64 / (lambda as f64 * gg * (gg - 1.0) * k * k));
            }
        }
        let denom = k * (k - 1.0) / 2.0 * (phi as f64 - 2.0 * k * l_real * p.d as f64) * g0;
        if denom > 0.0 {
            row.b_ratio = Some(b as f64 / denom);
        }
        if lambda == 0 {
            return row;
        }
        // one round trip, then the full elimination with per-step checks
        let Ok(sw) = st.sample_forward(&mut rng, DEFAULT_MAX_REJECTS) else {
            return row;
        };
        let back = st.apply_forward(&sw).expect("sampled switchings are admissible");
        let mid = st.sequence().clone();
        row.applied += 1;
        row.phi_changes += (mid.phi() != phi) as u64;
        row.lambda_errors += (mid.classify_edges().lambda + 1 != lambda) as u64;
        row.degree_changes += (mid.degrees() != y.degrees()) as u64;
        row.red_changes += (mid.red_prefix() != y.red_prefix()) as u64;
        let ok_back = st.apply_backward(&back).is_ok();
        row.applied += ok_back as u64;
        row.round_trip = Some(ok_back && st.sequence() == &y);
        row.phi_changes += (st.sequence().phi() != phi) as u64;
        row.lambda_errors += (st.sequence().classify_edges().lambda != lambda) as u64;
        let mut prev = lambda;
        while st.lambda() > 0 {
            let Ok(sw) = st.sample_forward(&mut rng, DEFAULT_MAX_REJECTS) else {
                break;
            };
            st.apply_forward(&sw).expect("sampled switchings are admissible");
            row.applied += 1;
            let s = st.sequence();
            let now = s.classify_edges().lambda;
            row.lambda_errors += (now + 1 != prev) as u64;
            row.phi_changes += (s.phi() != phi) as u64;
            row.degree_changes += (s.degrees() != y.degrees()) as u64;
            row.red_changes += (s.red_prefix() != y.red_prefix()) as u64;
            prev = now;
        }
        row
    });
    let sum = |f: &dyn Fn(&AuditRow) -> u64| rows.iter().map(f).sum::<u64>();
    FbAuditReport {
        schema_version: SCHEMA_VERSION,
        params: p.to_json(),
        seed,
        samples,
        draws: sum(&|r| r.draws),
        forward_violations: sum(&|r| r.f_violation as u64),
        backward_violations: sum(&|r| r.b_violation as u64),
        odd_backward_counts: sum(&|r| r.odd_b as u64),
        forward_ratio: Quantiles::of(rows.iter().filter_map(|r| r.f_ratio).collect()),
        backward_ratio: Quantiles::of(rows.iter().filter_map(|r| r.b_ratio).collect()),
        acceptance_rate: Quantiles::of(rows.iter().filter_map(|r| r.acceptance).collect()),
        round_trips: sum(&|r| r.round_trip.is_some() as u64),
        round_trip_failures: sum(&|r| (r.round_trip == Some(false)) as u64),
        switchings_applied: sum(&|r| r.applied),
        phi_changes: sum(&|r| r.phi_changes),
        lambda_step_errors: sum(&|r| r.lambda_errors),
        degree_changes: sum(&|r| r.degree_changes),
        red_prefix_changes: sum(&|r| r.red_changes),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundTripReport {
    pub schema_version: u32,
    pub params: ParamsJson,
    pub seed: u64,
    pub round_trips: u64,
    pub failures: u64,
    pub phi_changes: u64,
    pub lambda_errors: u64,
}

/// Apply `count` uniformly sampled forward switchings to fresh members of
/// the `G_l` with `l >= 1`, undo each with its induced backward switching
/// and compare entrywise.
pub fn round_trip_audit(p: &Params, count: u64, seed: u64, jobs: usize) -> RoundTripReport {
    let rows = run_trials(jobs, count, |i| {
        let mut rng = trial_rng(seed, i);
        loop {
            let (y, _) = sample_g(p, &mut rng);
            let mut st = SwitchState::new(y.clone()).expect("in G_l");
            if st.lambda() == 0 {
                continue;
            }
            let Ok(sw) = st.sample_forward(&mut rng, DEFAULT_MAX_REJECTS) else {
                continue;
            };
            let lambda = st.lambda();
            let back = st.apply_forward(&sw).expect("sampled switchings are admissible");
            let mid = st.sequence();
            let phi_changed = mid.phi() != y.phi();
            let lambda_wrong = mid.classify_edges().lambda + 1 != lambda;
            let ok = st.apply_backward(&back).is_ok() && st.sequence() == &y;
            return (ok, phi_changed, lambda_wrong);
        }
    });
    RoundTripReport {
        schema_version: SCHEMA_VERSION,
        params: p.to_json(),
        seed,
        round_trips: count,
        failures: rows.iter().filter(|r| !r.0).count() as u64,
        phi_changes: rows.iter().filter(|r| r.1).count() as u64,
        lambda_errors: rows.iter().filter(|r| r.2).count() as u64,
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LevelRow {
    pub l: usize,
    /// Size of `E_l`.
    pub e_l: u64,
    /// Size of `G_l`.
    pub g_l: u64,
    /// Sum of `F` over `G_l`.
    pub sum_forward: u64,
    /// Sum of `B` over `G_(l-1)`.
    pub sum_backward: u64,
    pub equal: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoubleCountReport {
    pub schema_version: u32,
    pub params: ParamsJson,
    pub sequences: u64,
    pub not_in_e: u64,
    pub levels: Vec<LevelRow>,
    pub identity_holds: bool,
    pub forward_violations: u64,
    pub backward_violations: u64,
    pub odd_backward_counts: u64,
}

/// Exact `sum F = sum B` over every loop level of the full space `S`.
pub fn double_count(p: &Params, ceiling: u64) -> Result<DoubleCountReport, StatsError> {
    let mut levels: Vec<LevelRow> = Vec::new();
    let mut not_in_e = 0;
    let mut fv = 0;
    let mut bv = 0;
    let mut odd = 0;
    let level = |levels: &mut Vec<LevelRow>, l: usize| -> usize {
        while levels.len() <= l {
            let l = levels.len();
            levels.push(LevelRow {
                l,
                ..LevelRow::default()
            });
        }
        l
    };
    let sequences = enumerate_sequences(p, ceiling, |s| {
        let cls = s.classify_edges();
        if cls.kinds.iter().any(|k| k.is_bad_loop()) || cls.has_duplicates() || !p.within_loop_budget(cls.lambda) {
            not_in_e += 1;
            return;
        }
        let l = level(&mut levels, cls.lambda);
        levels[l].e_l += 1;
        if !cls.red_loop_indices.is_empty() {
            return;
        }
        levels[l].g_l += 1;
        let st = SwitchState::new(s.clone()).expect("member of G_l");
        let f = st.count_forward();
        let b_ordered = st.count_backward_ordered();
        odd += b_ordered % 2;
        let b = b_ordered / 2;
        fv += (f as u128 > forward_upper_bound(p, cls.lambda)) as u64;
        bv += (b as u128 > backward_upper_bound(p, s.phi())) as u64;
        levels[l].sum_forward += f;
        if b > 0 {
            let up = level(&mut levels, l + 1);
            levels[up].sum_backward += b;
        }
    })?;
    for row in levels.iter_mut() {
        row.equal = row.l == 0 || row.sum_forward == row.sum_backward;
    }
    Ok(DoubleCountReport {
        schema_version: SCHEMA_VERSION,
        params: p.to_json(),
        sequences,
        not_in_e,
        identity_holds: levels.iter().all(|r| r.equal),
        levels,
        forward_violations: fv,
        backward_violations: bv,
        odd_backward_counts: odd,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RedSwapReport {
    pub schema_version: u32,
    pub params: ParamsJson,
    pub level: usize,
    pub draws: u64,
    pub multiset_failures: u64,
    pub red_loops_left: u64,
    pub chi_square: ChiSquareReport,
}

/// Condition uniform sequences on `E_l`, apply the red swap, and compare
/// the outcome to the uniform law on the enumerated `G_l`.
pub fn redswap_uniformity(
    p: &Params,
    level: usize,
    samples: u64,
    seed: u64,
    ceiling: u64,
) -> Result<RedSwapReport, StatsError> {
    let mut space: Vec<Vec<u32>> = Vec::new();
    enumerate_sequences(p, ceiling, |s| {
        let m = s.membership(&expected_phi(p));
        if m.in_e && m.loop_level == level && m.in_g {
            space.push(s.entries().to_vec());
        }
    })?;
    let index: HashMap<&[u32], usize> = space.iter().enumerate().map(|(i, s)| (&s[..], i)).collect();
    let mut counts = vec![0u64; space.len()];
    let mut rng = trial_rng(seed, 0);
    let mut draws = 0;
    let mut got = 0;
    let mut multiset_failures = 0;
    let mut red_loops_left = 0;
    while got < samples {
        draws += 1;
        let y = sample_regular(p, &mut rng);
        let cls = y.classify_edges();
        if cls.lambda != level
            || cls.kinds.iter().any(|k| k.is_bad_loop())
            || cls.has_duplicates()
            || !p.within_loop_budget(cls.lambda)
        {
            continue;
        }
        let Ok((y1, _)) = swap_red_loops(&y, &cls, &mut rng) else {
            continue;
        };
        got += 1;
        let mut a = y.edge_multiset();
        let mut b = y1.edge_multiset();
        a.sort_unstable();
        b.sort_unstable();
        multiset_failures += (a != b) as u64;
        red_loops_left += !y1.classify_edges().red_loop_indices.is_empty() as u64;
        match index.get(y1.entries()) {
            Some(&i) => counts[i] += 1,
            None => return Err(StatsError::UnknownInstance { sample: got }),
        }
    }
    Ok(RedSwapReport {
        schema_version: SCHEMA_VERSION,
        params: p.to_json(),
        level,
        draws,
        multiset_failures,
        red_loops_left,
        chi_square: chi_square_uniform(&counts, seed)?,
    })
}
