//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances are pinned below.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use hyperswitch::generate::sample_regular;
use hyperswitch::oracle::{
    count_preimages, enumerate_regular, find_loose_hamilton, pipeline_law, preimage_formula, validate_loose_cycle,
    DEFAULT_NODE_CEILING,
};
use hyperswitch::pipeline::{run_pipeline, PipelineConfig};
use hyperswitch::rng::trial_rng;
use hyperswitch::stats::{
    auto_sample_size, double_count, event_frequencies, fb_audit, goodness_of_fit, phi_checks, redswap_uniformity,
    round_trip_audit, run_trials, uniformity_test, FbAuditReport, Sampler,
};
use hyperswitch::{Params, SimpleGraph};
use rand::seq::SliceRandom;
use rand::Rng;

const SEED: u64 = 42;
const ALPHA: f64 = 0.01;
const NEGATIVE_CONTROL_MAX_P: f64 = 1e-4;
const SIGMAS: f64 = 3.0;
const SEQUENCE_CEILING: u64 = 10_000_000;
const BOUND_AUDIT_SAMPLES: u64 = 10_000;
const ROUND_TRIPS: u64 = 10_000;
const EXPECTATION_SAMPLES: u64 = 100_000;
const TAIL_SAMPLES: u64 = 100_000;
/// Calibrated so that d(4000) = 54, the value maximising the joint
/// frequency in the pilot recorded in the README.
const TREND_C: f64 = 6.51;
const TREND_GRID: [usize; 4] = [500, 1000, 2000, 4000];
const TREND_TRIALS: u64 = 100;
const TREND_MIN_FREQUENCY: f64 = 0.9;

struct Line {
    id: u32,
    pass: bool,
}

fn criterion<F: FnOnce() -> (bool, String)>(id: u32, name: &str, out: &mut Vec<Line>, f: F) {
    let t = Instant::now();
    let (pass, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        (false, format!("panicked: {msg}"))
    });
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!(
        "criterion {id:>2} {verdict} [{name}] {detail} ({:.1}s)",
        t.elapsed().as_secs_f64()
    );
    out.push(Line { id, pass });
}

fn params(n: usize, d: usize, k: usize) -> Params {
    Params::derive(n, d, k).unwrap()
}

fn uniformity() -> (bool, String) {
    let p = params(6, 2, 3);
    let space = enumerate_regular(6, 2, 3, DEFAULT_NODE_CEILING).unwrap();
    let n = auto_sample_size(space.count);
    let main = uniformity_test(&p, &space, Sampler::Pipeline, n, SEED, 1).unwrap();
    let control = uniformity_test(&p, &space, Sampler::Biased, n, SEED, 1).unwrap();
    let law = pipeline_law(&p, &space, SEQUENCE_CEILING).unwrap();
    let exact = goodness_of_fit(&p, &space, Sampler::Pipeline, &law.probabilities, n, SEED, 1).unwrap();
    let pass = main.p_value >= ALPHA && control.p_value < NEGATIVE_CONTROL_MAX_P;
    (
        pass,
        format!(
            "|space|={} N={n} pipeline vs uniform p={:.3e} (need >= {ALPHA}); biased control p={:.3e} (need < {NEGATIVE_CONTROL_MAX_P}); \
             exact pipeline law has TV {:.4} from uniform, dead-end mass {:.4}; pipeline vs exact law p={:.3}",
            space.count,
            main.p_value,
            control.p_value,
            law.total_variation_from_uniform,
            law.dead_end,
            exact.p_value
        ),
    )
}

fn double_counting() -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, d, red) in [(3, 2, None), (6, 1, None), (6, 2, None), (4, 3, Some(1))] {
        let mut p = params(n, d, 3);
        if let Some(r) = red {
            p = p.with_red_edges(r);
        }
        let r = double_count(&p, SEQUENCE_CEILING).unwrap();
        pass &= r.identity_holds && r.odd_backward_counts == 0;
        let sums: Vec<String> = r
            .levels
            .iter()
            .skip(1)
            .map(|l| format!("l={}:{}={}", l.l, l.sum_forward, l.sum_backward))
            .collect();
        parts.push(format!(
            "(3,{n},{d}{}) |S|={} [{}]",
            red.map(|r| format!(",red={r}")).unwrap_or_default(),
            r.sequences,
            sums.join(" ")
        ));
    }
    (pass, parts.join("; "))
}

fn hard_bounds(audit: &FbAuditReport) -> (bool, String) {
    let mut enumerated = 0;
    let mut violations = 0;
    for (n, d) in [(3, 2), (6, 1), (6, 2), (4, 3)] {
        let r = double_count(&params(n, d, 3), SEQUENCE_CEILING).unwrap();
        enumerated += r.levels.iter().map(|l| l.g_l).sum::<u64>();
        violations += r.forward_violations + r.backward_violations;
    }
    let sampled = audit.forward_violations + audit.backward_violations;
    (
        sampled == 0 && violations == 0 && audit.samples == BOUND_AUDIT_SAMPLES,
        format!(
            "(3,60,4) {} samples: F violations {}, B violations {}; enumerated {} sequences of the G_l: {} violations; \
             median F ratio {:.3}, median B ratio {:.3}",
            audit.samples,
            audit.forward_violations,
            audit.backward_violations,
            enumerated,
            violations,
            audit.forward_ratio.median,
            audit.backward_ratio.median
        ),
    )
}

fn phi_invariance(audit: &FbAuditReport) -> (bool, String) {
    let mut broken = 0;
    let mut runs = 0;
    let p = params(6, 2, 3);
    let n = auto_sample_size(75);
    let res = run_trials(1, n, |i| {
        run_pipeline(&p, &mut trial_rng(SEED, i), &PipelineConfig::resample()).invariants_held
    });
    broken += res.iter().filter(|ok| !**ok).count();
    runs += res.len();
    let p = params(60, 4, 3);
    let res = run_trials(1, 2000, |i| {
        run_pipeline(&p, &mut trial_rng(SEED, i), &PipelineConfig::resample()).invariants_held
    });
    broken += res.iter().filter(|ok| !**ok).count();
    runs += res.len();
    let audit_bad = audit.phi_changes + audit.lambda_step_errors + audit.red_prefix_changes + audit.degree_changes;
    (
        broken == 0 && audit_bad == 0,
        format!(
            "{} switchings in the bound audit: phi changes {}, lambda step errors {}, red prefix changes {}, degree changes {}; \
             {runs} pipeline runs with broken invariants: {broken}",
            audit.switchings_applied,
            audit.phi_changes,
            audit.lambda_step_errors,
            audit.red_prefix_changes,
            audit.degree_changes
        ),
    )
}

fn reversibility() -> (bool, String) {
    let r = round_trip_audit(&params(60, 4, 3), ROUND_TRIPS, SEED, 1);
    (
        r.failures == 0 && r.phi_changes == 0 && r.lambda_errors == 0 && r.round_trips == ROUND_TRIPS,
        format!(
            "(3,60,4) {} round trips, {} mismatches, {} phi changes, {} lambda errors",
            r.round_trips, r.failures, r.phi_changes, r.lambda_errors
        ),
    )
}

fn red_swap() -> (bool, String) {
    // the named space: every sequence of (3,3,2) has either two identical
    // proper edges or two loops, so E is empty there
    let tiny = params(3, 2, 3);
    let mut in_e = 0;
    hyperswitch::oracle::enumerate_sequences(&tiny, SEQUENCE_CEILING, |s| {
        in_e += s.membership(&hyperswitch::expected_phi(&tiny)).in_e as u64;
    })
    .unwrap();
    // a space where the swap does real work: (3,4,3) with one red edge
    let p = params(4, 3, 3).with_red_edges(1);
    let r = redswap_uniformity(&p, 2, 500_000, SEED, SEQUENCE_CEILING).unwrap();
    let pass = in_e > 0 && r.multiset_failures == 0 && r.red_loops_left == 0 && r.chi_square.p_value >= ALPHA;
    (
        pass,
        format!(
            "(3,3,2): |E| = {in_e} of 90, conditional chi-square undefined; (3,4,3,red=1) G_2: {} classes, N={}, p={:.3}, \
             multiset mismatches {}, red loops left {}",
            r.chi_square.classes, r.chi_square.sample_size, r.chi_square.p_value, r.multiset_failures, r.red_loops_left
        ),
    )
}

fn expectations() -> (bool, String) {
    let p = params(19, 3, 3);
    let r = event_frequencies(&p, EXPECTATION_SAMPLES, SEED, 1);
    let ok = |z: f64| z.abs() <= SIGMAS;
    (
        ok(r.w_size.z) && ok(r.phi_y.z) && ok(r.lambda_x.z),
        format!(
            "(3,19,3) N={}: |W| mean {:.4} vs {:.4} (z={:.2}); phi mean {:.3} vs {:.3} (z={:.2}); lambda(X) mean {:.4} vs {:.4} (z={:.2})",
            r.trials,
            r.w_size.mean,
            r.w_size.expected,
            r.w_size.z,
            r.phi_y.mean,
            r.phi_y.expected,
            r.phi_y.z,
            r.lambda_x.mean,
            r.lambda_x.expected,
            r.lambda_x.z
        ),
    )
}

fn preimages() -> (bool, String) {
    let mut instances = 0;
    let mut bad = 0;
    let mut parts = Vec::new();
    for n in 3..=12usize {
        for d in 1..=4usize {
            if (n * d) % 3 != 0 || n * d / 3 > 4 {
                continue;
            }
            let p = params(n, d, 3);
            let space = enumerate_regular(n, d, 3, DEFAULT_NODE_CEILING).unwrap();
            let want = preimage_formula(p.edges, 3).unwrap() as u64;
            for h in &space.instances {
                let c = count_preimages(h, &p, false, DEFAULT_NODE_CEILING).unwrap();
                bad += (c.total != want) as u64;
            }
            instances += space.count;
            parts.push(format!("({n},{d}):{}x{want}", space.count));
        }
    }
    (
        bad == 0 && instances > 0,
        format!("{instances} instances, {bad} mismatches [{}]", parts.join(" ")),
    )
}

fn trend_degree(n: usize) -> usize {
    let mut d = (TREND_C * (n as f64).ln()).ceil() as usize;
    while !(n * d).is_multiple_of(3) {
        d += 1;
    }
    d
}

fn embedding_trend() -> (bool, String) {
    let mut freqs = Vec::new();
    for n in TREND_GRID {
        let d = trend_degree(n);
        let r = event_frequencies(&params(n, d, 3), TREND_TRIALS, SEED, 1);
        freqs.push((
            n,
            d,
            r.a_and_b_and_embedded as f64 / TREND_TRIALS as f64,
            r.event_a,
            r.event_b,
            r.y_not_in_e,
        ));
    }
    let monotone = freqs.windows(2).all(|w| w[0].2 <= w[1].2);
    let last = freqs.last().unwrap().2;
    let rows: Vec<String> = freqs
        .iter()
        .map(|(n, d, f, a, b, e)| format!("n={n} d={d} freq={f:.2} (A {a}, B {b}, Y not in E {e})"))
        .collect();
    (
        monotone && last >= TREND_MIN_FREQUENCY,
        format!(
            "C={TREND_C}: {}; nondecreasing: {monotone}; need >= {TREND_MIN_FREQUENCY} at n=4000",
            rows.join(", ")
        ),
    )
}

fn concentration() -> (bool, String) {
    // 100 * 4 is not divisible by 3; 99 is the closest admissible order
    let p = params(99, 4, 3);
    let r = phi_checks(&p, TAIL_SAMPLES, SEED, 1, &[2.0, 3.0, 4.0]);
    let rows: Vec<String> = r
        .tails
        .iter()
        .map(|t| {
            format!(
                "x={}sd: {:.5} <= {:.4}+3*{:.5}",
                t.multiple, t.empirical, t.bound, t.binomial_sigma
            )
        })
        .collect();
    let vacuous = r.tails.iter().all(|t| t.bound >= 1.0);
    (
        r.tails.iter().all(|t| t.pass),
        format!(
            "(3,99,4) N={TAIL_SAMPLES} sd={:.2}: {}{}",
            r.mean.sd,
            rows.join(", "),
            if vacuous {
                "; every bound exceeds 1 at this size"
            } else {
                ""
            }
        ),
    )
}

fn planted_cycle<R: Rng>(n: usize, k: usize, extra: usize, rng: &mut R) -> SimpleGraph {
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(rng);
    let t = n / (k - 1);
    let mut edges: Vec<Vec<u32>> = (0..t)
        .map(|i| (0..k).map(|j| order[(i * (k - 1) + j) % n]).collect())
        .collect();
    while edges.len() < t + extra {
        let mut e: Vec<u32> = rand::seq::index::sample(rng, n, k)
            .into_iter()
            .map(|v| v as u32)
            .collect();
        e.sort_unstable();
        if !edges.iter().any(|f| {
            let mut f = f.clone();
            f.sort_unstable();
            f == e
        }) {
            edges.push(e);
        }
    }
    SimpleGraph::from_edges(n, k, edges).unwrap()
}

fn simple_regular<R: Rng>(n: usize, d: usize, k: usize, rng: &mut R) -> SimpleGraph {
    let p = params(n, d, k);
    loop {
        if let Ok(g) = SimpleGraph::from_sequence(&sample_regular(&p, rng)) {
            return g;
        }
    }
}

fn disconnected<R: Rng>(n: usize, d: usize, k: usize, rng: &mut R) -> SimpleGraph {
    let half = n / 2;
    let a = simple_regular(half, d, k, rng);
    let b = simple_regular(half, d, k, rng);
    let mut perm: Vec<u32> = (0..n as u32).collect();
    perm.shuffle(rng);
    let edges = a
        .edges()
        .iter()
        .map(|e| e.iter().map(|&v| perm[v as usize]).collect::<Vec<u32>>())
        .chain(
            b.edges()
                .iter()
                .map(|e| e.iter().map(|&v| perm[v as usize + half]).collect()),
        )
        .collect::<Vec<_>>();
    SimpleGraph::from_edges(n, k, edges).unwrap()
}

fn components(h: &SimpleGraph) -> usize {
    let mut parent: Vec<usize> = (0..h.n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    for e in h.edges() {
        for w in e.windows(2) {
            let (a, b) = (find(&mut parent, w[0] as usize), find(&mut parent, w[1] as usize));
            parent[a] = b;
        }
    }
    (0..h.n).filter(|&v| find(&mut parent, v) == v).count()
}

fn loose_hamilton() -> (bool, String) {
    let mut rng = trial_rng(SEED, 11);
    let mut found = 0;
    let mut valid = 0;
    let planted: Vec<(usize, usize)> = [6, 8, 10, 12, 14, 16, 18, 12, 16, 18]
        .iter()
        .map(|&n| (n, 3))
        // a loose cycle needs at least three edges, so n >= 3(k - 1)
        .chain([9, 12, 15, 18, 9, 12, 15, 18, 12, 18].iter().map(|&n| (n, 4)))
        .collect();
    for &(n, k) in &planted {
        let h = planted_cycle(n, k, n / 2, &mut rng);
        if let Some(c) = find_loose_hamilton(&h) {
            found += 1;
            valid += validate_loose_cycle(&h, &c).is_ok() as usize;
        }
    }
    let shapes = [(12, 2, 3), (18, 2, 3), (12, 4, 3), (12, 2, 4), (18, 4, 4)];
    let mut rejected = 0;
    let mut split = 0;
    for i in 0..20 {
        let (n, d, k) = shapes[i % shapes.len()];
        let h = disconnected(n, d, k, &mut rng);
        split += (components(&h) >= 2 && h.is_regular(d)) as usize;
        rejected += find_loose_hamilton(&h).is_none() as usize;
    }
    (
        found == planted.len() && valid == found && rejected == 20 && split == 20,
        format!(
            "planted: {found}/{} found, {valid} re-validated; disconnected regular: {rejected}/20 without a cycle ({split} confirmed disconnected)",
            planted.len()
        ),
    )
}

fn main() {
    let started = Instant::now();
    let mut lines = Vec::new();
    criterion(1, "uniformity", &mut lines, uniformity);
    criterion(2, "double counting", &mut lines, double_counting);
    let audit = fb_audit(&params(60, 4, 3), BOUND_AUDIT_SAMPLES, SEED, 1);
    criterion(3, "hard bounds", &mut lines, || hard_bounds(&audit));
    criterion(4, "phi invariance", &mut lines, || phi_invariance(&audit));
    criterion(5, "reversibility", &mut lines, reversibility);
    criterion(6, "red swap", &mut lines, red_swap);
    criterion(7, "expectations", &mut lines, expectations);
    criterion(8, "preimage counts", &mut lines, preimages);
    criterion(9, "embedding trend", &mut lines, embedding_trend);
    criterion(10, "concentration", &mut lines, concentration);
    criterion(11, "loose Hamilton checker", &mut lines, loose_hamilton);
    let failed: Vec<u32> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!(
        "acceptance: {} of {} criteria pass in {:.0}s; failing: {:?}",
        lines.len() - failed.len(),
        lines.len(),
        started.elapsed().as_secs_f64(),
        failed
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
