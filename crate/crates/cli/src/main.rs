use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use hyperswitch::coupling::coupled_generate;
use hyperswitch::oracle::{enumerate_regular, find_loose_hamilton, OracleError, DEFAULT_NODE_CEILING};
use hyperswitch::pipeline::{run_pipeline, PipelineConfig, PipelineStatus};
use hyperswitch::rng::trial_rng;
use hyperswitch::stats::{
    auto_sample_size, double_count, event_frequencies, fb_audit, phi_checks, uniformity_test, Sampler, StatsError,
    SCHEMA_VERSION,
};
use hyperswitch::switching::DEFAULT_MAX_REJECTS;
use hyperswitch::{expected_phi, Params, Sequence, SimpleGraph};

const ALPHA: f64 = 0.01;
const SIGMAS: f64 = 3.0;

#[derive(Parser)]
#[command(
    name = "hyperswitch",
    version,
    about = "Random k-graphs: H(n,m) coupled inside H(n,d)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derived constants for (n, d, k).
    Params(Shape),
    /// One draw of the iid sequence X.
    SampleX(SampleArgs),
    /// One draw of the regular sequence Y, coupled with X.
    SampleY(SampleArgs),
    /// Run the full construction once.
    Pipeline(PipelineArgs),
    /// All simple d-regular k-graphs on [n].
    Enumerate(EnumerateArgs),
    /// Search each graph of an edge-list stream for a loose Hamilton cycle.
    Hamilton(HamiltonArgs),
    /// Chi-square test of a sampler against the uniform law.
    Uniformity(UniformityArgs),
    /// Event frequencies and expectation checks of the coupling.
    Events(TrialArgs),
    /// Mean and tails of phi(Y).
    Phi(PhiArgs),
    /// Sampled audit of switching counts against their bounds.
    FbAudit(TrialArgs),
    /// Exact double counting of switchings over the whole sequence space.
    DoubleCount(DoubleCountArgs),
}

#[derive(Args, Clone, Copy)]
struct Shape {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    k: usize,
    /// Override the red prefix length r*m (in edges).
    #[arg(long)]
    red_edges: Option<usize>,
}

#[derive(Args)]
struct Output {
    /// Write data here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Edgelist,
}

#[derive(Args)]
struct Seed {
    /// Master seed; falls back to HYPERSWITCH_SEED.
    #[arg(long, env = "HYPERSWITCH_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    seed: Seed,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    SingleShot,
    Resample,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    seed: Seed,
    #[command(flatten)]
    output: Output,
    #[arg(long, value_enum, default_value = "single-shot")]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_MAX_REJECTS)]
    max_rejects: u64,
    /// Pass limit in resample mode.
    #[arg(long, default_value_t = 1_000_000)]
    max_passes: u64,
    /// Edge list of H(n,m).
    #[arg(long)]
    hnm_out: Option<PathBuf>,
    /// Edge list of the output graph, when there is one.
    #[arg(long)]
    tilde_out: Option<PathBuf>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    output: Output,
    #[arg(long, default_value_t = DEFAULT_NODE_CEILING)]
    ceiling: u64,
}

#[derive(Args)]
struct HamiltonArgs {
    /// Edge-list file; `-` reads standard input.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Pipeline,
    Reference,
    Biased,
}

#[derive(Args)]
struct UniformityArgs {
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    seed: Seed,
    #[command(flatten)]
    output: Output,
    /// Sample size, or `auto`.
    #[arg(long = "N", default_value = "auto")]
    samples: String,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value = "pipeline")]
    sampler: SamplerArg,
    #[arg(long, default_value_t = DEFAULT_NODE_CEILING)]
    ceiling: u64,
}

#[derive(Args)]
struct TrialArgs {
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    seed: Seed,
    #[command(flatten)]
    output: Output,
    #[arg(long = "N", default_value_t = 10_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct PhiArgs {
    #[command(flatten)]
    trials: TrialArgs,
    /// Tail checkpoints in sample standard deviations.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    multiples: Vec<f64>,
}

#[derive(Args)]
struct DoubleCountArgs {
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    output: Output,
    #[arg(long, default_value_t = 10_000_000)]
    ceiling: u64,
}

/// Exit status with a message for standard error.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl ToString) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }
    fn guard(message: impl ToString) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }
    fn assertion(message: impl ToString) -> Self {
        Failure {
            code: 3,
            message: message.to_string(),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::NodeCeiling { .. } | OracleError::SpaceTooLarge { .. } => Failure::guard(e),
            _ => Failure::validation(e),
        }
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Oracle(o) => o.into(),
            StatsError::PipelineFailed { .. } => Failure::guard(e),
            _ => Failure::validation(e),
        }
    }
}

type Outcome = Result<(), Failure>;

impl Shape {
    fn params(&self) -> Result<Params, Failure> {
        let p = Params::derive(self.n, self.d, self.k).map_err(Failure::validation)?;
        Ok(match self.red_edges {
            Some(r) if r > p.edges => return Err(Failure::validation(format!("red edges {r} exceed M = {}", p.edges))),
            Some(r) => p.with_red_edges(r),
            None => p,
        })
    }
}

impl Seed {
    fn get(&self) -> Result<u64, Failure> {
        self.seed
            .ok_or_else(|| Failure::validation("a seed is required: pass --seed or set HYPERSWITCH_SEED"))
    }
}

impl Output {
    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn write(&self, text: &str) -> Outcome {
        match &self.out {
            Some(path) => write_file(path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn json<T: Serialize>(&self, value: &T) -> Outcome {
        if self.format == Some(Format::Edgelist) {
            return Err(Failure::validation("this command only writes json"));
        }
        let mut text = serde_json::to_string_pretty(value).map_err(Failure::validation)?;
        text.push('\n');
        self.write(&text)
    }
}

fn write_file(path: &PathBuf, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
}

fn sequence_json(seq: &Sequence) -> serde_json::Value {
    json!({
        "entries": seq.entries(),
        "classification": seq.classify_edges(),
        "membership": seq.membership(&expected_phi(seq.params())),
    })
}

fn sample(args: &SampleArgs, want_y: bool) -> Outcome {
    let p = args.shape.params()?;
    let seed = args.seed.get()?;
    let run = coupled_generate(&p, &mut trial_rng(seed, 0));
    let seq = if want_y { &run.y } else { &run.x };
    if args.output.format(Format::Json) == Format::Edgelist {
        return args.output.write(&seq.to_text());
    }
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "params": p.to_json(),
        "seed": seed,
        "sequence": sequence_json(seq),
    });
    if want_y {
        doc["event_a"] = json!(run.event_a);
        doc["event_b"] = json!(run.event_b);
        doc["w"] = json!(run.w);
    } else {
        doc["lambda"] = json!(run.x_lambda);
        doc["multiple_edges"] = json!(run.x_has_multiple_edges);
    }
    args.output.json(&doc)
}

fn pipeline(args: &PipelineArgs) -> Outcome {
    let p = args.shape.params()?;
    let seed = args.seed.get()?;
    let config = PipelineConfig {
        max_rejects: args.max_rejects,
        max_passes: args.max_passes.max(1),
        ..match args.mode {
            Mode::SingleShot => PipelineConfig::single_shot(),
            Mode::Resample => PipelineConfig::resample(),
        }
    };
    let mut result = run_pipeline(&p, &mut trial_rng(seed, 0), &config);
    result.seed = Some(seed);
    result.stream = Some(0);
    if let Some(path) = &args.hnm_out {
        write_file(path, &result.hnm.to_edge_list())?;
    }
    if let (Some(path), Some(h)) = (&args.tilde_out, &result.tilde_h) {
        write_file(path, &h.to_edge_list())?;
    }
    match args.output.format(Format::Json) {
        Format::Json => {
            let doc = json!({ "schema_version": SCHEMA_VERSION, "params": p.to_json(), "result": result });
            args.output.json(&doc)?;
        }
        Format::Edgelist => {
            let mut text = result.hnm.to_edge_list();
            if let Some(h) = &result.tilde_h {
                text.push_str(&h.to_edge_list());
            }
            args.output.write(&text)?;
        }
    }
    match result.status {
        PipelineStatus::AbortedRejects | PipelineStatus::AbortedSwap => Err(Failure::guard(format!(
            "pipeline aborted after {} passes: {:?}",
            result.passes, result.status
        ))),
        _ => Ok(()),
    }
}

fn enumerate(args: &EnumerateArgs) -> Outcome {
    let s = args.shape;
    let space = enumerate_regular(s.n, s.d, s.k, args.ceiling)?;
    match args.output.format(Format::Edgelist) {
        Format::Edgelist => args.output.write(
            &space
                .instances
                .iter()
                .map(SimpleGraph::to_edge_list)
                .collect::<String>(),
        ),
        Format::Json => args
            .output
            .json(&json!({ "schema_version": SCHEMA_VERSION, "enumeration": space })),
    }
}

fn hamilton(args: &HamiltonArgs) -> Outcome {
    let mut text = String::new();
    let read = if args.input.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(&args.input).map(|t| text = t)
    };
    read.map_err(|e| Failure::validation(format!("{}: {e}", args.input.display())))?;
    let graphs = SimpleGraph::parse_edge_lists(&text).map_err(Failure::validation)?;
    let rows: Vec<_> = graphs
        .iter()
        .map(|h| {
            let cycle = find_loose_hamilton(h);
            json!({ "n": h.n, "k": h.k, "edges": h.edge_count(), "found": cycle.is_some(), "cycle": cycle })
        })
        .collect();
    args.output
        .json(&json!({ "schema_version": SCHEMA_VERSION, "graphs": rows }))
}

fn uniformity(args: &UniformityArgs) -> Outcome {
    let p = args.shape.params()?;
    let seed = args.seed.get()?;
    let space = enumerate_regular(p.n, p.d, p.k, args.ceiling)?;
    let samples = match args.samples.as_str() {
        "auto" => auto_sample_size(space.count),
        s => s
            .parse()
            .map_err(|_| Failure::validation(format!("--N expects a count or auto, got {s:?}")))?,
    };
    let sampler = match args.sampler {
        SamplerArg::Pipeline => Sampler::Pipeline,
        SamplerArg::Reference => Sampler::Reference,
        SamplerArg::Biased => Sampler::Biased,
    };
    let report = uniformity_test(&p, &space, sampler, samples, seed, args.jobs.max(1))?;
    args.output.json(&report)?;
    if report.p_value < ALPHA {
        return Err(Failure::assertion(format!(
            "p = {:.3e} is below {ALPHA}",
            report.p_value
        )));
    }
    Ok(())
}

fn events(args: &TrialArgs) -> Outcome {
    let p = args.shape.params()?;
    let report = event_frequencies(&p, args.samples, args.seed.get()?, args.jobs.max(1));
    args.output.json(&report)?;
    let failed: Vec<&str> = report
        .verdicts
        .iter()
        .filter(|v| !v.pass)
        .map(|v| v.claim.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(Failure::assertion(format!("failed: {}", failed.join("; "))));
    }
    Ok(())
}

fn phi(args: &PhiArgs) -> Outcome {
    let t = &args.trials;
    let p = t.shape.params()?;
    let report = phi_checks(&p, t.samples, t.seed.get()?, t.jobs.max(1), &args.multiples);
    t.output.json(&report)?;
    if report.mean.z.abs() > SIGMAS {
        return Err(Failure::assertion(format!(
            "mean of phi is {:.2} sd from its expectation",
            report.mean.z
        )));
    }
    if let Some(row) = report.tails.iter().find(|r| !r.pass) {
        return Err(Failure::assertion(format!(
            "tail at {} sd exceeds the bound",
            row.multiple
        )));
    }
    Ok(())
}

fn audit(args: &TrialArgs) -> Outcome {
    let p = args.shape.params()?;
    let report = fb_audit(&p, args.samples, args.seed.get()?, args.jobs.max(1));
    args.output.json(&report)?;
    let bad = report.forward_violations
        + report.backward_violations
        + report.round_trip_failures
        + report.phi_changes
        + report.lambda_step_errors
        + report.red_prefix_changes
        + report.degree_changes;
    if bad > 0 {
        return Err(Failure::assertion(format!(
            "{bad} bound violations or invariant breaks"
        )));
    }
    Ok(())
}

fn double(args: &DoubleCountArgs) -> Outcome {
    let p = args.shape.params()?;
    let report = double_count(&p, args.ceiling)?;
    args.output.json(&report)?;
    if !report.identity_holds || report.forward_violations + report.backward_violations > 0 {
        return Err(Failure::assertion("double counting identity or bounds failed"));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation errors; 2 is reserved for guards
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Params(s) => s.params().and_then(|p| {
            Output {
                out: None,
                format: None,
            }
            .json(&json!({ "schema_version": SCHEMA_VERSION, "params": p.to_json() }))
        }),
        Command::SampleX(a) => sample(a, false),
        Command::SampleY(a) => sample(a, true),
        Command::Pipeline(a) => pipeline(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Hamilton(a) => hamilton(a),
        Command::Uniformity(a) => uniformity(a),
        Command::Events(a) => events(a),
        Command::Phi(a) => phi(a),
        Command::FbAudit(a) => audit(a),
        Command::DoubleCount(a) => double(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hyperswitch: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
