use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gyroflow::config::ModelConfig;
use gyroflow::curvature::{edge_g, forman_curvature, ricci_total};
use gyroflow::dynamics::FlowKind;
use gyroflow::entropy::{audit, DEFAULT_TOL};
use gyroflow::error::Error;
use gyroflow::harness::{
    evaluate, flow_replay, generate, geomcheck, model_rollout, observed_weights, predict, GenerateSpec,
    SystemKind, TrajectoryDataset,
};
use gyroflow::learning::train_with;
use gyroflow::network::Checkpoint;
use serde_json::json;

#[derive(Parser)]
#[command(name = "gyroflow", version, about = "Riemannian graph ODEs with a constrained Ricci flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset.
    Generate(GenerateArgs),
    /// Fit a model and write its checkpoint.
    Train(TrainArgs),
    /// Forecast held-out snapshots; prints model and persistence metrics.
    Predict(PredictArgs),
    /// Entropy-over-time audit of stored, replayed or predicted weights.
    AuditEntropy(AuditArgs),
    /// Per-edge Forman curvature of one snapshot.
    Curvature(CurvatureArgs),
    /// Randomised invariant suite of the manifold operations.
    Geomcheck(GeomArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum System {
    SphericalFlock,
    HyperbolicDiffusion,
    HeatGraph,
}

impl From<System> for SystemKind {
    fn from(s: System) -> Self {
        match s {
            System::SphericalFlock => SystemKind::SphericalFlock,
            System::HyperbolicDiffusion => SystemKind::HyperbolicDiffusion,
            System::HeatGraph => SystemKind::HeatGraph,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Constrained,
    Canonical,
}

impl From<Mode> for FlowKind {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Constrained => FlowKind::Constrained,
            Mode::Canonical => FlowKind::Canonical,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    system: System,
    #[arg(long)]
    nodes: usize,
    /// Snapshots per sequence.
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = GenerateSpec::DEFAULT_SEQUENCES)]
    sequences: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Model configuration JSON; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss CSV.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    horizon: usize,
    /// JSON lines, one per sequence and predicted snapshot.
    #[arg(long)]
    out: PathBuf,
    /// Metric CSV; printed to stdout as well.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Dataset whose stored weights are audited, or whose observed window
    /// seeds a model rollout.
    #[arg(long)]
    data: PathBuf,
    /// Roll this model forward instead of reading stored weights.
    #[arg(long, requires = "steps")]
    model: Option<PathBuf>,
    /// Base steps of the model rollout.
    #[arg(long, requires = "model")]
    steps: Option<usize>,
    /// With a dataset alone, `canonical` replays the canonical flow from the
    /// first snapshot; with a model it swaps in the canonical weight law.
    #[arg(long, value_enum, default_value = "constrained")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    sequence: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurvatureArgs {
    #[arg(long)]
    data: PathBuf,
    /// Snapshot index within the sequence.
    #[arg(long)]
    snapshot: usize,
    #[arg(long, default_value_t = 0)]
    sequence: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GeomArgs {
    #[arg(long, allow_hyphen_values = true)]
    kappa: f64,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Runtime(Error),
    /// A check ran and reported a failure.
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome = Result<(), Failure>;

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(Error::from)
}

fn load_model(path: &Path) -> Result<Checkpoint, Error> {
    Checkpoint::from_json(&fs::read_to_string(path)?)
}

fn run_generate(a: GenerateArgs) -> Outcome {
    let mut spec = GenerateSpec::new(a.system.into(), a.nodes, a.steps, a.seed);
    spec.sequences = a.sequences;
    let d = generate(&spec)?;
    d.save(&a.out)?;
    println!(
        "wrote {} sequences of {} snapshots to {}",
        d.sequences.len(),
        a.steps,
        a.out.display()
    );
    Ok(())
}

fn run_train(a: TrainArgs) -> Outcome {
    let data = TrajectoryDataset::load(&a.data)?;
    let cfg = match &a.config {
        Some(p) => ModelConfig::from_json(&fs::read_to_string(p).map_err(Error::from)?)?,
        None => ModelConfig::default(),
    };
    let out = train_with(&data, &cfg, a.seed, |e| {
        log::info!(
            "epoch {} loss {:.6} (position {:.6}, weights {:.6}) {} ms",
            e.epoch,
            e.objective.total,
            e.objective.position_term,
            e.objective.weight_term,
            e.wall_ms
        );
    })?;
    let losses = out.log.losses();
    let ck = Checkpoint {
        config: ModelConfig {
            kappa: Some(out.kappa.value()),
            ..cfg
        },
        seed: a.seed,
        params: out.params,
    };
    write(&a.out, &ck.to_json())?;
    if let Some(p) = &a.log {
        write(p, &out.log.to_csv())?;
    }
    if let (Some(first), Some(last)) = (losses.first(), losses.last()) {
        println!("epochs={} first_loss={} final_loss={}", losses.len(), first.total, last.total);
    }
    Ok(())
}

fn run_predict(a: PredictArgs) -> Outcome {
    let model = load_model(&a.model)?;
    let data = TrajectoryDataset::load(&a.data)?;
    let preds = predict(&model, &data, a.horizon)?;
    let mut lines = String::new();
    for (s, p) in preds.iter().enumerate() {
        for (k, (t, raw)) in p.times.iter().zip(&p.raw).enumerate() {
            let state = &p.states[k];
            let z: Vec<&[f64]> = state.z.iter().map(|q| q.coords()).collect();
            let line = json!({"sequence": s, "t": t, "features": raw, "Z": z, "w": state.w});
            let _ = writeln!(lines, "{line}");
        }
    }
    write(&a.out, &lines)?;
    let csv = evaluate(&model, &data, a.horizon)?.to_csv();
    if let Some(p) = &a.metrics {
        write(p, &csv)?;
    }
    print!("{csv}");
    Ok(())
}

fn run_audit(a: AuditArgs) -> Outcome {
    let data = TrajectoryDataset::load(&a.data)?;
    let kind: FlowKind = a.mode.into();
    let trajectory = match (&a.model, a.steps) {
        (Some(m), Some(steps)) => model_rollout(&load_model(m)?, &data, a.sequence, steps, kind)?,
        _ => match kind {
            FlowKind::Constrained => observed_weights(&data, a.sequence)?,
            FlowKind::Canonical => flow_replay(&data, a.sequence, kind, 0.0)?,
        },
    };
    let report = audit(&trajectory, a.tol)?;
    write(&a.out, &report.to_csv())?;
    println!(
        "verdict={} violations={} min_delta={:e} tol={:e}",
        report.verdict,
        report.violations.len(),
        report.min_delta(),
        report.tol
    );
    Ok(())
}

fn run_curvature(a: CurvatureArgs) -> Outcome {
    let data = TrajectoryDataset::load(&a.data)?;
    let snap = data
        .sequences
        .get(a.sequence)
        .and_then(|s| s.get(a.snapshot))
        .ok_or_else(|| {
            Error::Domain(format!(
                "no snapshot {} in sequence {} of {}",
                a.snapshot,
                a.sequence,
                a.data.display()
            ))
        })?;
    let g = &snap.graph;
    let r = forman_curvature(g).0;
    let gs = edge_g(g);
    let mut csv = String::from("i,j,weight,curvature,g\n");
    for (((i, j, w), r), gv) in g.edges().zip(&r).zip(&gs) {
        let _ = writeln!(csv, "{i},{j},{w},{r},{gv}");
    }
    write(&a.out, &csv)?;
    println!("t={} edges={} ricci_total={}", snap.t, g.num_edges(), ricci_total(g));
    Ok(())
}

fn run_geomcheck(a: GeomArgs) -> Outcome {
    let report = geomcheck(a.kappa, a.dim, a.trials, a.seed)?;
    for c in &report.checks {
        println!(
            "{} {} worst={:e} bound={:e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.bound
        );
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        Err(Failure::Check(failed.join(",")))
    }
}

fn error_line(kind: &str, message: &str) {
    eprintln!("{}", json!({"error": kind, "message": message}));
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let text = e.to_string();
            let summary: Vec<&str> = text
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect();
            error_line("usage", summary.join(" ").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => run_generate(a),
        Command::Train(a) => run_train(a),
        Command::Predict(a) => run_predict(a),
        Command::AuditEntropy(a) => run_audit(a),
        Command::Curvature(a) => run_curvature(a),
        Command::Geomcheck(a) => run_geomcheck(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(e)) => {
            error_line(e.kind(), &e.to_string());
            ExitCode::from(1)
        }
        Err(Failure::Check(names)) => {
            error_line("check_failed", &names);
            ExitCode::from(1)
        }
    }
}
