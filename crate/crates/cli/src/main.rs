use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ogf::datagen::{self, AdjacencyScaling, SyntheticConfig, TargetKind};
use ogf::experiment::{
    read_runs, run_experiment, summarize, validate_bounds, write_bundle, write_summary,
    AuditConfig, DataSource, ExperimentConfig, LearnerKind, SummaryRow,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Parser)]
#[command(
    name = "ogf",
    version,
    about = "Online graph-filter learning over expanding graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic node stream and save it to a directory.
    Generate(GenerateArgs),
    /// Run the experiment protocol and write a result bundle.
    Run(RunArgs),
    /// Audit empirical regret against the analytic bounds.
    Audit(AuditArgs),
    /// Recompute summary.csv and regret.csv from a runs.csv.
    Report(ReportArgs),
}

/// Synthetic data flags; unset fields keep the library defaults.
#[derive(Args, Default)]
struct DataArgs {
    /// Starting-graph size N_0.
    #[arg(long)]
    n0: Option<usize>,
    /// Number of incoming nodes T.
    #[arg(long)]
    t_total: Option<usize>,
    /// filter, wmean or kernel.
    #[arg(long)]
    target_kind: Option<TargetKind>,
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long)]
    edges_per_node: Option<usize>,
    #[arg(long)]
    kernel_variance: Option<f64>,
    /// Rescale the starting adjacency to unit max in-degree.
    #[arg(long)]
    scale_adjacency: bool,
    #[arg(long)]
    train_fraction: Option<f64>,
}

impl DataArgs {
    fn apply(&self, mut cfg: SyntheticConfig) -> SyntheticConfig {
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = self.$f { cfg.$f = v; })*};
        }
        set!(
            n0,
            t_total,
            target_kind,
            edge_prob,
            edges_per_node,
            kernel_variance,
            train_fraction
        );
        if self.scale_adjacency {
            cfg.adjacency_scaling = AdjacencyScaling::MaxInDegree;
        }
        cfg
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON SyntheticConfig; its fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    data: DataArgs,
    /// Saved stream directory instead of synthetic data.
    #[arg(long, conflicts_with = "target_kind")]
    stream: Option<PathBuf>,
    /// Comma-separated subset of pretrained,batch,dogf,sogf,adaogf,pcogf.
    #[arg(long, value_delimiter = ',')]
    learners: Option<Vec<LearnerKind>>,
    #[arg(long, value_delimiter = ',')]
    eta_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    mu_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    order_grid: Option<Vec<usize>>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Expected edge count of the attachment rules.
    #[arg(long)]
    attachment_scale: Option<f64>,
    /// Ada-OGF combiner step size.
    #[arg(long)]
    combiner_eta: Option<f64>,
    /// Use the starting graph's median edge weight at every step.
    #[arg(long)]
    freeze_weight: bool,
    /// Skip the per-step CSVs.
    #[arg(long)]
    no_steps: bool,
    /// JSON ExperimentConfig; its fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    /// dogf, sogf or adaogf.
    #[arg(long, default_value = "dogf")]
    learner: LearnerKind,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON AuditConfig; its fields override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// A runs.csv from a previous `run`.
    #[arg(long)]
    runs: PathBuf,
    /// Output directory; defaults to the directory holding runs.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Recursively overlays `patch` onto `base`; objects merge, other values replace.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn with_config_file<T: Serialize + DeserializeOwned>(
    from_flags: T,
    file: Option<&Path>,
) -> Result<T> {
    let Some(path) = file else {
        return Ok(from_flags);
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let patch: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut base = serde_json::to_value(from_flags)?;
    merge(&mut base, patch);
    serde_json::from_value(base).with_context(|| format!("applying {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let flags = SyntheticConfig {
        seed: args.seed,
        ..args.data.apply(SyntheticConfig::default())
    };
    let cfg = with_config_file(flags, args.config.as_deref())?;
    let stream = datagen::generate(&cfg)?;
    datagen::save_stream(&stream, &args.out, Some(&cfg))?;
    println!(
        "wrote {} nodes onto a {}-node graph ({} train) to {}",
        stream.len(),
        stream.n0(),
        stream.split(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let mut flags = ExperimentConfig {
        seed: args.seed,
        ..ExperimentConfig::default()
    };
    flags.data = match &args.stream {
        Some(path) => DataSource::Stream { path: path.clone() },
        None => DataSource::Synthetic(args.data.apply(SyntheticConfig::default())),
    };
    if let Some(v) = args.learners {
        flags.learners = v;
    }
    if let Some(v) = args.eta_grid {
        flags.eta_grid = v;
    }
    if let Some(v) = args.mu_grid {
        flags.mu_grid = v;
    }
    if let Some(v) = args.order_grid {
        flags.order_grid = v;
    }
    if let Some(v) = args.realizations {
        flags.realizations = v;
    }
    if let Some(v) = args.attachment_scale {
        flags.attachment_scale = v;
    }
    if args.combiner_eta.is_some() {
        flags.ada.combiner_eta = args.combiner_eta;
    }
    flags.freeze_weight = args.freeze_weight;
    flags.write_steps = !args.no_steps;
    let cfg = with_config_file(flags, args.config.as_deref())?;

    let result = run_experiment(&cfg)?;
    write_bundle(&result, &args.out)?;
    print_summary(&result.summary);
    println!("bundle written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn print_summary(summary: &[SummaryRow]) {
    println!(
        "{:<11} {:>5} {:>8} {:>11} {:>11} {:>12}",
        "learner", "runs", "diverged", "nrmse", "std", "train_regret"
    );
    for s in summary {
        println!(
            "{:<11} {:>5} {:>8} {:>11.5} {:>11.5} {:>12.4e}",
            s.learner.as_str(),
            s.runs,
            s.diverged,
            s.mean_test_nrmse,
            s.std_test_nrmse,
            s.mean_train_regret
        );
    }
}

fn audit(args: AuditArgs) -> Result<ExitCode> {
    let mut flags = AuditConfig {
        learner: args.learner,
        seed: args.seed,
        ..AuditConfig::default()
    };
    flags.data = args.data.apply(flags.data);
    if let Some(v) = args.eta {
        flags.eta = v;
    }
    if let Some(v) = args.mu {
        flags.mu = v;
    }
    if let Some(v) = args.order {
        flags.order = v;
    }
    if let Some(v) = args.realizations {
        flags.realizations = v;
    }
    let cfg = with_config_file(flags, args.config.as_deref())?;

    let report = validate_bounds(&cfg)?;
    if let Some(out) = &args.out {
        report.write(out)?;
    }
    println!(
        "{:?} bound, {} runs: min slack {:.6e}, {} violations",
        report.kind,
        report.runs.len(),
        report.min_slack(),
        report.violation_count()
    );
    if report.violation_count() == 0 {
        return Ok(ExitCode::SUCCESS);
    }
    let names = report.kind.term_names().join(",");
    eprintln!("realization,t,regret,bound,slack,{names}");
    for run in &report.runs {
        for row in run.audit.violations() {
            let terms: Vec<String> = row.terms.iter().map(|v| format!("{v:e}")).collect();
            eprintln!(
                "{},{},{:e},{:e},{:e},{}",
                run.realization,
                row.t,
                row.regret,
                row.bound,
                row.slack,
                terms.join(",")
            );
        }
    }
    Ok(ExitCode::FAILURE)
}

fn report(args: ReportArgs) -> Result<ExitCode> {
    let rows = read_runs(&args.runs)?;
    if rows.is_empty() {
        bail!("{} holds no runs", args.runs.display());
    }
    let out = match args.out {
        Some(dir) => dir,
        None => args
            .runs
            .parent()
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    };
    let summary = summarize(&rows);
    write_summary(&summary, &out)?;
    print_summary(&summary);
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Audit(a) => audit(a),
        Command::Report(a) => report(a),
    }
}
