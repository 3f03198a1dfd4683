use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mis_core::analysis::{compute_beta, compute_i, evaluate_bounds, is_legitimate_byz, normalize_trace};
use mis_core::harness::{
    run_experiment, run_experiment_traced, summarize, write_csv, ExperimentSpec, GraphSpec, TrialResult,
};
use mis_core::model::{parse_trace, replay, ExecutionTrace};
use mis_core::oracle::verify_catalog;
use mis_core::{Algorithm, DaemonStrategy, GraphKind};

#[derive(Debug, Parser)]
#[command(
    name = "sim",
    version,
    about = "Self-stabilizing MIS simulator and exact checker"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run Monte-Carlo trials and emit per-trial CSV plus a JSON summary.
    Run(Box<RunArgs>),
    /// Run the exact-oracle suite over the built-in graph catalog.
    Verify,
    /// Evaluate the closed-form bounds.
    Bound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        json: bool,
    },
    /// Re-execute a trace file with its recorded coins.
    Replay { trace: PathBuf },
    /// Rewrite an anonymous trace into candidacy-only and per-set withdrawal steps.
    Normalize {
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment file (JSON). Flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algorithm>,
    /// path | cycle | complete | star | gnp
    #[arg(long)]
    graph: Option<GraphKind>,
    #[arg(long)]
    n: Option<usize>,
    /// Edge probability for gnp.
    #[arg(long)]
    edge_p: Option<f64>,
    /// Fixes the gnp graph; without it every trial draws its own.
    #[arg(long)]
    graph_seed: Option<u64>,
    #[arg(long)]
    graph_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    byzantine: Option<Vec<usize>>,
    /// sync | rsubset:<d> | single | conflict | fair:<inner>:<age|n>
    #[arg(long)]
    daemon: Option<DaemonStrategy>,
    /// silent | flip | osc | maxx | script:<file>
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Failure probability the bounds are evaluated at.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    max_rounds: Option<u64>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    closure_rounds: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary destination; stderr when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Write every trial's trace to `<dir>/trial-<index>.trace`.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

impl RunArgs {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path)?,
            None => ExperimentSpec {
                algo: self.algo.context("--algo is required without --config")?,
                graph: GraphSpec::default(),
                daemon: self
                    .daemon
                    .clone()
                    .context("--daemon is required without --config")?,
                byz_policy: "silent".into(),
                trials: 1,
                seed: 0,
                p_bound: 0.1,
                max_rounds: None,
                max_steps: None,
                closure_rounds: None,
                out: None,
            },
        };
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        set!(spec.algo, self.algo);
        set!(spec.daemon, self.daemon);
        set!(spec.byz_policy, self.policy);
        set!(spec.trials, self.trials);
        set!(spec.seed, self.seed);
        set!(spec.p_bound, self.p);
        set!(spec.graph.byzantine, self.byzantine);
        let g = &mut spec.graph;
        g.kind = self.graph.or(g.kind);
        g.n = self.n.or(g.n);
        g.p = self.edge_p.or(g.p);
        g.seed = self.graph_seed.or(g.seed);
        g.file = self.graph_file.clone().or(g.file.take());
        spec.max_rounds = self.max_rounds.or(spec.max_rounds);
        spec.max_steps = self.max_steps.or(spec.max_steps);
        spec.closure_rounds = self.closure_rounds.or(spec.closure_rounds);
        spec.out = self.out.clone().or(spec.out);
        Ok(spec)
    }
}

fn write_trace(dir: &Path, index: usize, trace: &ExecutionTrace) -> Result<()> {
    let path = dir.join(format!("trial-{index}.trace"));
    fs::write(&path, trace.to_string()).with_context(|| format!("writing {}", path.display()))
}

fn run(args: &RunArgs) -> Result<bool> {
    let spec = args.spec()?;
    let exp = spec.validate()?;
    let results: Vec<TrialResult> = match &args.trace_dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let outcomes = run_experiment_traced(&exp)?;
            for o in &outcomes {
                write_trace(dir, o.result.index, o.trace.as_ref().expect("traced run"))?;
            }
            outcomes.into_iter().map(|o| o.result).collect()
        }
        None => run_experiment(&exp)?,
    };
    match &spec.out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(&results, file)?;
        }
        None => write_csv(&results, std::io::stdout().lock())?,
    }
    let summary = summarize(&results, exp.p_bound)?;
    let json = serde_json::to_string_pretty(&summary)?;
    match &args.summary {
        Some(path) => fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => writeln!(std::io::stderr(), "{json}")?,
    }
    let mut ok = true;
    if summary.violations > 0 {
        eprintln!("{} invariant violations", summary.violations);
        for r in results.iter().filter(|r| r.violation_count > 0).take(5) {
            eprintln!("  trial {}: {}", r.index, r.violations.join("; "));
        }
        ok = false;
    }
    let failed = results.iter().filter(|r| !r.timed_out && !r.legitimate).count();
    if failed > 0 {
        eprintln!("{failed} trials ended outside the legitimate set");
        ok = false;
    }
    if !summary.bound.holds {
        eprintln!(
            "bound exceeded in {:.4} of trials (threshold {:.4})",
            summary.bound.fraction, summary.bound.threshold
        );
        ok = false;
    }
    Ok(ok)
}

fn load_trace(path: &Path) -> Result<ExecutionTrace> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_trace(&text).with_context(|| format!("parsing {}", path.display()))
}

fn replay_cmd(path: &Path) -> Result<bool> {
    let trace = load_trace(path)?;
    let checked = replay(&trace).with_context(|| format!("replaying {}", path.display()))?;
    let g = &checked.graph;
    let last = checked.last_configuration();
    println!("algorithm   {}", checked.algorithm);
    println!("steps       {}", checked.steps.len());
    println!("moves       {}", checked.total_moves());
    println!("terminated  {}", checked.terminated);
    println!("final s     {}", last.flag_string());
    match checked.algorithm {
        Algorithm::Byzantine => {
            let levels = g.level_sets();
            println!("I           {:?}", compute_i(g, &levels, last));
            println!("legitimate  {}", is_legitimate_byz(g, &levels, last));
        }
        Algorithm::Anonymous => println!("beta        {:?}", compute_beta(g, last)),
    }
    Ok(true)
}

fn normalize_cmd(path: &Path, out: Option<&Path>) -> Result<bool> {
    let trace = load_trace(path)?;
    let normalized = normalize_trace(&trace).with_context(|| format!("normalizing {}", path.display()))?;
    if normalized.last_configuration() != trace.last_configuration() {
        bail!("normalized trace ends in a different configuration");
    }
    let text = normalized.to_string();
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(true)
}

fn bound_cmd(n: usize, delta: usize, p: f64, json: bool) -> Result<bool> {
    let b = evaluate_bounds(n, delta, p)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&b)?);
    } else {
        println!("alpha            {:.6}", b.alpha);
        println!("byz_round_bound  {:.4}", b.byz_round_bound);
        println!("anon_vanish_bound {:.4}", b.anon_vanish_bound);
        println!("anon_move_bound  {:.4}", b.anon_move_bound);
    }
    Ok(true)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => run(&args),
        Command::Verify => {
            let report = verify_catalog();
            println!("{report}");
            Ok(report.all_passed())
        }
        Command::Bound { n, delta, p, json } => bound_cmd(n, delta, p, json),
        Command::Replay { trace } => replay_cmd(&trace),
        Command::Normalize { trace, out } => normalize_cmd(&trace, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
