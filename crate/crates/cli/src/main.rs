//! Command-line surface: annotate a task pool, run single tasks, evaluate
//! splits, inspect selection, and show pool stats.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use demoselect_core::agent::AgentRuntime;
use demoselect_core::embed::{CachingProvider, HashEmbedder};
use demoselect_core::eval::{
    annotate_catalog, load_experiment_config, run_experiment, run_task_once, ExperimentConfig,
};
use demoselect_core::miniworld;
use demoselect_core::pool::{load_pool, save_pool};
use demoselect_core::select::{
    select_candidates, trajectory_candidates, SelectionMethod, SelectionSpec,
};
use demoselect_core::types::{RecordKind, Split, Task};

#[derive(Parser)]
#[command(
    name = "demoselect",
    about = "Annotate agentic tasks with solution trajectories and evaluate \
             demonstration-selection strategies over a built-in toy environment",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iteratively annotate tasks with checker-verified solutions.
    Annotate(AnnotateArgs),
    /// Run a single task and print the trajectory and checker verdict.
    Run(RunArgs),
    /// Evaluate a split: TGC/RTGC/SGC, steps, and token usage.
    Eval(EvalArgs),
    /// Score demonstration candidates for a key and print the selection.
    Select(SelectArgs),
    /// Pool file inspection.
    #[command(subcommand)]
    Pool(PoolCommand),
}

#[derive(Args)]
struct AnnotateArgs {
    /// Task source: a pool file of unannotated tasks, or builtin:train,
    /// builtin:train+dev.
    #[arg(long)]
    tasks: String,
    #[arg(long, default_value = "react")]
    solver: String,
    #[arg(long, default_value_t = 3)]
    rounds: u32,
    /// Output pool path; also the checkpoint written after every admission.
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, default_value = "scripted")]
    provider: String,
    /// Demonstration selection method used while annotating.
    #[arg(long, default_value = "cos")]
    method: String,
    /// Trajectory demos per task (ReAct annotation).
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Resume from the pool checkpoint instead of starting fresh.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Task id from the built-in catalog.
    #[arg(long)]
    task: String,
    #[arg(long, default_value = "cos")]
    method: String,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Enable step-snippet demonstrations.
    #[arg(long)]
    snippets: bool,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, default_value = "scripted")]
    provider: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the per-call transcript to this file (line-delimited).
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Load the whole experiment from a flat key-value config file
    /// (other flags are ignored).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "test_normal")]
    split: String,
    #[arg(long, default_value = "cos")]
    method: String,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    snippets: bool,
    #[arg(long, default_value = "react")]
    solver: String,
    #[arg(long, default_value_t = 2)]
    runs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long, default_value = "scripted")]
    provider: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    fixed_id: Option<String>,
}

#[derive(Args)]
struct SelectArgs {
    /// Retrieval key text.
    #[arg(long)]
    key: String,
    #[arg(long, default_value = "bsr")]
    method: String,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    fixed_id: Option<String>,
}

#[derive(Subcommand)]
enum PoolCommand {
    /// Print record counts and composition of a pool file.
    Stats { path: PathBuf },
}

fn parse_method(s: &str) -> Result<SelectionMethod> {
    s.parse::<SelectionMethod>().map_err(|e| anyhow::anyhow!(e))
}

fn parse_split(s: &str) -> Result<Split> {
    s.parse::<Split>().map_err(|e| anyhow::anyhow!(e))
}

fn parse_solver(s: &str) -> Result<RecordKind> {
    match s {
        "react" => Ok(RecordKind::React),
        "pne" => Ok(RecordKind::Pne),
        other => bail!("unknown solver '{other}' (expected react or pne)"),
    }
}

fn builtin_splits(spec: &str) -> Result<Option<Vec<Split>>> {
    match spec {
        "builtin:train" => Ok(Some(vec![Split::Train])),
        "builtin:train+dev" => Ok(Some(vec![Split::Train, Split::Dev])),
        "builtin:dev" => Ok(Some(vec![Split::Dev])),
        other if other.starts_with("builtin:") => {
            bail!("unknown builtin task set '{other}'")
        }
        _ => Ok(None),
    }
}

fn annotate(args: AnnotateArgs) -> Result<()> {
    if args.provider != "scripted" {
        bail!(
            "annotation runs against the scripted provider; got '{}'",
            args.provider
        );
    }
    let solver_kind = parse_solver(&args.solver)?;
    let method = parse_method(&args.method)?;
    let demos = SelectionSpec {
        method,
        k: args.k,
        seed: args.seed,
        fixed_id: None,
    };

    let pool = match builtin_splits(&args.tasks)? {
        Some(splits) if !args.resume => annotate_catalog(
            &splits,
            solver_kind,
            args.rounds,
            demos,
            args.seed,
            Some(args.pool.clone()),
        )?,
        Some(splits) => {
            let tasks: Vec<Task> = splits
                .iter()
                .flat_map(|s| miniworld::list_tasks(*s))
                .map(|m| m.task)
                .collect();
            run_annotation_over(tasks, solver_kind, &args, demos)?
        }
        None => {
            // A task file: all tasks in it (annotated or not) form the set.
            let task_pool = load_pool(PathBuf::from(&args.tasks))
                .with_context(|| format!("loading task file {}", args.tasks))?;
            let tasks: Vec<Task> = task_pool
                .unannotated
                .iter()
                .cloned()
                .chain(task_pool.records.iter().map(|r| r.task.clone()))
                .collect();
            let known = tasks
                .iter()
                .all(|t| miniworld::lookup_task(&t.task_id).is_some());
            if !known {
                bail!(
                    "task file contains ids outside the built-in catalog; \
                     only catalog tasks have environments and checkers"
                );
            }
            run_annotation_over(tasks, solver_kind, &args, demos)?
        }
    };

    save_pool(&pool, &args.pool)?;
    println!(
        "annotated {} task(s); {} still unannotated; pool written to {}",
        pool.records.len(),
        pool.unannotated.len(),
        args.pool.display()
    );
    Ok(())
}

fn run_annotation_over(
    tasks: Vec<Task>,
    solver_kind: RecordKind,
    args: &AnnotateArgs,
    demos: SelectionSpec,
) -> Result<demoselect_core::types::AnnotationPool> {
    use demoselect_core::agent::{AgentConfig, PneOptions};
    use demoselect_core::annotate::{
        resume_annotation, run_annotation, AnnotationConfig, DemoSelector, PlanDemoSelector,
        PneSolver, ReactSolver, Solver, TrajectoryDemoSelector,
    };

    let chat = miniworld::scripted_agent_provider();
    let embed = CachingProvider::new(HashEmbedder::default());
    let factory = miniworld::env_factory(args.seed);
    let checker = miniworld::ReplayChecker { seed: args.seed };
    let mut config = AnnotationConfig::new(args.rounds, solver_kind, demos.clone());
    config.seed = args.seed;
    config.checkpoint_path = Some(args.pool.clone());

    let run = |solver: &mut dyn Solver,
                   selector: &dyn DemoSelector|
     -> Result<demoselect_core::types::AnnotationPool> {
        let pool = if args.resume {
            resume_annotation(&args.pool, &tasks, solver, &checker, selector, &config)?
        } else {
            run_annotation(&tasks, solver, &checker, selector, &config)?
        };
        Ok(pool)
    };

    match solver_kind {
        RecordKind::React => {
            let selector = TrajectoryDemoSelector {
                spec: demos,
                embed: &embed,
            };
            let mut solver = ReactSolver {
                chat: &chat,
                embed: &embed,
                env_factory: &factory,
                config: AgentConfig::annotation_react(),
                snippets: None,
            };
            run(&mut solver, &selector)
        }
        RecordKind::Pne => {
            let selector = PlanDemoSelector {
                spec: SelectionSpec {
                    k: 4,
                    ..demos.clone()
                },
                embed: &embed,
            };
            let mut options = PneOptions::annotation();
            options.planner_demos = SelectionSpec {
                k: 4,
                ..demos.clone()
            };
            options.executor_demos = SelectionSpec { k: 3, ..demos };
            let mut solver = PneSolver {
                chat: &chat,
                embed: &embed,
                env_factory: &factory,
                options,
            };
            run(&mut solver, &selector)
        }
    }
}

fn run_one(args: RunArgs) -> Result<()> {
    let mini = miniworld::lookup_task(&args.task)
        .with_context(|| format!("task '{}' is not in the built-in catalog", args.task))?;
    if args.provider != "scripted" {
        bail!(
            "run supports the scripted provider; got '{}'",
            args.provider
        );
    }
    let mut config = ExperimentConfig::new(
        mini.task.split,
        parse_method(&args.method)?,
        args.k,
        args.pool.clone(),
    );
    config.snippets = args.snippets;
    config.seed = args.seed;

    let pool = load_pool(&args.pool)?;
    let chat = miniworld::scripted_agent_provider();
    let embed = CachingProvider::new(HashEmbedder::default());
    let runtime = AgentRuntime::new(&pool, &chat, &embed);
    let (result, passed, failed) = run_task_once(&runtime, &mini, &config)?;

    println!("task: {}", mini.task.task_id);
    println!("instruction: {}", mini.task.instruction);
    println!(
        "demonstrations: {:?}",
        result
            .demos_used
            .selected
            .iter()
            .map(|s| s.candidate_id.as_str())
            .collect::<Vec<_>>()
    );
    for step in &result.trajectory.steps {
        println!("--- step {}", step.index);
        println!("thought: {}", step.thought);
        println!("action: {}", step.action);
        if !step.observation.is_empty() {
            println!("observation: {}", step.observation);
        }
    }
    println!("outcome: {}", result.outcome);
    if let Some(answer) = &result.trajectory.final_answer {
        println!("final answer: {answer}");
    }
    println!(
        "tokens: {} in / {} out over {} step(s)",
        result.total_input_tokens,
        result.total_output_tokens,
        result.trajectory.steps.len()
    );
    if passed {
        println!("checker: PASS");
    } else {
        println!("checker: FAIL ({})", failed.join(", "));
    }
    if let Some(path) = args.transcript {
        let mut lines = String::new();
        for call in &result.transcript {
            lines.push_str(&serde_json::to_string(call)?);
            lines.push('\n');
        }
        std::fs::write(&path, lines)?;
        println!("transcript written to {}", path.display());
    }
    if !passed {
        std::process::exit(2);
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => load_experiment_config(path)?,
        None => {
            let pool = args
                .pool
                .clone()
                .context("--pool is required (or use --config)")?;
            let mut config = ExperimentConfig::new(
                parse_split(&args.split)?,
                parse_method(&args.method)?,
                args.k,
                pool,
            );
            config.snippets = args.snippets;
            config.solver = Some(parse_solver(&args.solver)?);
            config.runs = args.runs;
            config.seed = args.seed;
            config.out = args.out.clone();
            config.provider = args.provider.clone();
            config.fixed_id = args.fixed_id.clone();
            config
        }
    };
    let report = run_experiment(&config)?;
    println!(
        "split={} method={} k={} snippets={} runs={} fingerprint={}",
        config.split,
        config.method,
        config.k,
        config.snippets,
        config.runs,
        report.config_fingerprint
    );
    println!(
        "TGC {:.1}  RTGC {:.1}  SGC {:.1}  avg_steps {:.2}  avg_tokens {:.1}",
        report.tgc, report.rtgc, report.sgc, report.avg_steps, report.avg_tokens
    );
    for row in &report.per_task {
        let marks: String = row
            .runs
            .iter()
            .map(|r| if r.passed { '+' } else { '-' })
            .collect();
        println!("  {:<32} {}", row.task_id, marks);
    }
    if let Some(out) = &config.out {
        println!("report and transcripts written under {}", out.display());
    }
    Ok(())
}

fn select(args: SelectArgs) -> Result<()> {
    let pool = load_pool(&args.pool)?;
    let candidates = trajectory_candidates(&pool, "");
    let spec = SelectionSpec {
        method: parse_method(&args.method)?,
        k: args.k,
        seed: args.seed,
        fixed_id: args.fixed_id,
    };
    let embed = CachingProvider::new(HashEmbedder::default());
    let result = select_candidates(&args.key, &candidates, &spec, &embed)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn pool_stats(path: PathBuf) -> Result<()> {
    let pool = load_pool(&path)?;
    let react = pool.react_records().count();
    let pne = pool.pne_records().count();
    let scenarios: std::collections::BTreeSet<&str> = pool
        .records
        .iter()
        .map(|r| r.task.scenario_id.as_str())
        .collect();
    let steps: usize = pool
        .records
        .iter()
        .map(|r| match &r.trajectory {
            Some(t) => t.steps.len(),
            None => r.subtask_trajectories.iter().map(|t| t.steps.len()).sum(),
        })
        .sum();
    let subtasks: usize = pool
        .records
        .iter()
        .filter_map(|r| r.plan.as_ref())
        .map(|p| p.subtasks.len())
        .sum();
    println!("pool: {}", path.display());
    println!("records: {} ({react} react, {pne} pne)", pool.records.len());
    println!("unannotated: {}", pool.unannotated.len());
    println!("scenarios covered: {}", scenarios.len());
    println!("total steps: {steps}");
    if pne > 0 {
        println!("total subtasks: {subtasks}");
    }
    let rounds: std::collections::BTreeMap<u32, usize> =
        pool.records.iter().fold(Default::default(), |mut acc, r| {
            *acc.entry(r.annotated_in_round).or_default() += 1;
            acc
        });
    for (round, count) in rounds {
        println!("  round {round}: {count} admitted");
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Annotate(args) => annotate(args),
        Command::Run(args) => run_one(args),
        Command::Eval(args) => eval(args),
        Command::Select(args) => select(args),
        Command::Pool(PoolCommand::Stats { path }) => pool_stats(path),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
