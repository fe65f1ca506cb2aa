//! Command-line front end: parse, grid, build, solve, bound, simulate, report.
//!
//! Every artifact embeds the full [`RunConfig`] and the library version. All
//! randomness flows from `--seed` through tagged sub-streams.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::avgcost::{extend_average_solution, solve_multichain, SensitiveSolution, DEFAULT_ORDER};
use crate::bounds::{estimate_theorem2_delta, BoundReport};
use crate::discount::{discounted_error_bounds, value_iteration, DiscountErrorReport, DiscountSolution};
use crate::grids::GridScheme;
use crate::lower::{ModifiedMdp, Scheme};
use crate::model::cassandra::read_pomdp_file;
use crate::model::{Belief, PomdpModel};
use crate::sim::{
    simulate_trajectories, AverageLookaheadPolicy, AverageStepPolicy, BeliefPolicy,
    DiscountGreedyPolicy, DiscountLookaheadPolicy, SimulationReport,
};
use crate::VERSION;

pub const MAX_ORDER: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "gridpomdp", version, about = "Grid-based lower bounds and policies for POMDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the modified MDP and write the solution.
    Solve(RunArgs),
    /// Estimate the sampled bound for a solution.
    Bound(RunArgs),
    /// Simulate the induced policy on the true model.
    Simulate(RunArgs),
    /// Run the benchmark comparison over a directory of problem files.
    Table2(Table2Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Average,
    Discounted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Average: smallest action of the extended nested argmin. Discounted:
    /// minimizer of the modified backup.
    Step2,
    /// One exact backup with the approximation as continuation cost.
    Lookahead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, env = "GRIDPOMDP_PROBLEM")]
    pub problem: PathBuf,
    #[arg(long, default_value = "d2", env = "GRIDPOMDP_SCHEME")]
    pub scheme: Scheme,
    /// Grid pattern such as `0-E`, `3-E`, `20-R` or `2-E+10-R`.
    #[arg(long, default_value = "0-E", env = "GRIDPOMDP_GRID")]
    pub grid: String,
    #[arg(long, value_enum, default_value = "average", env = "GRIDPOMDP_CRITERION")]
    pub criterion: Criterion,
    /// Discount factor; required with `--criterion discounted`.
    #[arg(long, env = "GRIDPOMDP_ALPHA")]
    pub alpha: Option<f64>,
    /// Discount-optimality order of the average-cost policy.
    #[arg(long, default_value_t = DEFAULT_ORDER, allow_negative_numbers = true, env = "GRIDPOMDP_ORDER")]
    pub order: i32,
    /// Value-iteration accuracy for the discounted criterion.
    #[arg(long, default_value_t = 1e-9, env = "GRIDPOMDP_TOL")]
    pub tol: f64,
    #[arg(long, default_value_t = 1, env = "GRIDPOMDP_SEED")]
    pub seed: u64,
    #[arg(long, default_value_t = 160, env = "GRIDPOMDP_TRAJECTORIES")]
    pub trajectories: usize,
    #[arg(long, default_value_t = 500, env = "GRIDPOMDP_HORIZON")]
    pub horizon: usize,
    /// Random beliefs sampled for bound estimation.
    #[arg(long, default_value_t = 500, env = "GRIDPOMDP_SAMPLES")]
    pub samples: usize,
    #[arg(long, default_value_t = 100, env = "GRIDPOMDP_BOOTSTRAP")]
    pub bootstrap: usize,
    #[arg(long, value_enum, default_value = "step2", env = "GRIDPOMDP_POLICY")]
    pub policy: PolicyKind,
    #[arg(long, value_enum, default_value = "text", env = "GRIDPOMDP_FORMAT")]
    pub format: Format,
    #[arg(long, env = "GRIDPOMDP_OUTPUT")]
    pub output: Option<PathBuf>,
    /// Display negated costs in text output.
    #[arg(long, env = "GRIDPOMDP_AS_REWARDS")]
    pub as_rewards: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub problem: String,
    pub scheme: Scheme,
    pub grid: String,
    pub criterion: Criterion,
    pub alpha: Option<f64>,
    pub order: i32,
    pub tol: f64,
    pub seed: u64,
    pub trajectories: usize,
    pub horizon: usize,
    pub samples: usize,
    pub bootstrap: usize,
    pub policy: PolicyKind,
    pub format: Format,
    pub output: Option<String>,
    pub as_rewards: bool,
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> anyhow::Result<Self> {
        let cfg = Self {
            problem: a.problem.display().to_string(),
            scheme: a.scheme,
            grid: a.grid.clone(),
            criterion: a.criterion,
            alpha: a.alpha,
            order: a.order,
            tol: a.tol,
            seed: a.seed,
            trajectories: a.trajectories,
            horizon: a.horizon,
            samples: a.samples,
            bootstrap: a.bootstrap,
            policy: a.policy,
            format: a.format,
            output: a.output.as_ref().map(|p| p.display().to_string()),
            as_rewards: a.as_rewards,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match (self.criterion, self.alpha) {
            (Criterion::Discounted, None) => bail!("--alpha is required with --criterion discounted"),
            (Criterion::Discounted, Some(a)) if !(0.0..1.0).contains(&a) => {
                bail!("--alpha must lie in [0,1), got {a}")
            }
            (Criterion::Average, Some(_)) => bail!("--alpha applies only to --criterion discounted"),
            _ => {}
        }
        if !(-1..=MAX_ORDER).contains(&self.order) {
            bail!("--order must lie in [-1, {MAX_ORDER}], got {}", self.order);
        }
        if !(self.tol > 0.0) {
            bail!("--tol must be positive");
        }
        if self.trajectories == 0 || self.horizon == 0 {
            bail!("--trajectories and --horizon must be positive");
        }
        if self.bootstrap < 2 {
            bail!("--bootstrap must be at least 2");
        }
        Ok(())
    }
}

/// A parsed model, its grid and the modified MDP built on it.
pub struct Pipeline {
    pub model: PomdpModel,
    pub mdp: ModifiedMdp,
}

impl Pipeline {
    pub fn load(problem: &Path, scheme: Scheme, pattern: &str, seed: u64) -> anyhow::Result<Self> {
        let model = read_pomdp_file(problem)
            .with_context(|| format!("reading problem {}", problem.display()))?;
        Self::from_model(model, scheme, pattern, seed)
    }

    pub fn from_model(model: PomdpModel, scheme: Scheme, pattern: &str, seed: u64) -> anyhow::Result<Self> {
        let grid = GridScheme::from_pattern(pattern, model.num_states(), seed)
            .with_context(|| format!("building grid {pattern}"))?;
        let mdp = ModifiedMdp::build(&model, &grid, scheme)
            .with_context(|| format!("building modified MDP ({scheme}, {pattern})"))?;
        Ok(Self { model, mdp })
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "criterion", rename_all = "lowercase")]
pub enum Solution {
    Average(SensitiveSolution),
    Discounted(DiscountSolution),
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub support_points: usize,
    pub gain_min: Option<f64>,
    pub gain_max: Option<f64>,
    /// `J̃*(x₀)` (average) or `J̃(x₀)` (discounted).
    pub start_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact<T: Serialize> {
    pub version: &'static str,
    pub config: RunConfig,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveBody {
    pub summary: SolveSummary,
    pub solution: Solution,
}

fn solve_pipeline(cfg: &RunConfig, p: &Pipeline) -> anyhow::Result<(Solution, SolveSummary)> {
    let x0 = p.model.initial_belief();
    match cfg.criterion {
        Criterion::Average => {
            let sol = solve_multichain(&p.mdp, cfg.order)?;
            let start = extend_average_solution(&p.model, &p.mdp, &sol, &x0)?.gain;
            let (lo, hi) = sol.gain_range();
            let summary = SolveSummary {
                support_points: p.mdp.len(),
                gain_min: Some(lo),
                gain_max: Some(hi),
                start_value: start,
            };
            Ok((Solution::Average(sol), summary))
        }
        Criterion::Discounted => {
            let alpha = cfg.alpha.expect("validated");
            let sol = value_iteration(&p.mdp, alpha, cfg.tol)?;
            let start = p.mdp.evaluate_extension(&p.model, &sol.values, &x0, alpha)?.value;
            let summary = SolveSummary {
                support_points: p.mdp.len(),
                gain_min: None,
                gain_max: None,
                start_value: start,
            };
            Ok((Solution::Discounted(sol), summary))
        }
    }
}

fn sign(cfg: &RunConfig) -> f64 {
    if cfg.as_rewards {
        -1.0
    } else {
        1.0
    }
}

fn emit<T: Serialize>(
    cfg: &RunConfig,
    body: T,
    csv_rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> anyhow::Result<()>,
    text: String,
) -> anyhow::Result<()> {
    let artifact = Artifact { version: VERSION, config: cfg.clone(), body };
    let rendered = match cfg.format {
        Format::Json => serde_json::to_string_pretty(&artifact)? + "\n",
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            csv_rows(&mut w)?;
            String::from_utf8(w.into_inner()?)?
        }
        Format::Text => text.clone(),
    };
    match &cfg.output {
        Some(path) => {
            std::fs::write(path, rendered).with_context(|| format!("writing {path}"))?;
            // The on-disk artifact always carries the configuration; echo a summary.
            if cfg.format != Format::Text {
                print!("{text}");
            }
        }
        None => print!("{rendered}"),
    }
    std::io::stdout().flush()?;
    Ok(())
}

pub fn cmd_solve(args: &RunArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::from_args(args)?;
    let p = Pipeline::load(&args.problem, cfg.scheme, &cfg.grid, cfg.seed)?;
    let (solution, summary) = solve_pipeline(&cfg, &p)?;
    let s = sign(&cfg);
    let text = match (&solution, summary.gain_min, summary.gain_max) {
        (Solution::Average(sol), Some(lo), Some(hi)) => format!(
            "gain over {} support beliefs: min {} max {}; at start belief {}; {} policy iterations, max residual {:e}\n",
            summary.support_points,
            s * lo,
            s * hi,
            s * summary.start_value,
            sol.iterations,
            sol.max_residual()
        ),
        _ => format!(
            "discounted value at start belief {} over {} support beliefs\n",
            s * summary.start_value,
            summary.support_points
        ),
    };
    let csv_solution = solution.clone();
    let mdp = &p.mdp;
    emit(
        &cfg,
        SolveBody { summary, solution },
        |w| {
            match &csv_solution {
                Solution::Average(sol) => {
                    w.write_record(["index", "belief", "gain", "bias", "action"])?;
                    for (c, x) in mdp.support().iter().enumerate() {
                        w.write_record([
                            c.to_string(),
                            format_belief(x),
                            format!("{:?}", sol.gain[c]),
                            format!("{:?}", sol.bias[c]),
                            sol.policy[c].to_string(),
                        ])?;
                    }
                }
                Solution::Discounted(sol) => {
                    w.write_record(["index", "belief", "value", "action"])?;
                    for (c, x) in mdp.support().iter().enumerate() {
                        w.write_record([
                            c.to_string(),
                            format_belief(x),
                            format!("{:?}", sol.values[c]),
                            sol.greedy_policy[c].to_string(),
                        ])?;
                    }
                }
            }
            Ok(())
        },
        text,
    )
}

fn format_belief(x: &Belief) -> String {
    x.iter().map(|p| format!("{p:?}")).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "criterion", rename_all = "lowercase")]
pub enum BoundBody {
    Average {
        lower_bound_at_start: f64,
        bound: BoundReport,
    },
    Discounted {
        value_at_start: f64,
        bound: DiscountErrorReport,
    },
}

pub fn cmd_bound(args: &RunArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::from_args(args)?;
    let p = Pipeline::load(&args.problem, cfg.scheme, &cfg.grid, cfg.seed)?;
    let (solution, summary) = solve_pipeline(&cfg, &p)?;
    let s = sign(&cfg);
    let body = match solution {
        Solution::Average(sol) => BoundBody::Average {
            lower_bound_at_start: summary.start_value,
            bound: estimate_theorem2_delta(&p.model, &p.mdp, &sol, cfg.samples, cfg.seed)?,
        },
        Solution::Discounted(sol) => BoundBody::Discounted {
            value_at_start: summary.start_value,
            bound: discounted_error_bounds(&p.model, &p.mdp, &sol, cfg.samples, cfg.seed)?,
        },
    };
    let text = match &body {
        BoundBody::Average { lower_bound_at_start, bound } => format!(
            "lower bound at start {}; sampled upper bound {} (delta {:e}, {}; {} samples + {} support beliefs, seed {})\n",
            s * lower_bound_at_start,
            s * bound.upper_bound,
            bound.delta_hat,
            bound.label,
            bound.samples,
            bound.support_points,
            bound.seed
        ),
        BoundBody::Discounted { value_at_start, bound } => format!(
            "value at start {}; sampled max Bellman residual {:e}, gap bound {:e} ({} beliefs, seed {})\n",
            s * value_at_start,
            bound.max_residual,
            bound.gap_bound,
            bound.beliefs_evaluated,
            bound.seed
        ),
    };
    let csv_body = body.clone();
    emit(
        &cfg,
        body,
        |w| {
            match &csv_body {
                BoundBody::Average { lower_bound_at_start, bound } => {
                    w.write_record(["lower_bound_at_start", "max_gain", "delta_hat", "upper_bound", "samples", "seed", "label"])?;
                    w.write_record([
                        format!("{lower_bound_at_start:?}"),
                        format!("{:?}", bound.max_gain),
                        format!("{:?}", bound.delta_hat),
                        format!("{:?}", bound.upper_bound),
                        bound.samples.to_string(),
                        bound.seed.to_string(),
                        bound.label.to_string(),
                    ])?;
                }
                BoundBody::Discounted { value_at_start, bound } => {
                    w.write_record(["value_at_start", "max_residual", "gap_bound", "beliefs", "seed"])?;
                    w.write_record([
                        format!("{value_at_start:?}"),
                        format!("{:?}", bound.max_residual),
                        format!("{:?}", bound.gap_bound),
                        bound.beliefs_evaluated.to_string(),
                        bound.seed.to_string(),
                    ])?;
                }
            }
            Ok(())
        },
        text,
    )
}

/// Simulates the policy selected by `kind` for the given solution.
pub fn simulate_solution(
    p: &Pipeline,
    solution: &Solution,
    kind: PolicyKind,
    x0: &Belief,
    trajectories: usize,
    horizon: usize,
    seed: u64,
    bootstrap: usize,
) -> anyhow::Result<SimulationReport> {
    let (model, mdp) = (&p.model, &p.mdp);
    let policy: Box<dyn BeliefPolicy + '_> = match (solution, kind) {
        (Solution::Average(sol), PolicyKind::Step2) => Box::new(AverageStepPolicy { model, mdp, sol }),
        (Solution::Average(sol), PolicyKind::Lookahead) => {
            Box::new(AverageLookaheadPolicy { model, mdp, sol })
        }
        (Solution::Discounted(sol), PolicyKind::Step2) => Box::new(DiscountGreedyPolicy { model, mdp, sol }),
        (Solution::Discounted(sol), PolicyKind::Lookahead) => {
            Box::new(DiscountLookaheadPolicy { model, mdp, sol })
        }
    };
    let report = simulate_trajectories(model, policy.as_ref(), x0, trajectories, horizon, seed)?;
    Ok(report.with_bootstrap(bootstrap)?)
}

pub fn cmd_simulate(args: &RunArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::from_args(args)?;
    let p = Pipeline::load(&args.problem, cfg.scheme, &cfg.grid, cfg.seed)?;
    let (solution, _) = solve_pipeline(&cfg, &p)?;
    let x0 = p.model.initial_belief();
    let report = simulate_solution(
        &p,
        &solution,
        cfg.policy,
        &x0,
        cfg.trajectories,
        cfg.horizon,
        cfg.seed,
        cfg.bootstrap,
    )?;
    let s = sign(&cfg);
    let text = format!(
        "{}: mean average cost {} ± {} over {} trajectories × {} steps (seed {})\n",
        report.policy,
        s * report.mean,
        report.standard_error.unwrap_or(0.0),
        report.trajectories,
        report.horizon,
        report.seed
    );
    let csv_report = report.clone();
    emit(
        &cfg,
        serde_json::json!({ "simulation": report }),
        |w| {
            w.write_record(["trajectory", "average_cost", "policy", "seed", "horizon"])?;
            for (i, a) in csv_report.averages.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    format!("{a:?}"),
                    csv_report.policy.clone(),
                    csv_report.seed.to_string(),
                    csv_report.horizon.to_string(),
                ])?;
            }
            Ok(())
        },
        text,
    )
}

#[derive(Debug, Clone, Args)]
pub struct Table2Args {
    /// Directory holding `paint.95.POMDP`, `bridge-repair.POMDP` and `shuttle.95.POMDP`.
    #[arg(long, default_value = "problems", env = "GRIDPOMDP_PROBLEMS_DIR")]
    pub problems_dir: PathBuf,
    #[arg(long, default_value_t = 1, env = "GRIDPOMDP_SEED")]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_ORDER, allow_negative_numbers = true, env = "GRIDPOMDP_ORDER")]
    pub order: i32,
    #[arg(long, default_value_t = 500, env = "GRIDPOMDP_SAMPLES")]
    pub samples: usize,
    #[arg(long, default_value_t = 500, env = "GRIDPOMDP_HORIZON")]
    pub horizon: usize,
    #[arg(long, default_value_t = 100, env = "GRIDPOMDP_BOOTSTRAP")]
    pub bootstrap: usize,
    #[arg(long, value_enum, default_value = "text", env = "GRIDPOMDP_FORMAT")]
    pub format: Format,
    #[arg(long, env = "GRIDPOMDP_OUTPUT")]
    pub output: Option<PathBuf>,
    #[arg(long, env = "GRIDPOMDP_AS_REWARDS")]
    pub as_rewards: bool,
}

/// One benchmark problem with its published values (costs).
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub name: &'static str,
    pub file: &'static str,
    /// Schemes and grids whose average gain is the lower bound.
    pub lower: &'static [(Scheme, &'static str)],
    pub lower_ref: f64,
    pub lower_tol: f64,
    pub upper_ref: f64,
    pub upper_tol: f64,
    pub sim_scheme: Scheme,
    pub sim_grid: &'static str,
    pub sim_policy: PolicyKind,
    pub sim_trajectories: usize,
    pub sim_ref: f64,
}

pub const BENCHMARKS: [BenchmarkRow; 3] = [
    BenchmarkRow {
        name: "Paint",
        file: "paint.95.POMDP",
        lower: &[(Scheme::D2, "3-E")],
        lower_ref: -0.170,
        lower_tol: 0.03,
        upper_ref: -0.052,
        upper_tol: 0.15,
        sim_scheme: Scheme::D1,
        sim_grid: "1-E",
        sim_policy: PolicyKind::Lookahead,
        sim_trajectories: 160,
        sim_ref: -0.172,
    },
    BenchmarkRow {
        name: "Bridge",
        file: "bridge-repair.POMDP",
        lower: &[(Scheme::D2, "0-E")],
        lower_ref: 241.798,
        lower_tol: 0.01,
        upper_ref: 241.880,
        upper_tol: 1.0,
        sim_scheme: Scheme::D2,
        sim_grid: "0-E",
        sim_policy: PolicyKind::Step2,
        sim_trajectories: 1000,
        sim_ref: 241.700,
    },
    BenchmarkRow {
        name: "Shuttle",
        file: "shuttle.95.POMDP",
        lower: &[(Scheme::D1, "2-E"), (Scheme::D2, "2-E")],
        lower_ref: -1.842,
        lower_tol: 0.03,
        upper_ref: -1.220,
        upper_tol: 0.7,
        sim_scheme: Scheme::D1,
        sim_grid: "2-E",
        sim_policy: PolicyKind::Step2,
        sim_trajectories: 160,
        sim_ref: -1.835,
    },
];

#[derive(Debug, Clone, Serialize)]
pub struct LowerEntry {
    pub scheme: Scheme,
    pub grid: String,
    pub gain_at_start: f64,
    pub gain_min: f64,
    pub gain_max: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkResult {
    pub reference: BenchmarkRow,
    pub lower: Vec<LowerEntry>,
    pub upper_bound: f64,
    pub upper_pass: bool,
    pub simulation_mean: f64,
    pub simulation_se: f64,
    pub simulation_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table2Entry {
    pub problem: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<BenchmarkResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn run_benchmark(row: &BenchmarkRow, args: &Table2Args) -> anyhow::Result<BenchmarkResult> {
    let path = args.problems_dir.join(row.file);
    if !path.is_file() {
        bail!("problem file {} not found", path.display());
    }
    let mut lower = Vec::new();
    let mut first: Option<(Pipeline, SensitiveSolution)> = None;
    for &(scheme, grid) in row.lower {
        let p = Pipeline::load(&path, scheme, grid, args.seed)?;
        let sol = solve_multichain(&p.mdp, args.order)?;
        let x0 = p.model.initial_belief();
        let at_start = extend_average_solution(&p.model, &p.mdp, &sol, &x0)?.gain;
        let (lo, hi) = sol.gain_range();
        lower.push(LowerEntry {
            scheme,
            grid: grid.to_string(),
            gain_at_start: at_start,
            gain_min: lo,
            gain_max: hi,
            pass: (at_start - row.lower_ref).abs() <= row.lower_tol,
        });
        if first.is_none() {
            first = Some((p, sol));
        }
    }
    let (p, sol) = first.expect("every row lists a lower-bound scheme");
    let bound = estimate_theorem2_delta(&p.model, &p.mdp, &sol, args.samples, args.seed)?;
    let lb = lower[0].gain_at_start;
    let upper_pass = lb <= bound.upper_bound && (bound.upper_bound - row.upper_ref).abs() <= row.upper_tol;

    let sp = Pipeline::load(&path, row.sim_scheme, row.sim_grid, args.seed)?;
    let ssol = solve_multichain(&sp.mdp, args.order)?;
    let x0 = sp.model.initial_belief();
    let report = simulate_solution(
        &sp,
        &Solution::Average(ssol),
        row.sim_policy,
        &x0,
        row.sim_trajectories,
        args.horizon,
        args.seed,
        args.bootstrap,
    )?;
    let se = report.standard_error.unwrap_or(0.0);
    Ok(BenchmarkResult {
        reference: row.clone(),
        lower,
        upper_bound: bound.upper_bound,
        upper_pass,
        simulation_mean: report.mean,
        simulation_se: se,
        simulation_pass: (report.mean - row.sim_ref).abs() <= 3.0 * se,
    })
}

pub fn cmd_table2(args: &Table2Args) -> anyhow::Result<()> {
    if !(-1..=MAX_ORDER).contains(&args.order) {
        bail!("--order must lie in [-1, {MAX_ORDER}]");
    }
    let entries: Vec<Table2Entry> = BENCHMARKS
        .iter()
        .map(|row| match run_benchmark(row, args) {
            Ok(r) => Table2Entry { problem: row.name, result: Some(r), error: None },
            Err(e) => Table2Entry { problem: row.name, result: None, error: Some(format!("{e:#}")) },
        })
        .collect();
    let s = if args.as_rewards { -1.0 } else { 1.0 };
    let mut text = String::from("problem   LB (scheme grid)                 N.UB        S.Policy\n");
    for e in &entries {
        match (&e.result, &e.error) {
            (Some(r), _) => {
                let lbs: Vec<String> = r
                    .lower
                    .iter()
                    .map(|l| {
                        format!("{:.3} ({} {}) [{}]", s * l.gain_at_start, l.scheme, l.grid, flag(l.pass))
                    })
                    .collect();
                text += &format!(
                    "{:<9} {:<32} {:.3} [{}] {:.3} ± {:.3} [{}]\n",
                    e.problem,
                    lbs.join(", "),
                    s * r.upper_bound,
                    flag(r.upper_pass),
                    s * r.simulation_mean,
                    r.simulation_se,
                    flag(r.simulation_pass)
                );
            }
            (None, Some(err)) => text += &format!("{:<9} error: {err}\n", e.problem),
            (None, None) => unreachable!(),
        }
    }
    let failed = entries.iter().any(|e| e.error.is_some());
    let body = serde_json::json!({
        "version": VERSION,
        "config": {
            "problems_dir": args.problems_dir.display().to_string(),
            "seed": args.seed,
            "order": args.order,
            "samples": args.samples,
            "horizon": args.horizon,
            "bootstrap": args.bootstrap,
            "format": args.format,
        },
        "rows": entries,
    });
    let rendered = match args.format {
        Format::Json => serde_json::to_string_pretty(&body)? + "\n",
        Format::Text => text.clone(),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["problem", "scheme", "grid", "lower_bound", "upper_bound", "sim_mean", "sim_se", "error"])?;
            for e in &entries {
                match &e.result {
                    Some(r) => {
                        for l in &r.lower {
                            w.write_record([
                                e.problem.to_string(),
                                l.scheme.to_string(),
                                l.grid.clone(),
                                format!("{:?}", l.gain_at_start),
                                format!("{:?}", r.upper_bound),
                                format!("{:?}", r.simulation_mean),
                                format!("{:?}", r.simulation_se),
                                String::new(),
                            ])?;
                        }
                    }
                    None => w.write_record([
                        e.problem,
                        "",
                        "",
                        "",
                        "",
                        "",
                        "",
                        e.error.as_deref().unwrap_or(""),
                    ])?,
                }
            }
            String::from_utf8(w.into_inner()?)?
        }
    };
    match &args.output {
        Some(path) => {
            std::fs::write(path, rendered).with_context(|| format!("writing {}", path.display()))?;
            print!("{text}");
        }
        None => print!("{rendered}"),
    }
    if failed {
        bail!("one or more benchmark rows failed");
    }
    Ok(())
}

fn flag(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Table2(a) => cmd_table2(a),
    }
}
