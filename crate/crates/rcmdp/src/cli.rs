//! Command-line front end: map generation, solving, assignment, full
//! deployment planning, simulation, and experiment sweeps.
//!
//! Every run writes its artifacts into an output directory (`--out`, or the
//! `RCMDP_OUT_DIR` environment variable, or `./rcmdp-out`) together with a
//! `manifest.json` capturing the full configuration, seeds, tool version,
//! and numerical tolerances; rerunning with the same inputs reproduces all
//! artifacts byte for byte.
//!
//! Exit codes: 0 success, 2 infeasible model or deadline, 3 validation
//! failure (bad flags, files, or failed `--check`), 4 numerical failure.

use crate::assignment::{
    brute_force_ta, preprocess_pf, solve_ta_approx, solve_ta_exact, TaError, TaSolution,
    RTA_RESIDUAL_TOL,
};
use crate::deployment::{
    build_single_robot_rcmdp, expected_uniform_success, generate_map, success_probability,
    DeploymentMap, MapGenConfig, SingleRobotModel,
};
use crate::lp::{FEAS_TOL, OPT_TOL};
use crate::rng::{substream, CounterRng};
use crate::robust::{solve_rcmdp, RcmdpError, RobustSolution, UncertaintySet, CERT_TOL};
use crate::simulator::{
    run_single, run_team, run_team_uniform, write_trials_csv, EpsMode, SimError, SimStats,
    TeamRobot,
};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RCMDP_OUT_DIR";

const SWEEP_SCHEMA: &str = "sweep-v1";
const SWEEP_HEADER: &str = "schema,axis,point,mode,target,deadline,gamma_factor,gamma_abs,team,\
theoretical_success,empirical_success,mean_duration,std_duration,\
mean_duration_given_success,std_duration_given_success,convergence_error,kl_divergence,status";

#[derive(Parser, Debug)]
#[command(
    name = "rcmdp",
    version,
    about = "Robust constrained MDP toolkit for rapid multi-robot deployment"
)]
struct Cli {
    /// Output directory for artifacts (overrides RCMDP_OUT_DIR).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random deployment map file.
    GenerateMap(GenerateMapArgs),
    /// Solve the single-robot robust problem for one target.
    Solve(SolveArgs),
    /// Assign a team to targets given per-target failure probabilities.
    Assign(AssignArgs),
    /// Full pipeline: solve every target, assign the team, evaluate.
    Deploy(DeployArgs),
    /// Solve one target and roll out the policy with a seeded simulator.
    Simulate(SimulateArgs),
    /// Sweep deadline, uncertainty budget, or team size; emit a CSV table.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenerateMapArgs {
    /// Number of vertices (start vertex is id 0).
    #[arg(long, default_value_t = 12)]
    vertices: usize,
    /// Chords added on top of the random spanning tree.
    #[arg(long, default_value_t = 6)]
    extra_edges: usize,
    /// Number of target vertices.
    #[arg(long, default_value_t = 3)]
    targets: usize,
    /// Range "lo,hi" for edge minimum traversal times.
    #[arg(long, default_value = "5,15")]
    t_min_range: String,
    /// Range "lo,hi" for the width t_max - t_min.
    #[arg(long, default_value = "4,12")]
    gap_range: String,
    /// Speed levels per average edge (sets the discretization step).
    #[arg(long, default_value_t = 8)]
    speed_levels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct SolveArgs {
    #[arg(long)]
    map: PathBuf,
    /// Target vertex id (defaults to the map's first target).
    #[arg(long)]
    target: Option<usize>,
    /// Duration budget D.
    #[arg(long)]
    deadline: f64,
    /// Absolute uncertainty budget.
    #[arg(long, conflicts_with = "gamma_factor")]
    gamma: Option<f64>,
    /// Uncertainty budget as a factor in [0, 1] of the total bound.
    #[arg(long)]
    gamma_factor: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct AssignArgs {
    /// Per-target failure probabilities, comma separated, e.g. "0.3,0.5".
    #[arg(long)]
    pf: String,
    /// Team size, at least the number of targets.
    #[arg(long)]
    team: usize,
    /// auto picks branch-and-bound below 2 robots per target, the
    /// relaxation-and-round algorithm at or above it.
    #[arg(long, value_enum, default_value_t = AssignSolver::Auto)]
    assign_mode: AssignSolver,
}

#[derive(Args, Debug, Serialize)]
struct DeployArgs {
    #[arg(long)]
    map: PathBuf,
    /// Team size, at least the number of targets.
    #[arg(long)]
    team: usize,
    #[arg(long)]
    deadline: f64,
    #[arg(long, conflicts_with = "gamma_factor")]
    gamma: Option<f64>,
    #[arg(long)]
    gamma_factor: Option<f64>,
    /// optimal assigns by solving the allocation problem; uniform draws
    /// each robot's target independently at random.
    #[arg(long, value_enum, default_value_t = AssignMode::Optimal)]
    assign_mode: AssignMode,
    /// Monte Carlo trials for the empirical team evaluation (0 skips it).
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = EpsFlag::Nominal)]
    eps_mode: EpsFlag,
    /// Assignment draws averaged for the uniform-mode report.
    #[arg(long, default_value_t = 32)]
    uniform_draws: usize,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    target: Option<usize>,
    #[arg(long)]
    deadline: f64,
    #[arg(long, conflicts_with = "gamma_factor")]
    gamma: Option<f64>,
    #[arg(long)]
    gamma_factor: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = EpsFlag::Nominal)]
    eps_mode: EpsFlag,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, value_enum)]
    axis: SweepAxis,
    /// Grid points, comma separated. Deadlines or gamma factors as reals,
    /// team sizes as integers.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    target: Option<usize>,
    /// Fixed deadline for gamma and team sweeps.
    #[arg(long)]
    deadline: Option<f64>,
    #[arg(long, conflicts_with = "gamma_factor")]
    gamma: Option<f64>,
    /// Fixed gamma factor for deadline and team sweeps.
    #[arg(long)]
    gamma_factor: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = EpsFlag::Nominal)]
    eps_mode: EpsFlag,
    /// Verify the expected monotonicity patterns and fail (exit 3) if they
    /// do not hold.
    #[arg(long, default_value_t = false)]
    check: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AssignSolver {
    Auto,
    Exact,
    Approx,
    Brute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AssignMode {
    Optimal,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EpsFlag {
    /// Zero perturbation: nominal step times.
    Nominal,
    /// The adversarial realization certified by the solver.
    WorstCase,
    /// Uniform draws from the budgeted uncertainty set.
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SweepAxis {
    Deadline,
    Gamma,
    Team,
}

#[derive(Debug)]
enum FailureKind {
    Infeasible,
    Validation,
    Numerical,
}

#[derive(Debug)]
struct CliError {
    kind: FailureKind,
    message: String,
}

impl CliError {
    fn validation(msg: impl Into<String>) -> Self {
        CliError { kind: FailureKind::Validation, message: msg.into() }
    }
    fn infeasible(msg: impl Into<String>) -> Self {
        CliError { kind: FailureKind::Infeasible, message: msg.into() }
    }
    fn numerical(msg: impl Into<String>) -> Self {
        CliError { kind: FailureKind::Numerical, message: msg.into() }
    }
    fn code(&self) -> i32 {
        match self.kind {
            FailureKind::Infeasible => 2,
            FailureKind::Validation => 3,
            FailureKind::Numerical => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::validation(format!("i/o: {e}"))
    }
}

impl From<RcmdpError> for CliError {
    fn from(e: RcmdpError) -> Self {
        match &e {
            RcmdpError::Infeasible { .. } => CliError::infeasible(e.to_string()),
            RcmdpError::Lp(inner) => match inner {
                crate::lp::LpError::Numerical(_) => CliError::numerical(e.to_string()),
                crate::lp::LpError::Shape(_) => CliError::validation(e.to_string()),
            },
            RcmdpError::Certification(_) => CliError::numerical(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<TaError> for CliError {
    fn from(e: TaError) -> Self {
        match &e {
            TaError::CertainFailure { .. }
            | TaError::TeamTooSmall { .. }
            | TaError::ApproxNeedsTwoPerTarget { .. } => CliError::infeasible(e.to_string()),
            TaError::Bracket(_) => CliError::numerical(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match &e {
            SimError::RejectionCap(_) | SimError::StepLimit => CliError::numerical(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

/// Numerical tolerances recorded in every manifest.
#[derive(Serialize)]
struct Tolerances {
    lp_feasibility: f64,
    lp_optimality: f64,
    robust_certification: f64,
    rta_residual: f64,
}

impl Tolerances {
    fn current() -> Self {
        Tolerances {
            lp_feasibility: FEAS_TOL,
            lp_optimality: OPT_TOL,
            robust_certification: CERT_TOL,
            rta_residual: RTA_RESIDUAL_TOL,
        }
    }
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: serde_json::Value,
    tolerances: Tolerances,
    outputs: Vec<String>,
}

fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &'static str,
    config: &C,
    outputs: &[&str],
) -> Result<(), CliError> {
    let manifest = Manifest {
        tool: "rcmdp",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: serde_json::to_value(config).expect("config serializes"),
        tolerances: Tolerances::current(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn out_dir(cli_out: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = cli_out.clone().unwrap_or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("rcmdp-out"))
    });
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_map(path: &Path) -> Result<DeploymentMap, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let map: DeploymentMap = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("bad map file {}: {e}", path.display())))?;
    map.validate().map_err(|e| CliError::validation(format!("invalid map: {e}")))?;
    Ok(map)
}

fn parse_range(text: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::validation(format!("range must be \"lo,hi\", got {text:?}")));
    }
    let lo = parts[0].trim().parse::<f64>().map_err(|e| CliError::validation(e.to_string()))?;
    let hi = parts[1].trim().parse::<f64>().map_err(|e| CliError::validation(e.to_string()))?;
    Ok((lo, hi))
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| CliError::validation(format!("bad grid: {e}")))?;
    if vals.is_empty() {
        return Err(CliError::validation("grid must be nonempty"));
    }
    Ok(vals)
}

fn resolve_target(map: &DeploymentMap, flag: Option<usize>) -> Result<usize, CliError> {
    match flag {
        Some(t) if map.targets.contains(&t) => Ok(t),
        Some(t) => Err(CliError::validation(format!("{t} is not a target of this map"))),
        None => Ok(map.targets[0]),
    }
}

fn uncertainty_for(
    built: &SingleRobotModel,
    gamma: Option<f64>,
    gamma_factor: Option<f64>,
) -> Result<UncertaintySet, CliError> {
    let result = match (gamma, gamma_factor) {
        (Some(g), None) => built.uncertainty_with_budget(g),
        (None, f) => built.uncertainty_with_factor(f.unwrap_or(0.0)),
        (Some(_), Some(_)) => {
            return Err(CliError::validation("--gamma conflicts with --gamma-factor"))
        }
    };
    result.map_err(|e| CliError::validation(e.to_string()))
}

/// Solves one target of a map under the given budget flags.
fn solve_target(
    map: &DeploymentMap,
    target: usize,
    deadline: f64,
    gamma: Option<f64>,
    gamma_factor: Option<f64>,
) -> Result<(SingleRobotModel, UncertaintySet, RobustSolution), CliError> {
    let built = build_single_robot_rcmdp(map, target)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let u = uncertainty_for(&built, gamma, gamma_factor)?;
    let sol = solve_rcmdp(&built.model, &u, deadline)?;
    Ok((built, u, sol))
}

fn eps_mode_for(
    flag: EpsFlag,
    u: &UncertaintySet,
    sol: &RobustSolution,
) -> EpsMode {
    match flag {
        EpsFlag::Nominal => EpsMode::Nominal,
        EpsFlag::WorstCase => EpsMode::worst_case(u, &sol.rho),
        EpsFlag::Uniform => EpsMode::UniformInU(u.clone()),
    }
}

fn cmd_generate_map(dir: &Path, args: &GenerateMapArgs) -> Result<(), CliError> {
    let cfg = MapGenConfig {
        vertices: args.vertices,
        extra_edges: args.extra_edges,
        targets: args.targets,
        t_min_range: parse_range(&args.t_min_range)?,
        gap_range: parse_range(&args.gap_range)?,
        speed_levels: args.speed_levels,
        seed: args.seed,
    };
    let map = generate_map(&cfg).map_err(|e| CliError::validation(e.to_string()))?;
    write_json(&dir.join("map.json"), &map)?;
    write_manifest(dir, "generate-map", args, &["map.json"])?;
    println!(
        "map: {} vertices, {} edges, targets {:?}, delta {}",
        map.vertices.len(),
        map.edges.len(),
        map.targets,
        map.delta
    );
    println!("wrote {}", dir.join("map.json").display());
    Ok(())
}

fn cmd_solve(dir: &Path, args: &SolveArgs) -> Result<(), CliError> {
    let map = load_map(&args.map)?;
    let target = resolve_target(&map, args.target)?;
    let (_built, u, sol) = solve_target(&map, target, args.deadline, args.gamma, args.gamma_factor)?;
    write_json(&dir.join("solution.json"), &sol)?;
    write_manifest(dir, "solve", args, &["solution.json"])?;
    println!("target {target}: failure probability {}", sol.objective);
    println!(
        "worst-case duration {} <= deadline {} (gamma {})",
        sol.worst_case_constraint_value, args.deadline, u.gamma()
    );
    println!(
        "lp: {} variables, {} rows, {} pivots, engine {}",
        sol.solver.lp_vars, sol.solver.lp_rows, sol.solver.pivots, sol.solver.engine
    );
    println!("wrote {}", dir.join("solution.json").display());
    Ok(())
}

#[derive(Serialize)]
struct AssignReport {
    pf: Vec<f64>,
    team: usize,
    solver: &'static str,
    extras: Vec<usize>,
    counts: Vec<usize>,
    objective: f64,
}

fn cmd_assign(dir: &Path, args: &AssignArgs) -> Result<(), CliError> {
    let pf = parse_grid(&args.pf)?;
    let pre = preprocess_pf(&pf, args.team)?;
    let (sol, solver): (TaSolution, &'static str) = match &pre.instance {
        None => (pre.expand(None), "trivial"),
        Some(inst) => {
            let (reduced, solver) = match args.assign_mode {
                AssignSolver::Exact => (solve_ta_exact(inst), "exact"),
                AssignSolver::Approx => (solve_ta_approx(inst)?, "approx"),
                AssignSolver::Brute => (brute_force_ta(inst)?, "brute"),
                AssignSolver::Auto => {
                    if inst.team() >= 2 * inst.num_targets() {
                        (solve_ta_approx(inst)?, "approx")
                    } else {
                        (solve_ta_exact(inst), "exact")
                    }
                }
            };
            (pre.expand(Some(&reduced)), solver)
        }
    };
    let report = AssignReport {
        pf,
        team: args.team,
        solver,
        extras: sol.extras.clone(),
        counts: sol.counts(),
        objective: sol.objective,
    };
    write_json(&dir.join("assignment.json"), &report)?;
    write_manifest(dir, "assign", args, &["assignment.json"])?;
    println!("solver {solver}: robots per target {:?}", report.counts);
    println!("team success probability {}", report.objective);
    println!("wrote {}", dir.join("assignment.json").display());
    Ok(())
}

#[derive(Serialize)]
struct DeployTargetReport {
    target: usize,
    failure_probability: f64,
    worst_case_duration: f64,
    solution_file: String,
}

#[derive(Serialize)]
struct DeployReport {
    targets: Vec<DeployTargetReport>,
    team: usize,
    assign_mode: AssignMode,
    /// Robots per target (optimal mode only).
    counts: Option<Vec<usize>>,
    assignment_solver: Option<&'static str>,
    /// Success probability of the planned assignment (optimal mode) or the
    /// exact expectation over uniform random assignments (uniform mode).
    theoretical_success: f64,
    /// Mean success probability over the manifest's seeded assignment
    /// draws (uniform mode only).
    uniform_draw_average: Option<f64>,
    simulation: Option<SimStats>,
}

fn cmd_deploy(dir: &Path, args: &DeployArgs) -> Result<(), CliError> {
    let map = load_map(&args.map)?;
    let targets = map.targets.clone();
    if args.team < targets.len() {
        return Err(CliError::infeasible(format!(
            "team of {} cannot cover {} targets",
            args.team,
            targets.len()
        )));
    }

    // One robust solve per target; order fixed by the map's target list.
    let solved: Result<Vec<_>, CliError> = targets
        .par_iter()
        .map(|&t| solve_target(&map, t, args.deadline, args.gamma, args.gamma_factor))
        .collect();
    let solved = solved?;

    let mut target_reports = Vec::new();
    let mut outputs: Vec<String> = Vec::new();
    for (&t, (_, _, sol)) in targets.iter().zip(&solved) {
        let name = format!("solution_target_{t}.json");
        write_json(&dir.join(&name), sol)?;
        target_reports.push(DeployTargetReport {
            target: t,
            failure_probability: sol.objective,
            worst_case_duration: sol.worst_case_constraint_value,
            solution_file: name.clone(),
        });
        outputs.push(name);
    }
    let pf: Vec<f64> = solved.iter().map(|(_, _, sol)| sol.objective).collect();

    // Certain-failure targets abort deployment before any assignment.
    let pre = preprocess_pf(&pf, args.team)?;

    let policies: Vec<_> = solved.iter().map(|(_, _, sol)| sol.policy.clone()).collect();
    let robots_per_target: Vec<TeamRobot<'_>> = solved
        .iter()
        .zip(&policies)
        .zip(&targets)
        .map(|(((built, _, _), policy), &t)| TeamRobot {
            model: &built.model,
            policy,
            sink_state: built.sink_state,
            target: t,
        })
        .collect();
    let eps_per_target: Vec<EpsMode> = solved
        .iter()
        .map(|(_, u, sol)| eps_mode_for(args.eps_mode, u, sol))
        .collect();

    let (counts, assignment_solver, theoretical_success, uniform_draw_average, simulation) =
        match args.assign_mode {
            AssignMode::Optimal => {
                let (sol, solver) = match &pre.instance {
                    None => (pre.expand(None), "trivial"),
                    Some(inst) => {
                        // Method split: relaxation-and-round needs two robots
                        // per target; branch and bound covers the small-team
                        // regime.
                        if inst.team() >= 2 * inst.num_targets() {
                            (pre.expand(Some(&solve_ta_approx(inst)?)), "approx")
                        } else {
                            (pre.expand(Some(&solve_ta_exact(inst))), "exact")
                        }
                    }
                };
                let counts = sol.counts();
                let sim = if args.trials > 0 {
                    let mut team: Vec<TeamRobot<'_>> = Vec::new();
                    let mut eps: Vec<EpsMode> = Vec::new();
                    for (j, &c) in counts.iter().enumerate() {
                        for _ in 0..c {
                            team.push(robots_per_target[j]);
                            eps.push(eps_per_target[j].clone());
                        }
                    }
                    let run = run_team(&team, &eps, args.seed, args.trials, Some(sol.objective))?;
                    Some(run.stats)
                } else {
                    None
                };
                (Some(counts), Some(solver), sol.objective, None, sim)
            }
            AssignMode::Uniform => {
                let exact = expected_uniform_success(&pf, args.team);
                // Seeded draw average, reported alongside the exact value.
                let mut acc = 0.0;
                for p in 0..args.uniform_draws {
                    let mut rng = CounterRng::new(substream(args.seed, p as u64));
                    let mut counts = vec![0usize; targets.len()];
                    for _ in 0..args.team {
                        counts[rng.next_usize(targets.len())] += 1;
                    }
                    acc += success_probability(&pf, &counts);
                }
                let draw_avg = acc / args.uniform_draws.max(1) as f64;
                let sim = if args.trials > 0 {
                    let run = run_team_uniform(
                        &robots_per_target,
                        &eps_per_target,
                        args.team,
                        args.seed,
                        args.trials,
                        Some(exact),
                    )?;
                    Some(run.stats)
                } else {
                    None
                };
                (None, None, exact, Some(draw_avg), sim)
            }
        };

    let report = DeployReport {
        targets: target_reports,
        team: args.team,
        assign_mode: args.assign_mode,
        counts,
        assignment_solver,
        theoretical_success,
        uniform_draw_average,
        simulation,
    };
    write_json(&dir.join("deployment.json"), &report)?;
    outputs.push("deployment.json".into());
    let output_refs: Vec<&str> = outputs.iter().map(|s| s.as_str()).collect();
    write_manifest(dir, "deploy", args, &output_refs)?;

    println!("per-target failure probabilities: {pf:?}");
    if let Some(c) = &report.counts {
        println!("robots per target: {c:?}");
    }
    println!("theoretical team success: {}", report.theoretical_success);
    if let Some(avg) = report.uniform_draw_average {
        println!("uniform assignment draw average ({}x): {avg}", args.uniform_draws);
    }
    if let Some(stats) = &report.simulation {
        println!("empirical team success: {}", stats.empirical_success_prob);
    }
    println!("wrote {}", dir.join("deployment.json").display());
    Ok(())
}

fn cmd_simulate(dir: &Path, args: &SimulateArgs) -> Result<(), CliError> {
    let map = load_map(&args.map)?;
    let target = resolve_target(&map, args.target)?;
    let (built, u, sol) = solve_target(&map, target, args.deadline, args.gamma, args.gamma_factor)?;
    let eps = eps_mode_for(args.eps_mode, &u, &sol);
    let run = run_single(
        &built.model,
        &sol.policy,
        built.sink_pair,
        &eps,
        args.seed,
        args.trials,
        Some(1.0 - sol.objective),
    )?;

    write_json(&dir.join("solution.json"), &sol)?;
    write_json(&dir.join("stats.json"), &run.stats)?;
    fs::write(dir.join("stats.txt"), run.stats.to_string())?;
    let mut csv = Vec::new();
    write_trials_csv(&mut csv, &run.trials).map_err(CliError::from)?;
    fs::write(dir.join("trials.csv"), csv)?;
    write_manifest(
        dir,
        "simulate",
        args,
        &["solution.json", "stats.json", "stats.txt", "trials.csv"],
    )?;
    print!("{}", run.stats);
    println!("wrote {}", dir.join("trials.csv").display());
    Ok(())
}

struct SweepRow {
    point: f64,
    mode: &'static str,
    target: Option<usize>,
    deadline: Option<f64>,
    gamma_factor: Option<f64>,
    gamma_abs: Option<f64>,
    team: Option<usize>,
    theory: Option<f64>,
    stats: Option<SimStats>,
    status: String,
}

impl SweepRow {
    fn failed(point: f64, mode: &'static str, err: &CliError) -> SweepRow {
        SweepRow {
            point,
            mode,
            target: None,
            deadline: None,
            gamma_factor: None,
            gamma_abs: None,
            team: None,
            theory: None,
            stats: None,
            status: err.message.replace([',', '\n'], ";"),
        }
    }

    fn to_csv(&self, axis: &str) -> String {
        let opt_u = |v: &Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_f = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let s = self.stats.as_ref();
        let mut line = String::new();
        let _ = write!(
            line,
            "{},{},{},{},{},{},{},{},{}",
            SWEEP_SCHEMA,
            axis,
            self.point,
            self.mode,
            opt_u(&self.target),
            opt_f(&self.deadline),
            opt_f(&self.gamma_factor),
            opt_f(&self.gamma_abs),
            opt_u(&self.team),
        );
        let _ = write!(
            line,
            ",{},{},{},{},{},{},{},{},{}",
            opt_f(&self.theory),
            opt_f(&s.map(|x| x.empirical_success_prob)),
            opt_f(&s.map(|x| x.mean_duration)),
            opt_f(&s.map(|x| x.std_duration)),
            opt_f(&s.and_then(|x| x.mean_duration_given_success)),
            opt_f(&s.and_then(|x| x.std_duration_given_success)),
            opt_f(&s.and_then(|x| x.convergence_error)),
            opt_f(&s.and_then(|x| x.kl_divergence)),
            self.status,
        );
        line
    }
}

/// Standard error of an empirical proportion.
fn binom_se(p: f64, n: usize) -> f64 {
    (p.clamp(0.0, 1.0) * (1.0 - p.clamp(0.0, 1.0)) / n.max(1) as f64).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn single_point_row(
    map: &DeploymentMap,
    target: usize,
    deadline: f64,
    gamma: Option<f64>,
    gamma_factor: Option<f64>,
    eps_flag: EpsFlag,
    seed: u64,
    trials: usize,
    point: f64,
) -> Result<SweepRow, CliError> {
    let (built, u, sol) = solve_target(map, target, deadline, gamma, gamma_factor)?;
    let theory = 1.0 - sol.objective;
    let stats = if trials > 0 {
        let eps = eps_mode_for(eps_flag, &u, &sol);
        let run =
            run_single(&built.model, &sol.policy, built.sink_pair, &eps, seed, trials, Some(theory))?;
        Some(run.stats)
    } else {
        None
    };
    Ok(SweepRow {
        point,
        mode: "single",
        target: Some(target),
        deadline: Some(deadline),
        gamma_factor,
        gamma_abs: Some(u.gamma()),
        team: None,
        theory: Some(theory),
        stats,
        status: "ok".into(),
    })
}

fn cmd_sweep(dir: &Path, args: &SweepArgs) -> Result<(), CliError> {
    let map = load_map(&args.map)?;
    let grid = parse_grid(&args.grid)?;
    let mut rows: Vec<SweepRow> = Vec::new();

    match args.axis {
        SweepAxis::Deadline => {
            let target = resolve_target(&map, args.target)?;
            for (p, &d) in grid.iter().enumerate() {
                let seed = substream(args.seed, p as u64);
                let row = single_point_row(
                    &map,
                    target,
                    d,
                    args.gamma,
                    args.gamma_factor,
                    args.eps_mode,
                    seed,
                    args.trials,
                    d,
                )
                .unwrap_or_else(|e| SweepRow::failed(d, "single", &e));
                rows.push(row);
            }
        }
        SweepAxis::Gamma => {
            let target = resolve_target(&map, args.target)?;
            let deadline = args
                .deadline
                .ok_or_else(|| CliError::validation("--deadline required for a gamma sweep"))?;
            for (p, &g) in grid.iter().enumerate() {
                let seed = substream(args.seed, p as u64);
                let row = single_point_row(
                    &map,
                    target,
                    deadline,
                    None,
                    Some(g),
                    args.eps_mode,
                    seed,
                    args.trials,
                    g,
                )
                .unwrap_or_else(|e| SweepRow::failed(g, "single", &e));
                rows.push(row);
            }
        }
        SweepAxis::Team => {
            let deadline = args
                .deadline
                .ok_or_else(|| CliError::validation("--deadline required for a team sweep"))?;
            // Per-target solves are team-independent: solve once.
            let solved: Result<Vec<_>, CliError> = map
                .targets
                .par_iter()
                .map(|&t| solve_target(&map, t, deadline, args.gamma, args.gamma_factor))
                .collect();
            let solved = solved?;
            let pf: Vec<f64> = solved.iter().map(|(_, _, s)| s.objective).collect();
            let policies: Vec<_> = solved.iter().map(|(_, _, s)| s.policy.clone()).collect();
            let robots: Vec<TeamRobot<'_>> = solved
                .iter()
                .zip(&policies)
                .zip(&map.targets)
                .map(|(((built, _, _), policy), &t)| TeamRobot {
                    model: &built.model,
                    policy,
                    sink_state: built.sink_state,
                    target: t,
                })
                .collect();
            let eps: Vec<EpsMode> = solved
                .iter()
                .map(|(_, u, s)| eps_mode_for(args.eps_mode, u, s))
                .collect();

            for (p, &kf) in grid.iter().enumerate() {
                let k = kf as usize;
                if (kf - k as f64).abs() > 1e-9 {
                    let err = CliError::validation(format!("team size {kf} is not an integer"));
                    rows.push(SweepRow::failed(kf, "optimal", &err));
                    continue;
                }
                let seed = substream(args.seed, p as u64);
                rows.push(
                    team_point_row(&pf, &robots, &eps, k, seed, args, true, kf)
                        .unwrap_or_else(|e| SweepRow::failed(kf, "optimal", &e)),
                );
                rows.push(
                    team_point_row(&pf, &robots, &eps, k, seed, args, false, kf)
                        .unwrap_or_else(|e| SweepRow::failed(kf, "uniform", &e)),
                );
            }
        }
    }

    let axis = match args.axis {
        SweepAxis::Deadline => "deadline",
        SweepAxis::Gamma => "gamma",
        SweepAxis::Team => "team",
    };
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.to_csv(axis));
        csv.push('\n');
    }
    fs::write(dir.join("sweep.csv"), &csv)?;
    write_manifest(dir, "sweep", args, &["sweep.csv"])?;
    println!("{} rows -> {}", rows.len(), dir.join("sweep.csv").display());

    if args.check {
        check_sweep(args.axis, &rows).map_err(CliError::validation)?;
        println!("check: expected pattern holds");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn team_point_row(
    pf: &[f64],
    robots: &[TeamRobot<'_>],
    eps: &[EpsMode],
    k: usize,
    seed: u64,
    args: &SweepArgs,
    optimal: bool,
    point: f64,
) -> Result<SweepRow, CliError> {
    let (theory, stats) = if optimal {
        let pre = preprocess_pf(pf, k)?;
        let sol = match &pre.instance {
            None => pre.expand(None),
            Some(inst) => {
                if inst.team() >= 2 * inst.num_targets() {
                    pre.expand(Some(&solve_ta_approx(inst)?))
                } else {
                    pre.expand(Some(&solve_ta_exact(inst)))
                }
            }
        };
        let stats = if args.trials > 0 {
            let mut team = Vec::new();
            let mut team_eps = Vec::new();
            for (j, &kj) in sol.extras.iter().enumerate() {
                for _ in 0..=kj {
                    team.push(robots[j]);
                    team_eps.push(eps[j].clone());
                }
            }
            Some(run_team(&team, &team_eps, seed, args.trials, Some(sol.objective))?.stats)
        } else {
            None
        };
        (sol.objective, stats)
    } else {
        let exact = expected_uniform_success(pf, k);
        let stats = if args.trials > 0 {
            Some(run_team_uniform(robots, eps, k, seed, args.trials, Some(exact))?.stats)
        } else {
            None
        };
        (exact, stats)
    };
    Ok(SweepRow {
        point,
        mode: if optimal { "optimal" } else { "uniform" },
        target: None,
        deadline: args.deadline,
        gamma_factor: args.gamma_factor,
        gamma_abs: args.gamma,
        team: Some(k),
        theory: Some(theory),
        stats,
        status: "ok".into(),
    })
}

/// Monotonicity checks behind `--check`. Theoretical columns must follow
/// the exact pattern; empirical columns get a 95% CI allowance.
fn check_sweep(axis: SweepAxis, rows: &[SweepRow]) -> Result<(), String> {
    let ok_rows = |mode: &str| -> Vec<&SweepRow> {
        rows.iter().filter(|r| r.status == "ok" && r.mode == mode).collect()
    };
    let emp = |r: &SweepRow| r.stats.as_ref().map(|s| (s.empirical_success_prob, s.n_trials));
    let pair_check = |rs: &[&SweepRow], increasing: bool| -> Result<(), String> {
        for w in rs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ta, tb) = (a.theory.unwrap_or(f64::NAN), b.theory.unwrap_or(f64::NAN));
            let theory_ok = if increasing { tb >= ta - 1e-12 } else { tb <= ta + 1e-12 };
            if !theory_ok {
                return Err(format!(
                    "theoretical success not {} at point {} -> {} ({} -> {})",
                    if increasing { "nondecreasing" } else { "nonincreasing" },
                    a.point,
                    b.point,
                    ta,
                    tb
                ));
            }
            if let (Some((ea, na)), Some((eb, nb))) = (emp(a), emp(b)) {
                let slack = 1.96 * (binom_se(ea, na) + binom_se(eb, nb));
                let emp_ok = if increasing { eb >= ea - slack } else { eb <= ea + slack };
                if !emp_ok {
                    return Err(format!(
                        "empirical success not {} at point {} -> {} ({} -> {})",
                        if increasing { "nondecreasing" } else { "nonincreasing" },
                        a.point,
                        b.point,
                        ea,
                        eb
                    ));
                }
            }
        }
        Ok(())
    };
    match axis {
        SweepAxis::Deadline => pair_check(&ok_rows("single"), true),
        SweepAxis::Gamma => pair_check(&ok_rows("single"), false),
        SweepAxis::Team => {
            let optimal = ok_rows("optimal");
            let uniform = ok_rows("uniform");
            pair_check(&optimal, true)?;
            pair_check(&uniform, true)?;
            for (o, u) in optimal.iter().zip(&uniform) {
                let (to, tu) = (o.theory.unwrap_or(f64::NAN), u.theory.unwrap_or(f64::NAN));
                if to.is_nan() || tu.is_nan() || to < tu - 1e-9 {
                    return Err(format!(
                        "optimal assignment must dominate uniform at K = {} ({} < {})",
                        o.point, to, tu
                    ));
                }
                if let (Some((eo, no)), Some((eu, nu))) = (emp(o), emp(u)) {
                    let slack = 1.96 * (binom_se(eo, no) + binom_se(eu, nu));
                    if eo.is_nan() || eu.is_nan() || eo < eu - slack {
                        return Err(format!(
                            "empirical optimal curve below uniform at K = {} ({} < {})",
                            o.point, eo, eu
                        ));
                    }
                }
            }
            Ok(())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let dir = out_dir(&cli.out)?;
    match &cli.command {
        Command::GenerateMap(args) => cmd_generate_map(&dir, args),
        Command::Solve(args) => cmd_solve(&dir, args),
        Command::Assign(args) => cmd_assign(&dir, args),
        Command::Deploy(args) => cmd_deploy(&dir, args),
        Command::Simulate(args) => cmd_simulate(&dir, args),
        Command::Sweep(args) => cmd_sweep(&dir, args),
    }
}

/// Parses `std::env::args`, runs the command, and returns the process exit
/// code (0 ok, 2 infeasible, 3 validation, 4 numerical).
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code()
        }
    }
}
