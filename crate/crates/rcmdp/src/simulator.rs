//! Seeded Monte Carlo execution of randomized policies.
//!
//! Rollouts follow the model's transition kernel: at each non-absorbing
//! state an action is drawn from the policy, the realized step time is
//! `d(x, a) + eps(x, a)` under the chosen uncertainty realization, and the
//! next state is drawn from the transition row. A trial fails the moment it
//! enters the designated sink state; it records the elapsed time up to and
//! including the failed step.
//!
//! Determinism: trial `t` draws from `substream(seed, t)`; within a trial,
//! robot `r` draws from `substream(substream(seed, t), r)` (a single-robot
//! run is robot 0, so it is bit-identical to a one-robot team). Trials may
//! execute in parallel; aggregation uses pairwise summation, so statistics
//! do not depend on thread count or summation order.

use crate::cmdp::{CmdpModel, StateId};
use crate::cmdp::check_transience;
use crate::cmdp::RandomizedPolicy;
use crate::rng::{substream, CounterRng};
use crate::robust::{inner_max_oracle, UncertaintySet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use thiserror::Error;

/// Hard cap on steps per trial; transience makes hitting it effectively
/// impossible, the cap only turns a pathological loop into an error.
pub const STEP_LIMIT: usize = 1_000_000;
/// Attempt cap for rejection sampling of uniform budgeted realizations.
pub const REJECTION_CAP: usize = 10_000;
/// Probabilities are clamped to `[KL_CLAMP, 1 - KL_CLAMP]` inside
/// [`kl_divergence`] so all-success batches stay finite.
pub const KL_CLAMP: f64 = 1e-12;

/// How constraint-cost uncertainty is realized during rollouts.
#[derive(Clone, Debug)]
pub enum EpsMode {
    /// `eps = 0`: nominal step times.
    Nominal,
    /// A fixed per-pair realization, e.g. the worst case from the inner
    /// maximization oracle.
    Fixed(Vec<f64>),
    /// A fresh draw per trial, uniform on the box intersected with the
    /// budget simplex, by rejection sampling from the box.
    UniformInU(UncertaintySet),
}

impl EpsMode {
    /// The worst-case realization against a given occupation measure.
    pub fn worst_case(u: &UncertaintySet, rho: &crate::cmdp::StateActionTable<f64>) -> EpsMode {
        EpsMode::Fixed(inner_max_oracle(u, rho).eps_star.as_slice().to_vec())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("model is not transient; rollouts could loop forever")]
    NonTransient,
    #[error("policy shape invalid: {0}")]
    Policy(String),
    #[error("sink pair (state {0}, action {1}) does not exist in the model")]
    UnknownSink(usize, usize),
    #[error("eps realization table has {got} entries, model has {want} pairs")]
    EpsLength { got: usize, want: usize },
    #[error("rejection sampling failed {0} times; budget too tight for the box")]
    RejectionCap(usize),
    #[error("trial exceeded {STEP_LIMIT} steps")]
    StepLimit,
    #[error("need at least one trial")]
    NoTrials,
    #[error("team is empty")]
    EmptyTeam,
    #[error("theoretical success probability {0} outside [0, 1]")]
    BadTheory(f64),
}

/// One rollout. For team runs, `path` is empty and `duration` is the
/// maximum over the team's robots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub success: bool,
    pub duration: f64,
    pub path: Vec<(usize, usize)>,
}

/// Aggregated statistics over a batch of trials. Duration spreads are
/// sample standard deviations; conditional fields are `None` when no trial
/// succeeded, and the divergence fields are `None` when no theoretical
/// value was supplied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub n_trials: usize,
    pub empirical_success_prob: f64,
    pub mean_duration: f64,
    pub std_duration: f64,
    pub mean_duration_given_success: Option<f64>,
    pub std_duration_given_success: Option<f64>,
    /// Reference success probability the run was compared against.
    pub theoretical_success_prob: Option<f64>,
    /// Relative failure-probability error `|pf_emp - pf| / pf`.
    pub convergence_error: Option<f64>,
    /// KL divergence of the empirical success Bernoulli from the
    /// theoretical one.
    pub kl_divergence: Option<f64>,
}

impl fmt::Display for SimStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "simulation")?;
        writeln!(f, "  trials: {}", self.n_trials)?;
        writeln!(f, "  success:")?;
        writeln!(f, "    empirical: {}", self.empirical_success_prob)?;
        if let Some(q) = self.theoretical_success_prob {
            writeln!(f, "    theoretical: {q}")?;
        }
        if let Some(e) = self.convergence_error {
            writeln!(f, "    convergence_error: {e}")?;
        }
        if let Some(kl) = self.kl_divergence {
            writeln!(f, "    kl_divergence: {kl}")?;
        }
        writeln!(f, "  duration:")?;
        writeln!(f, "    mean: {}", self.mean_duration)?;
        writeln!(f, "    std: {}", self.std_duration)?;
        if let Some(m) = self.mean_duration_given_success {
            writeln!(f, "    mean_given_success: {m}")?;
        }
        if let Some(s) = self.std_duration_given_success {
            writeln!(f, "    std_given_success: {s}")?;
        }
        Ok(())
    }
}

/// A batch of trials plus their aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRun {
    pub stats: SimStats,
    pub trials: Vec<TrialResult>,
}

/// One robot of a team: its model, policy, failure sink, and which target
/// label it covers.
#[derive(Clone, Copy)]
pub struct TeamRobot<'a> {
    pub model: &'a CmdpModel,
    pub policy: &'a RandomizedPolicy,
    pub sink_state: StateId,
    pub target: usize,
}

/// Bernoulli KL divergence `p ln(p/q) + (1-p) ln((1-p)/(1-q))`, with both
/// arguments clamped away from {0, 1}.
pub fn kl_divergence(p_emp: f64, p_theory: f64) -> f64 {
    let clamp = |x: f64| x.clamp(KL_CLAMP, 1.0 - KL_CLAMP);
    let p = clamp(p_emp);
    let q = clamp(p_theory);
    p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
}

/// Order-insensitive sum: splits recursively so results do not depend on
/// chunking.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, var.sqrt())
}

fn aggregate(trials: &[TrialResult], theory: Option<f64>) -> SimStats {
    let n = trials.len();
    let successes = trials.iter().filter(|t| t.success).count();
    let empirical = successes as f64 / n as f64;
    let all: Vec<f64> = trials.iter().map(|t| t.duration).collect();
    let (mean_duration, std_duration) = mean_std(&all);
    let ok: Vec<f64> = trials.iter().filter(|t| t.success).map(|t| t.duration).collect();
    let (mean_ok, std_ok) = mean_std(&ok);
    let (mean_duration_given_success, std_duration_given_success) = if successes > 0 {
        (Some(mean_ok), Some(std_ok))
    } else {
        (None, None)
    };
    let convergence_error = theory.and_then(|q| {
        let pf = 1.0 - q;
        if pf > 0.0 {
            Some(((1.0 - empirical) - pf).abs() / pf)
        } else {
            None
        }
    });
    let kl = theory.map(|q| kl_divergence(empirical, q));
    SimStats {
        n_trials: n,
        empirical_success_prob: empirical,
        mean_duration,
        std_duration,
        mean_duration_given_success,
        std_duration_given_success,
        theoretical_success_prob: theory,
        convergence_error,
        kl_divergence: kl,
    }
}

/// Draws an index from a probability row; tolerates rows that sum to one
/// only up to rounding by falling back to the last positive entry.
fn sample_index(probs: &[f64], rng: &mut CounterRng) -> usize {
    let r = rng.next_f64();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("probability row has positive mass")
}

fn validate_policy(model: &CmdpModel, policy: &RandomizedPolicy) -> Result<(), SimError> {
    if policy.probs.len() != model.num_states() {
        return Err(SimError::Policy(format!(
            "policy covers {} states, model has {}",
            policy.probs.len(),
            model.num_states()
        )));
    }
    for x in model.states() {
        let row = &policy.probs[x.0];
        if model.is_absorbing(x) {
            continue;
        }
        if row.len() != model.actions(x).len() {
            return Err(SimError::Policy(format!(
                "state {} has {} actions, policy row has {}",
                x.0,
                model.actions(x).len(),
                row.len()
            )));
        }
        let mut sum = 0.0f64;
        for &p in row {
            if p.is_nan() || p < 0.0 {
                return Err(SimError::Policy(format!("negative mass in state {}", x.0)));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::Policy(format!("state {} mass sums to {sum}", x.0)));
        }
    }
    Ok(())
}

enum TrialEps<'a> {
    Zero,
    Shared(&'a [f64]),
    Owned(Vec<f64>),
}

impl TrialEps<'_> {
    fn at(&self, pair: usize) -> f64 {
        match self {
            TrialEps::Zero => 0.0,
            TrialEps::Shared(xs) => xs[pair],
            TrialEps::Owned(xs) => xs[pair],
        }
    }
}

fn draw_eps<'a>(
    mode: &'a EpsMode,
    rng: &mut CounterRng,
) -> Result<TrialEps<'a>, SimError> {
    match mode {
        EpsMode::Nominal => Ok(TrialEps::Zero),
        EpsMode::Fixed(xs) => Ok(TrialEps::Shared(xs)),
        EpsMode::UniformInU(u) => {
            if u.gamma() == 0.0 {
                return Ok(TrialEps::Zero);
            }
            if u.gamma() >= u.total_eps_bar() {
                // The budget never binds; a plain box draw suffices.
                let draw: Vec<f64> = u.eps_bar().iter().map(|&b| rng.uniform(0.0, b)).collect();
                return Ok(TrialEps::Owned(draw));
            }
            for _ in 0..REJECTION_CAP {
                let draw: Vec<f64> = u.eps_bar().iter().map(|&b| rng.uniform(0.0, b)).collect();
                if pairwise_sum(&draw) <= u.gamma() {
                    return Ok(TrialEps::Owned(draw));
                }
            }
            Err(SimError::RejectionCap(REJECTION_CAP))
        }
    }
}

fn check_eps_len(model: &CmdpModel, mode: &EpsMode) -> Result<(), SimError> {
    let want = model.num_pairs();
    let got = match mode {
        EpsMode::Nominal => return Ok(()),
        EpsMode::Fixed(xs) => xs.len(),
        EpsMode::UniformInU(u) => u.len(),
    };
    if got != want {
        return Err(SimError::EpsLength { got, want });
    }
    Ok(())
}

fn rollout(
    model: &CmdpModel,
    policy: &RandomizedPolicy,
    sink: StateId,
    eps: &TrialEps<'_>,
    rng: &mut CounterRng,
) -> Result<TrialResult, SimError> {
    let mut state = StateId(sample_index(model.beta(), rng));
    let mut success = true;
    let mut duration = 0.0;
    let mut path = Vec::new();
    for _ in 0..STEP_LIMIT {
        if state == sink {
            success = false;
            return Ok(TrialResult { success, duration, path });
        }
        if model.is_absorbing(state) {
            return Ok(TrialResult { success, duration, path });
        }
        let a = sample_index(&policy.probs[state.0], rng);
        let action = &model.actions(state)[a];
        let pair = model
            .pair_id(state, crate::cmdp::ActionId(a))
            .expect("non-absorbing pair exists");
        duration += action.dcosts.first().copied().unwrap_or(0.0) + eps.at(pair.0);
        path.push((state.0, a));
        let next = sample_index(
            &action.transitions.iter().map(|&(_, p)| p).collect::<Vec<_>>(),
            rng,
        );
        state = action.transitions[next].0;
    }
    Err(SimError::StepLimit)
}

/// Runs `n_trials` seeded rollouts of one robot. `theoretical_success`
/// (when known, e.g. `1 - rho(sink)` from a solved instance) enables the
/// convergence-error and KL fields.
pub fn run_single(
    model: &CmdpModel,
    policy: &RandomizedPolicy,
    sink_pair: (StateId, crate::cmdp::ActionId),
    eps_mode: &EpsMode,
    seed: u64,
    n_trials: usize,
    theoretical_success: Option<f64>,
) -> Result<SimRun, SimError> {
    if n_trials == 0 {
        return Err(SimError::NoTrials);
    }
    if model.pair_id(sink_pair.0, sink_pair.1).is_none() {
        return Err(SimError::UnknownSink(sink_pair.0 .0, sink_pair.1 .0));
    }
    if let Some(q) = theoretical_success {
        if !(0.0..=1.0).contains(&q) {
            return Err(SimError::BadTheory(q));
        }
    }
    validate_policy(model, policy)?;
    check_eps_len(model, eps_mode)?;
    if !check_transience(model) {
        return Err(SimError::NonTransient);
    }

    let trials: Result<Vec<TrialResult>, SimError> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = CounterRng::new(substream(substream(seed, t as u64), 0));
            let eps = draw_eps(eps_mode, &mut rng)?;
            rollout(model, policy, sink_pair.0, &eps, &mut rng)
        })
        .collect();
    let trials = trials?;
    let stats = aggregate(&trials, theoretical_success);
    Ok(SimRun { stats, trials })
}

/// Rolls out a fixed team: each robot independently, team success iff every
/// distinct target among the robots is reached by at least one of its
/// robots, team duration the maximum over robots (the instant the last
/// robot stops). A single-robot team reproduces [`run_single`] bit for bit.
pub fn run_team(
    robots: &[TeamRobot<'_>],
    eps_modes: &[EpsMode],
    seed: u64,
    n_trials: usize,
    theoretical_success: Option<f64>,
) -> Result<SimRun, SimError> {
    if robots.is_empty() {
        return Err(SimError::EmptyTeam);
    }
    if n_trials == 0 {
        return Err(SimError::NoTrials);
    }
    assert_eq!(robots.len(), eps_modes.len(), "one eps mode per robot");
    if let Some(q) = theoretical_success {
        if !(0.0..=1.0).contains(&q) {
            return Err(SimError::BadTheory(q));
        }
    }
    for (robot, mode) in robots.iter().zip(eps_modes) {
        validate_policy(robot.model, robot.policy)?;
        check_eps_len(robot.model, mode)?;
        if !check_transience(robot.model) {
            return Err(SimError::NonTransient);
        }
    }
    let mut required: Vec<usize> = robots.iter().map(|r| r.target).collect();
    required.sort_unstable();
    required.dedup();

    let trials: Result<Vec<TrialResult>, SimError> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = substream(seed, t as u64);
            let mut reached = vec![false; required.len()];
            let mut duration = 0.0f64;
            for (r, robot) in robots.iter().enumerate() {
                let mut rng = CounterRng::new(substream(trial_seed, r as u64));
                let eps = draw_eps(&eps_modes[r], &mut rng)?;
                let result =
                    rollout(robot.model, robot.policy, robot.sink_state, &eps, &mut rng)?;
                duration = duration.max(result.duration);
                if result.success {
                    let slot = required.binary_search(&robot.target).expect("own target");
                    reached[slot] = true;
                }
            }
            Ok(TrialResult { success: reached.iter().all(|&x| x), duration, path: Vec::new() })
        })
        .collect();
    let trials = trials?;
    let stats = aggregate(&trials, theoretical_success);
    Ok(SimRun { stats, trials })
}

/// Like [`run_team`], but each trial first assigns each of `team_size`
/// robots to a target uniformly at random (candidate robot per target,
/// indexed by `candidates` order). Targets left without a robot fail the
/// trial. The assignment draw uses the substream at index `team_size`,
/// after the per-robot streams.
pub fn run_team_uniform(
    candidates: &[TeamRobot<'_>],
    eps_modes: &[EpsMode],
    team_size: usize,
    seed: u64,
    n_trials: usize,
    theoretical_success: Option<f64>,
) -> Result<SimRun, SimError> {
    if candidates.is_empty() {
        return Err(SimError::EmptyTeam);
    }
    if n_trials == 0 || team_size == 0 {
        return Err(SimError::NoTrials);
    }
    assert_eq!(candidates.len(), eps_modes.len(), "one eps mode per target");
    if let Some(q) = theoretical_success {
        if !(0.0..=1.0).contains(&q) {
            return Err(SimError::BadTheory(q));
        }
    }
    for (robot, mode) in candidates.iter().zip(eps_modes) {
        validate_policy(robot.model, robot.policy)?;
        check_eps_len(robot.model, mode)?;
        if !check_transience(robot.model) {
            return Err(SimError::NonTransient);
        }
    }

    let trials: Result<Vec<TrialResult>, SimError> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = substream(seed, t as u64);
            let mut assign_rng = CounterRng::new(substream(trial_seed, team_size as u64));
            let mut reached = vec![false; candidates.len()];
            let mut duration = 0.0f64;
            for r in 0..team_size {
                let j = assign_rng.next_usize(candidates.len());
                let robot = &candidates[j];
                let mut rng = CounterRng::new(substream(trial_seed, r as u64));
                let eps = draw_eps(&eps_modes[j], &mut rng)?;
                let result =
                    rollout(robot.model, robot.policy, robot.sink_state, &eps, &mut rng)?;
                duration = duration.max(result.duration);
                if result.success {
                    reached[j] = true;
                }
            }
            Ok(TrialResult { success: reached.iter().all(|&x| x), duration, path: Vec::new() })
        })
        .collect();
    let trials = trials?;
    let stats = aggregate(&trials, theoretical_success);
    Ok(SimRun { stats, trials })
}

/// Writes the trial stream as CSV with header `trial,success,duration`.
pub fn write_trials_csv<W: Write>(mut w: W, trials: &[TrialResult]) -> std::io::Result<()> {
    writeln!(w, "trial,success,duration")?;
    for (i, t) in trials.iter().enumerate() {
        writeln!(w, "{},{},{}", i, u8::from(t.success), t.duration)?;
    }
    Ok(())
}
