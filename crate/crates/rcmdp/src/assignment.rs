//! Robot-to-target assignment.
//!
//! Given per-target failure probabilities `pf[j]` and a team of `K >= T`
//! robots, choose extra robots `k[j] >= 0` with `sum k = K - T` (one robot
//! per target is mandatory) maximizing the team success probability
//! `prod_j (1 - pf[j]^(k[j]+1))`.
//!
//! Three solvers are provided:
//! - [`solve_ta_exact`]: best-bound branch and bound, globally optimal.
//! - [`solve_ta_approx`]: continuous relaxation ([`solve_rta`]) plus
//!   deterministic rounding ([`round_rta`]); needs `K >= 2T` and is
//!   asymptotically optimal as `K` grows.
//! - [`brute_force_ta`]: exhaustive enumeration, capped, used as an oracle.
//!
//! All solvers are single-threaded and fully deterministic, including
//! tie-breaking.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bisection stopping tolerance on the budget residual `|sum k - budget|`.
pub const RTA_RESIDUAL_TOL: f64 = 1e-9;
/// Added to branch-and-bound node bounds so numerical error in the
/// relaxation can never prune the true optimum.
pub const BNB_BOUND_MARGIN: f64 = 1e-9;
/// Largest stars-and-bars count [`brute_force_ta`] accepts.
pub const BRUTE_FORCE_CAP: u128 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum TaError {
    #[error("pf[{index}] = {value} outside the open interval (0, 1); preprocess first")]
    PfRange { index: usize, value: f64 },
    #[error("team of {team} cannot cover {targets} targets")]
    TeamTooSmall { team: usize, targets: usize },
    #[error("target {index} has failure probability 1; no assignment can succeed")]
    CertainFailure { index: usize },
    #[error("approximation needs at least two robots per target: team {team}, targets {targets}")]
    ApproxNeedsTwoPerTarget { team: usize, targets: usize },
    #[error("bisection bracket failure: {0}")]
    Bracket(String),
    #[error("instance has {0} allocations, above the brute-force cap")]
    TooManyAllocations(u128),
}

/// Validated assignment instance: `pf` strictly inside (0, 1), `team >= T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaInstance {
    pf: Vec<f64>,
    team: usize,
}

impl TaInstance {
    pub fn new(pf: Vec<f64>, team: usize) -> Result<Self, TaError> {
        for (index, &value) in pf.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(TaError::PfRange { index, value });
            }
        }
        if team < pf.len() || pf.is_empty() {
            return Err(TaError::TeamTooSmall { team, targets: pf.len() });
        }
        Ok(TaInstance { pf, team })
    }

    pub fn pf(&self) -> &[f64] {
        &self.pf
    }

    pub fn team(&self) -> usize {
        self.team
    }

    pub fn num_targets(&self) -> usize {
        self.pf.len()
    }

    /// Extra robots available beyond the mandatory one per target.
    pub fn budget(&self) -> usize {
        self.team - self.pf.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Approx,
    Brute,
}

/// Integer assignment: `extras[j]` robots on target `j` beyond the mandatory
/// one, with `sum extras = team - targets`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaSolution {
    pub extras: Vec<usize>,
    /// Team success probability `prod (1 - pf^(extras+1))`.
    pub objective: f64,
    pub method: Method,
}

impl TaSolution {
    /// Robots per target, `extras + 1`.
    pub fn counts(&self) -> Vec<usize> {
        self.extras.iter().map(|&k| k + 1).collect()
    }
}

fn phi(pf: &[f64], extras: &[usize]) -> f64 {
    pf.iter()
        .zip(extras)
        .map(|(&p, &k)| 1.0 - p.powi(k as i32 + 1))
        .product()
}

fn log_phi(pf: &[f64], extras: &[usize]) -> f64 {
    pf.iter()
        .zip(extras)
        .map(|(&p, &k)| (1.0 - p.powi(k as i32 + 1)).ln())
        .sum()
}

/// Number of ways to place `budget` indistinguishable extras on `targets`
/// targets, `C(budget + targets - 1, targets - 1)`, saturating at `u128::MAX`.
pub fn allocation_count(budget: usize, targets: usize) -> u128 {
    if targets == 0 {
        return if budget == 0 { 1 } else { 0 };
    }
    let mut c: u128 = 1;
    for i in 0..targets - 1 {
        c = match c.checked_mul((budget + i + 1) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// Outcome of the degenerate-probability preprocessing: targets with
/// `pf = 0` are satisfied by their single mandatory robot and dropped;
/// any `pf = 1` target makes the whole problem infeasible.
#[derive(Clone, Debug)]
pub struct Preprocessed {
    original_pf: Vec<f64>,
    original_team: usize,
    /// Original indices of targets kept in the reduced instance.
    pub kept: Vec<usize>,
    /// Original indices of certain-success targets (one robot each).
    pub certain: Vec<usize>,
    /// Reduced instance; `None` when every target is certain.
    pub instance: Option<TaInstance>,
}

pub fn preprocess_pf(pf: &[f64], team: usize) -> Result<Preprocessed, TaError> {
    if team < pf.len() || pf.is_empty() {
        return Err(TaError::TeamTooSmall { team, targets: pf.len() });
    }
    let mut kept = Vec::new();
    let mut certain = Vec::new();
    let mut reduced = Vec::new();
    for (index, &value) in pf.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(TaError::PfRange { index, value });
        }
        if value == 1.0 {
            return Err(TaError::CertainFailure { index });
        }
        if value == 0.0 {
            certain.push(index);
        } else {
            kept.push(index);
            reduced.push(value);
        }
    }
    let instance = if reduced.is_empty() {
        None
    } else {
        Some(TaInstance::new(reduced, team - certain.len())?)
    };
    Ok(Preprocessed { original_pf: pf.to_vec(), original_team: team, kept, certain, instance })
}

impl Preprocessed {
    /// Lifts a solution of the reduced instance back to the original target
    /// order. Certain targets receive zero extras. When every target is
    /// certain, pass `None`; surplus robots pile onto the first target (they
    /// cannot change the outcome) so the team-size invariant still holds.
    pub fn expand(&self, reduced: Option<&TaSolution>) -> TaSolution {
        let t = self.original_pf.len();
        let mut extras = vec![0usize; t];
        let method = match reduced {
            Some(sol) => {
                assert_eq!(sol.extras.len(), self.kept.len());
                for (&orig, &k) in self.kept.iter().zip(&sol.extras) {
                    extras[orig] = k;
                }
                sol.method
            }
            None => {
                assert!(self.instance.is_none(), "reduced solution required");
                extras[0] = self.original_team - t;
                Method::Exact
            }
        };
        let objective = phi(&self.original_pf, &extras);
        TaSolution { extras, objective, method }
    }
}

/// Closed-form stationary point for one target at multiplier `lambda < 0`:
/// `k = log(lambda / (lambda + log pf)) / log pf - 1`, always `> -1`.
fn k_of_lambda(pf: f64, lambda: f64) -> f64 {
    let lp = pf.ln();
    (lambda / (lambda + lp)).ln() / lp - 1.0
}

/// Continuous relaxation of the assignment problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtaSolution {
    /// Optimal multiplier, always negative.
    pub lambda: f64,
    /// Real-valued extras per target, each `> -1`, summing to `team - 2T`.
    pub k_star: Vec<f64>,
    /// Relaxed log-objective `sum log(1 - pf^(k*+1))`.
    pub log_objective: f64,
    /// Final budget residual `|sum k* - (team - 2T)|`.
    pub residual: f64,
}

/// Solves the continuous relaxation: maximize `sum log(1 - pf^(k+1))` over
/// reals summing to `team - 2T`, by bisection on the multiplier. Requires
/// `team >= 2T` so the relaxed optimum keeps every `k > -1`.
pub fn solve_rta(inst: &TaInstance) -> Result<RtaSolution, TaError> {
    let t = inst.num_targets();
    if inst.team < 2 * t {
        return Err(TaError::ApproxNeedsTwoPerTarget { team: inst.team, targets: t });
    }
    let budget = (inst.team - 2 * t) as f64;

    let sum_k = |lambda: f64| -> f64 {
        inst.pf.iter().map(|&p| k_of_lambda(p, lambda)).sum()
    };

    // Upper end: lambda near zero sends every k to +infinity. Walk toward
    // zero until the budget is reachable (huge teams need tiny lambda).
    let mut hi = -1e-18;
    while sum_k(hi) < budget {
        hi *= 1e-6;
        if hi > -1e-300 {
            return Err(TaError::Bracket(format!(
                "budget {budget} not reachable at lambda {hi:e}"
            )));
        }
    }
    // Lower end: scale of the gradients at k = 0, doubled until the sum
    // drops below the budget (it tends to -T as lambda -> -inf).
    let max_abs_log: f64 = inst.pf.iter().map(|&p| p.ln().abs()).fold(0.0, f64::max);
    let mut c = 1.0;
    let mut lo = -max_abs_log;
    let mut doublings = 0;
    while sum_k(lo) > budget {
        c *= 2.0;
        lo = -max_abs_log * c;
        doublings += 1;
        if doublings > 200 {
            return Err(TaError::Bracket("lower bracket did not close".into()));
        }
    }

    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..500 {
        lambda = 0.5 * (lo + hi);
        let s = sum_k(lambda);
        if (s - budget).abs() <= RTA_RESIDUAL_TOL {
            break;
        }
        if s > budget {
            hi = lambda;
        } else {
            lo = lambda;
        }
    }
    let k_star: Vec<f64> = inst.pf.iter().map(|&p| k_of_lambda(p, lambda)).collect();
    let residual = (k_star.iter().sum::<f64>() - budget).abs();
    if residual > RTA_RESIDUAL_TOL {
        return Err(TaError::Bracket(format!("bisection stalled at residual {residual:e}")));
    }
    let log_objective = inst
        .pf
        .iter()
        .zip(&k_star)
        .map(|(&p, &k)| (1.0 - p.powf(k + 1.0)).ln())
        .sum();
    Ok(RtaSolution { lambda, k_star, log_objective, residual })
}

/// First-order optimality residual of a candidate relaxed solution: the
/// worst deviation between each `k[j]` and the closed form at `lambda`,
/// together with the budget residual. Small residual certifies optimality
/// of the concave relaxation.
pub fn stationarity_residual(inst: &TaInstance, lambda: f64, k: &[f64]) -> f64 {
    assert_eq!(k.len(), inst.num_targets());
    let budget = (inst.team - 2 * inst.num_targets()) as f64;
    let mut r = (k.iter().sum::<f64>() - budget).abs();
    for (&p, &kj) in inst.pf.iter().zip(k) {
        r = r.max((kj - k_of_lambda(p, lambda)).abs());
    }
    r
}

/// Gain in log-objective from adding one more robot to a target currently
/// holding `extras` extras.
fn marginal_gain(pf: f64, extras: usize) -> f64 {
    (1.0 - pf.powi(extras as i32 + 2)).ln() - (1.0 - pf.powi(extras as i32 + 1)).ln()
}

/// Rounds a relaxed solution to integers: `ceil(k*)` per target, then the
/// remaining `team - T - sum ceil(k*)` robots one at a time to the target
/// with the largest marginal gain (ties to the lowest index). Feasible for
/// every `team >= 2T` because `k* > -1` forces `ceil(k*) >= 0` and the
/// ceilings overshoot the relaxed budget by less than one per target.
pub fn round_rta(inst: &TaInstance, k_star: &[f64]) -> TaSolution {
    assert_eq!(k_star.len(), inst.num_targets());
    let mut extras: Vec<usize> = k_star
        .iter()
        .map(|&k| {
            assert!(k > -1.0, "relaxed extras must exceed -1, got {k}");
            k.ceil().max(0.0) as usize
        })
        .collect();
    let used: usize = extras.iter().sum();
    let budget = inst.budget();
    assert!(used <= budget, "ceiling overshoot {used} exceeds budget {budget}");
    for _ in 0..budget - used {
        let mut best = 0usize;
        let mut best_gain = f64::NEG_INFINITY;
        for (j, &p) in inst.pf.iter().enumerate() {
            let g = marginal_gain(p, extras[j]);
            if g > best_gain {
                best_gain = g;
                best = j;
            }
        }
        extras[best] += 1;
    }
    let objective = phi(&inst.pf, &extras);
    TaSolution { extras, objective, method: Method::Approx }
}

/// Algorithm for large teams: continuous relaxation plus rounding.
/// Asymptotically optimal as the team grows; requires `team >= 2T`.
pub fn solve_ta_approx(inst: &TaInstance) -> Result<TaSolution, TaError> {
    let rta = solve_rta(inst)?;
    Ok(round_rta(inst, &rta.k_star))
}

/// Upper bound on the log-objective for distributing a real budget over
/// `pf`, with extras clamped nonnegative: water-filling on the common
/// gradient by bisection. Exact for the continuous problem up to bisection
/// tolerance; callers add [`BNB_BOUND_MARGIN`].
fn relaxed_bound(pf: &[f64], budget: f64) -> f64 {
    if pf.is_empty() {
        return 0.0;
    }
    let value_at = |ks: &[f64]| -> f64 {
        pf.iter().zip(ks).map(|(&p, &k)| (1.0 - p.powf(k + 1.0)).ln()).sum()
    };
    if budget <= 0.0 {
        return value_at(&vec![0.0; pf.len()]);
    }
    if pf.len() == 1 {
        return value_at(&[budget]);
    }
    let clamped_sum = |lambda: f64| -> f64 {
        pf.iter().map(|&p| k_of_lambda(p, lambda).max(0.0)).sum()
    };
    // Every k clamps to zero once lambda sits below all gradients at k = 0.
    let mut lo = pf
        .iter()
        .map(|&p| p * p.ln() / (1.0 - p))
        .fold(f64::INFINITY, f64::min);
    let mut hi = -1e-18;
    while clamped_sum(hi) < budget {
        hi *= 1e-6;
        if hi > -1e-300 {
            // Budget beyond representable multipliers; fall back to an even
            // split, still a valid lower-accuracy bound via concavity? No:
            // any feasible point underestimates the max, which would break
            // pruning. Return 0 (log-objective upper bound always <= 0).
            return 0.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clamped_sum(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if (clamped_sum(mid) - budget).abs() <= 1e-12 * budget.max(1.0) {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let ks: Vec<f64> = pf.iter().map(|&p| k_of_lambda(p, lambda).max(0.0)).collect();
    // Project onto the exact budget to stay an upper bound: scale the
    // positive part. Concavity makes the value at the water-filling point
    // with the bisected multiplier correct to bisection tolerance; the
    // caller's margin absorbs the slack.
    value_at(&ks)
}

/// Exhaustive search over all allocations; the reference oracle.
pub fn brute_force_ta(inst: &TaInstance) -> Result<TaSolution, TaError> {
    let count = allocation_count(inst.budget(), inst.num_targets());
    if count > BRUTE_FORCE_CAP {
        return Err(TaError::TooManyAllocations(count));
    }
    let t = inst.num_targets();
    let budget = inst.budget();
    let mut extras = vec![0usize; t];
    extras[t - 1] = budget;
    let mut best = extras.clone();
    let mut best_phi = phi(&inst.pf, &extras);

    // Lexicographic walk over compositions of `budget` into `t` parts.
    loop {
        // Advance: move one unit from the tail into the first incrementable
        // slot, standard composition successor.
        let mut idx = None;
        for j in (0..t - 1).rev() {
            let right_sum: usize = extras[j + 1..].iter().sum();
            if right_sum > 0 {
                idx = Some(j);
                break;
            }
        }
        let Some(j) = idx else { break };
        extras[j] += 1;
        let moved: usize = extras[j + 1..].iter().sum();
        for slot in &mut extras[j + 1..] {
            *slot = 0;
        }
        extras[t - 1] = moved - 1;
        let v = phi(&inst.pf, &extras);
        if v > best_phi {
            best_phi = v;
            best = extras.clone();
        }
    }
    Ok(TaSolution { extras: best, objective: best_phi, method: Method::Brute })
}

/// Globally optimal assignment by best-bound branch and bound. Targets are
/// fixed left to right; each node's bound is its fixed prefix plus the
/// clamped continuous relaxation of the remainder. Deterministic: node
/// order is (bound, insertion sequence).
pub fn solve_ta_exact(inst: &TaInstance) -> TaSolution {
    let t = inst.num_targets();
    let budget = inst.budget();

    if t == 1 {
        let extras = vec![budget];
        let objective = phi(&inst.pf, &extras);
        return TaSolution { extras, objective, method: Method::Exact };
    }

    #[derive(Debug)]
    struct Node {
        bound: f64,
        seq: usize,
        fixed: Vec<usize>,
        fixed_log: f64,
        spent: usize,
    }
    impl PartialEq for Node {
        fn eq(&self, other: &Self) -> bool {
            self.bound == other.bound && self.seq == other.seq
        }
    }
    impl Eq for Node {}
    impl PartialOrd for Node {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Node {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            // Max-heap on bound, then FIFO on ties.
            self.bound
                .total_cmp(&other.bound)
                .then_with(|| other.seq.cmp(&self.seq))
        }
    }

    // Incumbent: everything on the last target.
    let mut incumbent: Vec<usize> = vec![0; t];
    incumbent[t - 1] = budget;
    let mut best_log = log_phi(&inst.pf, &incumbent);

    let mut heap = std::collections::BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: relaxed_bound(&inst.pf, budget as f64) + BNB_BOUND_MARGIN,
        seq,
        fixed: Vec::new(),
        fixed_log: 0.0,
        spent: 0,
    });

    while let Some(node) = heap.pop() {
        if node.bound <= best_log {
            break;
        }
        let level = node.fixed.len();
        let remaining = budget - node.spent;
        if level == t - 1 {
            // Last target takes the rest.
            let mut extras = node.fixed.clone();
            extras.push(remaining);
            let v = log_phi(&inst.pf, &extras);
            if v > best_log {
                best_log = v;
                incumbent = extras;
            }
            continue;
        }
        for k in 0..=remaining {
            let p = inst.pf[level];
            let child_log = node.fixed_log + (1.0 - p.powi(k as i32 + 1)).ln();
            let rest = &inst.pf[level + 1..];
            let bound =
                child_log + relaxed_bound(rest, (remaining - k) as f64) + BNB_BOUND_MARGIN;
            if bound <= best_log {
                continue;
            }
            seq += 1;
            let mut fixed = node.fixed.clone();
            fixed.push(k);
            heap.push(Node { bound, seq, fixed, fixed_log: child_log, spent: node.spent + k });
        }
    }

    let objective = phi(&inst.pf, &incumbent);
    TaSolution { extras: incumbent, objective, method: Method::Exact }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn inst(pf: &[f64], team: usize) -> TaInstance {
        TaInstance::new(pf.to_vec(), team).unwrap()
    }

    #[test]
    fn instance_rejects_bad_input() {
        assert_eq!(
            TaInstance::new(vec![0.0, 0.5], 4).unwrap_err(),
            TaError::PfRange { index: 0, value: 0.0 }
        );
        assert_eq!(
            TaInstance::new(vec![0.5, 1.0], 4).unwrap_err(),
            TaError::PfRange { index: 1, value: 1.0 }
        );
        assert_eq!(
            TaInstance::new(vec![0.5, 0.5, 0.5], 2).unwrap_err(),
            TaError::TeamTooSmall { team: 2, targets: 3 }
        );
    }

    #[test]
    fn single_target_takes_whole_team() {
        for team in 1..6 {
            let i = inst(&[0.4], team);
            let exact = solve_ta_exact(&i);
            assert_eq!(exact.extras, vec![team - 1]);
            let brute = brute_force_ta(&i).unwrap();
            assert_eq!(brute.extras, vec![team - 1]);
            if team >= 2 {
                let approx = solve_ta_approx(&i).unwrap();
                assert_eq!(approx.extras, vec![team - 1]);
            }
        }
    }

    #[test]
    fn two_symmetric_targets_three_robots() {
        let i = inst(&[0.5, 0.5], 3);
        let exact = solve_ta_exact(&i);
        assert!((exact.objective - 0.375).abs() <= 1e-12);
        assert_eq!(exact.extras.iter().sum::<usize>(), 1);
        let brute = brute_force_ta(&i).unwrap();
        assert!((brute.objective - 0.375).abs() <= 1e-12);
    }

    #[test]
    fn lopsided_targets_prefer_the_risky_one() {
        let i = inst(&[0.9, 0.1], 4);
        let exact = solve_ta_exact(&i);
        assert_eq!(exact.extras, vec![2, 0]);
        assert!((exact.objective - (1.0 - 0.729) * 0.9).abs() <= 1e-12);
        assert!((exact.objective - 0.2439).abs() <= 1e-12);
        let brute = brute_force_ta(&i).unwrap();
        assert_eq!(brute.extras, exact.extras);
    }

    #[test]
    fn rta_symmetric_instances_split_evenly() {
        let i = inst(&[0.4, 0.4, 0.4], 12);
        let rta = solve_rta(&i).unwrap();
        // Budget 12 - 6 = 6 split three ways.
        for &k in &rta.k_star {
            assert!((k - 2.0).abs() <= 1e-8, "k* = {k}");
        }
        assert!(rta.lambda < 0.0);
        assert!(rta.residual <= RTA_RESIDUAL_TOL);
    }

    #[test]
    fn rta_closed_form_inversion() {
        let i = inst(&[0.5, 0.25], 10);
        let rta = solve_rta(&i).unwrap();
        assert!(stationarity_residual(&i, rta.lambda, &rta.k_star) <= 1e-8);
        for (&p, &k) in i.pf().iter().zip(&rta.k_star) {
            assert!((k_of_lambda(p, rta.lambda) - k).abs() <= 1e-8);
            assert!(k > -1.0);
        }
    }

    #[test]
    fn rta_matches_grid_search() {
        // Two targets: reduce to a 1-D concave problem over the first
        // target's share and scan it finely.
        let i = inst(&[0.5, 0.25], 10);
        let budget = (i.team() - 2 * i.num_targets()) as f64;
        let obj = |k0: f64| -> f64 {
            (1.0 - 0.5f64.powf(k0 + 1.0)).ln() + (1.0 - 0.25f64.powf(budget - k0 + 1.0)).ln()
        };
        let mut best_k0 = 0.0;
        let mut best = f64::NEG_INFINITY;
        let steps = 200_000;
        for s in 0..=steps {
            let k0 = budget * s as f64 / steps as f64;
            let v = obj(k0);
            if v > best {
                best = v;
                best_k0 = k0;
            }
        }
        let rta = solve_rta(&i).unwrap();
        assert!((rta.k_star[0] - best_k0).abs() <= 2.0 * budget / steps as f64);
        assert!((rta.log_objective - best).abs() <= 1e-8);
    }

    #[test]
    fn rta_rejects_small_teams() {
        let i = inst(&[0.5, 0.5], 3);
        assert_eq!(
            solve_rta(&i).unwrap_err(),
            TaError::ApproxNeedsTwoPerTarget { team: 3, targets: 2 }
        );
    }

    #[test]
    fn rounding_with_zero_remainder_keeps_ceilings() {
        // Synthetic relaxed point whose ceilings exhaust the budget:
        // team 7, two targets, budget 5, ceil(2.5) + ceil(1.5) = 5.
        let i = inst(&[0.5, 0.5], 7);
        let sol = round_rta(&i, &[2.5, 1.5]);
        assert_eq!(sol.extras, vec![3, 2]);
    }

    #[test]
    fn rounding_distributes_remainder_greedily() {
        let i = inst(&[0.3, 0.5, 0.7], 30);
        let rta = solve_rta(&i).unwrap();
        let sol = round_rta(&i, &rta.k_star);
        assert_eq!(sol.extras.iter().sum::<usize>(), 27);
        // Feasibility and determinism.
        let again = round_rta(&i, &rta.k_star);
        assert_eq!(sol, again);
        // The rounded point never beats the continuous relaxation over the
        // full budget (the RTA stage itself optimizes the smaller K - 2T
        // budget, so its value is not the right ceiling).
        let as_reals: f64 = i
            .pf()
            .iter()
            .zip(&sol.extras)
            .map(|(&p, &k)| (1.0 - p.powf(k as f64 + 1.0)).ln())
            .sum();
        assert!(as_reals <= relaxed_bound(i.pf(), i.budget() as f64) + 1e-9);
    }

    #[test]
    fn exact_matches_brute_force_on_random_instances() {
        let mut rng = CounterRng::new(42);
        for case in 0..60 {
            let t = 2 + rng.next_usize(3);
            let pf: Vec<f64> = (0..t).map(|_| rng.uniform(0.05, 0.95)).collect();
            let team = t + rng.next_usize(7);
            let i = TaInstance::new(pf, team).unwrap();
            let exact = solve_ta_exact(&i);
            let brute = brute_force_ta(&i).unwrap();
            assert!(
                (exact.objective - brute.objective).abs() <= 1e-12,
                "case {case}: exact {} vs brute {}",
                exact.objective,
                brute.objective
            );
            assert_eq!(exact.extras.iter().sum::<usize>(), i.budget());
        }
    }

    #[test]
    fn approx_gap_vanishes_for_large_teams() {
        for pf in [vec![0.3, 0.5, 0.7], vec![0.2, 0.9], vec![0.6, 0.6, 0.6, 0.6]] {
            let t = pf.len();
            let mut first_gap = None;
            for mult in [2usize, 4, 8, 16, 20, 64] {
                let k = mult * t;
                let i = TaInstance::new(pf.clone(), k).unwrap();
                let exact = solve_ta_exact(&i);
                let approx = solve_ta_approx(&i).unwrap();
                let gap = exact.objective.ln() - approx.objective.ln();
                assert!(gap >= -1e-12, "approximation cannot beat the optimum");
                first_gap.get_or_insert(gap);
                if mult == 20 {
                    assert!(gap < 0.01, "pf {pf:?}: log-gap {gap} at K = 20T");
                }
                if mult == 64 {
                    assert!(gap <= first_gap.unwrap() + 1e-9);
                    assert!(gap <= 1e-3, "gap must die out for large teams, got {gap}");
                }
            }
        }
    }

    #[test]
    fn preprocessing_peels_certain_targets() {
        let pre = preprocess_pf(&[0.0, 0.5, 0.0], 5).unwrap();
        assert_eq!(pre.certain, vec![0, 2]);
        assert_eq!(pre.kept, vec![1]);
        let reduced = pre.instance.as_ref().unwrap();
        assert_eq!(reduced.pf(), &[0.5]);
        assert_eq!(reduced.team(), 3);
        let sol = solve_ta_exact(reduced);
        let full = pre.expand(Some(&sol));
        assert_eq!(full.extras, vec![0, 2, 0]);
        assert!((full.objective - (1.0 - 0.5f64.powi(3))).abs() <= 1e-12);
    }

    #[test]
    fn preprocessing_handles_edge_cases() {
        assert_eq!(
            preprocess_pf(&[0.5, 1.0], 3).unwrap_err(),
            TaError::CertainFailure { index: 1 }
        );
        let pre = preprocess_pf(&[0.0, 0.0], 4).unwrap();
        assert!(pre.instance.is_none());
        let sol = pre.expand(None);
        assert_eq!(sol.extras, vec![2, 0], "surplus parks on the first target");
        assert_eq!(sol.objective, 1.0);
        assert_eq!(preprocess_pf(&[0.5], 0).unwrap_err(), TaError::TeamTooSmall { team: 0, targets: 1 });
    }

    #[test]
    fn allocation_counts() {
        assert_eq!(allocation_count(0, 3), 1);
        assert_eq!(allocation_count(6, 2), 7);
        assert_eq!(allocation_count(6, 3), 28);
        assert_eq!(allocation_count(3, 1), 1);
        // 10 extras over 5 targets: C(14, 4) = 1001.
        assert_eq!(allocation_count(10, 5), 1001);
    }

    #[test]
    fn brute_force_rejects_huge_instances() {
        let i = inst(&[0.5; 8], 8 + 100);
        let err = brute_force_ta(&i).unwrap_err();
        assert!(matches!(err, TaError::TooManyAllocations(_)));
    }

    #[test]
    fn brute_force_enumerates_every_composition() {
        // Count visited allocations indirectly: optimum of a strictly
        // concave symmetric objective is the balanced split, which the walk
        // must find among all C(6+2, 2) = 28 compositions.
        let i = inst(&[0.5, 0.5, 0.5], 9);
        let sol = brute_force_ta(&i).unwrap();
        assert_eq!(sol.extras, vec![2, 2, 2]);
    }
}
