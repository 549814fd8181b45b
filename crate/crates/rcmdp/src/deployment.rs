//! Deployment maps and their compilation into single-robot robust CMDPs.
//!
//! A map is an undirected graph whose edges carry traversal-time windows
//! `[t_min, t_max]` and a sigmoidal safety function: traversing an edge with
//! intended time `t` succeeds with probability `S(t)` and otherwise the robot
//! fails (enters the virtual sink). One robot assigned to target `v` becomes
//! a CMDP over the map vertices plus the sink: in vertex `y`, each incident
//! edge contributes one action per discretized speed `t = t_min + k * delta`;
//! the action costs `t` units of the duration budget and moves across the
//! edge with probability `S(t)`, into the sink otherwise. The sink's only
//! action carries objective cost one and leads to the target, so the optimal
//! objective of the occupation-measure program is exactly the policy's
//! failure probability.
//!
//! Constraint-cost uncertainty defaults to `eps_bar = 0.5 * t` per action
//! (overridable per edge with `eps_factor`); the budget `Gamma` is chosen at
//! solve time as a factor of `sum eps_bar`.

use crate::cmdp::{Action, ActionId, CmdpModel, ModelError, StateActionTable, StateId};
use crate::rng::CounterRng;
use crate::robust::{UncertaintyError, UncertaintySet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default ratio of the uncertainty bound to the intended traversal time.
pub const DEFAULT_EPS_FACTOR: f64 = 0.5;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Safety-function midpoint; defaults to `(t_min + t_max) / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Safety-function steepness; defaults to `(t_max - t_min) / 8`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Per-edge override of [`DEFAULT_EPS_FACTOR`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_factor: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeploymentMap {
    /// Vertex ids; any distinct nonnegative integers.
    pub vertices: Vec<usize>,
    pub edges: Vec<Edge>,
    /// Start vertex id; the initial distribution puts all mass here.
    pub start: usize,
    /// Target vertex ids; must exclude the start.
    pub targets: Vec<usize>,
    /// Speed discretization step, shared by all edges.
    pub delta: f64,
    /// Generator seed when the map was produced by [`generate_map`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("map has no vertices")]
    NoVertices,
    #[error("duplicate vertex id {0}")]
    DuplicateVertex(usize),
    #[error("edge {index} references unknown vertex {vertex}")]
    UnknownEndpoint { index: usize, vertex: usize },
    #[error("edge {index} has invalid time window [{t_min}, {t_max}] (need 0 <= t_min < t_max, finite)")]
    TimeWindow { index: usize, t_min: f64, t_max: f64 },
    #[error("edge {index} has invalid safety shape (need finite m, s > 0, sigmoid(-m/s) < 1)")]
    SafetyShape { index: usize },
    #[error("edge {index} has invalid eps_factor {value} (need finite, >= 0)")]
    EpsFactor { index: usize, value: f64 },
    #[error("self-loop on non-target vertex {vertex} (edge {index})")]
    SelfLoopOutsideTargets { index: usize, vertex: usize },
    #[error("duplicate edge between {u} and {v}")]
    DuplicateEdge { u: usize, v: usize },
    #[error("map has no targets")]
    NoTargets,
    #[error("duplicate target {0}")]
    DuplicateTarget(usize),
    #[error("target {0} is not a vertex")]
    UnknownTarget(usize),
    #[error("start vertex {0} is not a vertex")]
    UnknownStart(usize),
    #[error("start vertex {0} cannot be a target")]
    StartIsTarget(usize),
    #[error("target {0} is unreachable from the start")]
    UnreachableTarget(usize),
    #[error("delta must be finite and positive, got {0}")]
    BadDelta(f64),
}

impl DeploymentMap {
    /// Position of a vertex id in the `vertices` list; model states use this
    /// index order.
    pub fn vertex_index(&self, id: usize) -> Option<usize> {
        self.vertices.iter().position(|&v| v == id)
    }

    pub fn validate(&self) -> Result<(), MapError> {
        if self.vertices.is_empty() {
            return Err(MapError::NoVertices);
        }
        let mut seen = std::collections::HashSet::new();
        for &v in &self.vertices {
            if !seen.insert(v) {
                return Err(MapError::DuplicateVertex(v));
            }
        }
        if self.targets.is_empty() {
            return Err(MapError::NoTargets);
        }
        let mut tset = std::collections::HashSet::new();
        for &t in &self.targets {
            if !seen.contains(&t) {
                return Err(MapError::UnknownTarget(t));
            }
            if !tset.insert(t) {
                return Err(MapError::DuplicateTarget(t));
            }
        }
        if !seen.contains(&self.start) {
            return Err(MapError::UnknownStart(self.start));
        }
        if tset.contains(&self.start) {
            return Err(MapError::StartIsTarget(self.start));
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(MapError::BadDelta(self.delta));
        }

        let mut pairs = std::collections::HashSet::new();
        for (i, e) in self.edges.iter().enumerate() {
            for &end in &[e.u, e.v] {
                if !seen.contains(&end) {
                    return Err(MapError::UnknownEndpoint { index: i, vertex: end });
                }
            }
            if !e.t_min.is_finite() || !e.t_max.is_finite() || e.t_min < 0.0 || e.t_max <= e.t_min {
                return Err(MapError::TimeWindow { index: i, t_min: e.t_min, t_max: e.t_max });
            }
            if e.u == e.v && !tset.contains(&e.u) {
                return Err(MapError::SelfLoopOutsideTargets { index: i, vertex: e.u });
            }
            if SafetyFunction::from_edge(e).is_err() {
                return Err(MapError::SafetyShape { index: i });
            }
            if let Some(f) = e.eps_factor {
                if !f.is_finite() || f < 0.0 {
                    return Err(MapError::EpsFactor { index: i, value: f });
                }
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            if !pairs.insert(key) {
                return Err(MapError::DuplicateEdge { u: key.0, v: key.1 });
            }
        }

        // Reachability of every target from the start.
        let mut frontier = vec![self.start];
        let mut visited: std::collections::HashSet<usize> = frontier.iter().copied().collect();
        while let Some(x) = frontier.pop() {
            for e in &self.edges {
                for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                    if a == x && visited.insert(b) {
                        frontier.push(b);
                    }
                }
            }
        }
        for &t in &self.targets {
            if !visited.contains(&t) {
                return Err(MapError::UnreachableTarget(t));
            }
        }
        Ok(())
    }
}

/// Normalized logistic: `S(t) = (sig((t-m)/s) - sig(-m/s)) / (1 - sig(-m/s))`
/// with `sig` the standard logistic. By construction `S(0) = 0` exactly, `S`
/// is nondecreasing, and `S(t) -> 1` as `t -> infinity`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SafetyFunction {
    pub midpoint: f64,
    pub steepness: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SafetyError {
    #[error("safety shape invalid: midpoint {midpoint}, steepness {steepness}")]
    Shape { midpoint: f64, steepness: f64 },
    #[error("safety function evaluated at negative time {0}")]
    NegativeTime(f64),
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl SafetyFunction {
    pub fn new(midpoint: f64, steepness: f64) -> Result<Self, SafetyError> {
        // sig(-m/s) must stay below 1 or the normalization divides by zero.
        if !midpoint.is_finite()
            || !steepness.is_finite()
            || steepness <= 0.0
            || sigmoid(-midpoint / steepness) >= 1.0 - 1e-12
        {
            return Err(SafetyError::Shape { midpoint, steepness });
        }
        Ok(SafetyFunction { midpoint, steepness })
    }

    /// Edge defaults: midpoint at the window center, steepness an eighth of
    /// the window, putting roughly 2% success at `t_min` and 98% at `t_max`.
    pub fn from_edge(e: &Edge) -> Result<Self, SafetyError> {
        let m = e.m.unwrap_or(0.5 * (e.t_min + e.t_max));
        let s = e.s.unwrap_or((e.t_max - e.t_min) / 8.0);
        SafetyFunction::new(m, s)
    }

    /// Success probability for intended traversal time `t >= 0`.
    pub fn eval(&self, t: f64) -> Result<f64, SafetyError> {
        if t.is_nan() || t < 0.0 {
            return Err(SafetyError::NegativeTime(t));
        }
        let base = sigmoid(-self.midpoint / self.steepness);
        Ok((sigmoid((t - self.midpoint) / self.steepness) - base) / (1.0 - base))
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("vertex {0} is not a target of this map")]
    NotATarget(usize),
    #[error("edge between {u} and {v} yields {count} speed levels; delta is too small")]
    TooManyActions { u: usize, v: usize, count: usize },
    #[error(transparent)]
    Safety(#[from] SafetyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What a decision pair does, aligned with the model's pair enumeration.
/// `Traverse` to the vertex's own id is a loiter step on a non-assigned
/// target's self-loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MoveLabel {
    Traverse { to: usize, time: f64 },
    Sink,
}

/// Single-robot model for one assigned target, with the uncertainty bounds
/// and bookkeeping needed by the solver, simulator, and reports.
#[derive(Clone, Debug)]
pub struct SingleRobotModel {
    pub model: CmdpModel,
    /// Default uncertainty magnitudes, `eps_factor * traversal time` per pair.
    pub eps_bar: StateActionTable<f64>,
    pub sink_state: StateId,
    pub sink_pair: (StateId, ActionId),
    pub target_state: StateId,
    /// Pair-aligned action labels in map vertex ids.
    pub moves: Vec<MoveLabel>,
}

impl SingleRobotModel {
    /// Uncertainty set with `Gamma = factor * sum(eps_bar)`.
    pub fn uncertainty_with_factor(&self, factor: f64) -> Result<UncertaintySet, UncertaintyError> {
        UncertaintySet::from_factor(&self.model, self.eps_bar.clone(), factor)
    }

    /// Uncertainty set with an absolute budget `Gamma`.
    pub fn uncertainty_with_budget(&self, gamma: f64) -> Result<UncertaintySet, UncertaintyError> {
        UncertaintySet::new(&self.model, self.eps_bar.clone(), gamma)
    }
}

/// Compiles the map into the CMDP of a single robot assigned to `target`.
///
/// States are the map vertices (in list order) plus the sink; the assigned
/// target is the only absorbing state. Non-assigned targets stay ordinary
/// vertices, with their self-loops becoming loiter actions. Action order per
/// vertex follows (neighbor index, edge order, speed level), so the pair
/// enumeration is reproducible from the map file alone.
pub fn build_single_robot_rcmdp(
    map: &DeploymentMap,
    target: usize,
) -> Result<SingleRobotModel, BuildError> {
    map.validate()?;
    if !map.targets.contains(&target) {
        return Err(BuildError::NotATarget(target));
    }

    let n = map.vertices.len();
    let index_of = |id: usize| -> usize {
        map.vertex_index(id).expect("validated endpoint")
    };
    let target_idx = index_of(target);
    let sink_idx = n;

    // Incidence lists in deterministic order.
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (ei, e) in map.edges.iter().enumerate() {
        let ui = index_of(e.u);
        let vi = index_of(e.v);
        if ui == vi {
            incident[ui].push((vi, ei));
        } else {
            incident[ui].push((vi, ei));
            incident[vi].push((ui, ei));
        }
    }
    for list in &mut incident {
        list.sort_unstable_by_key(|&(nb, ei)| (nb, ei));
    }

    let mut actions: Vec<Vec<Action>> = Vec::with_capacity(n + 1);
    let mut moves: Vec<MoveLabel> = Vec::new();
    let mut eps_values: Vec<f64> = Vec::new();

    for (y, edges_at_y) in incident.iter().enumerate() {
        if y == target_idx {
            // Absorbing target: one zero-cost action staying put. The map's
            // self-loop dwell time (if a loop edge exists) is carried as an
            // annotation only.
            let loop_time = map
                .edges
                .iter()
                .find(|e| e.u == target && e.v == target)
                .map(|e| e.t_min);
            actions.push(vec![Action {
                cost: 0.0,
                dcosts: vec![0.0],
                transitions: vec![(StateId(target_idx), 1.0)],
                time: loop_time,
            }]);
            continue;
        }
        let mut list = Vec::new();
        for &(nb, ei) in edges_at_y {
            let e = &map.edges[ei];
            let safety = SafetyFunction::from_edge(e)?;
            let levels = ((e.t_max - e.t_min) / map.delta).floor() as usize + 1;
            if levels > 10_000 {
                return Err(BuildError::TooManyActions { u: e.u, v: e.v, count: levels });
            }
            let eps_factor = e.eps_factor.unwrap_or(DEFAULT_EPS_FACTOR);
            for k in 0..levels {
                let t = e.t_min + k as f64 * map.delta;
                let p = safety.eval(t)?;
                list.push(Action {
                    cost: 0.0,
                    dcosts: vec![t],
                    transitions: vec![(StateId(nb), p), (StateId(sink_idx), 1.0 - p)],
                    time: Some(t),
                });
                moves.push(MoveLabel::Traverse { to: map.vertices[nb], time: t });
                eps_values.push(eps_factor * t);
            }
        }
        actions.push(list);
    }

    // Sink: objective cost one, then deterministically to the target.
    actions.push(vec![Action {
        cost: 1.0,
        dcosts: vec![0.0],
        transitions: vec![(StateId(target_idx), 1.0)],
        time: None,
    }]);
    moves.push(MoveLabel::Sink);
    eps_values.push(0.0);

    let mut beta = vec![0.0; n + 1];
    beta[index_of(map.start)] = 1.0;

    let model = CmdpModel::new(vec![target_idx], actions, vec![0.0], beta)?;
    debug_assert_eq!(moves.len(), model.num_pairs());

    Ok(SingleRobotModel {
        eps_bar: StateActionTable::from_values(eps_values),
        sink_state: StateId(sink_idx),
        sink_pair: (StateId(sink_idx), ActionId(0)),
        target_state: StateId(target_idx),
        moves,
        model,
    })
}

/// Success probability of a team: `prod_j (1 - pf_j ^ counts_j)`. A target
/// with no robot makes the product zero (`pf^0 = 1`).
pub fn success_probability(pf: &[f64], counts: &[usize]) -> f64 {
    assert_eq!(pf.len(), counts.len(), "one count per target");
    pf.iter()
        .zip(counts)
        .map(|(&p, &c)| {
            assert!((0.0..=1.0).contains(&p), "failure probability {p} outside [0, 1]");
            1.0 - p.powi(i32::try_from(c).expect("robot count fits in i32"))
        })
        .product()
}

/// Exact expected team success when each of `team` robots picks its target
/// independently and uniformly. Computed by dynamic programming over the
/// binomial splitting of robots across targets; no sampling involved.
pub fn expected_uniform_success(pf: &[f64], team: usize) -> f64 {
    let t = pf.len();
    assert!(t > 0, "at least one target");
    for &p in pf {
        assert!((0.0..=1.0).contains(&p), "failure probability {p} outside [0, 1]");
    }
    // f[k] = E[prod over remaining targets] given k robots left for them.
    // Walk targets from the last to the first; the last target takes all
    // remaining robots.
    let mut f: Vec<f64> = (0..=team)
        .map(|k| 1.0 - pf[t - 1].powi(k as i32))
        .collect();
    for j in (0..t - 1).rev() {
        let remaining = (t - j) as f64;
        let p = 1.0 / remaining;
        let mut next = vec![0.0; team + 1];
        for k in 0..=team {
            // Binomial(k, p) weights via the multiplicative recurrence.
            let mut w = (1.0 - p).powi(k as i32);
            let mut acc = 0.0;
            for c in 0..=k {
                acc += w * (1.0 - pf[j].powi(c as i32)) * f[k - c];
                if c < k {
                    w *= (k - c) as f64 / (c + 1) as f64 * p / (1.0 - p);
                }
            }
            next[k] = acc;
        }
        f = next;
    }
    f[team]
}

/// Robot-to-target assignment in per-robot form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// Target vertex id per robot.
    pub robot_targets: Vec<usize>,
}

impl Assignment {
    /// One mandatory robot plus `extras[j]` on `targets[j]`.
    pub fn from_counts(targets: &[usize], extras: &[usize]) -> Assignment {
        assert_eq!(targets.len(), extras.len());
        let mut robot_targets = Vec::new();
        for (&t, &k) in targets.iter().zip(extras) {
            for _ in 0..=k {
                robot_targets.push(t);
            }
        }
        Assignment { robot_targets }
    }

    pub fn team_size(&self) -> usize {
        self.robot_targets.len()
    }

    /// Robots per target, aligned with `targets`.
    pub fn counts(&self, targets: &[usize]) -> Vec<usize> {
        targets
            .iter()
            .map(|t| self.robot_targets.iter().filter(|&&r| r == *t).count())
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct MapGenConfig {
    pub vertices: usize,
    /// Edges added on top of the random spanning tree.
    pub extra_edges: usize,
    pub targets: usize,
    pub t_min_range: (f64, f64),
    /// Range of `t_max - t_min`.
    pub gap_range: (f64, f64),
    /// Speed levels per average edge; sets `delta = mean gap / levels`.
    pub speed_levels: usize,
    pub seed: u64,
}

impl Default for MapGenConfig {
    fn default() -> Self {
        MapGenConfig {
            vertices: 12,
            extra_edges: 6,
            targets: 3,
            t_min_range: (5.0, 15.0),
            gap_range: (4.0, 12.0),
            speed_levels: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MapGenError {
    #[error("need at least 2 vertices, got {0}")]
    VertexCount(usize),
    #[error("need between 1 and vertices-1 targets, got {0}")]
    TargetCount(usize),
    #[error("invalid time range configuration")]
    TimeRange,
    #[error("speed_levels must be at least 1")]
    SpeedLevels,
}

/// Seeded random map: a uniform random recursive tree plus `extra_edges`
/// random chords, edge windows drawn uniformly from the configured ranges,
/// targets sampled away from the start vertex (id 0), and one self-loop per
/// target. Identical configs produce identical maps.
pub fn generate_map(cfg: &MapGenConfig) -> Result<DeploymentMap, MapGenError> {
    if cfg.vertices < 2 {
        return Err(MapGenError::VertexCount(cfg.vertices));
    }
    if cfg.targets == 0 || cfg.targets > cfg.vertices - 1 {
        return Err(MapGenError::TargetCount(cfg.targets));
    }
    let ok_range = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi;
    if !ok_range(cfg.t_min_range) || !ok_range(cfg.gap_range) || cfg.gap_range.0 <= 0.0 {
        return Err(MapGenError::TimeRange);
    }
    if cfg.speed_levels == 0 {
        return Err(MapGenError::SpeedLevels);
    }

    let n = cfg.vertices;
    let mut rng = CounterRng::new(cfg.seed);

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut have: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    for i in 1..n {
        let parent = rng.next_usize(i);
        pairs.push((parent, i));
        have.insert((parent.min(i), parent.max(i)));
    }
    let mut added = 0;
    let mut attempts = 0;
    while added < cfg.extra_edges && attempts < 50 * (cfg.extra_edges + 1) {
        attempts += 1;
        let u = rng.next_usize(n);
        let v = rng.next_usize(n);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if have.insert(key) {
            pairs.push(key);
            added += 1;
        }
    }

    let mut targets: Vec<usize> = Vec::new();
    while targets.len() < cfg.targets {
        let t = 1 + rng.next_usize(n - 1);
        if !targets.contains(&t) {
            targets.push(t);
        }
    }
    targets.sort_unstable();
    for &t in &targets {
        pairs.push((t, t));
    }

    let mut edges = Vec::with_capacity(pairs.len());
    let mut gap_sum = 0.0;
    for (u, v) in pairs {
        let t_min = rng.uniform(cfg.t_min_range.0, cfg.t_min_range.1);
        let gap = rng.uniform(cfg.gap_range.0, cfg.gap_range.1);
        gap_sum += gap;
        edges.push(Edge {
            u,
            v,
            t_min,
            t_max: t_min + gap,
            m: None,
            s: None,
            eps_factor: None,
        });
    }
    let delta = gap_sum / edges.len() as f64 / cfg.speed_levels as f64;

    Ok(DeploymentMap {
        vertices: (0..n).collect(),
        edges,
        start: 0,
        targets,
        delta,
        seed: Some(cfg.seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::validate_model;

    fn single_edge_map(delta: f64) -> DeploymentMap {
        DeploymentMap {
            vertices: vec![0, 1],
            edges: vec![Edge {
                u: 0,
                v: 1,
                t_min: 5.0,
                t_max: 10.0,
                m: None,
                s: None,
                eps_factor: None,
            }],
            start: 0,
            targets: vec![1],
            delta,
            seed: None,
        }
    }

    #[test]
    fn safety_boundary_values() {
        let f = SafetyFunction::new(7.5, 0.625).unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 0.0, "S(0) must be exactly zero");
        let at_mid = f.eval(7.5).unwrap();
        let base = sigmoid(-7.5 / 0.625);
        assert!((at_mid - (0.5 - base) / (1.0 - base)).abs() <= 1e-15);
        assert!(f.eval(10.0 * 10.0).unwrap() >= 0.999);
        assert!(f.eval(1e6 * 10.0).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn safety_monotone_and_bounded() {
        let f = SafetyFunction::new(12.0, 1.5).unwrap();
        let mut last = -1.0;
        for i in 0..=2000 {
            let t = i as f64 * 0.05;
            let v = f.eval(t).unwrap();
            assert!((0.0..=1.0).contains(&v));
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn safety_rejects_bad_input() {
        assert!(SafetyFunction::new(5.0, 0.0).is_err());
        assert!(SafetyFunction::new(5.0, -1.0).is_err());
        assert!(SafetyFunction::new(-1e9, 1.0).is_err(), "normalization would divide by zero");
        let f = SafetyFunction::new(5.0, 1.0).unwrap();
        assert_eq!(f.eval(-0.1), Err(SafetyError::NegativeTime(-0.1)));
    }

    #[test]
    fn single_edge_model_shape() {
        // delta = window width gives exactly two speed levels.
        let map = single_edge_map(5.0);
        let built = build_single_robot_rcmdp(&map, 1).unwrap();
        assert_eq!(built.model.num_states(), 3);
        assert_eq!(built.model.num_pairs(), 3, "two speeds plus the sink action");
        assert_eq!(built.moves.len(), 3);
        assert_eq!(built.moves[0], MoveLabel::Traverse { to: 1, time: 5.0 });
        assert_eq!(built.moves[1], MoveLabel::Traverse { to: 1, time: 10.0 });
        assert_eq!(built.moves[2], MoveLabel::Sink);
        let report = validate_model(&built.model);
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn transition_rows_sum_exactly_to_one() {
        let map = generate_map(&MapGenConfig { seed: 11, ..Default::default() }).unwrap();
        let target = map.targets[0];
        let built = build_single_robot_rcmdp(&map, target).unwrap();
        for x in built.model.states() {
            for act in built.model.actions(x) {
                let sum: f64 = act.transitions.iter().map(|(_, p)| p).sum();
                assert_eq!(sum, 1.0, "row must sum exactly to one");
            }
        }
    }

    #[test]
    fn eps_bar_follows_duration_rule() {
        let mut map = single_edge_map(5.0);
        map.edges[0].eps_factor = Some(0.25);
        let built = build_single_robot_rcmdp(&map, 1).unwrap();
        assert_eq!(built.eps_bar.as_slice(), &[0.25 * 5.0, 0.25 * 10.0, 0.0]);
        let map = single_edge_map(5.0);
        let built = build_single_robot_rcmdp(&map, 1).unwrap();
        assert_eq!(built.eps_bar.as_slice(), &[2.5, 5.0, 0.0]);
    }

    #[test]
    fn sink_wiring() {
        let map = single_edge_map(5.0);
        let built = build_single_robot_rcmdp(&map, 1).unwrap();
        let sink = built.sink_pair;
        assert_eq!(sink.0, StateId(2));
        let act = built.model.action(sink.0, sink.1);
        assert_eq!(act.cost, 1.0);
        assert_eq!(act.dcosts, vec![0.0]);
        assert_eq!(act.transitions, vec![(built.target_state, 1.0)]);
        // Objective cost lives only on the sink pair.
        for (&(x, a), mv) in built.model.pairs().iter().zip(&built.moves) {
            let c = built.model.action(x, a).cost;
            match mv {
                MoveLabel::Sink => assert_eq!(c, 1.0),
                _ => assert_eq!(c, 0.0),
            }
        }
    }

    #[test]
    fn non_assigned_targets_pass_through() {
        // Path 0 - 1 - 2 with targets {1, 2}; building for 2 keeps 1
        // ordinary and turns its self-loop into a loiter action.
        let map = DeploymentMap {
            vertices: vec![0, 1, 2],
            edges: vec![
                Edge { u: 0, v: 1, t_min: 4.0, t_max: 8.0, m: None, s: None, eps_factor: None },
                Edge { u: 1, v: 2, t_min: 4.0, t_max: 8.0, m: None, s: None, eps_factor: None },
                Edge { u: 1, v: 1, t_min: 1.0, t_max: 2.0, m: None, s: None, eps_factor: None },
                Edge { u: 2, v: 2, t_min: 1.0, t_max: 2.0, m: None, s: None, eps_factor: None },
            ],
            start: 0,
            targets: vec![1, 2],
            delta: 4.0,
            seed: None,
        };
        map.validate().unwrap();
        let built = build_single_robot_rcmdp(&map, 2).unwrap();
        assert!(!built.model.is_absorbing(StateId(1)));
        let loiter = built
            .moves
            .iter()
            .any(|m| matches!(m, MoveLabel::Traverse { to: 1, .. }));
        assert!(loiter, "vertex 1 keeps its self-loop as an ordinary action");
        // The assigned target's loop edge only annotates the absorbing action.
        let absorbing_act = built.model.action(StateId(2), ActionId(0));
        assert_eq!(absorbing_act.time, Some(1.0));
        let report = validate_model(&built.model);
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn build_rejects_bad_requests() {
        let map = single_edge_map(5.0);
        assert!(matches!(build_single_robot_rcmdp(&map, 0), Err(BuildError::NotATarget(0))));
        let mut tiny = single_edge_map(5.0);
        tiny.delta = 1e-9;
        assert!(matches!(
            build_single_robot_rcmdp(&tiny, 1),
            Err(BuildError::TooManyActions { .. })
        ));
    }

    #[test]
    fn map_validation_errors() {
        let mut m = single_edge_map(5.0);
        m.edges[0].t_max = 5.0;
        assert_eq!(m.validate(), Err(MapError::TimeWindow { index: 0, t_min: 5.0, t_max: 5.0 }));

        let mut m = single_edge_map(5.0);
        m.start = 1;
        assert_eq!(m.validate(), Err(MapError::StartIsTarget(1)));

        let mut m = single_edge_map(5.0);
        m.targets = vec![7];
        assert_eq!(m.validate(), Err(MapError::UnknownTarget(7)));

        let m = DeploymentMap {
            vertices: vec![0, 1, 2],
            edges: vec![Edge { u: 0, v: 1, t_min: 1.0, t_max: 2.0, m: None, s: None, eps_factor: None }],
            start: 0,
            targets: vec![2],
            delta: 1.0,
            seed: None,
        };
        assert_eq!(m.validate(), Err(MapError::UnreachableTarget(2)));

        let m = DeploymentMap {
            vertices: vec![0, 1],
            edges: vec![Edge { u: 0, v: 0, t_min: 1.0, t_max: 2.0, m: None, s: None, eps_factor: None }],
            start: 0,
            targets: vec![1],
            delta: 1.0,
            seed: None,
        };
        assert_eq!(m.validate(), Err(MapError::SelfLoopOutsideTargets { index: 0, vertex: 0 }));
    }

    #[test]
    fn success_probability_examples() {
        assert_eq!(success_probability(&[0.5], &[1]), 0.5);
        assert_eq!(success_probability(&[0.5], &[3]), 0.875);
        let phi = success_probability(&[0.2, 0.4], &[2, 3]);
        assert!((phi - 0.89856).abs() <= 1e-12);
        assert_eq!(success_probability(&[0.2, 0.4], &[2, 0]), 0.0, "uncovered target");
    }

    #[test]
    fn success_probability_monotonicity() {
        let pf = [0.3, 0.6, 0.8];
        let base = success_probability(&pf, &[2, 2, 2]);
        for j in 0..3 {
            let mut up = [2usize, 2, 2];
            up[j] += 1;
            assert!(success_probability(&pf, &up) >= base);
            let mut worse = pf;
            worse[j] = (pf[j] + 0.1).min(1.0);
            assert!(success_probability(&worse, &[2, 2, 2]) <= base);
        }
    }

    #[test]
    fn success_probability_against_bernoulli_monte_carlo() {
        let pf = [0.2, 0.4];
        let counts = [2usize, 3];
        let exact = success_probability(&pf, &counts);
        let mut rng = CounterRng::new(99);
        let trials = 200_000;
        let mut ok = 0usize;
        for _ in 0..trials {
            let mut team_ok = true;
            for (p, &c) in pf.iter().zip(&counts) {
                let mut reached = false;
                for _ in 0..c {
                    if !rng.bernoulli(*p) {
                        reached = true;
                    }
                }
                team_ok &= reached;
            }
            if team_ok {
                ok += 1;
            }
        }
        let emp = ok as f64 / trials as f64;
        let se = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((emp - exact).abs() <= 4.0 * se, "emp {emp} vs exact {exact}");
    }

    #[test]
    fn expected_uniform_success_matches_enumeration() {
        // Two targets, two robots: assignments (2,0), (1,1), (0,2) with
        // probabilities 1/4, 1/2, 1/4.
        let pf = [0.5, 0.2];
        let exact = expected_uniform_success(&pf, 2);
        let by_hand = 0.25 * (1.0 - 0.25) * 0.0 + 0.0 // (2,0): target 2 uncovered
            + 0.5 * (1.0 - 0.5) * (1.0 - 0.2)
            + 0.25 * 0.0 * (1.0 - 0.04);
        assert!((exact - by_hand).abs() <= 1e-12, "{exact} vs {by_hand}");
    }

    #[test]
    fn expected_uniform_success_matches_draw_average() {
        let pf = [0.3, 0.5, 0.7];
        let team = 7;
        let exact = expected_uniform_success(&pf, team);
        let mut rng = CounterRng::new(123);
        let draws = 200_000;
        let mut sum = 0.0;
        for _ in 0..draws {
            let mut counts = [0usize; 3];
            for _ in 0..team {
                counts[rng.next_usize(3)] += 1;
            }
            sum += success_probability(&pf, &counts);
        }
        let mc = sum / draws as f64;
        assert!((exact - mc).abs() <= 0.005, "exact {exact} vs mc {mc}");
    }

    #[test]
    fn expected_uniform_success_monotone_in_team() {
        let pf = [0.3, 0.5, 0.7];
        let mut last = 0.0;
        for k in 3..40 {
            let v = expected_uniform_success(&pf, k);
            assert!(v >= last - 1e-12, "K={k}: {v} < {last}");
            last = v;
        }
    }

    #[test]
    fn assignment_count_form_roundtrip() {
        let targets = [4usize, 7, 9];
        let extras = [2usize, 0, 1];
        let a = Assignment::from_counts(&targets, &extras);
        assert_eq!(a.team_size(), 6);
        assert_eq!(a.counts(&targets), vec![3, 1, 2]);
        let k: usize = extras.iter().sum();
        assert_eq!(a.team_size(), k + targets.len());
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let cfg = MapGenConfig { seed: 7, vertices: 14, extra_edges: 8, targets: 3, ..Default::default() };
        let a = generate_map(&cfg).unwrap();
        let b = generate_map(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        a.validate().unwrap();
        assert_eq!(a.vertices.len(), 14);
        assert!(!a.targets.contains(&0));
        assert_eq!(a.targets.len(), 3);
        // Tree (13) + extras (8) + target loops (3).
        assert_eq!(a.edges.len(), 13 + 8 + 3);
        for &t in &a.targets {
            assert!(a.edges.iter().any(|e| e.u == t && e.v == t), "target {t} needs a loop");
        }
        let c = generate_map(&MapGenConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap(),
            "different seeds should differ"
        );
    }

    #[test]
    fn generated_maps_build_valid_models() {
        for seed in [1u64, 2, 3] {
            let map = generate_map(&MapGenConfig { seed, ..Default::default() }).unwrap();
            for &t in &map.targets {
                let built = build_single_robot_rcmdp(&map, t).unwrap();
                let report = validate_model(&built.model);
                assert!(report.is_valid(), "seed {seed} target {t}: {report}");
            }
        }
    }

    #[test]
    fn map_serde_roundtrip() {
        let map = generate_map(&MapGenConfig { seed: 21, ..Default::default() }).unwrap();
        let json = serde_json::to_string_pretty(&map).unwrap();
        let back: DeploymentMap = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&map).unwrap(), serde_json::to_string(&back).unwrap());
        assert!(json.contains("\"seed\": 21"));
    }
}
