//! Constrained MDP model with absorbing target set and occupation-measure
//! indexing.
//!
//! A model is a finite state set split into the absorbing set `M` and the
//! transient part `X'`, per-state action lists, an initial distribution
//! `beta`, and one expected-cost threshold per constraint. The decision pairs
//! `(x, a)` with `x` non-absorbing are enumerated in lexicographic order; that
//! enumeration is the index space shared by occupation measures, uncertainty
//! budgets, and policies (see [`StateActionTable`]).
//!
//! Construction enforces structural integrity only (index bounds, consistent
//! dimensions). Semantic requirements (stochastic rows, nonnegative costs,
//! absorbing-set closure, transience) are checked by [`validate_model`],
//! which reports every violation instead of failing fast. Probability rows
//! are never renormalized silently; see [`CmdpModel::renormalized`].

mod policy;
mod transience;
mod validate;

pub use policy::{occupation_to_policy, PolicyError, RandomizedPolicy};
pub use transience::check_transience;
pub use validate::{validate_model, ValidationReport, Violation};

use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};
use thiserror::Error;

/// Tolerance for distribution sums (transition rows and `beta`).
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

/// Index of an action within its state's action list.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

/// Index into the lexicographic enumeration of non-absorbing `(state, action)`
/// pairs.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PairId(pub usize);

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Action {
    /// Objective cost `c(x, a)`.
    pub cost: f64,
    /// Constraint costs `d_i(x, a)`, one per threshold.
    pub dcosts: Vec<f64>,
    /// Successor distribution as `(state, probability)` entries.
    pub transitions: Vec<(StateId, f64)>,
    /// Optional physical-time annotation (e.g. loiter duration on a target
    /// self-loop). Carried through serialization; no computation reads it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model must have at least one state")]
    NoStates,
    #[error("state {0} is out of range")]
    StateOutOfRange(usize),
    #[error("state {0} has no actions")]
    EmptyActionSet(usize),
    #[error("state {state} action {action} targets out-of-range state {target}")]
    TransitionOutOfRange { state: usize, action: usize, target: usize },
    #[error("state {state} action {action} has {got} constraint costs, expected {expected}")]
    ConstraintArity { state: usize, action: usize, got: usize, expected: usize },
    #[error("beta has length {got}, expected {expected}")]
    BetaLength { got: usize, expected: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "CmdpModelFile", into = "CmdpModelFile")]
pub struct CmdpModel {
    absorbing: Vec<bool>,
    actions: Vec<Vec<Action>>,
    thresholds: Vec<f64>,
    beta: Vec<f64>,
    /// Lexicographic enumeration of non-absorbing pairs.
    pairs: Vec<(StateId, ActionId)>,
    /// Per-state start offset into `pairs`; length `n + 1`.
    pair_offset: Vec<usize>,
}

impl CmdpModel {
    /// Builds a model from per-state action lists. `absorbing` lists the
    /// states of the target set `M`; `thresholds` gives one budget per
    /// constraint cost.
    pub fn new(
        absorbing: Vec<usize>,
        actions: Vec<Vec<Action>>,
        thresholds: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let n = actions.len();
        if n == 0 {
            return Err(ModelError::NoStates);
        }
        if beta.len() != n {
            return Err(ModelError::BetaLength { got: beta.len(), expected: n });
        }
        let mut absorbing_mask = vec![false; n];
        for &m in &absorbing {
            if m >= n {
                return Err(ModelError::StateOutOfRange(m));
            }
            absorbing_mask[m] = true;
        }
        let arity = thresholds.len();
        for (x, acts) in actions.iter().enumerate() {
            if acts.is_empty() {
                return Err(ModelError::EmptyActionSet(x));
            }
            for (a, act) in acts.iter().enumerate() {
                if act.dcosts.len() != arity {
                    return Err(ModelError::ConstraintArity {
                        state: x,
                        action: a,
                        got: act.dcosts.len(),
                        expected: arity,
                    });
                }
                if !act.cost.is_finite()
                    || !act.dcosts.iter().all(|d| d.is_finite())
                    || !act.transitions.iter().all(|(_, p)| p.is_finite())
                {
                    return Err(ModelError::NonFinite("action costs or probabilities"));
                }
                for &(StateId(y), _) in &act.transitions {
                    if y >= n {
                        return Err(ModelError::TransitionOutOfRange {
                            state: x,
                            action: a,
                            target: y,
                        });
                    }
                }
            }
        }
        if !beta.iter().all(|b| b.is_finite()) || !thresholds.iter().all(|d| d.is_finite()) {
            return Err(ModelError::NonFinite("beta or thresholds"));
        }

        let mut pairs = Vec::new();
        let mut pair_offset = Vec::with_capacity(n + 1);
        for (x, acts) in actions.iter().enumerate() {
            pair_offset.push(pairs.len());
            if !absorbing_mask[x] {
                for a in 0..acts.len() {
                    pairs.push((StateId(x), ActionId(a)));
                }
            }
        }
        pair_offset.push(pairs.len());

        Ok(CmdpModel {
            absorbing: absorbing_mask,
            actions,
            thresholds,
            beta,
            pairs,
            pair_offset,
        })
    }

    /// Replaces the constraint thresholds, keeping the arity.
    pub fn with_thresholds(mut self, thresholds: Vec<f64>) -> Result<Self, ModelError> {
        if thresholds.len() != self.thresholds.len() {
            return Err(ModelError::ConstraintArity {
                state: 0,
                action: 0,
                got: thresholds.len(),
                expected: self.thresholds.len(),
            });
        }
        if !thresholds.iter().all(|d| d.is_finite()) {
            return Err(ModelError::NonFinite("thresholds"));
        }
        self.thresholds = thresholds;
        Ok(self)
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.thresholds.len()
    }

    /// Number of non-absorbing `(state, action)` pairs.
    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_absorbing(&self, x: StateId) -> bool {
        self.absorbing[x.0]
    }

    pub fn absorbing_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.absorbing
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(x, _)| StateId(x))
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.num_states()).map(StateId)
    }

    pub fn actions(&self, x: StateId) -> &[Action] {
        &self.actions[x.0]
    }

    pub fn action(&self, x: StateId, a: ActionId) -> &Action {
        &self.actions[x.0][a.0]
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn pairs(&self) -> &[(StateId, ActionId)] {
        &self.pairs
    }

    pub fn pair(&self, id: PairId) -> (StateId, ActionId) {
        self.pairs[id.0]
    }

    /// Pair index of `(x, a)`, or `None` for absorbing states and
    /// out-of-range actions.
    pub fn pair_id(&self, x: StateId, a: ActionId) -> Option<PairId> {
        if x.0 >= self.num_states() || self.absorbing[x.0] || a.0 >= self.actions[x.0].len() {
            return None;
        }
        Some(PairId(self.pair_offset[x.0] + a.0))
    }

    /// Returns a copy whose transition rows are scaled to sum to one. Rows
    /// with nonpositive sums are left untouched. This is the only
    /// renormalization path; loading and construction never adjust rows.
    pub fn renormalized(&self) -> CmdpModel {
        let mut out = self.clone();
        for acts in &mut out.actions {
            for act in acts {
                let sum: f64 = act.transitions.iter().map(|(_, p)| p).sum();
                if sum > 0.0 {
                    for (_, p) in &mut act.transitions {
                        *p /= sum;
                    }
                }
            }
        }
        out
    }
}

/// Serialized form; kept separate so loading re-derives the pair index and
/// re-checks structure.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct CmdpModelFile {
    states: usize,
    absorbing: Vec<usize>,
    beta: Vec<f64>,
    thresholds: Vec<f64>,
    actions: Vec<Vec<Action>>,
}

impl TryFrom<CmdpModelFile> for CmdpModel {
    type Error = ModelError;

    fn try_from(f: CmdpModelFile) -> Result<Self, ModelError> {
        if f.actions.len() != f.states {
            return Err(ModelError::StateOutOfRange(f.actions.len()));
        }
        CmdpModel::new(f.absorbing, f.actions, f.thresholds, f.beta)
    }
}

impl From<CmdpModel> for CmdpModelFile {
    fn from(m: CmdpModel) -> Self {
        CmdpModelFile {
            states: m.num_states(),
            absorbing: m.absorbing_states().map(|s| s.0).collect(),
            beta: m.beta,
            thresholds: m.thresholds,
            actions: m.actions,
        }
    }
}

/// Dense value table indexed by [`PairId`]; the canonical container for
/// occupation measures, uncertainty magnitudes, and per-pair costs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateActionTable<T> {
    values: Vec<T>,
}

impl<T: Clone> StateActionTable<T> {
    pub fn filled(model: &CmdpModel, value: T) -> Self {
        StateActionTable { values: vec![value; model.num_pairs()] }
    }
}

impl<T> StateActionTable<T> {
    pub fn from_fn(model: &CmdpModel, mut f: impl FnMut(StateId, ActionId) -> T) -> Self {
        StateActionTable {
            values: model.pairs().iter().map(|&(x, a)| f(x, a)).collect(),
        }
    }

    pub fn from_values(values: Vec<T>) -> Self {
        StateActionTable { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.values.iter()
    }
}

impl StateActionTable<f64> {
    pub fn zeros(model: &CmdpModel) -> Self {
        StateActionTable::filled(model, 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

impl<T> Index<PairId> for StateActionTable<T> {
    type Output = T;
    fn index(&self, id: PairId) -> &T {
        &self.values[id.0]
    }
}

impl<T> IndexMut<PairId> for StateActionTable<T> {
    fn index_mut(&mut self, id: PairId) -> &mut T {
        &mut self.values[id.0]
    }
}
