//! Stationary randomized policies and their extraction from occupation
//! measures.

use super::{CmdpModel, StateActionTable, StateId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stationary randomized policy over the non-absorbing states. Absorbing
/// states carry an empty distribution (no decision is taken there).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomizedPolicy {
    /// `probs[x][a]` is the probability of action `a` in state `x`.
    pub probs: Vec<Vec<f64>>,
}

impl RandomizedPolicy {
    pub fn prob(&self, x: StateId, a: usize) -> f64 {
        self.probs[x.0][a]
    }

    /// States whose distribution puts more than `tol` mass on two or more
    /// actions.
    pub fn randomized_states(&self, tol: f64) -> Vec<StateId> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, row)| row.iter().filter(|&&p| p > tol).count() >= 2)
            .map(|(x, _)| StateId(x))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("occupation measure has negative mass {value} at state {state} action {action}")]
    NegativeMass { state: usize, action: usize, value: f64 },
    #[error("occupation measure has {got} entries, expected {expected}")]
    Length { got: usize, expected: usize },
}

/// Converts an occupation measure into the stationary policy that realizes
/// it: `pi(x, a) = rho(x, a) / sum_a rho(x, a)`. States carrying no
/// occupation mass are never visited under the measure, so any distribution
/// works there; all mass goes on the first action, so the policy randomizes
/// exactly where the measure does.
pub fn occupation_to_policy(
    model: &CmdpModel,
    rho: &StateActionTable<f64>,
) -> Result<RandomizedPolicy, PolicyError> {
    if rho.len() != model.num_pairs() {
        return Err(PolicyError::Length { got: rho.len(), expected: model.num_pairs() });
    }
    for (&(x, a), &v) in model.pairs().iter().zip(rho.iter()) {
        if v < 0.0 {
            return Err(PolicyError::NegativeMass { state: x.0, action: a.0, value: v });
        }
    }

    let mut probs: Vec<Vec<f64>> = Vec::with_capacity(model.num_states());
    for x in model.states() {
        if model.is_absorbing(x) {
            probs.push(Vec::new());
            continue;
        }
        let k = model.actions(x).len();
        let masses: Vec<f64> = (0..k)
            .map(|a| rho[model.pair_id(x, super::ActionId(a)).expect("non-absorbing pair")])
            .collect();
        let denom: f64 = masses.iter().sum();
        if denom > 0.0 {
            probs.push(masses.iter().map(|m| m / denom).collect());
        } else {
            let mut row = vec![0.0; k];
            row[0] = 1.0;
            probs.push(row);
        }
    }
    Ok(RandomizedPolicy { probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::{Action, ActionId, CmdpModel};

    fn two_action_model() -> CmdpModel {
        let mk = |target: usize| Action {
            cost: 0.0,
            dcosts: vec![0.0],
            transitions: vec![(StateId(target), 1.0)],
            time: None,
        };
        CmdpModel::new(
            vec![2],
            vec![vec![mk(1), mk(2)], vec![mk(2), mk(2)], vec![mk(2)]],
            vec![1.0],
            vec![1.0, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn equal_mass_gives_half_half() {
        let m = two_action_model();
        let rho = StateActionTable::from_values(vec![2.0, 2.0, 0.5, 0.0]);
        let pi = occupation_to_policy(&m, &rho).unwrap();
        assert_eq!(pi.probs[0], vec![0.5, 0.5]);
        assert_eq!(pi.probs[1], vec![1.0, 0.0]);
        assert_eq!(pi.probs[2], Vec::<f64>::new());
    }

    #[test]
    fn zero_mass_state_gets_deterministic_first_action() {
        let m = two_action_model();
        let rho = StateActionTable::from_values(vec![1.0, 0.0, 0.0, 0.0]);
        let pi = occupation_to_policy(&m, &rho).unwrap();
        assert_eq!(pi.probs[1], vec![1.0, 0.0]);
    }

    #[test]
    fn negative_mass_rejected() {
        let m = two_action_model();
        let rho = StateActionTable::from_values(vec![1.0, -1e-9, 0.0, 0.0]);
        let err = occupation_to_policy(&m, &rho).unwrap_err();
        assert!(matches!(err, PolicyError::NegativeMass { state: 0, action: 1, .. }));
    }

    #[test]
    fn wrong_length_rejected() {
        let m = two_action_model();
        let rho = StateActionTable::from_values(vec![1.0]);
        assert!(matches!(
            occupation_to_policy(&m, &rho),
            Err(PolicyError::Length { got: 1, expected: 4 })
        ));
    }

    #[test]
    fn rows_sum_to_one() {
        let m = two_action_model();
        let rho = StateActionTable::from_values(vec![0.3, 0.7000000000000001, 1e-14, 2e-14]);
        let pi = occupation_to_policy(&m, &rho).unwrap();
        for x in m.states() {
            if m.is_absorbing(x) {
                continue;
            }
            let sum: f64 = pi.probs[x.0].iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "state {x:?} sums to {sum}");
        }
        let _ = ActionId(0);
    }

    #[test]
    fn randomized_states_detection() {
        let pi = RandomizedPolicy {
            probs: vec![vec![0.5, 0.5], vec![1.0, 0.0], vec![]],
        };
        assert_eq!(pi.randomized_states(1e-9), vec![StateId(0)]);
    }
}
