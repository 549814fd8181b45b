//! Semantic model validation with a full violation report.

use super::{check_transience, CmdpModel, StateId, PROB_SUM_TOL};
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// Transition row does not sum to one within [`PROB_SUM_TOL`].
    RowSum { state: usize, action: usize, sum: f64 },
    ProbabilityRange { state: usize, action: usize, target: usize, p: f64 },
    NegativeCost { state: usize, action: usize, value: f64 },
    NegativeConstraintCost { state: usize, action: usize, index: usize, value: f64 },
    /// Absorbing states must have zero objective and constraint costs.
    AbsorbingCost { state: usize, action: usize },
    /// Absorbing states must transition within the absorbing set.
    AbsorbingEscape { state: usize, action: usize, target: usize },
    BetaRange { state: usize, value: f64 },
    BetaSum { sum: f64 },
    BetaOnAbsorbing { state: usize },
    NegativeThreshold { index: usize, value: f64 },
    NotTransient,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, action, sum } => {
                write!(f, "state {state} action {action}: transition row sums to {sum}, expected 1")
            }
            Violation::ProbabilityRange { state, action, target, p } => {
                write!(f, "state {state} action {action}: probability {p} to state {target} outside [0, 1]")
            }
            Violation::NegativeCost { state, action, value } => {
                write!(f, "state {state} action {action}: negative cost {value}")
            }
            Violation::NegativeConstraintCost { state, action, index, value } => {
                write!(f, "state {state} action {action}: negative constraint cost {value} (constraint {index})")
            }
            Violation::AbsorbingCost { state, action } => {
                write!(f, "absorbing state {state} action {action} has nonzero cost")
            }
            Violation::AbsorbingEscape { state, action, target } => {
                write!(f, "absorbing state {state} action {action} escapes to non-absorbing state {target}")
            }
            Violation::BetaRange { state, value } => {
                write!(f, "beta({state}) = {value} outside [0, 1]")
            }
            Violation::BetaSum { sum } => write!(f, "beta sums to {sum}, expected 1"),
            Violation::BetaOnAbsorbing { state } => {
                write!(f, "beta puts mass on absorbing state {state}")
            }
            Violation::NegativeThreshold { index, value } => {
                write!(f, "constraint threshold {index} is negative ({value})")
            }
            Violation::NotTransient => {
                write!(f, "a policy can avoid absorption forever (end component reachable from beta)")
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "model is valid");
        }
        writeln!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Checks every semantic invariant and reports all violations found:
/// stochastic rows, cost signs, absorbing-set closure, initial-distribution
/// shape, threshold signs, and transience.
pub fn validate_model(model: &CmdpModel) -> ValidationReport {
    let mut violations = Vec::new();

    for x in model.states() {
        let absorbing = model.is_absorbing(x);
        for (a, act) in model.actions(x).iter().enumerate() {
            let mut sum = 0.0;
            for &(StateId(y), p) in &act.transitions {
                if !(0.0..=1.0).contains(&p) {
                    violations.push(Violation::ProbabilityRange {
                        state: x.0,
                        action: a,
                        target: y,
                        p,
                    });
                }
                sum += p;
                if absorbing && !model.is_absorbing(StateId(y)) && p > 0.0 {
                    violations.push(Violation::AbsorbingEscape {
                        state: x.0,
                        action: a,
                        target: y,
                    });
                }
            }
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                violations.push(Violation::RowSum { state: x.0, action: a, sum });
            }
            if act.cost < 0.0 {
                violations.push(Violation::NegativeCost { state: x.0, action: a, value: act.cost });
            }
            for (i, &d) in act.dcosts.iter().enumerate() {
                if d < 0.0 {
                    violations.push(Violation::NegativeConstraintCost {
                        state: x.0,
                        action: a,
                        index: i,
                        value: d,
                    });
                }
            }
            if absorbing && (act.cost != 0.0 || act.dcosts.iter().any(|&d| d != 0.0)) {
                violations.push(Violation::AbsorbingCost { state: x.0, action: a });
            }
        }
    }

    let mut beta_sum = 0.0;
    for (x, &b) in model.beta().iter().enumerate() {
        if !(0.0..=1.0).contains(&b) {
            violations.push(Violation::BetaRange { state: x, value: b });
        }
        if b > 0.0 && model.is_absorbing(StateId(x)) {
            violations.push(Violation::BetaOnAbsorbing { state: x });
        }
        beta_sum += b;
    }
    if (beta_sum - 1.0).abs() > PROB_SUM_TOL {
        violations.push(Violation::BetaSum { sum: beta_sum });
    }

    for (i, &d) in model.thresholds().iter().enumerate() {
        if d < 0.0 {
            violations.push(Violation::NegativeThreshold { index: i, value: d });
        }
    }

    // Transience is only meaningful once rows are probabilistic; skip it when
    // the row structure is already broken to avoid misleading reports.
    if violations.is_empty() && !check_transience(model) {
        violations.push(Violation::NotTransient);
    }

    ValidationReport { violations }
}
