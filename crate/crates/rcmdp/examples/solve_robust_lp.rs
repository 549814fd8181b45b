//! Solves a tiny hand-built constrained MDP with an uncertain duration
//! budget, showing the core solver API without any map machinery.
//!
//! A courier at the depot chooses between an expressway (fast but failure
//! prone) and a backroad (slow but safe). Failing lands in a sink state
//! that charges one unit of objective cost, so the optimal objective is the
//! probability of losing the parcel. The duration budget makes the choice
//! interesting: loose budgets buy safety, tight ones force risk.
//!
//! Run with: cargo run --example solve_robust_lp

use rcmdp::cmdp::{Action, CmdpModel, StateActionTable};
use rcmdp::robust::{solve_rcmdp, UncertaintySet};

const DEPOT: usize = 0;
const SINK: usize = 1;
const DELIVERED: usize = 2;

fn courier_model() -> CmdpModel {
    let expressway = Action {
        cost: 0.0,
        dcosts: vec![2.0],
        transitions: vec![(rcmdp::cmdp::StateId(DELIVERED), 0.7), (rcmdp::cmdp::StateId(SINK), 0.3)],
        time: None,
    };
    let backroad = Action {
        cost: 0.0,
        dcosts: vec![5.0],
        transitions: vec![(rcmdp::cmdp::StateId(DELIVERED), 0.95), (rcmdp::cmdp::StateId(SINK), 0.05)],
        time: None,
    };
    // The sink charges the objective and then terminates.
    let report_loss = Action {
        cost: 1.0,
        dcosts: vec![0.0],
        transitions: vec![(rcmdp::cmdp::StateId(DELIVERED), 1.0)],
        time: None,
    };
    // Absorbing states still carry one free action (their self-loop).
    let stay = Action {
        cost: 0.0,
        dcosts: vec![0.0],
        transitions: vec![(rcmdp::cmdp::StateId(DELIVERED), 1.0)],
        time: None,
    };
    CmdpModel::new(
        vec![DELIVERED],
        vec![vec![expressway, backroad], vec![report_loss], vec![stay]],
        vec![5.0],
        vec![1.0, 0.0, 0.0],
    )
    .expect("well-formed model")
}

fn main() {
    let model = courier_model();
    // Durations may each run over by up to these amounts, but the total
    // overrun is capped by the budget.
    let eps_bar = StateActionTable::from_values(vec![1.0, 2.5, 0.0]);
    let u = UncertaintySet::new(&model, eps_bar, 1.5).expect("valid uncertainty set");

    println!("deadline  P(loss)   pi(express)  pi(backroad)  worst-case duration");
    for deadline in [2.0, 3.0, 4.0, 4.5, 5.0, 6.5, 8.0] {
        match solve_rcmdp(&model, &u, deadline) {
            Ok(sol) => {
                let pi = &sol.policy.probs[DEPOT];
                println!(
                    "{deadline:>8}  {:<8.4} {:>10.4}  {:>12.4}  {:>19.4}",
                    sol.objective, pi[0], pi[1], sol.worst_case_constraint_value
                );
            }
            Err(err) => println!("{deadline:>8}  {err}"),
        }
    }
    println!();
    println!("Between the two pure travel times the optimal policy mixes the");
    println!("routes, spending exactly the duration budget in the worst case.");
}
