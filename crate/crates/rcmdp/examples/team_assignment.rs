//! Allocates a team of robots over targets with known per-robot failure
//! probabilities, comparing the exact branch-and-bound search against the
//! relaxation-and-round algorithm as the team grows.
//!
//! The objective is the probability that every target is reached by at
//! least one of its robots: prod_j (1 - pf_j^(k_j + 1)) with k_j extra
//! robots on target j.
//!
//! Run with: cargo run --example team_assignment

use rcmdp::assignment::{preprocess_pf, solve_rta, solve_ta_approx, solve_ta_exact};

fn main() {
    let pf = [0.3, 0.5, 0.7];
    println!("per-target failure probabilities: {pf:?}");
    println!();
    println!("team  exact counts   exact phi  rounded phi  log gap");
    for team in [3usize, 4, 6, 9, 12, 24, 48, 60] {
        let pre = preprocess_pf(&pf, team).expect("preprocess");
        let exact = match &pre.instance {
            None => pre.expand(None),
            Some(inst) => pre.expand(Some(&solve_ta_exact(inst))),
        };
        let rounded = pre
            .instance
            .as_ref()
            .filter(|inst| inst.team() >= 2 * inst.num_targets())
            .map(|inst| pre.expand(Some(&solve_ta_approx(inst).expect("approx"))));
        match rounded {
            Some(r) => println!(
                "{team:>4}  {:<13}  {:>9.5}  {:>11.5}  {:>8.2e}",
                format!("{:?}", exact.counts()),
                exact.objective,
                r.objective,
                exact.objective.ln() - r.objective.ln()
            ),
            None => println!(
                "{team:>4}  {:<13}  {:>9.5}  {:>11}  {:>8}",
                format!("{:?}", exact.counts()),
                exact.objective,
                "-",
                "-"
            ),
        }
    }

    // The continuous relaxation behind the rounding step: a single
    // multiplier equalizes the marginal value of one more robot across
    // targets.
    let team = 60;
    let pre = preprocess_pf(&pf, team).expect("preprocess");
    let inst = pre.instance.as_ref().expect("instance");
    let rta = solve_rta(inst).expect("relaxation");
    println!();
    println!("continuous relaxation at team {team}:");
    println!("  multiplier {:.6}", rta.lambda);
    for (p, k) in pf.iter().zip(rta.k_star.iter()) {
        println!("  pf {p}: {k:.3} extra robots (real-valued)");
    }
    println!();
    println!("Below two robots per target the relaxation is undefined and the");
    println!("exact search is used; above it, rounding the relaxation closes");
    println!("the optimality gap as the team grows.");
}
