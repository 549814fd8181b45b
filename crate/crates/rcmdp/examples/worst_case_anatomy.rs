//! Dissects the adversary's side of a robust solution: which durations the
//! worst-case perturbation attacks, and what that does to rollouts.
//!
//! Against a fixed policy the adversary solves a fractional knapsack: it
//! spends the budget on the state-action pairs with the highest occupation,
//! fully perturbing a prefix, putting the remainder on one pair, and
//! leaving the rest nominal.
//!
//! Run with: cargo run --example worst_case_anatomy

use rcmdp::deployment::{build_single_robot_rcmdp, generate_map, MapGenConfig};
use rcmdp::robust::{inner_max_oracle, solve_rcmdp};
use rcmdp::simulator::{run_single, EpsMode};

fn main() {
    let cfg = MapGenConfig { seed: 1, ..MapGenConfig::default() };
    let map = generate_map(&cfg).expect("map generates");
    let target = map.targets[0];
    let built = build_single_robot_rcmdp(&map, target).expect("compile");
    let u = built.uncertainty_with_factor(0.25).expect("uncertainty");
    let deadline = 18.5;
    let sol = solve_rcmdp(&built.model, &u, deadline).expect("solve");

    let inner = inner_max_oracle(&u, &sol.rho);
    let nominal_duration: f64 = built
        .model
        .pairs()
        .iter()
        .zip(sol.rho.iter())
        .map(|(&(x, a), &rho)| built.model.action(x, a).dcosts[0] * rho)
        .sum();
    println!("deadline {deadline}");
    println!("expected duration, nominal:     {nominal_duration:.4}");
    println!("adversarial addition:           {:.4}", inner.value);
    println!("certified worst case:           {:.4}", sol.worst_case_constraint_value);
    println!();

    let mut full = 0;
    let mut fractional = 0;
    let mut untouched = 0;
    for (i, &e) in inner.eps_star.iter().enumerate() {
        let bound = u.eps_bar()[rcmdp::cmdp::PairId(i)];
        if e <= 0.0 {
            untouched += 1;
        } else if (e - bound).abs() <= 1e-12 {
            full += 1;
        } else {
            fractional += 1;
        }
    }
    println!(
        "perturbation structure over {} pairs: {full} at their bound, \
         {fractional} partial, {untouched} untouched",
        inner.eps_star.len()
    );
    println!();

    // The perturbation only stretches durations; it cannot change where the
    // robot ends up. Rollouts confirm: same success, longer missions.
    for (name, mode) in [
        ("nominal", EpsMode::Nominal),
        ("adversarial", EpsMode::Fixed(inner.eps_star.as_slice().to_vec())),
    ] {
        let run = run_single(
            &built.model,
            &sol.policy,
            built.sink_pair,
            &mode,
            3,
            20_000,
            Some(1.0 - sol.objective),
        )
        .expect("rollout");
        println!(
            "{name:<12} rollouts: success {:.4}, mean duration {:.4}",
            run.stats.empirical_success_prob, run.stats.mean_duration
        );
    }
}
