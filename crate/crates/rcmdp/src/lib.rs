//! Robust constrained MDP toolkit for rapid multi-robot deployment.
//!
//! The library solves transient total-cost constrained MDPs through their
//! occupation-measure linear programs, handles budgeted interval uncertainty
//! on the constraint costs via an exact dual reformulation, builds those
//! models from road-map-style deployment graphs, assigns redundant robots to
//! targets optimally, and validates everything with seeded Monte Carlo
//! simulation.
//!
//! Crate layout:
//!
//! * [`cmdp`]: model types, validation, transience, policy extraction.
//! * [`lp`]: deterministic dense two-phase simplex with dual extraction.
//! * `robust`: nominal and robust occupation-measure programs.
//! * `deployment`: safety functions, map schema and generation, model build.
//! * `assignment`: robot-to-target allocation (exact and asymptotic).
//! * `simulator`: seeded Monte Carlo rollouts, single robot and team.
//! * `cli`: the `rcmdp` command-line interface.
//!
//! Determinism is a contract: every public entry point is a pure function of
//! its inputs plus explicit seeds. Runs reproduce byte-for-byte across
//! platforms and thread counts.

pub mod assignment;
pub mod cli;
pub mod cmdp;
pub mod deployment;
pub mod lp;
pub mod rng;
pub mod robust;
pub mod simulator;
