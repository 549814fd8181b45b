//! Dense linear programming with deterministic pivoting.
//!
//! The solver is a two-phase primal simplex on a dense tableau. It is built
//! for reproducibility rather than raw scale: identical inputs produce bit-
//! identical outputs on every platform and at every thread count, because the
//! pivot rules are fully deterministic (largest reduced cost, ties broken by
//! lowest column index; ratio ties broken by lowest basis variable index) and
//! Bland's rule takes over after a run of degenerate pivots to guarantee
//! termination.
//!
//! Problem form:
//!
//! ```text
//! minimize    c'x
//! subject to  A x  = b          (eq rows)
//!             G x <= h          (ineq rows)
//!             l <= x <= u       (l defaults to 0, u defaults to +inf)
//! ```
//!
//! Dual sign convention: equality duals are free; inequality duals are <= 0,
//! so at optimality `c'x = b'y_eq + h'y_ineq + (bound terms)`. The duals of
//! internally generated upper-bound rows are folded into the reported
//! residuals, not exposed.

mod simplex;

use serde::Serialize;
use thiserror::Error;

/// Feasibility tolerance: a point is accepted as feasible when every
/// constraint violation is below this.
pub const FEAS_TOL: f64 = 1e-9;
/// Optimality tolerance on reduced costs.
pub const OPT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
pub(crate) const DEGENERATE_SWITCH: usize = 100;

#[derive(Clone, Debug)]
pub struct LinearProgram {
    /// Objective coefficients; the solver minimizes.
    pub objective: Vec<f64>,
    /// Equality rows `(coefficients, rhs)`.
    pub eq: Vec<(Vec<f64>, f64)>,
    /// Less-or-equal rows `(coefficients, rhs)`.
    pub ineq: Vec<(Vec<f64>, f64)>,
    /// Per-variable lower bounds; empty means all zero.
    pub lower: Vec<f64>,
    /// Per-variable upper bounds; empty or `None` entries mean unbounded.
    pub upper: Vec<Option<f64>>,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            eq: Vec::new(),
            ineq: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.eq.push((coeffs, rhs));
    }

    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.ineq.push((coeffs, rhs));
    }

    /// Rejects shape errors and non-finite data before any arithmetic runs.
    pub fn check_shape(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if n == 0 {
            return Err(LpError::Shape("objective has no variables".into()));
        }
        let finite = |v: f64| v.is_finite();
        if !self.objective.iter().copied().all(finite) {
            return Err(LpError::Shape("objective has a non-finite entry".into()));
        }
        for (i, (row, rhs)) in self.eq.iter().enumerate() {
            if row.len() != n {
                return Err(LpError::Shape(format!(
                    "eq row {i} has {} coefficients, expected {n}",
                    row.len()
                )));
            }
            if !row.iter().copied().all(finite) || !rhs.is_finite() {
                return Err(LpError::Shape(format!("eq row {i} has a non-finite entry")));
            }
        }
        for (i, (row, rhs)) in self.ineq.iter().enumerate() {
            if row.len() != n {
                return Err(LpError::Shape(format!(
                    "ineq row {i} has {} coefficients, expected {n}",
                    row.len()
                )));
            }
            if !row.iter().copied().all(finite) || !rhs.is_finite() {
                return Err(LpError::Shape(format!("ineq row {i} has a non-finite entry")));
            }
        }
        if !self.lower.is_empty() && self.lower.len() != n {
            return Err(LpError::Shape("lower bound vector length mismatch".into()));
        }
        if !self.lower.iter().copied().all(finite) {
            return Err(LpError::Shape("lower bound has a non-finite entry".into()));
        }
        if !self.upper.is_empty() && self.upper.len() != n {
            return Err(LpError::Shape("upper bound vector length mismatch".into()));
        }
        for (j, u) in self.upper.iter().enumerate() {
            if let Some(u) = u {
                if !u.is_finite() {
                    return Err(LpError::Shape(format!("upper bound {j} is non-finite")));
                }
                let l = self.lower.get(j).copied().unwrap_or(0.0);
                if *u < l {
                    return Err(LpError::Shape(format!("upper bound {j} is below lower bound")));
                }
            }
        }
        Ok(())
    }

    /// Writes the program in LP text format (readable by CPLEX, Gurobi, glpk)
    /// for offline cross-checks. Coefficients are printed with shortest
    /// round-trip formatting, so the file is lossless.
    pub fn to_lp_format(&self) -> String {
        fn term(buf: &mut String, first: &mut bool, coeff: f64, var: usize) {
            if coeff == 0.0 {
                return;
            }
            if *first {
                if coeff < 0.0 {
                    buf.push_str("- ");
                }
                *first = false;
            } else if coeff < 0.0 {
                buf.push_str(" - ");
            } else {
                buf.push_str(" + ");
            }
            let a = coeff.abs();
            buf.push_str(&format!("{a} x{var}"));
        }

        let mut out = String::new();
        out.push_str("Minimize\n obj: ");
        let mut first = true;
        for (j, &c) in self.objective.iter().enumerate() {
            term(&mut out, &mut first, c, j);
        }
        if first {
            out.push('0');
        }
        out.push_str("\nSubject To\n");
        for (i, (row, rhs)) in self.eq.iter().enumerate() {
            out.push_str(&format!(" e{i}: "));
            let mut first = true;
            for (j, &c) in row.iter().enumerate() {
                term(&mut out, &mut first, c, j);
            }
            if first {
                out.push('0');
            }
            out.push_str(&format!(" = {rhs}\n"));
        }
        for (i, (row, rhs)) in self.ineq.iter().enumerate() {
            out.push_str(&format!(" c{i}: "));
            let mut first = true;
            for (j, &c) in row.iter().enumerate() {
                term(&mut out, &mut first, c, j);
            }
            if first {
                out.push('0');
            }
            out.push_str(&format!(" <= {rhs}\n"));
        }
        out.push_str("Bounds\n");
        for j in 0..self.num_vars() {
            let l = self.lower.get(j).copied().unwrap_or(0.0);
            match self.upper.get(j).copied().flatten() {
                Some(u) => out.push_str(&format!(" {l} <= x{j} <= {u}\n")),
                None => out.push_str(&format!(" x{j} >= {l}\n")),
            }
        }
        out.push_str("End\n");
        out
    }

    pub fn solve(&self) -> Result<LpOutcome, LpError> {
        self.check_shape()?;
        simplex::solve(self)
    }
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    /// Unwraps the optimal solution; used where the caller has already ruled
    /// out the other outcomes.
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

/// Primal-dual solution with self-reported certification residuals.
#[derive(Clone, Debug, Serialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Duals of `eq` rows, free sign.
    pub dual_eq: Vec<f64>,
    /// Duals of `ineq` rows; nonpositive at optimality.
    pub dual_ineq: Vec<f64>,
    /// Largest constraint or bound violation at `x`.
    pub primal_residual: f64,
    /// Largest violation of the dual sign conditions (ineq duals <= 0 and the
    /// per-variable reduced-cost sign pattern).
    pub dual_residual: f64,
    /// Largest complementary-slackness product.
    pub comp_slackness: f64,
    /// `|primal objective - dual objective|`.
    pub duality_gap: f64,
    pub pivots: usize,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Shape(String),
    #[error("numerical failure in simplex: {0}")]
    Numerical(String),
}
