//! Shared oracles for the integration tests.
//!
//! Everything here is deliberately independent of the crate's own solver
//! machinery: the LP oracle is a dense primal-dual interior-point method
//! (Mehrotra predictor-corrector over normal equations with a jittered
//! Cholesky), the robust counterpart is rebuilt from scratch by enumerating
//! the vertices of the budgeted uncertainty polytope, and the random model
//! generators construct instances that are transient by construction.

#![allow(dead_code)]

use rcmdp::cmdp::{Action, CmdpModel, StateId};
use rcmdp::cmdp::StateActionTable;
use rcmdp::rng::CounterRng;
use rcmdp::robust::UncertaintySet;

// ---------------------------------------------------------------------------
// Dense linear algebra
// ---------------------------------------------------------------------------

/// Row-major dense matrix.
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// y = A' x
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.cols];
        for (row, &xi) in self.data.chunks(self.cols).zip(x) {
            if xi == 0.0 {
                continue;
            }
            for (yj, aij) in y.iter_mut().zip(row) {
                *yj += aij * xi;
            }
        }
        y
    }

    /// M = A diag(w) A', symmetric `rows x rows`.
    pub fn weighted_gram(&self, w: &[f64]) -> Matrix {
        let m = self.rows;
        let mut out = Matrix::zeros(m, m);
        for i in 0..m {
            let ri = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in i..m {
                let rj = &self.data[j * self.cols..(j + 1) * self.cols];
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += ri[k] * w[k] * rj[k];
                }
                out.set(i, j, acc);
                out.set(j, i, acc);
            }
        }
        out
    }
}

/// In-place lower Cholesky factorization; fails on a nonpositive pivot.
fn cholesky_factor(m: &mut Matrix) -> Result<(), ()> {
    let n = m.rows;
    for j in 0..n {
        let mut d = m.at(j, j);
        for k in 0..j {
            let l = m.at(j, k);
            d -= l * l;
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(());
        }
        let d = d.sqrt();
        m.set(j, j, d);
        for i in (j + 1)..n {
            let mut v = m.at(i, j);
            for k in 0..j {
                v -= m.at(i, k) * m.at(j, k);
            }
            m.set(i, j, v / d);
        }
    }
    Ok(())
}

/// Solves L L' x = b given the factored matrix.
fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l.at(i, k) * y[k];
        }
        y[i] /= l.at(i, i);
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l.at(k, i) * y[k];
        }
        y[i] /= l.at(i, i);
    }
    y
}

/// Factors `M + jitter*I`, escalating the jitter until the pivots hold up.
fn factor_with_jitter(m: &Matrix) -> Result<Matrix, String> {
    let n = m.rows;
    let scale = 1.0
        + (0..n)
            .map(|i| m.at(i, i).abs())
            .fold(0.0_f64, f64::max);
    for &jit in &[0.0, 1e-12, 1e-10, 1e-8, 1e-6] {
        let mut work = Matrix { rows: n, cols: n, data: m.data.clone() };
        for i in 0..n {
            work.add_at(i, i, jit * scale);
        }
        if cholesky_factor(&mut work).is_ok() {
            return Ok(work);
        }
    }
    Err("normal-equation matrix is numerically indefinite".into())
}

// ---------------------------------------------------------------------------
// Interior-point LP oracle
// ---------------------------------------------------------------------------

/// min c'x  subject to  a_eq x = b_eq,  a_in x <= b_in,  x >= 0.
pub struct OracleLp {
    pub c: Vec<f64>,
    pub a_eq: Matrix,
    pub b_eq: Vec<f64>,
    pub a_in: Matrix,
    pub b_in: Vec<f64>,
}

pub struct OracleSolution {
    /// Primal values for the original (pre-slack) variables.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()))
}

/// Mehrotra predictor-corrector on the standard-form embedding
/// `[A_eq 0; A_in I]`. Small and dense; accurate to ~1e-9 in the objective
/// on the well-scaled instances the tests generate.
pub fn solve_oracle_lp(lp: &OracleLp) -> Result<OracleSolution, String> {
    let n_orig = lp.c.len();
    let m_eq = lp.b_eq.len();
    let m_in = lp.b_in.len();
    assert_eq!(lp.a_eq.cols, n_orig);
    assert_eq!(lp.a_eq.rows, m_eq);
    assert_eq!(lp.a_in.cols, n_orig);
    assert_eq!(lp.a_in.rows, m_in);

    let m = m_eq + m_in;
    let n = n_orig + m_in;
    if m == 0 {
        return Err("oracle LP needs at least one row".into());
    }

    let mut a = Matrix::zeros(m, n);
    for i in 0..m_eq {
        for j in 0..n_orig {
            a.set(i, j, lp.a_eq.at(i, j));
        }
    }
    for i in 0..m_in {
        for j in 0..n_orig {
            a.set(m_eq + i, j, lp.a_in.at(i, j));
        }
        a.set(m_eq + i, n_orig + i, 1.0);
    }
    let mut b = lp.b_eq.clone();
    b.extend_from_slice(&lp.b_in);
    let mut c = lp.c.clone();
    c.resize(n, 0.0);

    // Mehrotra starting point: least-norm primal / least-squares dual,
    // shifted into the positive orthant.
    let ones = vec![1.0; n];
    let gram = a.weighted_gram(&ones);
    let chol = factor_with_jitter(&gram)?;
    let x0 = a.tr_matvec(&cholesky_solve(&chol, &b));
    let y0 = cholesky_solve(&chol, &a.matvec(&c));
    let s0: Vec<f64> = {
        let aty = a.tr_matvec(&y0);
        c.iter().zip(&aty).map(|(ci, v)| ci - v).collect()
    };
    let dx = (-x0.iter().cloned().fold(f64::INFINITY, f64::min)).max(0.0) + 1e-2;
    let ds = (-s0.iter().cloned().fold(f64::INFINITY, f64::min)).max(0.0) + 1e-2;
    let mut x: Vec<f64> = x0.iter().map(|v| v + dx).collect();
    let mut s: Vec<f64> = s0.iter().map(|v| v + ds).collect();
    let dot: f64 = x.iter().zip(&s).map(|(a, b)| a * b).sum();
    let sx: f64 = x.iter().sum();
    let ss: f64 = s.iter().sum();
    let bump_x = 0.5 * dot / ss.max(1e-12);
    let bump_s = 0.5 * dot / sx.max(1e-12);
    for v in &mut x {
        *v += bump_x;
    }
    for v in &mut s {
        *v += bump_s;
    }
    let mut y = y0;

    let norm_b = 1.0 + inf_norm(&b);
    let norm_c = 1.0 + inf_norm(&c);

    for iter in 0..150 {
        let ax = a.matvec(&x);
        let r_p: Vec<f64> = b.iter().zip(&ax).map(|(bi, v)| bi - v).collect();
        let aty = a.tr_matvec(&y);
        let r_d: Vec<f64> = (0..n).map(|j| c[j] - aty[j] - s[j]).collect();
        let mu: f64 = x.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        let obj: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();

        if mu <= 1e-11 * (1.0 + obj.abs())
            && inf_norm(&r_p) <= 1e-9 * norm_b
            && inf_norm(&r_d) <= 1e-9 * norm_c
        {
            return Ok(OracleSolution { x: x[..n_orig].to_vec(), objective: obj, iterations: iter });
        }

        if !obj.is_finite() || !mu.is_finite() {
            return Err("interior-point oracle diverged".into());
        }

        // Clamped scaling ratios: unbounded x/s would make the normal
        // matrix arbitrarily ill-conditioned and poison the search
        // direction once complementarity races ahead of feasibility.
        let d2: Vec<f64> =
            x.iter().zip(&s).map(|(xi, si)| (xi / si).clamp(1e-14, 1e14)).collect();
        let gram = a.weighted_gram(&d2);
        let chol = factor_with_jitter(&gram)?;

        // Shared solve for a given complementarity target `t`.
        let newton = |t: &[f64], chol: &Matrix| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let inner: Vec<f64> =
                (0..n).map(|j| d2[j] * r_d[j] - t[j] / s[j]).collect();
            let rhs: Vec<f64> = {
                let ain = a.matvec(&inner);
                r_p.iter().zip(&ain).map(|(r, v)| r + v).collect()
            };
            let dy = cholesky_solve(chol, &rhs);
            let atdy = a.tr_matvec(&dy);
            let dx: Vec<f64> =
                (0..n).map(|j| d2[j] * (atdy[j] - r_d[j]) + t[j] / s[j]).collect();
            let dsv: Vec<f64> = (0..n).map(|j| (t[j] - s[j] * dx[j]) / x[j]).collect();
            (dy, dx, dsv)
        };
        let max_step = |v: &[f64], dv: &[f64]| -> f64 {
            let mut alpha: f64 = 1.0;
            for (vi, di) in v.iter().zip(dv) {
                if *di < 0.0 {
                    alpha = alpha.min(-vi / di);
                }
            }
            alpha
        };

        // Predictor.
        let t_aff: Vec<f64> = x.iter().zip(&s).map(|(xi, si)| -xi * si).collect();
        let (_, dx_aff, ds_aff) = newton(&t_aff, &chol);
        let ap = max_step(&x, &dx_aff);
        let ad = max_step(&s, &ds_aff);
        let mu_aff: f64 = (0..n)
            .map(|j| (x[j] + ap * dx_aff[j]) * (s[j] + ad * ds_aff[j]))
            .sum::<f64>()
            / n as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(1e-8, 1.0);

        // Corrector. A single common step length keeps the primal and dual
        // residuals contracting together with complementarity; split steps
        // let mu collapse while infeasibility persists, which is exactly
        // the stall mode degenerate vertex LPs trigger.
        let t: Vec<f64> = (0..n)
            .map(|j| sigma * mu - x[j] * s[j] - dx_aff[j] * ds_aff[j])
            .collect();
        let (dy, dx, dsv) = newton(&t, &chol);
        let alpha =
            (0.9995 * max_step(&x, &dx).min(max_step(&s, &dsv))).min(1.0);
        for j in 0..n {
            x[j] += alpha * dx[j];
            s[j] += alpha * dsv[j];
        }
        for (yi, di) in y.iter_mut().zip(&dy) {
            *yi += alpha * di;
        }
    }
    Err("interior-point oracle did not converge in 150 iterations".into())
}

// ---------------------------------------------------------------------------
// Budgeted-uncertainty vertex enumeration
// ---------------------------------------------------------------------------

/// All vertices of `{eps : 0 <= eps <= eps_bar, sum(eps) <= gamma}`.
///
/// Every vertex has all coordinates at a bound except at most one, which is
/// fractional only when the budget hyperplane is tight. Enumerates all
/// subsets at their upper bounds plus the budget-tight completions, then
/// dedupes bitwise.
pub fn enumerate_u_vertices(eps_bar: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    let n = eps_bar.len();
    assert!(n <= 20, "vertex enumeration is exponential; keep instances small");
    let mut seen = std::collections::HashSet::new();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut push = |v: Vec<f64>, out: &mut Vec<Vec<f64>>| {
        let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
        if seen.insert(key) {
            out.push(v);
        }
    };
    for mask in 0u32..(1 << n) {
        let mut v = vec![0.0; n];
        let mut total = 0.0;
        for (i, vi) in v.iter_mut().enumerate() {
            if mask & (1 << i) != 0 {
                *vi = eps_bar[i];
                total += eps_bar[i];
            }
        }
        if total <= gamma {
            push(v.clone(), &mut out);
        }
        // Budget-tight completion on one coordinate outside the mask.
        for j in 0..n {
            if mask & (1 << j) != 0 {
                continue;
            }
            let frac = gamma - total;
            if frac > 0.0 && frac < eps_bar[j] {
                let mut w = v.clone();
                w[j] = frac;
                push(w, &mut out);
            }
        }
    }
    out
}

/// Brute-force inner maximization `max_{eps in U} sum(rho * eps)` by
/// scanning every vertex.
pub fn brute_inner_max(eps_bar: &[f64], gamma: f64, rho: &[f64]) -> f64 {
    enumerate_u_vertices(eps_bar, gamma)
        .iter()
        .map(|v| v.iter().zip(rho).map(|(e, r)| e * r).sum::<f64>())
        .fold(0.0_f64, f64::max)
}

// ---------------------------------------------------------------------------
// Robust counterpart via vertex enumeration + interior point
// ---------------------------------------------------------------------------

/// Builds the occupation-measure program from first principles and replaces
/// the robust duration constraint with one inequality per vertex of the
/// uncertainty polytope, then solves it with the interior-point oracle.
///
/// Returns the optimal objective (minimal failure probability).
pub fn vertex_lp_objective(
    model: &CmdpModel,
    u: &UncertaintySet,
    deadline: f64,
) -> Result<f64, String> {
    let pairs = model.pairs();
    let np = pairs.len();
    let non_absorbing: Vec<StateId> =
        model.states().filter(|&x| !model.is_absorbing(x)).collect();
    let row_of: std::collections::HashMap<usize, usize> =
        non_absorbing.iter().enumerate().map(|(r, x)| (x.0, r)).collect();

    // Flow conservation: out-mass minus discounted in-mass equals the
    // initial distribution, one row per non-absorbing state.
    let mut a_eq = Matrix::zeros(non_absorbing.len(), np);
    for (p, &(x, a)) in pairs.iter().enumerate() {
        a_eq.add_at(row_of[&x.0], p, 1.0);
        for &(succ, prob) in &model.action(x, a).transitions {
            if let Some(&r) = row_of.get(&succ.0) {
                a_eq.add_at(r, p, -prob);
            }
        }
    }
    let b_eq: Vec<f64> = non_absorbing.iter().map(|&x| model.beta()[x.0]).collect();

    // One duration constraint per uncertainty vertex.
    assert_eq!(model.num_constraints(), 1, "oracle handles single-constraint models");
    let d: Vec<f64> =
        pairs.iter().map(|&(x, a)| model.action(x, a).dcosts[0]).collect();
    let vertices = enumerate_u_vertices(u.eps_bar().as_slice(), u.gamma());
    let mut a_in = Matrix::zeros(vertices.len(), np);
    for (k, v) in vertices.iter().enumerate() {
        for p in 0..np {
            a_in.set(k, p, d[p] + v[p]);
        }
    }
    let b_in = vec![deadline; vertices.len()];

    let c: Vec<f64> = pairs.iter().map(|&(x, a)| model.action(x, a).cost).collect();
    let sol = solve_oracle_lp(&OracleLp { c, a_eq, b_eq, a_in, b_in })?;
    Ok(sol.objective)
}

// ---------------------------------------------------------------------------
// Random instance generation
// ---------------------------------------------------------------------------

pub fn act(cost: f64, d: f64, transitions: Vec<(usize, f64)>) -> Action {
    Action {
        cost,
        dcosts: vec![d],
        transitions: transitions.into_iter().map(|(s, p)| (StateId(s), p)).collect(),
        time: None,
    }
}

/// Random single-constraint model over `n_nonabs` transient states plus one
/// absorbing state. Every action keeps at least 5% of its mass on a direct
/// jump to the absorbing state, so every policy is transient by
/// construction. Objective costs are in [0, 1], duration costs in [0.5, 2].
pub fn random_transient_model(seed: u64, n_nonabs: usize, max_actions: usize) -> CmdpModel {
    let mut rng = CounterRng::new(seed);
    let absorbing = n_nonabs;
    let mut actions: Vec<Vec<Action>> = Vec::new();
    for _x in 0..n_nonabs {
        let n_act = 1 + rng.next_usize(max_actions);
        let mut list = Vec::new();
        for _a in 0..n_act {
            let mut weights = vec![(absorbing, rng.uniform(0.05, 0.6))];
            let fanout = 1 + rng.next_usize(2.min(n_nonabs));
            for _ in 0..fanout {
                weights.push((rng.next_usize(n_nonabs), rng.uniform(0.1, 1.0)));
            }
            // Merge duplicate successors, then normalize.
            weights.sort_by_key(|&(s, _)| s);
            let mut merged: Vec<(usize, f64)> = Vec::new();
            for (s, w) in weights {
                match merged.last_mut() {
                    Some((ls, lw)) if *ls == s => *lw += w,
                    _ => merged.push((s, w)),
                }
            }
            let total: f64 = merged.iter().map(|&(_, w)| w).sum();
            let transitions: Vec<(usize, f64)> =
                merged.into_iter().map(|(s, w)| (s, w / total)).collect();
            list.push(act(rng.uniform(0.0, 1.0), rng.uniform(0.5, 2.0), transitions));
        }
        actions.push(list);
    }
    // The absorbing state carries a free self-loop, mirroring the library's
    // convention; it contributes no occupation pairs.
    actions.push(vec![act(0.0, 0.0, vec![(absorbing, 1.0)])]);
    let mut beta = vec![0.0; n_nonabs + 1];
    beta[0] = 1.0;
    // Placeholder threshold, replaced by `with_feasible_deadline`.
    CmdpModel::new(vec![absorbing], actions, vec![1e12], beta)
        .expect("generated model is valid")
}

/// Random budgeted uncertainty over a model's pairs: magnitudes up to half
/// the duration cost, budget a fraction of the total magnitude.
pub fn random_uncertainty(model: &CmdpModel, seed: u64, gamma_factor: f64) -> UncertaintySet {
    let mut rng = CounterRng::new(seed);
    let eps_bar = StateActionTable::from_fn(model, |x, a| {
        rng.uniform(0.0, 0.5) * model.action(x, a).dcosts[0]
    });
    let total: f64 = eps_bar.sum();
    UncertaintySet::new(model, eps_bar, gamma_factor * total).expect("valid uncertainty")
}

/// Replaces the placeholder threshold with a feasible one: the minimal
/// robust deadline stretched by `rel_margin`.
pub fn with_feasible_deadline(
    model: CmdpModel,
    u: &UncertaintySet,
    rel_margin: f64,
) -> (CmdpModel, f64) {
    let d_min = rcmdp::robust::minimal_robust_deadline(&model, u, 1e-9)
        .expect("generated models admit a policy");
    let deadline = d_min * (1.0 + rel_margin);
    let model = model.with_thresholds(vec![deadline]).expect("deadline is finite");
    (model, deadline)
}

// ---------------------------------------------------------------------------
// Oracle self-tests (compiled into whichever test target declares `common`)
// ---------------------------------------------------------------------------

#[cfg(test)]
mod oracle_tests {
    use super::*;

    #[test]
    fn ipm_solves_known_inequality_lp() {
        // max x1 + 2 x2 s.t. x1 + x2 <= 4, x2 <= 3  ->  (1, 3), value 7.
        let lp = OracleLp {
            c: vec![-1.0, -2.0],
            a_eq: Matrix::zeros(0, 2),
            b_eq: vec![],
            a_in: Matrix {
                rows: 2,
                cols: 2,
                data: vec![1.0, 1.0, 0.0, 1.0],
            },
            b_in: vec![4.0, 3.0],
        };
        let sol = solve_oracle_lp(&lp).unwrap();
        assert!((sol.objective + 7.0).abs() < 1e-8, "objective {}", sol.objective);
        assert!((sol.x[0] - 1.0).abs() < 1e-7);
        assert!((sol.x[1] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn ipm_solves_known_equality_lp() {
        // min x1 + 3 x2 + x3 s.t. x1 + x2 + x3 = 1, x2 >= 0.2 (as -x2 <= -0.2).
        // Optimum puts 0.8 on x1 or x3 (cost 1) and 0.2 on x2: 0.8 + 0.6 = 1.4.
        let lp = OracleLp {
            c: vec![1.0, 3.0, 1.0],
            a_eq: Matrix { rows: 1, cols: 3, data: vec![1.0, 1.0, 1.0] },
            b_eq: vec![1.0],
            a_in: Matrix { rows: 1, cols: 3, data: vec![0.0, -1.0, 0.0] },
            b_in: vec![-0.2],
        };
        let sol = solve_oracle_lp(&lp).unwrap();
        assert!((sol.objective - 1.4).abs() < 1e-8, "objective {}", sol.objective);
    }

    #[test]
    fn vertex_enumeration_matches_hand_count() {
        // Box [0,1]x[0,2] cut by x+y <= 2: vertices (0,0), (1,0), (0,2),
        // (1,1). Our enumeration may also emit the interior-facet point
        // (0,2) from two constructions; dedupe keeps it single.
        let v = enumerate_u_vertices(&[1.0, 2.0], 2.0);
        let mut got: Vec<(f64, f64)> = v.iter().map(|p| (p[0], p[1])).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, vec![(0.0, 0.0), (0.0, 2.0), (1.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn vertex_enumeration_zero_budget_is_origin() {
        let v = enumerate_u_vertices(&[1.0, 2.0, 3.0], 0.0);
        assert_eq!(v, vec![vec![0.0, 0.0, 0.0]]);
    }

    #[test]
    fn generated_models_are_transient_and_solvable() {
        for seed in 0..5 {
            let model = random_transient_model(seed, 4, 2);
            assert!(rcmdp::cmdp::check_transience(&model));
            let u = random_uncertainty(&model, seed ^ 0xabc, 0.5);
            let (model, deadline) = with_feasible_deadline(model, &u, 0.3);
            let sol = rcmdp::robust::solve_rcmdp(&model, &u, deadline).unwrap();
            assert!(sol.objective.is_finite());
        }
    }
}
