//! Two-phase dense tableau simplex.
//!
//! Pivot rules are deterministic: entering column by most negative reduced
//! cost with lowest-index tie-breaking, leaving row by minimum ratio with
//! lowest-basis-index tie-breaking. After [`DEGENERATE_SWITCH`] consecutive
//! degenerate pivots the entering rule switches to Bland's (lowest eligible
//! index), which cannot cycle; a non-degenerate pivot switches back.

use super::{LinearProgram, LpError, LpOutcome, LpSolution, DEGENERATE_SWITCH, OPT_TOL};

/// Pivot elements smaller than this are never used.
const PIV_TOL: f64 = 1e-9;
/// A pivot whose ratio is below this is counted as degenerate.
const DEGEN_TOL: f64 = 1e-12;

struct Tableau {
    /// Row-major data, `(m + 2) x w`; rows `m` and `m + 1` are the phase-1
    /// and phase-2 cost rows, column `w - 1` is the rhs.
    data: Vec<f64>,
    w: usize,
    m: usize,
    basis: Vec<usize>,
    /// Redundant rows discovered after phase 1; excluded from pivoting.
    dead: Vec<bool>,
    /// First artificial column; columns at or past this never enter.
    art0: usize,
    pivots: usize,
    degenerate_streak: usize,
}

impl Tableau {
    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.w..(r + 1) * self.w]
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.w + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.w - 1)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.w;
        let inv = 1.0 / self.at(pr, pc);
        let start = pr * w;
        for v in &mut self.data[start..start + w] {
            *v *= inv;
        }
        self.data[start + pc] = 1.0;

        let pivot_row: Vec<f64> = self.row(pr).to_vec();
        for r in 0..self.m + 2 {
            if r == pr {
                continue;
            }
            let factor = self.at(r, pc);
            if factor == 0.0 {
                continue;
            }
            let base = r * w;
            for (j, &p) in pivot_row.iter().enumerate() {
                self.data[base + j] -= factor * p;
            }
            self.data[base + pc] = 0.0;
            // Keep the rhs invariant (>= 0) against roundoff drift.
            let rhs = &mut self.data[base + w - 1];
            if r < self.m && *rhs < 0.0 && *rhs > -1e-11 {
                *rhs = 0.0;
            }
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    fn choose_entering(&self, cost_row: usize, bland: bool) -> Option<usize> {
        let row = self.row(cost_row);
        if bland {
            (0..self.art0).find(|&j| row[j] < -OPT_TOL)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for (j, &r) in row.iter().enumerate().take(self.art0) {
                if r < -OPT_TOL && best.is_none_or(|(_, b)| r < b) {
                    best = Some((j, r));
                }
            }
            best.map(|(j, _)| j)
        }
    }

    /// Two-pass minimum-ratio test. Among rows whose ratio lies within a
    /// tolerance band of the minimum, the numerically largest pivot element
    /// wins (ties by smallest basis index): picking a near-tolerance pivot
    /// from the tied set would amplify roundoff by its reciprocal and can
    /// walk the method onto an infeasible basis. Under Bland's rule the
    /// plain lexicographic (ratio, basis index) test is kept, preserving
    /// its anti-cycling guarantee.
    fn choose_leaving(&self, col: usize, bland: bool) -> Option<usize> {
        let mut theta: Option<f64> = None;
        for r in 0..self.m {
            if self.dead[r] {
                continue;
            }
            let a = self.at(r, col);
            if a <= PIV_TOL {
                continue;
            }
            let ratio = self.rhs(r).max(0.0) / a;
            if theta.is_none_or(|t| ratio < t) {
                theta = Some(ratio);
            }
        }
        let theta = theta?;
        let band = if bland { theta } else { theta + 1e-9 * (1.0 + theta) };
        let mut best: Option<(f64, usize, usize)> = None;
        for r in 0..self.m {
            if self.dead[r] {
                continue;
            }
            let a = self.at(r, col);
            if a <= PIV_TOL {
                continue;
            }
            let ratio = self.rhs(r).max(0.0) / a;
            if ratio <= band {
                let key = if bland { (ratio, self.basis[r]) } else { (-a, self.basis[r]) };
                match best {
                    Some((bk, bb, _)) if (bk, bb) <= key => {}
                    _ => best = Some((key.0, key.1, r)),
                }
            }
        }
        best.map(|(_, _, r)| r)
    }

    /// Runs simplex iterations against one cost row. `Ok(true)` means optimal,
    /// `Ok(false)` means unbounded.
    fn iterate(&mut self, cost_row: usize, max_pivots: usize) -> Result<bool, LpError> {
        loop {
            if self.pivots > max_pivots {
                return Err(LpError::Numerical(format!(
                    "pivot limit {max_pivots} exceeded"
                )));
            }
            let bland = self.degenerate_streak >= DEGENERATE_SWITCH;
            let Some(col) = self.choose_entering(cost_row, bland) else {
                return Ok(true);
            };
            let Some(row) = self.choose_leaving(col, bland) else {
                return Ok(false);
            };
            let ratio = self.rhs(row).max(0.0) / self.at(row, col);
            if ratio <= DEGEN_TOL {
                self.degenerate_streak += 1;
            } else {
                self.degenerate_streak = 0;
            }
            self.pivot(row, col);
        }
    }
}

/// Dense LU factorization with partial pivoting, used to recompute the
/// optimal basic solution and duals from original data. The tableau's
/// values accumulate roundoff over pivots; solving the basis system
/// directly removes that drift from the reported solution.
struct Lu {
    n: usize,
    /// Row-major combined L (unit diagonal, below) and U (on/above).
    data: Vec<f64>,
    /// Row permutation: factored row i came from input row `perm[i]`.
    perm: Vec<usize>,
}

fn lu_factor(mut data: Vec<f64>, n: usize) -> Option<Lu> {
    let scale = 1.0 + data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pr, mut pv) = (k, data[k * n + k].abs());
        for r in (k + 1)..n {
            let v = data[r * n + k].abs();
            if v > pv {
                (pr, pv) = (r, v);
            }
        }
        if pv <= 1e-13 * scale {
            return None;
        }
        if pr != k {
            perm.swap(pr, k);
            for j in 0..n {
                data.swap(pr * n + j, k * n + j);
            }
        }
        let pivot = data[k * n + k];
        for r in (k + 1)..n {
            let f = data[r * n + k] / pivot;
            data[r * n + k] = f;
            if f != 0.0 {
                for j in (k + 1)..n {
                    data[r * n + j] -= f * data[k * n + j];
                }
            }
        }
    }
    Some(Lu { n, data, perm })
}

impl Lu {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.data[i * n + k] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.data[i * n + k] * y[k];
            }
            y[i] /= self.data[i * n + i];
        }
        y
    }

    /// Solve with one step of iterative refinement against `a` (row-major).
    fn solve_refined(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = self.solve(b);
        let mut r = b.to_vec();
        for i in 0..n {
            let row = &a[i * n..(i + 1) * n];
            r[i] -= row.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
        }
        let d = self.solve(&r);
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
        x
    }
}

/// Rows in standard original-space form; upper bounds become trailing rows.
struct Standardized {
    n: usize,
    lower: Vec<f64>,
    eq: Vec<(Vec<f64>, f64)>,
    /// User inequality rows followed by upper-bound rows.
    ineq: Vec<(Vec<f64>, f64)>,
    n_user_ineq: usize,
}

fn standardize(lp: &LinearProgram) -> Standardized {
    let n = lp.num_vars();
    let lower = if lp.lower.is_empty() {
        vec![0.0; n]
    } else {
        lp.lower.clone()
    };
    let mut ineq = lp.ineq.clone();
    let n_user_ineq = ineq.len();
    if !lp.upper.is_empty() {
        for (j, u) in lp.upper.iter().enumerate() {
            if let Some(u) = u {
                let mut row = vec![0.0; n];
                row[j] = 1.0;
                ineq.push((row, *u));
            }
        }
    }
    Standardized {
        n,
        lower,
        eq: lp.eq.clone(),
        ineq,
        n_user_ineq,
    }
}

pub(super) fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    let std = standardize(lp);
    let n = std.n;
    let m_eq = std.eq.len();
    let m_ineq = std.ineq.len();
    let m = m_eq + m_ineq;

    // Shift x = l + z so z >= 0; rhs values move by row . l.
    let shifted_rhs = |row: &[f64], rhs: f64| -> f64 {
        rhs - row.iter().zip(&std.lower).map(|(a, l)| a * l).sum::<f64>()
    };

    // Row layout: eq rows then ineq rows. Sign-normalize so rhs >= 0; each
    // ineq row gets a slack column, rows without a usable identity column get
    // an artificial.
    let mut sigma = vec![1.0f64; m];
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m);
    for (row, rhs) in std.eq.iter().chain(std.ineq.iter()) {
        rows.push((row.clone(), shifted_rhs(row, *rhs)));
    }
    for (i, (_, rhs)) in rows.iter().enumerate() {
        if *rhs < 0.0 {
            sigma[i] = -1.0;
        }
    }

    let slack0 = n;
    let n_slack = m_ineq;
    let art0 = slack0 + n_slack;
    // Artificials: all eq rows, plus ineq rows whose slack sign is negative.
    let mut art_col: Vec<Option<usize>> = vec![None; m];
    let mut n_art = 0;
    for i in 0..m {
        let is_ineq = i >= m_eq;
        let needs_art = !is_ineq || sigma[i] < 0.0;
        if needs_art {
            art_col[i] = Some(art0 + n_art);
            n_art += 1;
        }
    }
    let ncols = art0 + n_art;
    let w = ncols + 1;

    let mut t = Tableau {
        data: vec![0.0; (m + 2) * w],
        w,
        m,
        basis: vec![0; m],
        dead: vec![false; m],
        art0,
        pivots: 0,
        degenerate_streak: 0,
    };

    for (i, (row, rhs)) in rows.iter().enumerate() {
        let base = i * w;
        for (j, &a) in row.iter().enumerate() {
            t.data[base + j] = sigma[i] * a;
        }
        if i >= m_eq {
            t.data[base + slack0 + (i - m_eq)] = sigma[i];
        }
        if let Some(a) = art_col[i] {
            t.data[base + a] = 1.0;
        }
        t.data[base + w - 1] = sigma[i] * rhs;
        t.basis[i] = match art_col[i] {
            Some(a) => a,
            None => slack0 + (i - m_eq),
        };
    }

    // Phase-1 cost row: reduced costs of min(sum of artificials) under the
    // initial basis, i.e. the negated column sums over artificial rows.
    {
        let base1 = m * w;
        for (i, ac) in art_col.iter().enumerate() {
            if ac.is_none() {
                continue;
            }
            for j in 0..w {
                if j < art0 || j == w - 1 {
                    t.data[base1 + j] -= t.at(i, j);
                }
            }
        }
    }
    // Phase-2 cost row starts as the raw objective (initial basics all have
    // zero objective cost).
    {
        let base2 = (m + 1) * w;
        for j in 0..n {
            t.data[base2 + j] = lp.objective[j];
        }
    }

    let rhs_scale = rows
        .iter()
        .map(|(_, rhs)| rhs.abs())
        .fold(1.0f64, f64::max);
    let max_pivots = 10_000 + 50 * (m + ncols);

    if n_art > 0 {
        if !t.iterate(m, max_pivots)? {
            return Err(LpError::Numerical(
                "phase 1 reported unbounded; artificial objective is bounded below".into(),
            ));
        }
        let z1 = -t.rhs(m);
        if z1 > 1e-8 * rhs_scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Pivot basic artificials out; rows that offer no pivot are redundant.
        for r in 0..m {
            if t.basis[r] < art0 {
                continue;
            }
            let col = (0..art0).find(|&j| t.at(r, j).abs() > PIV_TOL);
            match col {
                Some(c) => t.pivot(r, c),
                None => {
                    t.dead[r] = true;
                    let base = r * w;
                    for v in &mut t.data[base..base + w] {
                        *v = 0.0;
                    }
                }
            }
        }
    }

    t.degenerate_streak = 0;
    if !t.iterate(m + 1, max_pivots)? {
        return Ok(LpOutcome::Unbounded);
    }

    // Recover z, then x = l + z. Basic values (and below, duals) are
    // recomputed from the original rows by solving the basis system with a
    // refined LU: tableau entries drift by a factor per pivot, while the
    // basis system is built from unmodified input data. The drifted tableau
    // values remain as a fallback if the basis matrix is numerically
    // singular (possible after a forced near-tolerance pivot); the
    // certification below then decides whether they are acceptable.
    let live: Vec<usize> = (0..m).filter(|&r| !t.dead[r]).collect();
    let k = live.len();
    let coeff = |r: usize, jc: usize| -> f64 {
        if jc < n {
            rows[r].0[jc]
        } else if jc < art0 {
            if r == m_eq + (jc - slack0) {
                1.0
            } else {
                0.0
            }
        } else if art_col[r] == Some(jc) {
            sigma[r]
        } else {
            0.0
        }
    };
    let mut bmat = vec![0.0; k * k];
    for (ri, &r) in live.iter().enumerate() {
        for (ci, &rc) in live.iter().enumerate() {
            bmat[ri * k + ci] = coeff(r, t.basis[rc]);
        }
    }
    let lu = lu_factor(bmat.clone(), k);

    let mut z = vec![0.0; ncols];
    match &lu {
        Some(f) => {
            let b: Vec<f64> = live.iter().map(|&r| rows[r].1).collect();
            let zb = f.solve_refined(&bmat, &b);
            for (ci, &r) in live.iter().enumerate() {
                z[t.basis[r]] = zb[ci].max(0.0);
            }
        }
        None => {
            for &r in &live {
                z[t.basis[r]] = t.rhs(r).max(0.0);
            }
        }
    }
    let x: Vec<f64> = (0..n).map(|j| std.lower[j] + z[j]).collect();
    let objective: f64 = lp
        .objective
        .iter()
        .zip(&x)
        .map(|(c, xj)| c * xj)
        .sum();

    // Duals from the final reduced costs. For an inequality row the slack
    // column carries -y directly; for an equality row the artificial column
    // carries -y of the sign-normalized row.
    let cost2 = t.row(m + 1).to_vec();
    let mut dual_all_ineq = vec![0.0; m_ineq];
    for i in 0..m_ineq {
        let row_idx = m_eq + i;
        if !t.dead[row_idx] {
            dual_all_ineq[i] = -cost2[slack0 + i];
        }
    }
    let mut dual_eq = vec![0.0; m_eq];
    for (i, dual) in dual_eq.iter_mut().enumerate() {
        if !t.dead[i] {
            if let Some(a) = art_col[i] {
                *dual = -sigma[i] * cost2[a];
            }
        }
    }

    // Exact duals from the transposed basis system, same rationale as the
    // primal re-solve; dead (redundant) rows keep zero duals.
    if lu.is_some() {
        let mut bt = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                bt[i * k + j] = bmat[j * k + i];
            }
        }
        if let Some(f) = lu_factor(bt.clone(), k) {
            let cb: Vec<f64> = live
                .iter()
                .map(|&r| {
                    let jc = t.basis[r];
                    if jc < n {
                        lp.objective[jc]
                    } else {
                        0.0
                    }
                })
                .collect();
            let y = f.solve_refined(&bt, &cb);
            for (ri, &r) in live.iter().enumerate() {
                if r < m_eq {
                    dual_eq[r] = y[ri];
                } else {
                    dual_all_ineq[r - m_eq] = y[ri];
                }
            }
        }
    }

    // Certification residuals in original space.
    let mut primal_residual = 0.0f64;
    for (row, rhs) in &std.eq {
        let lhs: f64 = row.iter().zip(&x).map(|(a, v)| a * v).sum();
        primal_residual = primal_residual.max((lhs - rhs).abs());
    }
    for (row, rhs) in &std.ineq {
        let lhs: f64 = row.iter().zip(&x).map(|(a, v)| a * v).sum();
        primal_residual = primal_residual.max(lhs - rhs);
    }
    for (lo, xj) in std.lower.iter().zip(&x) {
        primal_residual = primal_residual.max(lo - xj);
    }

    // Reduced costs rc = c - A'y_eq - G'y_ineq over all rows.
    let mut rc = lp.objective.clone();
    for (i, (row, _)) in std.eq.iter().enumerate() {
        let y = dual_eq[i];
        if y != 0.0 {
            for (j, &a) in row.iter().enumerate() {
                rc[j] -= y * a;
            }
        }
    }
    for (i, (row, _)) in std.ineq.iter().enumerate() {
        let y = dual_all_ineq[i];
        if y != 0.0 {
            for (j, &a) in row.iter().enumerate() {
                rc[j] -= y * a;
            }
        }
    }

    let mut dual_residual = 0.0f64;
    let mut comp_slackness = 0.0f64;
    for (i, (row, rhs)) in std.ineq.iter().enumerate() {
        let y = dual_all_ineq[i];
        dual_residual = dual_residual.max(y);
        let slack: f64 = rhs - row.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>();
        comp_slackness = comp_slackness.max((y * slack).abs());
    }
    for j in 0..n {
        dual_residual = dual_residual.max(-rc[j]);
        comp_slackness = comp_slackness.max((rc[j] * (x[j] - std.lower[j])).abs());
    }

    let mut dual_obj = 0.0f64;
    for (i, (_, rhs)) in std.eq.iter().enumerate() {
        dual_obj += dual_eq[i] * rhs;
    }
    for (i, (_, rhs)) in std.ineq.iter().enumerate() {
        dual_obj += dual_all_ineq[i] * rhs;
    }
    for (r, lo) in rc.iter().zip(&std.lower) {
        dual_obj += r * lo;
    }
    let duality_gap = (objective - dual_obj).abs();

    let feas_limit = 1e-6 * rhs_scale.max(1.0);
    if primal_residual > feas_limit {
        return Err(LpError::Numerical(format!(
            "optimal basis has primal residual {primal_residual:.3e} (limit {feas_limit:.3e})"
        )));
    }

    Ok(LpOutcome::Optimal(LpSolution {
        x,
        objective,
        dual_eq,
        dual_ineq: dual_all_ineq[..std.n_user_ineq].to_vec(),
        primal_residual: primal_residual.max(0.0),
        dual_residual: dual_residual.max(0.0),
        comp_slackness,
        duality_gap,
        pivots: t.pivots,
    }))
}
