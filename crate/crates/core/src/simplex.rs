//! Dense two-phase primal simplex with Bland's rule.
//!
//! Sized for the small LPs this crate produces (tens of rows, a few hundred
//! columns). The final basis is re-solved directly against the original
//! constraint matrix, and the returned solution carries its own optimality
//! certificate: primal residual, dual feasibility and duality gap.

use thiserror::Error;

use crate::linalg::{self, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Constraint {
            coeffs,
            relation: Relation::Le,
            rhs,
        }
    }

    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Constraint {
            coeffs,
            relation: Relation::Eq,
            rhs,
        }
    }
}

/// `opt c·x  s.t.  rows, x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// One dual per constraint, in the sign convention of the LP's own dual:
    /// for `Maximize` with `Le` rows the duals are nonnegative; for `Minimize`
    /// the dual program is `max b·y  s.t.  Aᵀy ≤ c`.
    pub duals: Vec<f64>,
    pub pivots: usize,
    pub duality_gap: f64,
    pub primal_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("LP is infeasible (phase-one residual {0:.3e})")]
    Infeasible(f64),
    #[error("LP is unbounded")]
    Unbounded,
    #[error("pivot limit of {0} reached")]
    PivotLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub feasibility_tol: f64,
    /// Bound on `|c·x − b·y|`, scaled by `max(1, |c·x|)`.
    pub gap_tol: f64,
    pub max_pivots: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            optimality_tol: 1e-11,
            pivot_tol: 1e-11,
            feasibility_tol: 1e-9,
            gap_tol: 1e-9,
            max_pivots: 100_000,
        }
    }
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// `m` rows of `ncols` coefficients followed by the rhs.
    t: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.ncols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i * (self.ncols + 1) + self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize, cost_row: &mut [f64]) {
        let w = self.ncols + 1;
        let p = self.at(r, c);
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
                row[c] = 0.0;
            }
        }
        let f = cost_row[c];
        if f != 0.0 {
            for (a, b) in cost_row.iter_mut().zip(prow.iter()) {
                *a -= f * b;
            }
            cost_row[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Reduced-cost row `[c_j − c_B B⁻¹ A_j ..., −c_B B⁻¹ b]`.
    fn cost_row(&self, cost: &[f64]) -> Vec<f64> {
        let w = self.ncols + 1;
        let mut d: Vec<f64> = cost.iter().copied().chain(std::iter::once(0.0)).collect();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, tij) in d.iter_mut().zip(&self.t[i * w..(i + 1) * w]) {
                    *dj -= cb * tij;
                }
            }
        }
        d
    }

    fn run(
        &mut self,
        cost: &[f64],
        allowed: &dyn Fn(usize) -> bool,
        opts: &SimplexOptions,
    ) -> Result<(), LpError> {
        let mut d = self.cost_row(cost);
        loop {
            if self.pivots >= opts.max_pivots {
                return Err(LpError::PivotLimit(opts.max_pivots));
            }
            // Bland: lowest-index improving column.
            let Some(c) = (0..self.ncols).find(|&j| allowed(j) && d[j] < -opts.optimality_tol)
            else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > opts.pivot_tol {
                    let ratio = self.rhs(i).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if (tie && self.basis[i] < self.basis[bi]) || (!tie && ratio < br) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, c, &mut d);
        }
    }
}

/// Solves `lp` with default tolerances.
pub fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    solve_with(lp, &SimplexOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpOutcome, LpError> {
    let n = lp.objective.len();
    let m = lp.constraints.len();
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(LpError::Numerical(format!(
                "row {i} has {} coefficients, expected {n}",
                c.coeffs.len()
            )));
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Numerical(format!("row {i} has non-finite data")));
        }
    }
    if lp.objective.iter().any(|v| !v.is_finite()) {
        return Err(LpError::Numerical("non-finite objective".into()));
    }

    // Standard form: structural | slacks | artificials, every rhs ≥ 0.
    let slack_rows: Vec<usize> = (0..m)
        .filter(|&i| lp.constraints[i].relation == Relation::Le)
        .collect();
    let n_std = n + slack_rows.len();
    let mut a = DenseMatrix::zeros(m, n_std);
    let mut b = vec![0.0; m];
    let mut flip = vec![1.0; m];
    for (i, c) in lp.constraints.iter().enumerate() {
        a.row_mut(i)[..n].copy_from_slice(&c.coeffs);
        b[i] = c.rhs;
    }
    for (k, &i) in slack_rows.iter().enumerate() {
        a.set(i, n + k, 1.0);
    }
    for i in 0..m {
        if b[i] < 0.0 {
            flip[i] = -1.0;
            b[i] = -b[i];
            for v in a.row_mut(i) {
                *v = -*v;
            }
        }
    }

    // Starting basis: reuse unit columns, add artificials for the remaining rows.
    let mut basis: Vec<Option<usize>> = vec![None; m];
    for j in 0..n_std {
        let mut hit = None;
        let mut unit = true;
        for i in 0..m {
            let v = a.get(i, j);
            if v != 0.0 {
                if hit.is_some() || v != 1.0 {
                    unit = false;
                    break;
                }
                hit = Some(i);
            }
        }
        if let (true, Some(i)) = (unit, hit) {
            if basis[i].is_none() {
                basis[i] = Some(j);
            }
        }
    }
    let art_rows: Vec<usize> = (0..m).filter(|&i| basis[i].is_none()).collect();
    let ncols = n_std + art_rows.len();
    let mut full = DenseMatrix::zeros(m, ncols);
    for i in 0..m {
        full.row_mut(i)[..n_std].copy_from_slice(a.row(i));
    }
    for (k, &i) in art_rows.iter().enumerate() {
        full.set(i, n_std + k, 1.0);
        basis[i] = Some(n_std + k);
    }

    let w = ncols + 1;
    let mut t = vec![0.0; m * w];
    for i in 0..m {
        t[i * w..i * w + ncols].copy_from_slice(full.row(i));
        t[i * w + ncols] = b[i];
    }
    let mut tab = Tableau {
        m,
        ncols,
        t,
        basis: basis.into_iter().map(Option::unwrap).collect(),
        pivots: 0,
    };
    let is_art = |j: usize| j >= n_std;

    if !art_rows.is_empty() {
        let phase1: Vec<f64> = (0..ncols)
            .map(|j| if is_art(j) { 1.0 } else { 0.0 })
            .collect();
        tab.run(&phase1, &|_| true, opts)?;
        let infeas: f64 = (0..m)
            .filter(|&i| is_art(tab.basis[i]))
            .map(|i| tab.rhs(i))
            .sum();
        let scale = 1.0 + b.iter().map(|v| v.abs()).sum::<f64>();
        if infeas > opts.feasibility_tol * scale {
            return Err(LpError::Infeasible(infeas));
        }
        // Drive zero-level artificials out of the basis where possible.
        let mut scratch = vec![0.0; w];
        for i in 0..m {
            if is_art(tab.basis[i]) {
                if let Some(j) = (0..n_std).find(|&j| tab.at(i, j).abs() > 1e-9) {
                    tab.pivot(i, j, &mut scratch);
                }
            }
        }
    }

    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let cost: Vec<f64> = (0..ncols)
        .map(|j| if j < n { sign * lp.objective[j] } else { 0.0 })
        .collect();
    tab.run(&cost, &|j| !is_art(j), opts)?;

    // Re-solve the final basis against the original data.
    let mut bmat = DenseMatrix::zeros(m, m);
    for (k, &j) in tab.basis.iter().enumerate() {
        for i in 0..m {
            bmat.set(i, k, full.get(i, j));
        }
    }
    let cb: Vec<f64> = tab.basis.iter().map(|&j| cost[j]).collect();
    let (xb, y) = match (
        linalg::solve(&bmat, &b, 1e-14),
        linalg::solve(&bmat.transpose(), &cb, 1e-14),
    ) {
        (Some(xb), Some(y)) => (xb, y),
        _ => return Err(LpError::Numerical("final basis is singular".into())),
    };
    let mut xfull = vec![0.0; ncols];
    for (k, &j) in tab.basis.iter().enumerate() {
        xfull[j] = xb[k];
    }
    if let Some(v) = xfull.iter().find(|v| **v < -opts.feasibility_tol) {
        return Err(LpError::Numerical(format!(
            "basic variable {v:.3e} is negative"
        )));
    }
    for v in &mut xfull {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    if let Some(j) = (n_std..ncols).find(|&j| xfull[j] > opts.feasibility_tol) {
        return Err(LpError::Numerical(format!(
            "artificial column {j} left positive"
        )));
    }

    // Certificate.
    let ya = full.left_mul(&y);
    let worst_reduced = (0..n_std)
        .map(|j| cost[j] - ya[j])
        .fold(f64::INFINITY, f64::min);
    if worst_reduced < -1e3 * opts.optimality_tol.max(1e-12) {
        return Err(LpError::Numerical(format!(
            "dual infeasible by {worst_reduced:.3e}"
        )));
    }
    let primal: f64 = (0..ncols).map(|j| cost[j] * xfull[j]).sum();
    let dual: f64 = y.iter().zip(&b).map(|(a, b)| a * b).sum();
    let duality_gap = (primal - dual).abs();
    if duality_gap > opts.gap_tol * primal.abs().max(1.0) {
        return Err(LpError::Numerical(format!("duality gap {duality_gap:.3e}")));
    }
    let mut primal_residual = 0.0f64;
    for i in 0..m {
        let r: f64 = (0..ncols).map(|j| full.get(i, j) * xfull[j]).sum::<f64>() - b[i];
        primal_residual = primal_residual.max(r.abs());
    }
    if primal_residual > opts.feasibility_tol * (1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    {
        return Err(LpError::Numerical(format!(
            "primal residual {primal_residual:.3e}"
        )));
    }

    let x = xfull[..n].to_vec();
    let value = lp.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
    let duals = y.iter().zip(&flip).map(|(y, f)| sign * f * y).collect();
    Ok(LpOutcome {
        x,
        value,
        duals,
        pivots: tab.pivots,
        duality_gap,
        primal_residual,
    })
}
