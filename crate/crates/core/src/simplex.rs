//! Dense two-phase simplex for small exact linear programs.
//!
//! Solves `min c'x  s.t.  Ax = b, x >= 0` with Bland's rule, which cannot
//! cycle. Problems in this crate are tiny (tens to a few hundred variables)
//! and well scaled, so a dense tableau is the simplest reliable choice.

use crate::error::{CoordError, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;

pub struct StandardLp {
    /// Row-major m x n constraint matrix.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub objective: Vec<f64>,
}

pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

pub fn solve(lp: &StandardLp) -> Result<LpSolution> {
    let m = lp.rows.len();
    let n = lp.objective.len();
    if lp.rhs.len() != m || lp.rows.iter().any(|r| r.len() != n) {
        return Err(CoordError::dim("LP shape mismatch"));
    }

    // tableau: m rows x (n real + m artificial + rhs)
    let width = n + m + 1;
    let mut t = vec![vec![0.0f64; width]; m];
    for i in 0..m {
        let flip = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = flip * lp.rows[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = flip * lp.rhs[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Phase 1: minimize the sum of artificials.
    let mut cost = vec![0.0f64; width];
    for j in 0..width {
        let col_sum: f64 = (0..m).map(|i| t[i][j]).sum();
        cost[j] = if (n..n + m).contains(&j) { 1.0 } else { 0.0 } - col_sum;
    }
    // cost[width-1] tracks -objective value
    pivot_until_optimal(&mut t, &mut cost, &mut basis, n + m)?;
    if -cost[width - 1] > 1e-8 {
        return Err(CoordError::NumericFailure(format!(
            "LP infeasible: phase-1 objective {}",
            -cost[width - 1]
        )));
    }
    // Drive artificials out of the basis; rows that cannot pivot are
    // redundant and keep a zero artificial.
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut cost, &mut basis, i, j);
            }
        }
    }

    // Phase 2: the real objective, artificials barred from entering.
    let mut cost2 = vec![0.0f64; width];
    cost2[..n].copy_from_slice(&lp.objective);
    for i in 0..m {
        let cb = if basis[i] < n { lp.objective[basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                cost2[j] -= cb * t[i][j];
            }
        }
    }
    pivot_until_optimal(&mut t, &mut cost2, &mut basis, n)?;

    let mut x = vec![0.0f64; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[i][width - 1];
        }
    }
    let value = lp
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum::<f64>();
    Ok(LpSolution { value, x })
}

fn pivot_until_optimal(
    t: &mut [Vec<f64>],
    cost: &mut [f64],
    basis: &mut [usize],
    enterable: usize,
) -> Result<()> {
    let m = t.len();
    let width = cost.len();
    let max_iters = 2000 * (m + enterable).max(16);
    for _ in 0..max_iters {
        // Bland: smallest-index negative reduced cost
        let Some(enter) = (0..enterable).find(|&j| cost[j] < -COST_TOL) else {
            return Ok(());
        };
        // ratio test, smallest basis index on ties
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][enter] > PIVOT_TOL {
                let ratio = t[i][width - 1] / t[i][enter];
                if ratio < best - 1e-12
                    || (ratio < best + 1e-12 && leave.map_or(true, |l| basis[i] < basis[l]))
                {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(row) = leave else {
            return Err(CoordError::NumericFailure("LP unbounded".into()));
        };
        pivot(t, cost, basis, row, enter);
    }
    Err(CoordError::NumericFailure("simplex iteration cap".into()))
}

fn pivot(t: &mut [Vec<f64>], cost: &mut [f64], basis: &mut [usize], row: usize, col: usize) {
    let width = cost.len();
    let piv = t[row][col];
    for v in t[row].iter_mut() {
        *v /= piv;
    }
    for i in 0..t.len() {
        if i != row && t[i][col].abs() > 0.0 {
            let f = t[i][col];
            for j in 0..width {
                t[i][j] -= f * t[row][j];
            }
            t[i][col] = 0.0;
        }
    }
    let f = cost[col];
    if f != 0.0 {
        for j in 0..width {
            cost[j] -= f * t[row][j];
        }
        cost[col] = 0.0;
    }
    basis[row] = col;
}
