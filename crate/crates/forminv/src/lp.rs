//! A small dense-tableau simplex and a zero-sum matrix-game solver built on
//! it. Problem sizes here are at most a handful of rows and columns, so the
//! implementation favors determinism (Bland's rule) over speed.

use crate::error::{Error, Result};

const TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    /// Dual values of the `Ax <= b` constraints.
    pub duals: Vec<f64>,
}

/// Maximize `c . x` subject to `A x <= b`, `x >= 0`. Requires `b >= 0` so
/// the slack basis is feasible.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<SimplexSolution> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::Lp("dimension mismatch".into()));
    }
    if b.iter().any(|&v| v < 0.0) {
        return Err(Error::Lp("rhs must be nonnegative".into()));
    }

    // Tableau columns: n structural vars, m slacks, rhs.
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    let mut z = vec![0.0; width];
    z[..n].copy_from_slice(c);
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Bland: entering variable is the lowest index with positive reduced cost.
    while let Some(enter) = (0..n + m).find(|&j| z[j] > TOL) {
        // Ratio test; Bland tie-break on the basic variable index.
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for (i, row) in t.iter().enumerate() {
            if row[enter] > TOL {
                let ratio = row[width - 1] / row[enter];
                if ratio < best - TOL
                    || (ratio < best + TOL && leave.map(|l| basis[i] < basis[l]).unwrap_or(true))
                {
                    if ratio < best {
                        best = ratio;
                    }
                    leave = Some(i);
                }
            }
        }
        let leave = leave.ok_or_else(|| Error::Lp("objective is unbounded".into()))?;

        // Pivot.
        let piv = t[leave][enter];
        for v in t[leave].iter_mut() {
            *v /= piv;
        }
        let pivot_row = t[leave].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != leave && row[enter].abs() > 0.0 {
                let f = row[enter];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        let f = z[enter];
        if f.abs() > 0.0 {
            for (v, p) in z.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
        }
        basis[leave] = enter;
    }

    let mut x = vec![0.0; n];
    let mut objective = 0.0;
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i][width - 1];
            objective += c[bv] * t[i][width - 1];
        }
    }
    // At optimality the reduced cost of slack i is -y_i.
    let duals = (0..m).map(|i| (-z[n + i]).max(0.0)).collect();
    Ok(SimplexSolution {
        objective,
        x,
        duals,
    })
}

#[derive(Debug, Clone)]
pub struct GameSolution {
    /// max over column mixtures of the minimum row payoff.
    pub value: f64,
    /// Optimal mixture over columns; on the simplex.
    pub column_strategy: Vec<f64>,
}

/// Solve `max_{w in simplex} min_r (G w)_r` for a dense payoff matrix `G`
/// with `rows` adversarial rows and `cols` mixture columns.
pub fn solve_matrix_game(g: &[Vec<f64>]) -> Result<GameSolution> {
    let rows = g.len();
    if rows == 0 {
        return Err(Error::Lp("game needs at least one row".into()));
    }
    let cols = g[0].len();
    if cols == 0 || g.iter().any(|r| r.len() != cols) {
        return Err(Error::Lp("game needs rectangular nonempty payoff".into()));
    }

    // Shift payoffs positive so the game value is positive, then solve the
    // standard LP pair. With v = value of the shifted game:
    //   max sum(x) s.t. G'^T x <= 1, x >= 0  has optimum sum(x) = 1/v,
    // and the duals of the <= constraints normalize to the column mixture.
    let min_entry = g
        .iter()
        .flat_map(|r| r.iter())
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let shift = 1.0 - min_entry;
    let mut at = vec![vec![0.0; rows]; cols];
    for (i, row) in g.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            at[j][i] = v + shift;
        }
    }
    let c = vec![1.0; rows];
    let b = vec![1.0; cols];
    let sol = maximize(&c, &at, &b)?;
    if sol.objective <= TOL {
        return Err(Error::Lp("degenerate game solution".into()));
    }
    let value = 1.0 / sol.objective - shift;
    let dual_sum: f64 = sol.duals.iter().sum();
    if dual_sum <= TOL {
        return Err(Error::Lp("degenerate duals in game solution".into()));
    }
    let column_strategy = sol.duals.iter().map(|&y| (y / dual_sum).max(0.0)).collect();
    Ok(GameSolution {
        value,
        column_strategy,
    })
}
