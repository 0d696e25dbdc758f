//! Dense primal simplex for the hull-membership LP.
//!
//! The query `q` lies in the convex hull of samples `s_i` iff
//!
//! ```text
//! min  sum_j (e+_j + e-_j)
//! s.t. sum_i w_i s_ij + e+_j - e-_j = q_j     (j = 1..N)
//!      sum_i w_i                    = 1
//!      w, e+, e- >= 0
//! ```
//!
//! has optimal value zero. At the optimum the duals `y` of the coordinate rows
//! satisfy `|y_j| <= 1` and `y . s_i <= -z` for every sample, so `y` separates
//! the query whenever the optimal L1 distance is positive.

use super::{dot, Certificate, HullVerdict, VectorN};
use crate::error::{Error, Result};

/// Per-coordinate tolerance for declaring the query reproduced.
pub const DEFAULT_HULL_TOL: f64 = 1e-9;

const PIVOT_EPS: f64 = 1e-12;
const COST_EPS: f64 = 1e-12;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `rows x (cols + 1)`; the last column is the right-hand side.
    a: Vec<f64>,
    /// Reduced costs, last entry is minus the objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.cols + 1;
        let p = self.a[row * w + col];
        for k in 0..w {
            self.a[row * w + k] /= p;
        }
        for r in 0..self.rows {
            if r == row {
                continue;
            }
            let f = self.a[r * w + col];
            if f != 0.0 {
                for k in 0..w {
                    self.a[r * w + k] -= f * self.a[row * w + k];
                }
                self.a[r * w + col] = 0.0;
            }
        }
        let f = self.cost[col];
        if f != 0.0 {
            for k in 0..w {
                self.cost[k] -= f * self.a[row * w + k];
            }
            self.cost[col] = 0.0;
        }
        self.basis[row] = col;
    }

    fn objective(&self) -> f64 {
        -self.cost[self.cols]
    }

    /// Runs primal simplex iterations from a feasible basis.
    fn optimize(&mut self, max_iter: usize) -> Result<usize> {
        let mut degenerate_run = 0;
        for iter in 0..max_iter {
            let bland = degenerate_run >= DEGENERATE_LIMIT;
            let entering = if bland {
                (0..self.cols).find(|&c| self.cost[c] < -COST_EPS)
            } else {
                (0..self.cols)
                    .filter(|&c| self.cost[c] < -COST_EPS)
                    .min_by(|&i, &j| self.cost[i].total_cmp(&self.cost[j]))
            };
            let Some(col) = entering else {
                return Ok(iter);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, col);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-15
                                || (ratio <= bratio + 1e-15 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((row, ratio)) = leave else {
                return Err(Error::Lp {
                    iterations: iter,
                    objective: self.objective(),
                    reason: format!("unbounded direction in column {col}"),
                });
            };
            if ratio <= 1e-15 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, col);
        }
        Err(Error::Lp {
            iterations: max_iter,
            objective: self.objective(),
            reason: "iteration limit reached".into(),
        })
    }
}

/// Tests whether `query` lies in the convex hull of `samples`.
///
/// Inside means some convex combination reproduces `query` within `tol` per
/// coordinate; the weights are returned as the certificate. Otherwise the
/// dual of the L1-projection LP gives a separating vector and a positive
/// margin `query . lambda - max_i samples_i . lambda`.
pub fn hull_membership<V: AsRef<[f64]>>(
    query: &[f64],
    samples: &[V],
    tol: f64,
) -> Result<HullVerdict> {
    if samples.is_empty() {
        return Err(Error::Usage("hull_membership needs at least one sample".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Usage(format!("tolerance must be positive, got {tol}")));
    }
    let n = query.len();
    for (i, s) in samples.iter().enumerate() {
        if s.as_ref().len() != n {
            return Err(Error::Usage(format!(
                "sample {i} has dimension {}, query has {n}",
                s.as_ref().len()
            )));
        }
    }
    let k = samples.len();
    let rows = n + 1;
    let cols = k + 2 * n;
    let width = cols + 1;
    let ep = |j: usize| k + j;
    let em = |j: usize| k + n + j;

    let mut a = vec![0.0; rows * width];
    for (i, s) in samples.iter().enumerate() {
        for (j, &x) in s.as_ref().iter().enumerate() {
            a[j * width + i] = x;
        }
        a[n * width + i] = 1.0;
    }
    for j in 0..n {
        a[j * width + ep(j)] = 1.0;
        a[j * width + em(j)] = -1.0;
        a[j * width + cols] = query[j];
    }
    a[n * width + cols] = 1.0;

    let mut cost = vec![0.0; width];
    for j in 0..n {
        cost[ep(j)] = 1.0;
        cost[em(j)] = 1.0;
    }

    // Warm start at the sample closest to the query in L1.
    let start = (0..k)
        .min_by(|&i, &j| {
            let di: f64 = samples[i].as_ref().iter().zip(query).map(|(s, q)| (s - q).abs()).sum();
            let dj: f64 = samples[j].as_ref().iter().zip(query).map(|(s, q)| (s - q).abs()).sum();
            di.total_cmp(&dj)
        })
        .unwrap();

    let mut t = Tableau {
        rows,
        cols,
        a,
        cost,
        basis: vec![usize::MAX; rows],
    };
    let s0 = samples[start].as_ref();
    for j in 0..n {
        let col = if query[j] - s0[j] >= 0.0 { ep(j) } else { em(j) };
        t.pivot(j, col);
    }
    t.pivot(n, start);

    let max_iter = 50 * (rows + cols) + 100;
    t.optimize(max_iter)?;

    let mut weights = vec![0.0; k];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < k {
            weights[b] = t.rhs(r).max(0.0);
        }
    }
    let wsum: f64 = weights.iter().sum();
    let mut max_residual: f64 = 0.0;
    for j in 0..n {
        let approx: f64 = weights
            .iter()
            .zip(samples)
            .map(|(w, s)| w * s.as_ref()[j])
            .sum();
        max_residual = max_residual.max((approx - query[j]).abs());
    }
    if max_residual <= tol && (wsum - 1.0).abs() <= tol.max(1e-12) {
        return Ok(HullVerdict {
            inside: true,
            certificate: Certificate::Weights(weights),
            margin: -max_residual,
        });
    }

    // Duals from the reduced costs of the e+ columns: rc = 1 - y_j.
    let y: Vec<f64> = (0..n).map(|j| 1.0 - t.cost[ep(j)]).collect();
    let sup = samples
        .iter()
        .map(|s| dot(s.as_ref(), &y))
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = dot(query, &y) - sup;
    if !(margin > 0.0) {
        return Err(Error::Lp {
            iterations: max_iter,
            objective: t.objective(),
            reason: format!(
                "residual {max_residual:e} exceeds tolerance but dual margin is {margin:e}"
            ),
        });
    }
    Ok(HullVerdict {
        inside: false,
        certificate: Certificate::Separator(VectorN::new(y)?),
        margin,
    })
}
