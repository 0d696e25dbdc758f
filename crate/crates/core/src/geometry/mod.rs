//! Convex-geometry core.
//!
//! Everything here is independent of the physics: vectors in `R^N`, the
//! generalized cross product (cofactor expansion of a determinant whose first
//! row is the standard basis), support-function margins of linear
//! inequalities, and LP-based convex-hull membership with certificates.

mod curve;
mod lp;

pub use curve::{
    curve_hull_membership, support, CurveGrid, CurveHullResult, ParametricCurve, Support,
};
pub use lp::{hull_membership, DEFAULT_HULL_TOL};

use serde::{Deserialize, Serialize};
use std::ops::Deref;

use crate::error::{Error, Result};

/// A finite real vector of fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorN(Vec<f64>);

impl VectorN {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Usage("vector must have dimension >= 1".into()));
        }
        if let Some(i) = components.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!(
                "vector component {i} is not finite ({})",
                components[i]
            )));
        }
        Ok(Self(components))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|x| c * x).collect())
    }
}

impl Deref for VectorN {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for VectorN {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm, rescaled by the largest component so that vectors with
/// very small or very large entries neither underflow nor overflow.
pub fn norm(a: &[f64]) -> f64 {
    let m = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * a.iter().map(|x| (x / m) * (x / m)).sum::<f64>().sqrt()
}

/// Determinant of a row-major `n x n` matrix by LU with partial pivoting.
pub fn determinant(mut a: Vec<f64>, n: usize) -> f64 {
    assert_eq!(a.len(), n * n, "determinant: matrix is not {n}x{n}");
    let mut det = 1.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        let pivot = a[pivot_row * n + col];
        if pivot == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            det = -det;
        }
        det *= pivot;
        for row in col + 1..n {
            let factor = a[row * n + col] / pivot;
            if factor != 0.0 {
                for k in col + 1..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
            }
        }
    }
    det
}

/// Generalized cross product of `N - 1` vectors in `R^N`.
///
/// Component `j` is the cofactor of the basis vector `e^j` in the determinant
/// whose first row is `(e^1, ..., e^N)` and whose remaining rows are the
/// inputs, i.e. `(-1)^j det(M_j)` where `M_j` drops column `j`. The result is
/// orthogonal to every input and vanishes iff the inputs are linearly
/// dependent.
pub fn generalized_cross<V: AsRef<[f64]>>(vectors: &[V]) -> Result<VectorN> {
    let n = vectors.len() + 1;
    if n < 2 {
        return Err(Error::Usage(
            "generalized cross product needs at least one vector".into(),
        ));
    }
    for (i, v) in vectors.iter().enumerate() {
        if v.as_ref().len() != n {
            return Err(Error::Usage(format!(
                "generalized cross product of {} vectors needs dimension {n}, vector {i} has {}",
                n - 1,
                v.as_ref().len()
            )));
        }
    }
    let rows = n - 1;
    let mut out = Vec::with_capacity(n);
    let mut minor = vec![0.0; rows * rows];
    for j in 0..n {
        for (r, v) in vectors.iter().enumerate() {
            let v = v.as_ref();
            let mut c = 0;
            for (k, &x) in v.iter().enumerate() {
                if k != j {
                    minor[r * rows + c] = x;
                    c += 1;
                }
            }
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        out.push(sign * determinant(minor.clone(), rows));
    }
    VectorN::new(out)
}

/// Margin of the linear inequality `P . lambda <= sup_curve Pi . lambda`.
///
/// Returns `P . lambda - max_i curve_values[i] . lambda`; a positive value
/// means the inequality is violated by `P`.
pub fn evaluate_inequality<V: AsRef<[f64]>>(
    p: &[f64],
    lambda: &[f64],
    curve_values: &[V],
) -> Result<f64> {
    if curve_values.is_empty() {
        return Err(Error::Usage("curve_values must not be empty".into()));
    }
    if p.len() != lambda.len() {
        return Err(Error::Usage(format!(
            "P has dimension {}, lambda has {}",
            p.len(),
            lambda.len()
        )));
    }
    let mut sup = f64::NEG_INFINITY;
    for (i, v) in curve_values.iter().enumerate() {
        let v = v.as_ref();
        if v.len() != lambda.len() {
            return Err(Error::Usage(format!(
                "curve value {i} has dimension {}, expected {}",
                v.len(),
                lambda.len()
            )));
        }
        sup = sup.max(dot(v, lambda));
    }
    Ok(dot(p, lambda) - sup)
}

/// Certificate attached to a hull-membership verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Certificate {
    /// Convex weights over the sample points reproducing the query.
    Weights(Vec<f64>),
    /// A vector `lambda` with `query . lambda > max_i sample_i . lambda`.
    Separator(VectorN),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullVerdict {
    pub inside: bool,
    pub certificate: Certificate,
    /// Separation margin `query . lambda - max_i sample_i . lambda` when
    /// outside; minus the largest coordinate residual when inside.
    pub margin: f64,
}

impl HullVerdict {
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.certificate {
            Certificate::Weights(w) => Some(w),
            Certificate::Separator(_) => None,
        }
    }

    pub fn separator(&self) -> Option<&VectorN> {
        match &self.certificate {
            Certificate::Separator(l) => Some(l),
            Certificate::Weights(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Leibniz expansion over permutations; independent of the LU path.
    fn leibniz_det(rows: &[Vec<f64>]) -> f64 {
        fn permute(k: usize, perm: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, f64)>) {
            let n = perm.len();
            if k == n {
                let mut sign = 1.0;
                for i in 0..n {
                    for j in i + 1..n {
                        if perm[i] > perm[j] {
                            sign = -sign;
                        }
                    }
                }
                out.push((perm.clone(), sign));
                return;
            }
            for i in k..n {
                perm.swap(k, i);
                permute(k + 1, perm, out);
                perm.swap(k, i);
            }
        }
        let n = rows.len();
        let mut perms = Vec::new();
        permute(0, &mut (0..n).collect(), &mut perms);
        perms
            .iter()
            .map(|(p, s)| s * (0..n).map(|i| rows[i][p[i]]).product::<f64>())
            .sum()
    }

    fn basis(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn cross_of_basis_vectors_in_three_dimensions() {
        let u = generalized_cross(&[basis(3, 0), basis(3, 1)]).unwrap();
        assert_eq!(u.as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn cross_in_two_dimensions_rotates() {
        let u = generalized_cross(&[vec![0.3, -1.7]]).unwrap();
        assert_eq!(u.as_slice(), &[-1.7, -0.3]);
    }

    #[test]
    fn cross_of_basis_in_four_dimensions_matches_leibniz() {
        let rows = [basis(4, 0), basis(4, 1), basis(4, 2)];
        let u = generalized_cross(&rows).unwrap();
        // Coefficient of e^4 in the symbolic 4x4 determinant, by Leibniz on the minor.
        let minor: Vec<Vec<f64>> = rows.iter().map(|r| r[..3].to_vec()).collect();
        let expected = -leibniz_det(&minor);
        assert_eq!(expected, -1.0);
        assert_eq!(u.as_slice(), &[0.0, 0.0, 0.0, expected]);
    }

    #[test]
    fn cross_rejects_bad_dimensions() {
        assert!(matches!(
            generalized_cross(&[vec![1.0, 0.0, 0.0]]),
            Err(Error::Usage(_))
        ));
        let empty: [Vec<f64>; 0] = [];
        assert!(generalized_cross(&empty).is_err());
    }

    #[test]
    fn lu_determinant_agrees_with_leibniz() {
        let rows = vec![
            vec![2.0, -1.0, 0.5, 3.0],
            vec![0.1, 4.0, -2.0, 1.0],
            vec![1.5, 0.0, 0.3, -0.7],
            vec![-1.0, 2.2, 1.1, 0.9],
        ];
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let lu = determinant(flat, 4);
        assert!((lu - leibniz_det(&rows)).abs() < 1e-12);
    }

    #[test]
    fn evaluate_inequality_basics() {
        let curve = vec![vec![0.0, 0.0], vec![0.25, 0.5], vec![1.0, 0.0]];
        // classical point cannot violate
        let m = evaluate_inequality(&[0.25, 0.5], &[0.3, 0.9], &curve).unwrap();
        assert!(m <= 0.0);
        assert_eq!(
            evaluate_inequality(&[0.25, 0.5], &[0.0, 0.0], &curve).unwrap(),
            0.0
        );
        let empty: Vec<Vec<f64>> = vec![];
        assert!(evaluate_inequality(&[0.0, 0.0], &[1.0, 1.0], &empty).is_err());
    }

    #[test]
    fn vector_rejects_non_finite() {
        assert!(VectorN::new(vec![1.0, f64::NAN]).is_err());
        assert!(VectorN::new(vec![]).is_err());
    }
}
