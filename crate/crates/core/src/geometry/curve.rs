//! Parametric curves of Q symbols, their support function, and hull
//! membership against the full (continuous) curve.

use super::{dot, hull_membership, Certificate, HullVerdict};
use crate::error::{Error, Result};

/// A smooth curve `t -> Pi(t)` in `R^N` over a closed parameter interval.
///
/// Points that are only reached as limits (e.g. `|alpha| -> infinity`) are
/// listed by [`ParametricCurve::limit_points`] and treated as ordinary samples.
pub trait ParametricCurve {
    fn dim(&self) -> usize;
    fn domain(&self) -> (f64, f64);
    fn point(&self, t: f64) -> Vec<f64>;
    /// First (`order = 1`) or second (`order = 2`) derivative in `t`.
    fn derivative(&self, t: f64, order: u8) -> Vec<f64>;
    fn limit_points(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }
}

/// Curve values precomputed on a uniform parameter grid.
#[derive(Debug, Clone)]
pub struct CurveGrid {
    pub ts: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub limits: Vec<Vec<f64>>,
}

impl CurveGrid {
    pub fn new<C: ParametricCurve + ?Sized>(curve: &C, n: usize) -> Self {
        let (a, b) = curve.domain();
        let n = n.max(2);
        let ts: Vec<f64> = (0..n)
            .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect();
        let points = ts.iter().map(|&t| curve.point(t)).collect();
        Self {
            ts,
            points,
            limits: curve.limit_points(),
        }
    }
}

/// Maximum of `Pi . lambda` over a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub value: f64,
    /// Maximizing parameter; `None` when a limit point attains the maximum.
    pub t: Option<f64>,
}

/// Support function of the curve in direction `lambda`.
///
/// Scans the grid, then polishes every discrete local maximum with up to three
/// safeguarded Newton steps on `d/dt (Pi . lambda)`.
pub fn support<C: ParametricCurve + ?Sized>(curve: &C, grid: &CurveGrid, lambda: &[f64]) -> Support {
    let vals: Vec<f64> = grid.points.iter().map(|p| dot(p, lambda)).collect();
    let n = vals.len();
    let mut best = Support {
        value: f64::NEG_INFINITY,
        t: None,
    };
    for i in 0..n {
        let left = if i > 0 { vals[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < n { vals[i + 1] } else { f64::NEG_INFINITY };
        if vals[i] < left || vals[i] < right {
            continue;
        }
        let lo = grid.ts[i.saturating_sub(1)];
        let hi = grid.ts[(i + 1).min(n - 1)];
        let (t, v) = polish_max(curve, lambda, grid.ts[i], vals[i], lo, hi);
        if v > best.value {
            best = Support { value: v, t: Some(t) };
        }
    }
    for l in &grid.limits {
        let v = dot(l, lambda);
        if v > best.value {
            best = Support { value: v, t: None };
        }
    }
    best
}

fn polish_max<C: ParametricCurve + ?Sized>(
    curve: &C,
    lambda: &[f64],
    t0: f64,
    v0: f64,
    lo: f64,
    hi: f64,
) -> (f64, f64) {
    let (mut t, mut v) = (t0, v0);
    for _ in 0..3 {
        let d1 = dot(&curve.derivative(t, 1), lambda);
        let d2 = dot(&curve.derivative(t, 2), lambda);
        if !(d2 < 0.0) || !d1.is_finite() || !d2.is_finite() {
            break;
        }
        let cand = (t - d1 / d2).clamp(lo, hi);
        let cv = dot(&curve.point(cand), lambda);
        if cv > v {
            t = cand;
            v = cv;
        } else {
            break;
        }
    }
    (t, v)
}

/// Outcome of [`curve_hull_membership`].
#[derive(Debug, Clone)]
pub struct CurveHullResult {
    pub verdict: HullVerdict,
    /// Curve points used by the final LP (weights refer to these).
    pub samples: Vec<Vec<f64>>,
    pub rounds: usize,
}

/// Membership of `query` in the convex hull of the whole curve.
///
/// Column generation: solve the LP over a coarse subset of the grid; when it
/// separates, check the separator against the support function of the full
/// curve. A separator that survives is a certificate for the continuous
/// curve; otherwise the maximizing curve point joins the samples.
pub fn curve_hull_membership<C: ParametricCurve + ?Sized>(
    curve: &C,
    grid: &CurveGrid,
    query: &[f64],
    tol: f64,
) -> Result<CurveHullResult> {
    if query.len() != curve.dim() {
        return Err(Error::Usage(format!(
            "query has dimension {}, curve has {}",
            query.len(),
            curve.dim()
        )));
    }
    const INITIAL: usize = 64;
    const MAX_ROUNDS: usize = 400;
    let stride = (grid.ts.len() / INITIAL).max(1);
    let mut samples: Vec<Vec<f64>> = grid
        .points
        .iter()
        .step_by(stride)
        .cloned()
        .chain(std::iter::once(grid.points[grid.points.len() - 1].clone()))
        .chain(grid.limits.iter().cloned())
        .collect();

    for round in 1..=MAX_ROUNDS {
        let verdict = hull_membership(query, &samples, tol)?;
        if verdict.inside {
            return Ok(CurveHullResult {
                verdict,
                samples,
                rounds: round,
            });
        }
        let lambda = verdict.separator().expect("outside verdict carries a separator");
        let sup = support(curve, grid, lambda);
        let margin = lambda.dot(query) - sup.value;
        if margin > 0.0 {
            return Ok(CurveHullResult {
                verdict: HullVerdict {
                    inside: false,
                    certificate: Certificate::Separator(lambda.clone()),
                    margin,
                },
                samples,
                rounds: round,
            });
        }
        let Some(t) = sup.t else {
            return Err(Error::Lp {
                iterations: round,
                objective: margin,
                reason: "separator beaten by a limit point already in the sample set".into(),
            });
        };
        let new_point = curve.point(t);
        if samples
            .iter()
            .any(|s| s.iter().zip(&new_point).all(|(a, b)| (a - b).abs() < 1e-15))
        {
            return Err(Error::Lp {
                iterations: round,
                objective: margin,
                reason: format!("column generation stalled at t = {t}"),
            });
        }
        samples.push(new_point);
    }
    Err(Error::Lp {
        iterations: MAX_ROUNDS,
        objective: f64::NAN,
        reason: "column generation did not converge".into(),
    })
}

impl ParametricCurve for Box<dyn ParametricCurve + Send + Sync> {
    fn dim(&self) -> usize {
        self.as_ref().dim()
    }
    fn domain(&self) -> (f64, f64) {
        self.as_ref().domain()
    }
    fn point(&self, t: f64) -> Vec<f64> {
        self.as_ref().point(t)
    }
    fn derivative(&self, t: f64, order: u8) -> Vec<f64> {
        self.as_ref().derivative(t, order)
    }
    fn limit_points(&self) -> Vec<Vec<f64>> {
        self.as_ref().limit_points()
    }
}
