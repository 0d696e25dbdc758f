//! Unbalanced homodyne detection with two local-oscillator settings.
//!
//! The no-click probability behind a displacement by `-gamma` is
//! `exp(-|alpha - gamma|^2)` for a coherent input. In the frame where the
//! settings sit at `-d` and `+d` on the real axis, the classical region is
//! bounded by the curve `t -> (exp(-(t + d)^2), exp(-(t - d)^2))` together
//! with its limit point `(0, 0)` at `t -> +-inf`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ParametricCurve;
use crate::optimize::golden_max;
use crate::states::{uhd_click_prob, StateSpec};

/// Largest half-distance for which the linear family is proven tight.
pub const D_TIGHT_MAX: f64 = std::f64::consts::FRAC_1_SQRT_2;
const SUP_GRID: usize = 8001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UhdConfig {
    pub gamma1: Complex64,
    pub gamma2: Complex64,
    /// Detection efficiency; acts on the signal and, through the beam
    /// splitter, on the effective local-oscillator amplitudes.
    pub eta: f64,
    /// Mode-matching parameter.
    pub xi: f64,
}

impl UhdConfig {
    pub fn new(gamma1: Complex64, gamma2: Complex64, eta: f64, xi: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Domain(format!("eta = {eta} outside (0, 1]")));
        }
        if !(xi > 0.0 && xi <= 1.0) {
            return Err(Error::Domain(format!("xi = {xi} outside (0, 1]")));
        }
        if (gamma2 - gamma1).norm() == 0.0 {
            return Err(Error::Domain("the two settings must differ (d > 0)".into()));
        }
        Ok(Self { gamma1, gamma2, eta, xi })
    }

    /// Symmetric settings `-+ d` on the real axis.
    pub fn symmetric(d: f64, eta: f64, xi: f64) -> Result<Self> {
        Self::new(Complex64::new(-d, 0.0), Complex64::new(d, 0.0), eta, xi)
    }

    pub fn d(&self) -> f64 {
        (self.gamma2 - self.gamma1).norm() / 2.0
    }

    /// Half-distance between the effective settings `sqrt(eta) gamma_i`.
    pub fn d_eff(&self) -> f64 {
        self.eta.sqrt() * self.d()
    }

    /// Mismatch factor of one setting.
    pub fn g(&self, gamma: Complex64) -> f64 {
        (-self.eta * gamma.norm_sqr() * (1.0 - self.xi) / self.xi).exp()
    }

    pub fn factors(&self) -> [f64; 2] {
        [self.g(self.gamma1), self.g(self.gamma2)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UhdPoint {
    pub p1: f64,
    pub p2: f64,
}

impl UhdPoint {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        for p in [p1, p2] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Domain(format!("no-click probability {p} outside (0, 1]")));
            }
        }
        Ok(Self { p1, p2 })
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.p1, self.p2]
    }
}

pub fn uhd_q_symbol(alpha: Complex64, gamma: Complex64) -> f64 {
    (-(alpha - gamma).norm_sqr()).exp()
}

pub fn boundary_curve(t: f64, d: f64) -> UhdPoint {
    UhdPoint {
        p1: (-(t + d) * (t + d)).exp(),
        p2: (-(t - d) * (t - d)).exp(),
    }
}

/// Tight test function at boundary parameter `t`: the tangent rotated so
/// the curve lies on its nonpositive side.
pub fn lambda_uhd(t: f64, d: f64) -> [f64; 2] {
    let b = boundary_curve(t, d);
    [-2.0 * (t - d) * b.p2, 2.0 * (t + d) * b.p1]
}

/// `P . lambda(t) - Pi(t) . lambda(t)`; the right-hand side equals
/// `4 d exp(-2 (t^2 + d^2))`.
pub fn linear_tight_uhd(p: &UhdPoint, t: f64, d: f64) -> f64 {
    let l = lambda_uhd(t, d);
    let rhs = 4.0 * d * (-2.0 * (t * t + d * d)).exp();
    l[0] * p.p1 + l[1] * p.p2 - rhs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearScan {
    /// Largest margin over `t` for the unit-normalized test function.
    pub margin: f64,
    pub t_star: f64,
    /// False when `d > 1/sqrt(2)`: the family is then not guaranteed tight.
    pub tight_guaranteed: bool,
}

/// Maximizes the unit-normalized linear margin over the boundary parameter.
pub fn max_linear_uhd(p: &UhdPoint, d: f64) -> LinearScan {
    let t_max = d + 6.0;
    let unit = |t: f64| {
        let l = lambda_uhd(t, d);
        let n = (l[0] * l[0] + l[1] * l[1]).sqrt();
        let b = boundary_curve(t, d);
        ((l[0] * p.p1 + l[1] * p.p2) - (l[0] * b.p1 + l[1] * b.p2)) / n
    };
    let step = 2.0 * t_max / (SUP_GRID - 1) as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..SUP_GRID {
        let t = -t_max + step * i as f64;
        let v = unit(t);
        if v > best.0 {
            best = (v, t);
        }
    }
    let (t, v) = golden_max(unit, best.1 - step, best.1 + step, 1e-13, 200);
    let (margin, t_star) = if v > best.0 { (v, t) } else { best };
    LinearScan {
        margin,
        t_star,
        tight_guaranteed: d <= D_TIGHT_MAX + 1e-15,
    }
}

/// The three triangle inequalities on the sides `a = sqrt(-ln P1)`,
/// `b = sqrt(-ln P2)` and `c = 2d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriangleInequality {
    /// `a + b >= c`.
    Separation,
    /// `a + c >= b`.
    DistanceToSecond,
    /// `b + c >= a`.
    DistanceToFirst,
}

impl TriangleInequality {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Separation => "separation",
            Self::DistanceToSecond => "distance_to_second",
            Self::DistanceToFirst => "distance_to_first",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleVerdict {
    pub nonclassical: bool,
    /// Most strongly violated inequality, if any.
    pub violated: Option<TriangleInequality>,
    /// Slacks `(a + b - c, a + c - b, b + c - a)`; a negative entry is a violation.
    pub slacks: [f64; 3],
}

impl TriangleVerdict {
    /// Largest violation (positive means nonclassical).
    pub fn margin(&self) -> f64 {
        -self.slacks.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Inequalities holding with equality within `tol`.
    pub fn equalities(&self, tol: f64) -> Vec<TriangleInequality> {
        ALL_TRIANGLE
            .iter()
            .zip(&self.slacks)
            .filter(|(_, s)| s.abs() <= tol)
            .map(|(k, _)| *k)
            .collect()
    }
}

const ALL_TRIANGLE: [TriangleInequality; 3] = [
    TriangleInequality::Separation,
    TriangleInequality::DistanceToSecond,
    TriangleInequality::DistanceToFirst,
];

pub fn triangle_test(p: &UhdPoint, d: f64) -> TriangleVerdict {
    let side = |x: f64| if x >= 1.0 { 0.0 } else { (-x.ln()).sqrt() };
    let (a, b, c) = (side(p.p1), side(p.p2), 2.0 * d);
    let slacks = [a + b - c, a + c - b, b + c - a];
    let (idx, worst) = slacks
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, s)| (i, *s))
        .unwrap();
    let nonclassical = worst < 0.0;
    TriangleVerdict {
        nonclassical,
        violated: nonclassical.then_some(ALL_TRIANGLE[idx]),
        slacks,
    }
}

/// `t^2 - d^2 + 1/2`, which shares its sign with the curvature of the boundary.
pub fn curvature_sign(t: f64, d: f64) -> f64 {
    t * t - d * d + 0.5
}

fn angle_rate(t: f64, d: f64) -> f64 {
    let den = (t + d).powi(2) * (-4.0 * t * d).exp() + (t - d).powi(2) * (4.0 * t * d).exp();
    4.0 * d * curvature_sign(t, d) / den
}

/// Polar angle of the tangent `d/dt Pi(t)`, taken continuously from
/// `theta(-inf) = 0`; valid for `d <= 1/sqrt(2)`.
pub fn tangent_direction_angle(t: f64, d: f64) -> f64 {
    // tangent / (-2 (t + d) e^{-(t+d)^2}) has direction (-(t + d), -(t - d) e^{4td}) up to sign
    let (x, y) = (-(t + d), -(t - d) * (4.0 * t * d).exp());
    let s = x.abs().max(y.abs());
    let a = (y / s).atan2(x / s);
    if a < 0.0 {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

fn angle_horizon(d: f64) -> f64 {
    d + 6.0 + 5.0 / d
}

/// Tangential angle of the boundary curve, integrated from a far-left start.
pub fn tangential_angle(t: f64, d: f64) -> f64 {
    let t0 = -angle_horizon(d);
    let t1 = t.min(-t0);
    let theta0 = tangent_direction_angle(t0, d);
    if t1 <= t0 {
        return theta0;
    }
    theta0 + adaptive_simpson(&|s| angle_rate(s, d), t0, t1, 1e-12, 50)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    // split into panels so narrow features are not missed by the first estimate
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (x0, x1) = (a + h * i as f64, a + h * (i + 1) as f64);
            let (fa, fm, fb) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            rec(f, x0, x1, fa, fm, fb, simpson(fa, fm, fb, x0, x1), tol / panels as f64, depth)
        })
        .sum()
}

/// Rescales a test function for mode mismatch: `lambda_i / g(gamma_i)`.
pub fn mode_mismatch_rescale(lambda: [f64; 2], config: &UhdConfig) -> Result<[f64; 2]> {
    if !(config.xi > 0.0 && config.xi <= 1.0) {
        return Err(Error::Domain(format!("xi = {} outside (0, 1]", config.xi)));
    }
    let g = config.factors();
    Ok([lambda[0] / g[0], lambda[1] / g[1]])
}

/// No-click probability of a coherent amplitude `beta` (already scaled by
/// `sqrt(eta)`) with efficiency and mode mismatch.
pub fn mismatched_q_symbol(beta: Complex64, gamma: Complex64, eta: f64, xi: f64) -> f64 {
    let eg = eta.sqrt() * gamma;
    (-(beta - eg).norm_sqr()).exp() * (-eg.norm_sqr() * (1.0 - xi) / xi).exp()
}

/// Measured no-click probabilities of `state` under `config`.
///
/// The state first passes the detection loss `eta`; the local oscillators are
/// effectively `sqrt(eta) gamma_i`; mode mismatch multiplies each
/// probability by `g(gamma_i)`.
pub fn uhd_statistics(state: &StateSpec, config: &UhdConfig) -> Result<UhdPoint> {
    let lossy = StateSpec::new(state.kind, state.eta * config.eta)?;
    let se = config.eta.sqrt();
    let g = config.factors();
    let p1 = g[0] * uhd_click_prob(&lossy, se * config.gamma1)?;
    let p2 = g[1] * uhd_click_prob(&lossy, se * config.gamma2)?;
    UhdPoint::new(p1.min(1.0), p2.min(1.0))
}

/// Classical/nonclassical verdict for measured statistics under `config`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UhdVerdict {
    pub point: UhdPoint,
    pub triangle: TriangleVerdict,
    pub linear: LinearScan,
    pub d_eff: f64,
}

impl UhdVerdict {
    pub fn nonclassical(&self) -> bool {
        self.triangle.nonclassical
    }
}

/// Undoes the mismatch factors, then applies the triangle test and the
/// linear family in the frame of the effective settings.
pub fn uhd_verdict(measured: &UhdPoint, config: &UhdConfig) -> Result<UhdVerdict> {
    let g = config.factors();
    let q = UhdPoint::new((measured.p1 / g[0]).min(1.0), (measured.p2 / g[1]).min(1.0))?;
    let d = config.d_eff();
    Ok(UhdVerdict {
        point: *measured,
        triangle: triangle_test(&q, d),
        linear: max_linear_uhd(&q, d),
        d_eff: d,
    })
}

/// Bisection for the efficiency where `nonclassical(eta)` switches from
/// false (at `lo`) to true (at `hi`).
pub fn crossover_eta<F: Fn(f64) -> Result<bool>>(nonclassical: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    if nonclassical(lo)? || !nonclassical(hi)? {
        return Err(Error::Domain(format!(
            "no classical-to-nonclassical transition bracketed by eta in [{lo}, {hi}]"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if nonclassical(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The boundary curve as a parametric curve over `[-d - 6, d + 6]`, with the
/// origin as the limit point at both ends.
#[derive(Debug, Clone, Copy)]
pub struct UhdCurve {
    pub d: f64,
}

impl ParametricCurve for UhdCurve {
    fn dim(&self) -> usize {
        2
    }
    fn domain(&self) -> (f64, f64) {
        (-self.d - 6.0, self.d + 6.0)
    }
    fn point(&self, t: f64) -> Vec<f64> {
        boundary_curve(t, self.d).as_array().to_vec()
    }
    fn derivative(&self, t: f64, order: u8) -> Vec<f64> {
        let b = boundary_curve(t, self.d);
        let (x1, x2) = (t + self.d, t - self.d);
        if order == 1 {
            vec![-2.0 * x1 * b.p1, -2.0 * x2 * b.p2]
        } else {
            vec![(4.0 * x1 * x1 - 2.0) * b.p1, (4.0 * x2 * x2 - 2.0) * b.p2]
        }
    }
    fn limit_points(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0]]
    }
}
