//! Tight test functions for photocounting.
//!
//! For `N = 2` the supporting lines are tangents to the Q-symbol curve. For
//! odd `N = 2m + 1` a test function touches the curve at `m` interior nodes
//! and at one endpoint `tau in {0, 1}`: it is the common normal (generalized
//! cross product) of `Pi(t_i) - Pi(tau)` and `dPi/dt(t_i)`, oriented so that
//! `Pi(t) . lambda` is globally maximal at the touching points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorKind, DetectorModel};
use crate::error::{Error, Result};
use crate::geometry::{dot, generalized_cross, norm, CurveGrid, VectorN};
use crate::optimize::{bracket_roots, golden_max, nelder_mead_max};
use crate::states::PhotocountDistribution;

/// Points in the grid used to certify global maxima.
pub const VERIFY_GRID: usize = 4001;
/// Tolerance on `max_t Pi(t) . lambda - Pi(tau) . lambda` for unit `lambda`.
pub const GLOBAL_MAX_TOL: f64 = 1e-9;
const COARSE_STRIDE: usize = 10;
const SEED_GRID: usize = 17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    /// Normal vector at its natural scale (the cross product of the raw
    /// constraint vectors, or the rotated tangent for `N = 2`).
    pub lambda: VectorN,
    pub nodes: Vec<f64>,
    /// Touching endpoint; `None` for the tangent lines of `N = 2`.
    pub tau: Option<f64>,
    pub detector: DetectorModel,
    pub sign: i8,
    /// `sup_t Pi(t) . lambda`, attained at the nodes (and `tau`).
    pub rhs: f64,
}

impl TestFunction {
    /// `P . lambda - rhs`; positive means the inequality is violated.
    pub fn margin(&self, p: &[f64]) -> f64 {
        self.lambda.dot(p) - self.rhs
    }

    /// Unit-norm `lambda` and its right-hand side.
    pub fn unit(&self) -> (VectorN, f64) {
        let n = self.lambda.norm();
        if n == 0.0 {
            return (self.lambda.clone(), self.rhs);
        }
        (self.lambda.scaled(1.0 / n), self.rhs / n)
    }

    pub fn unit_margin(&self, p: &[f64]) -> f64 {
        let (l, r) = self.unit();
        l.dot(p) - r
    }

    /// Largest relative residual of the tangency conditions
    /// `(Pi(t_i) - Pi(tau)) . lambda = 0` and `dPi(t_i) . lambda = 0`.
    pub fn orthogonality_residual(&self) -> f64 {
        let ln = self.lambda.norm();
        let mut worst: f64 = 0.0;
        let base = self.tau.map(|tau| self.detector.point_at(tau));
        for &t in &self.nodes {
            let d = self.detector.deriv_raw(t, 1);
            worst = worst.max(rel(dot(&d, &self.lambda), ln * norm(&d)));
            if let Some(b) = &base {
                let diff: Vec<f64> = self.detector.point_at(t).iter().zip(b).map(|(x, y)| x - y).collect();
                worst = worst.max(rel(dot(&diff, &self.lambda), ln * norm(&diff)));
            }
        }
        worst
    }
}

fn rel(x: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        x.abs()
    } else {
        x.abs() / scale
    }
}

impl DetectorModel {
    /// Independent components at `t`, clamped into `[0, 1]`.
    pub fn point_at(&self, t: f64) -> Vec<f64> {
        let mut v = self.all_symbols(t.clamp(0.0, 1.0));
        v.truncate(self.n);
        v
    }
}

/// Tangent test function for `N = 2`: `lambda = (-dPi(1|t), dPi(0|t))`.
pub fn lambda_n2(detector: &DetectorModel, t: f64) -> Result<TestFunction> {
    if detector.n != 2 {
        return Err(Error::Usage(format!("lambda_n2 needs N = 2, got {}", detector.n)));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
    }
    let d = detector.deriv_raw(t, 1);
    let lambda = VectorN::new(vec![-d[1], d[0]])?;
    let rhs = lambda.dot(&detector.point_at(t));
    Ok(TestFunction {
        lambda,
        nodes: vec![t],
        tau: None,
        detector: *detector,
        sign: 1,
        rhs,
    })
}

/// The trivial nonnegativity inequality `-P(1) <= 0` for `N = 2`.
pub fn lambda_down(detector: &DetectorModel) -> Result<TestFunction> {
    if detector.n != 2 {
        return Err(Error::Usage(format!("lambda_down needs N = 2, got {}", detector.n)));
    }
    Ok(TestFunction {
        lambda: VectorN::new(vec![0.0, -1.0])?,
        nodes: vec![],
        tau: None,
        detector: *detector,
        sign: 1,
        rhs: 0.0,
    })
}

/// A nonlinear-inequality margin; positive means nonclassical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearMargin {
    pub value: f64,
    /// Set when the value comes from a limiting form (zero probabilities).
    pub degenerate: bool,
}

impl NonlinearMargin {
    fn exact(value: f64) -> Self {
        Self {
            value,
            degenerate: false,
        }
    }
}

fn check_dims(p: &PhotocountDistribution, detector: &DetectorModel, want: usize) -> Result<()> {
    if detector.n != want {
        return Err(Error::Usage(format!("expected N = {want}, detector has N = {}", detector.n)));
    }
    if p.dim() != want {
        return Err(Error::Usage(format!(
            "distribution has {} outcomes, detector has {}",
            p.probs.len(),
            detector.outcomes()
        )));
    }
    Ok(())
}

/// Envelope of the `N = 2` tangent family as a single inequality.
///
/// Click: `(2P0 + P1)^2 - 4 P0`. PNR: `P1 + P0 ln P0`, which for `P0 = 0`
/// reduces to `P1` (flagged degenerate).
pub fn nonlinear_n2(p: &PhotocountDistribution, detector: &DetectorModel) -> Result<NonlinearMargin> {
    check_dims(p, detector, 2)?;
    let (p0, p1) = (p.p(0), p.p(1));
    Ok(match detector.kind {
        DetectorKind::ClickArray => NonlinearMargin::exact((2.0 * p0 + p1).powi(2) - 4.0 * p0),
        DetectorKind::PnrTruncated => {
            if p0 > 0.0 {
                NonlinearMargin::exact(p1 + p0 * p0.ln())
            } else {
                NonlinearMargin {
                    value: p1,
                    degenerate: true,
                }
            }
        }
    })
}

/// Envelopes of the two `N = 3` families, `(tau = 0, tau = 1)`.
pub fn nonlinear_n3(
    p: &PhotocountDistribution,
    detector: &DetectorModel,
) -> Result<(NonlinearMargin, NonlinearMargin)> {
    check_dims(p, detector, 3)?;
    let (p0, p1, p2) = (p.p(0), p.p(1), p.p(2));
    Ok(match detector.kind {
        DetectorKind::PnrTruncated => {
            let tau0 = NonlinearMargin::exact(p1 * p1 - 2.0 * p0 * p2);
            let tau1 = if p1 > 0.0 {
                let x = 2.0 * p2 / p1;
                let ratio = if x == 0.0 { 1.0 } else { x.exp_m1() / x };
                NonlinearMargin::exact(p0 + p1 * ratio - 1.0)
            } else if p2 > 0.0 {
                NonlinearMargin {
                    value: f64::INFINITY,
                    degenerate: true,
                }
            } else {
                NonlinearMargin {
                    value: p0 - 1.0,
                    degenerate: true,
                }
            };
            (tau0, tau1)
        }
        DetectorKind::ClickArray => (
            NonlinearMargin::exact(p1 * p1 - 3.0 * p0 * p2),
            NonlinearMargin::exact(3.0 * p1 * p1 + p2 * p2 + 3.0 * p1 * (p0 + p2 - 1.0)),
        ),
    })
}

/// A detector together with the curve samples needed to orient and certify
/// its tight test functions. Building it once amortizes the grid.
#[derive(Debug, Clone)]
pub struct TightFamily {
    pub detector: DetectorModel,
    pub grid: CurveGrid,
}

/// Unit-norm normal with the orientation already fixed.
#[derive(Debug, Clone)]
pub struct OrientedNormal {
    pub unit: Vec<f64>,
    pub rhs: f64,
    pub sign: i8,
    /// Product of the constraint-vector norms: the raw normal is `scale * unit`.
    pub scale: f64,
}

impl TightFamily {
    pub fn new(detector: &DetectorModel) -> Result<Self> {
        if detector.n < 3 || detector.n % 2 == 0 {
            return Err(Error::Usage(format!(
                "tight construction needs odd N >= 3, got {}",
                detector.n
            )));
        }
        Ok(Self {
            detector: *detector,
            grid: CurveGrid::new(detector, VERIFY_GRID),
        })
    }

    pub fn m(&self) -> usize {
        (self.detector.n - 1) / 2
    }

    fn check_nodes(&self, nodes: &[f64], tau: f64) -> Result<()> {
        if tau != 0.0 && tau != 1.0 {
            return Err(Error::Usage(format!("tau must be 0 or 1, got {tau}")));
        }
        if nodes.len() != self.m() {
            return Err(Error::Usage(format!(
                "N = {} needs {} nodes, got {}",
                self.detector.n,
                self.m(),
                nodes.len()
            )));
        }
        for (i, &t) in nodes.iter().enumerate() {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Domain(format!("node {t} outside [0, 1]")));
            }
            if t == tau {
                return Err(Error::Degenerate(format!("node {t} coincides with tau")));
            }
            if i > 0 && t <= nodes[i - 1] {
                return Err(Error::Usage(format!("nodes must be strictly increasing: {nodes:?}")));
            }
        }
        Ok(())
    }

    /// Unit constraint vectors and the log of the product of their original
    /// norms.
    ///
    /// For PNR detectors the rows carry common factors (`N t^(N-1)` in the
    /// derivative, `e^(-u)` in the difference from `Pi(0)`) that underflow as
    /// `t -> 0`; they are split off so the directions stay exact.
    fn constraints(&self, nodes: &[f64], tau: f64) -> Result<(Vec<Vec<f64>>, f64)> {
        let base = self.detector.point_at(tau);
        let mut rows = Vec::with_capacity(2 * nodes.len());
        let mut ln_scale = 0.0;
        for &t in nodes {
            for (v, ln_factor) in [self.diff_row(t, tau, &base), self.deriv_row(t)] {
                let nv = norm(&v);
                if !(nv > 0.0) || !nv.is_finite() {
                    return Err(Error::Degenerate(format!("vanishing constraint vector at node {t}")));
                }
                ln_scale += ln_factor + nv.ln();
                rows.push(v.iter().map(|x| x / nv).collect());
            }
        }
        Ok((rows, ln_scale))
    }

    fn diff_row(&self, t: f64, tau: f64, base: &[f64]) -> (Vec<f64>, f64) {
        if self.detector.kind == DetectorKind::PnrTruncated && tau == 0.0 && t > 0.0 {
            // Pi(n|0) = 0 for n < N, and Pi(n|t) = e^(-u) u^n / n!
            let u = self.pnr_u(t);
            let mut term = 1.0;
            let v = (0..self.detector.n)
                .map(|n| {
                    if n > 0 {
                        term *= u / n as f64;
                    }
                    term
                })
                .collect();
            return (v, -u);
        }
        let v = self.detector.point_at(t).iter().zip(base).map(|(a, b)| a - b).collect();
        (v, 0.0)
    }

    fn deriv_row(&self, t: f64) -> (Vec<f64>, f64) {
        if self.detector.kind == DetectorKind::PnrTruncated && t > 0.0 {
            // dPi(n)/dt = N t^(N-1) (u^n - n u^(n-1)) / n!
            let u = self.pnr_u(t);
            let nf = self.detector.n as f64;
            let mut prev = 0.0;
            let mut term = 1.0;
            let v = (0..self.detector.n)
                .map(|n| {
                    if n > 0 {
                        prev = term;
                        term *= u / n as f64;
                    }
                    // (u^n - n u^(n-1)) / n! = u^n/n! - u^(n-1)/(n-1)!
                    term - prev
                })
                .collect();
            return (v, nf.ln() + (nf - 1.0) * t.ln());
        }
        (self.detector.deriv_raw(t, 1), 0.0)
    }

    fn pnr_u(&self, t: f64) -> f64 {
        (-(self.detector.n as f64) * t.ln()).max(0.0)
    }

    /// Unoriented unit normal and the log of the raw normal's length.
    ///
    /// The generalized cross product of the unit rows is used while the rows
    /// are well conditioned; for nearly dependent rows (closely spaced nodes at
    /// larger `N`) its cofactors lose all relative accuracy and the normal is
    /// taken from a QR null vector instead. Either way the result is projected
    /// onto the orthogonal complement of the rows to clean up rounding.
    fn unit_normal(&self, nodes: &[f64], tau: f64) -> Result<(Vec<f64>, f64)> {
        let (rows, ln_scale) = self.constraints(nodes, tau)?;
        let (basis, volume) = orthonormal_basis(&rows);
        if basis.len() < rows.len() {
            return Err(Error::Degenerate(format!(
                "constraint vectors are linearly dependent for nodes {nodes:?}, tau = {tau}"
            )));
        }
        let mut lam = if volume > 1e-8 {
            let cross = generalized_cross(&rows)?;
            let cn = cross.norm();
            cross.iter().map(|x| x / cn).collect()
        } else {
            null_vector(&basis, self.detector.n)
        };
        for _ in 0..2 {
            project_out(&mut lam, &basis);
        }
        let ln = norm(&lam);
        for l in &mut lam {
            *l /= ln;
        }
        Ok((lam, ln_scale + volume.ln()))
    }

    fn orient(&self, lam: Vec<f64>, tau: f64, stride: usize, nodes: &[f64]) -> Result<OrientedNormal> {
        let f_tau = dot(&self.detector.point_at(tau), &lam);
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for p in self.grid.points.iter().step_by(stride) {
            let v = dot(p, &lam);
            hi = hi.max(v);
            lo = lo.min(v);
        }
        let plus = hi - f_tau;
        let minus = f_tau - lo;
        let sign: i8 = if plus <= minus { 1 } else { -1 };
        let excess = plus.min(minus);
        if excess > GLOBAL_MAX_TOL {
            return Err(Error::Degenerate(format!(
                "neither orientation puts the global maximum at the nodes {nodes:?}, tau = {tau} (excess {excess:e})"
            )));
        }
        let s = sign as f64;
        Ok(OrientedNormal {
            unit: lam.into_iter().map(|x| s * x).collect(),
            rhs: s * f_tau,
            sign,
            scale: 0.0,
        })
    }

    /// Oriented unit normal using a coarse grid (for inner optimization loops).
    pub fn quick_normal(&self, nodes: &[f64], tau: f64) -> Result<OrientedNormal> {
        self.check_nodes(nodes, tau)?;
        let (lam, ln_scale) = self.unit_normal(nodes, tau)?;
        let mut o = self.orient(lam, tau, COARSE_STRIDE, nodes)?;
        o.scale = ln_scale.exp();
        Ok(o)
    }

    /// Fully verified tight test function.
    pub fn lambda(&self, nodes: &[f64], tau: f64) -> Result<TestFunction> {
        self.check_nodes(nodes, tau)?;
        let (lam, ln_scale) = self.unit_normal(nodes, tau)?;
        let o = self.orient(lam, tau, 1, nodes)?;
        // nodes very close to t = 0 can push the natural scale out of range
        let scale = Some(ln_scale.exp()).filter(|x| x.is_normal()).unwrap_or(1.0);
        Ok(TestFunction {
            lambda: VectorN::new(o.unit.iter().map(|x| x * scale).collect())?,
            nodes: nodes.to_vec(),
            tau: Some(tau),
            detector: self.detector,
            sign: o.sign,
            rhs: o.rhs * scale,
        })
    }

    /// Unit-normalized margin of `p` (independent components) for the given
    /// nodes; `None` if the construction degenerates.
    pub fn quick_margin(&self, p: &[f64], nodes: &[f64], tau: f64) -> Option<f64> {
        self.quick_normal(nodes, tau).ok().map(|o| dot(p, &o.unit) - o.rhs)
    }

    /// Maximizes the unit-normalized margin over nodes and `tau`.
    ///
    /// Seeds come from all ordered node sets on a 17-point grid (per `tau`);
    /// the best `n_restarts` of them plus `n_restarts` random perturbations are
    /// refined by Nelder–Mead in the ordered-simplex parametrization.
    pub fn max_violation(&self, p: &PhotocountDistribution, n_restarts: usize, seed: u64) -> Result<ViolationReport> {
        if p.dim() != self.detector.n {
            return Err(Error::Usage(format!(
                "distribution has {} outcomes, detector has {}",
                p.probs.len(),
                self.detector.outcomes()
            )));
        }
        let q = p.independent();
        let m = self.m();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid: Vec<f64> = (1..=SEED_GRID).map(|k| k as f64 / (SEED_GRID + 1) as f64).collect();
        let combos = ordered_subsets(&grid, m);
        let keep = n_restarts.max(1);

        struct Cand {
            value: f64,
            nodes: Vec<f64>,
            tau: f64,
            converged: bool,
        }
        let mut results: Vec<Cand> = Vec::new();
        for tau in [0.0, 1.0] {
            let mut seeds: Vec<(f64, &Vec<f64>)> = combos
                .iter()
                .filter_map(|nodes| self.quick_margin(q, nodes, tau).map(|v| (v, nodes)))
                .collect();
            seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut starts: Vec<Vec<f64>> = seeds.iter().take(keep).map(|(_, n)| nodes_to_z(n)).collect();
            if let Some(best) = starts.first().cloned() {
                for _ in 0..n_restarts {
                    starts.push(best.iter().map(|z| z + rng.random_range(-1.5..1.5)).collect());
                }
            }
            for z0 in starts {
                let obj = |z: &[f64]| {
                    let nodes = z_to_nodes(z);
                    self.quick_margin(q, &nodes, tau).unwrap_or(f64::NEG_INFINITY)
                };
                let r = nelder_mead_max(obj, &z0, 0.4, 200, 1e-10);
                results.push(Cand {
                    value: r.value,
                    nodes: z_to_nodes(&r.x),
                    tau,
                    converged: r.converged,
                });
            }
        }
        results.sort_by(|a, b| b.value.total_cmp(&a.value));
        let mut last_err = None;
        for c in results {
            match self.lambda(&c.nodes, c.tau) {
                Ok(tf) => {
                    let (unit, rhs) = tf.unit();
                    let margin = unit.dot(q) - rhs;
                    let t_sup = self.argmax(&unit, &c.nodes);
                    return Ok(ViolationReport {
                        margin,
                        nodes: c.nodes,
                        tau: Some(c.tau),
                        t_sup,
                        std_error: 0.0,
                        n_samples: 0,
                        converged: c.converged,
                        lambda: unit,
                        rhs,
                        detector: self.detector,
                    });
                }
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap_or_else(|| Error::Degenerate("no admissible node set found".into())))
    }

    fn argmax(&self, lam: &[f64], nodes: &[f64]) -> f64 {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for (t, p) in self.grid.ts.iter().zip(&self.grid.points) {
            let v = dot(p, lam);
            if v > best.0 {
                best = (v, *t);
            }
        }
        for &t in nodes {
            let v = dot(&self.detector.point_at(t), lam);
            if v >= best.0 - 1e-15 {
                best = (v, t);
            }
        }
        best.1
    }
}

/// Modified Gram–Schmidt (twice) on the rows; rows whose residual vanishes
/// are dropped. Also returns the volume spanned by the rows (the product of
/// the residual norms).
fn orthonormal_basis(rows: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut volume = 1.0;
    for r in rows {
        let mut v = r.clone();
        for _ in 0..2 {
            project_out(&mut v, &basis);
        }
        let nv = norm(&v);
        if nv > 1e-14 * norm(r) {
            volume *= nv;
            basis.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    (basis, volume)
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(q, v);
        for (vi, qi) in v.iter_mut().zip(q) {
            *vi -= c * qi;
        }
    }
}

/// Unit vector orthogonal to an orthonormal basis of `dim - 1` vectors.
fn null_vector(basis: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut best = vec![0.0; dim];
    let mut best_norm = -1.0;
    for k in 0..dim {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        for _ in 0..2 {
            project_out(&mut v, basis);
        }
        let nv = norm(&v);
        if nv > best_norm {
            best_norm = nv;
            best = v;
        }
    }
    best.into_iter().map(|x| x / best_norm).collect()
}

fn ordered_subsets(grid: &[f64], m: usize) -> Vec<Vec<f64>> {
    fn rec(grid: &[f64], start: usize, m: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..grid.len() {
            cur.push(grid[i]);
            rec(grid, i + 1, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(grid, 0, m, &mut Vec::new(), &mut out);
    out
}

/// Ordered nodes in `(0, 1)` from unconstrained `z`: the `m + 1` gaps are a
/// softmax of `(0, z_1, .., z_m)` and the nodes their partial sums.
pub fn z_to_nodes(z: &[f64]) -> Vec<f64> {
    let mx = z.iter().copied().fold(0.0, f64::max);
    let w: Vec<f64> = std::iter::once(0.0).chain(z.iter().copied()).map(|x| (x - mx).exp()).collect();
    let s: f64 = w.iter().sum();
    let mut acc = 0.0;
    w[..z.len()]
        .iter()
        .map(|g| {
            acc += g / s;
            acc
        })
        .collect()
}

pub fn nodes_to_z(nodes: &[f64]) -> Vec<f64> {
    let mut gaps = Vec::with_capacity(nodes.len() + 1);
    let mut prev = 0.0;
    for &t in nodes {
        gaps.push(t - prev);
        prev = t;
    }
    gaps.push(1.0 - prev);
    let g0 = gaps[0].max(1e-300);
    gaps[1..].iter().map(|g| (g.max(1e-300) / g0).ln()).collect()
}

/// Tight test function for `N = 2m + 1` through nodes `t_1 < .. < t_m` and
/// endpoint `tau`.
pub fn lambda_odd(detector: &DetectorModel, nodes: &[f64], tau: f64) -> Result<TestFunction> {
    TightFamily::new(detector)?.lambda(nodes, tau)
}

/// `N = 3` special case of [`lambda_odd`].
pub fn lambda_n3(detector: &DetectorModel, t1: f64, tau: f64) -> Result<TestFunction> {
    if detector.n != 3 {
        return Err(Error::Usage(format!("lambda_n3 needs N = 3, got {}", detector.n)));
    }
    lambda_odd(detector, &[t1], tau)
}

/// Critical-point structure of one test function: interlacing, inflection count and global maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement2Report {
    pub m: usize,
    /// Critical points of `Pi(t) . lambda` in `(0, 1)` other than the nodes.
    pub extra_critical_points: Vec<f64>,
    /// Whether the extra critical points separate the touching points.
    pub interlaced: bool,
    /// Zeros of the second derivative (in `s = t^N` for PNR, in `t` for clicks).
    pub second_derivative_zeros: usize,
    pub global_max_at_nodes: bool,
    /// `max_t Pi(t) . lambda - Pi(tau) . lambda` for unit `lambda`.
    pub max_excess: f64,
}

impl Statement2Report {
    pub fn holds(&self) -> bool {
        self.extra_critical_points.len() == self.m
            && self.interlaced
            && self.second_derivative_zeros + 1 == 2 * self.m
            && self.global_max_at_nodes
    }
}

pub fn verify_statement2(tf: &TestFunction) -> Result<Statement2Report> {
    let det = tf.detector;
    let tau = tf
        .tau
        .ok_or_else(|| Error::Usage("structure check needs a test function with an endpoint".into()))?;
    let m = tf.nodes.len();
    let (lam, _) = tf.unit();
    let f1 = |t: f64| dot(&det.deriv_raw(t, 1), &lam);
    let f2 = |t: f64| dot(&det.deriv_raw(t, 2), &lam);

    let crit = bracket_roots(f1, 0.0, 1.0, 20_000, 1e-14);
    let extra: Vec<f64> = crit
        .into_iter()
        .filter(|c| tf.nodes.iter().all(|t| (c - t).abs() > 1e-7))
        .collect();

    let mut bounds = Vec::with_capacity(m + 2);
    bounds.push(0.0);
    bounds.extend_from_slice(&tf.nodes);
    bounds.push(1.0);
    // tau = 0: c_i in (t_{i-1}, t_i) with t_0 = 0; tau = 1: c_i in (t_i, t_{i+1}) with t_{m+1} = 1
    let interlaced = extra.len() == m
        && extra.iter().enumerate().all(|(i, &c)| {
            let (lo, hi) = if tau == 0.0 {
                (bounds[i], bounds[i + 1])
            } else {
                (bounds[i + 1], bounds[i + 2])
            };
            c > lo && c < hi
        });

    let nf = det.n as f64;
    let second = match det.kind {
        DetectorKind::ClickArray => bracket_roots(f2, 0.0, 1.0, 20_000, 1e-14),
        DetectorKind::PnrTruncated => {
            bracket_roots(|t| t * f2(t) + (1.0 - nf) * f1(t), 0.0, 1.0, 20_000, 1e-14)
        }
    };

    let grid = CurveGrid::new(&det, VERIFY_GRID);
    let f_tau = dot(&det.point_at(tau), &lam);
    let mut max_excess = f64::NEG_INFINITY;
    for p in grid.points.iter().chain(tf.nodes.iter().map(|&t| det.point_at(t)).collect::<Vec<_>>().iter()) {
        max_excess = max_excess.max(dot(p, &lam) - f_tau);
    }
    Ok(Statement2Report {
        m,
        extra_critical_points: extra,
        interlaced,
        second_derivative_zeros: second.len(),
        global_max_at_nodes: max_excess <= GLOBAL_MAX_TOL,
        max_excess,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    /// Margin for the unit-norm test function; positive means violated.
    pub margin: f64,
    pub nodes: Vec<f64>,
    /// Touching endpoint; `None` for the tangent lines of `N = 2`.
    pub tau: Option<f64>,
    /// Where `Pi(t) . lambda` is maximal on the curve.
    pub t_sup: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub converged: bool,
    pub lambda: VectorN,
    pub rhs: f64,
    pub detector: DetectorModel,
}

impl ViolationReport {
    pub fn test_function(&self) -> TestFunction {
        TestFunction {
            lambda: self.lambda.clone(),
            nodes: self.nodes.clone(),
            tau: self.tau,
            detector: self.detector,
            sign: 1,
            rhs: self.rhs,
        }
    }
}

/// Largest violation of the tight family for `N = 2m + 1`.
pub fn max_violation(
    p: &PhotocountDistribution,
    detector: &DetectorModel,
    m: usize,
    n_restarts: usize,
    seed: u64,
) -> Result<ViolationReport> {
    if detector.n != 2 * m + 1 {
        return Err(Error::Usage(format!("N = {} is not 2m + 1 for m = {m}", detector.n)));
    }
    TightFamily::new(detector)?.max_violation(p, n_restarts, seed)
}

/// Largest unit-normalized violation of the tangent family for `N = 2`.
///
/// The tangent parameter is scanned on [`VERIFY_GRID`] points and the best
/// one refined by golden section; the nonnegativity inequality is included.
pub fn max_violation_n2(p: &PhotocountDistribution, detector: &DetectorModel) -> Result<ViolationReport> {
    check_dims(p, detector, 2)?;
    let q = p.independent();
    let unit_margin = |t: f64| match lambda_n2(detector, t) {
        Ok(tf) if tf.lambda.norm().is_finite() && tf.lambda.norm() > 0.0 => tf.unit_margin(q),
        _ => f64::NEG_INFINITY,
    };
    let h = 1.0 / (VERIFY_GRID - 1) as f64;
    let (mut t_best, mut v_best) = (0.0, f64::NEG_INFINITY);
    for k in 0..VERIFY_GRID {
        let t = k as f64 * h;
        let v = unit_margin(t);
        if v > v_best {
            (t_best, v_best) = (t, v);
        }
    }
    let (t, v) = golden_max(unit_margin, (t_best - h).max(0.0), (t_best + h).min(1.0), 1e-14, 200);
    if v > v_best {
        (t_best, v_best) = (t, v);
    }
    let down = lambda_down(detector)?;
    let tf = if down.margin(q) > v_best { down } else { lambda_n2(detector, t_best)? };
    let (unit, rhs) = tf.unit();
    Ok(ViolationReport {
        margin: unit.dot(q) - rhs,
        t_sup: tf.nodes.first().copied().unwrap_or(1.0),
        nodes: tf.nodes,
        tau: None,
        std_error: 0.0,
        n_samples: 0,
        converged: true,
        lambda: unit,
        rhs,
        detector: *detector,
    })
}

/// Largest violation over the tight family of the detector: tangents for
/// `N = 2`, the node construction for odd `N`. Even `N > 2` is not covered.
pub fn optimal_violation(
    p: &PhotocountDistribution,
    detector: &DetectorModel,
    n_restarts: usize,
    seed: u64,
) -> Result<ViolationReport> {
    match detector.n {
        2 => max_violation_n2(p, detector),
        n if n >= 3 && n % 2 == 1 => TightFamily::new(detector)?.max_violation(p, n_restarts, seed),
        n => Err(Error::Usage(format!(
            "tight test functions are constructed for N = 2 and odd N; got N = {n}"
        ))),
    }
}

/// The one-node family (`N = 3`) tabulated on a uniform `t_1` grid for both
/// endpoints, with golden-section refinement of the best entry.
#[derive(Debug, Clone)]
pub struct LinearFamily {
    pub family: TightFamily,
    /// `(t1, tau, unit lambda, rhs)` for every admissible grid point.
    pub entries: Vec<(f64, f64, Vec<f64>, f64)>,
}

impl LinearFamily {
    pub fn new(detector: &DetectorModel, points: usize) -> Result<Self> {
        if detector.n != 3 {
            return Err(Error::Usage(format!("linear family is tabulated for N = 3, got {}", detector.n)));
        }
        let family = TightFamily::new(detector)?;
        let mut entries = Vec::with_capacity(2 * points);
        for tau in [0.0, 1.0] {
            for k in 0..points {
                let t1 = k as f64 / (points - 1) as f64;
                if t1 == tau {
                    continue;
                }
                if let Ok(o) = family.quick_normal(&[t1], tau) {
                    entries.push((t1, tau, o.unit, o.rhs));
                }
            }
        }
        Ok(Self { family, entries })
    }

    /// Maximal unit-normalized margin and its `(t1, tau)`.
    pub fn max_margin(&self, p: &[f64]) -> (f64, f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        let mut best_idx = 0;
        for (i, (t1, tau, l, r)) in self.entries.iter().enumerate() {
            let v = dot(p, l) - r;
            if v > best.0 {
                best = (v, *t1, *tau);
                best_idx = i;
            }
        }
        let (_, t1, tau) = best;
        let h = {
            let e = &self.entries;
            let same = |j: usize| e.get(j).filter(|x| x.1 == tau).map(|x| x.0);
            (best_idx.checked_sub(1).and_then(same), same(best_idx + 1))
        };
        let f = |t: f64| self.family.quick_margin(p, &[t], tau).unwrap_or(f64::NEG_INFINITY);
        let cand = match h {
            // lowest admissible t1 with tau = 0: the optimum may sit far below the grid
            (None, Some(hi)) if tau == 0.0 => {
                let (s, v) = golden_max(|s: f64| f(s.exp()), (1e-60f64).ln(), hi.ln(), 1e-12, 400);
                (v, s.exp())
            }
            (lo, hi) => {
                let (a, b) = (lo.unwrap_or(t1), hi.unwrap_or(t1));
                let (t, v) = golden_max(f, a, b, 1e-13, 200);
                (v, t)
            }
        };
        if cand.0 > best.0 {
            (cand.0, cand.1, tau)
        } else {
            best
        }
    }
}
