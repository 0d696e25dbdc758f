//! Photon-number and photocount statistics of lossy single-mode states.
//!
//! Conventions: `a = x + i p` with vacuum quadrature variance 1/4 in these
//! amplitude units (1/2 for `(a + a^dag)/sqrt 2`). The squeezed coherent state
//! is `D(alpha) S(zeta) |0>` with `S(zeta) = exp((zeta^* a^2 - zeta a^dag^2)/2)`
//! and `zeta = r e^{i phi}`; `phi = 0` squeezes `Re a`. Loss is a beam
//! splitter of transmissivity `eta` acting on the state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detectors::DetectorModel;
use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_factorials};

/// Largest photon number considered when choosing a truncation.
pub const M_MAX_CAP: usize = 400;
/// Accepted probability mass beyond the truncation.
pub const TAIL_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateKind {
    FockWithLoss { n: usize },
    Coherent { alpha: Complex64 },
    SqueezedCoherent { alpha: Complex64, r: f64, phi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub kind: StateKind,
    pub eta: f64,
}

impl StateSpec {
    pub fn new(kind: StateKind, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Domain(format!("efficiency eta = {eta} outside (0, 1]")));
        }
        if let StateKind::SqueezedCoherent { r, phi, alpha } = kind {
            if !(r >= 0.0 && r.is_finite()) || !phi.is_finite() {
                return Err(Error::Domain(format!("squeezing r = {r}, phi = {phi} invalid")));
            }
            if !(alpha.re.is_finite() && alpha.im.is_finite()) {
                return Err(Error::Domain("displacement must be finite".into()));
            }
        }
        if let StateKind::Coherent { alpha } = kind {
            if !(alpha.re.is_finite() && alpha.im.is_finite()) {
                return Err(Error::Domain("displacement must be finite".into()));
            }
        }
        Ok(Self { kind, eta })
    }

    pub fn fock(n: usize, eta: f64) -> Result<Self> {
        Self::new(StateKind::FockWithLoss { n }, eta)
    }

    pub fn vacuum() -> Self {
        Self {
            kind: StateKind::FockWithLoss { n: 0 },
            eta: 1.0,
        }
    }

    pub fn coherent(alpha: Complex64, eta: f64) -> Result<Self> {
        Self::new(StateKind::Coherent { alpha }, eta)
    }

    pub fn squeezed_coherent(alpha: Complex64, r: f64, phi: f64, eta: f64) -> Result<Self> {
        Self::new(StateKind::SqueezedCoherent { alpha, r, phi }, eta)
    }

    /// Displaced squeezed state whose squeezed quadrature is orthogonal to the
    /// displacement (phase squeezing); for `alpha0 = 0` the real axis is
    /// antisqueezed.
    pub fn phase_squeezed(alpha0: Complex64, r: f64, eta: f64) -> Result<Self> {
        let phi = std::f64::consts::PI + 2.0 * alpha0.arg();
        Self::squeezed_coherent(alpha0, r, phi, eta)
    }

    /// Whether the state is Gaussian (Fock states with `n >= 2` are not; `n = 1`
    /// is not either, but vacuum is).
    pub fn is_gaussian(&self) -> bool {
        !matches!(self.kind, StateKind::FockWithLoss { n } if n > 0)
    }

    /// Smallest `m_max` leaving at most [`TAIL_LIMIT`] behind, capped at
    /// [`M_MAX_CAP`].
    pub fn default_m_max(&self) -> usize {
        match self.kind {
            StateKind::FockWithLoss { n } => n,
            _ => {
                let p = lossless_probs(&self.kind, M_MAX_CAP);
                let mut acc = 0.0;
                for (m, x) in p.iter().enumerate() {
                    acc += x;
                    if 1.0 - acc <= TAIL_LIMIT {
                        return m;
                    }
                }
                M_MAX_CAP
            }
        }
    }
}

/// Diagonal of the density matrix in the Fock basis, truncated at `m_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonNumberDist {
    pub probs: Vec<f64>,
    pub tail_mass: f64,
}

impl PhotonNumberDist {
    pub fn m_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(m, p)| m as f64 * p).sum()
    }
}

/// Outcome probabilities `P(0..=N)` of a detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotocountDistribution {
    pub probs: Vec<f64>,
}

impl PhotocountDistribution {
    /// Validates nonnegativity and normalization (within 1e-10).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::Usage("a photocount distribution needs at least two outcomes".into()));
        }
        if probs.iter().any(|&p| !(p >= -1e-15) || !p.is_finite()) {
            return Err(Error::Domain(format!("negative or non-finite probability in {probs:?}")));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("probabilities sum to {s}, not 1")));
        }
        Ok(Self {
            probs: probs.into_iter().map(|p| p.max(0.0)).collect(),
        })
    }

    /// Builds `P` from its first `N` components; the last is `1 - sum`.
    pub fn from_independent(p: &[f64]) -> Result<Self> {
        let mut v = p.to_vec();
        v.push(1.0 - p.iter().sum::<f64>());
        Self::new(v)
    }

    /// `N`, the number of independent components.
    pub fn dim(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn independent(&self) -> &[f64] {
        &self.probs[..self.dim()]
    }

    pub fn p(&self, n: usize) -> f64 {
        self.probs[n]
    }
}

/// Lossless Fock amplitudes of a displaced squeezed state, `m = 0..=m_max`.
pub fn squeezed_coherent_amplitudes(alpha: Complex64, r: f64, phi: f64, m_max: usize) -> Vec<Complex64> {
    let th = r.tanh();
    let e = Complex64::from_polar(1.0, phi);
    let c0 = (-0.5 * alpha.norm_sqr() - 0.5 * alpha.conj() * alpha.conj() * e * th).exp() / r.cosh().sqrt();
    let lin = alpha + alpha.conj() * e * th;
    let quad = -e * th;
    let mut c = Vec::with_capacity(m_max + 1);
    c.push(c0);
    for n in 0..m_max {
        let prev = if n > 0 { c[n - 1] } else { Complex64::new(0.0, 0.0) };
        let next = (lin * c[n] + quad * (n as f64).sqrt() * prev) / ((n + 1) as f64).sqrt();
        c.push(next);
    }
    c
}

fn lossless_probs(kind: &StateKind, m_max: usize) -> Vec<f64> {
    match *kind {
        StateKind::FockWithLoss { n } => (0..=m_max).map(|m| if m == n { 1.0 } else { 0.0 }).collect(),
        StateKind::Coherent { alpha } => poisson(alpha.norm_sqr(), m_max),
        StateKind::SqueezedCoherent { alpha, r, phi } => squeezed_coherent_amplitudes(alpha, r, phi, m_max)
            .iter()
            .map(|c| c.norm_sqr())
            .collect(),
    }
}

fn poisson(mean: f64, m_max: usize) -> Vec<f64> {
    if mean == 0.0 {
        return (0..=m_max).map(|m| if m == 0 { 1.0 } else { 0.0 }).collect();
    }
    let lm = mean.ln();
    (0..=m_max)
        .map(|m| (m as f64 * lm - mean - ln_factorial(m)).exp())
        .collect()
}

/// Beam-splitter loss: `p'_j = sum_m p_m C(m, j) eta^j (1 - eta)^(m - j)`.
pub fn apply_loss(p: &[f64], eta: f64) -> Vec<f64> {
    if eta == 1.0 {
        return p.to_vec();
    }
    let lf = ln_factorials(p.len() + 1);
    let (le, lq) = (eta.ln(), (1.0 - eta).ln());
    let mut out = vec![0.0; p.len()];
    for (m, &pm) in p.iter().enumerate() {
        if pm == 0.0 {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate().take(m + 1) {
            let lb = lf[m] - lf[j] - lf[m - j] + j as f64 * le + (m - j) as f64 * lq;
            *o += pm * lb.exp();
        }
    }
    out
}

/// Fock statistics of the lossy state, truncated at `m_max`.
pub fn photon_number_dist(state: &StateSpec, m_max: usize) -> Result<PhotonNumberDist> {
    let probs = match state.kind {
        StateKind::Coherent { alpha } => poisson(state.eta * alpha.norm_sqr(), m_max),
        StateKind::FockWithLoss { n } => {
            let mut p = vec![0.0; n.max(m_max) + 1];
            p[n] = 1.0;
            let mut q = apply_loss(&p, state.eta);
            q.truncate(m_max + 1);
            q
        }
        StateKind::SqueezedCoherent { .. } => {
            // Loss only moves mass downwards, so truncating before the
            // convolution is exact up to the lossless tail.
            apply_loss(&lossless_probs(&state.kind, m_max), state.eta)
        }
    };
    let tail_mass = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    if tail_mass > TAIL_LIMIT {
        return Err(Error::Truncation {
            m_max,
            tail_mass,
            limit: TAIL_LIMIT,
        });
    }
    Ok(PhotonNumberDist { probs, tail_mass })
}

/// Born's rule against the detector's Fock-diagonal POVM.
pub fn photocount_dist(state: &StateSpec, detector: &DetectorModel) -> Result<PhotocountDistribution> {
    let m_max = state.default_m_max().max(detector.n);
    let rho = photon_number_dist(state, m_max)?;
    let table = detector.povm_table(m_max)?;
    let mut probs: Vec<f64> = table
        .iter()
        .map(|row| row.iter().zip(&rho.probs).map(|(e, p)| e * p).sum())
        .collect();
    // The truncated tail can only end up in the saturated outcome for PNR and
    // in some outcome for clicks; at <= 1e-12 it is below reporting precision.
    let last = probs.len() - 1;
    probs[last] += rho.tail_mass;
    PhotocountDistribution::new(probs)
}

/// Normally ordered covariance of `(Re a, Im a)` and the mean amplitude,
/// after loss.
pub fn gaussian_moments(state: &StateSpec) -> Option<([[f64; 2]; 2], [f64; 2])> {
    let eta = state.eta;
    let (alpha, s) = match state.kind {
        StateKind::Coherent { alpha } => (alpha, [[0.0; 2]; 2]),
        StateKind::FockWithLoss { n: 0 } => (Complex64::new(0.0, 0.0), [[0.0; 2]; 2]),
        StateKind::SqueezedCoherent { alpha, r, phi } => {
            let nn = r.sinh().powi(2);
            let m = -Complex64::from_polar(r.sinh() * r.cosh(), phi);
            (alpha, [[(nn + m.re) / 2.0, m.im / 2.0], [m.im / 2.0, (nn - m.re) / 2.0]])
        }
        StateKind::FockWithLoss { .. } => return None,
    };
    let se = eta.sqrt();
    Some((
        [[eta * s[0][0], eta * s[0][1]], [eta * s[1][0], eta * s[1][1]]],
        [se * alpha.re, se * alpha.im],
    ))
}

fn sym_eigen(s: [[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (a, b, c) = (s[0][0], s[0][1], s[1][1]);
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    let (cs, sn) = (theta.cos(), theta.sin());
    ([mid + rad, mid - rad], [[cs, sn], [-sn, cs]])
}

/// Photon-number distribution of a Gaussian state from its generating
/// function sampled on the unit circle (independent of the Fock recurrence).
pub fn photon_number_dist_gaussian(state: &StateSpec, m_max: usize) -> Result<Vec<f64>> {
    let (s, b) = gaussian_moments(state)
        .ok_or_else(|| Error::Usage("generating-function route needs a Gaussian state".into()))?;
    let (ev, vecs) = sym_eigen(s);
    let bb = [
        vecs[0][0] * b[0] + vecs[0][1] * b[1],
        vecs[1][0] * b[0] + vecs[1][1] * b[1],
    ];
    let k = (4 * (m_max + 1)).max(1024);
    let one = Complex64::new(1.0, 0.0);
    let g: Vec<Complex64> = (0..k)
        .map(|j| {
            let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / k as f64);
            let mu = one - z;
            let mut val = one;
            let mut expo = Complex64::new(0.0, 0.0);
            for i in 0..2 {
                let den = one + 2.0 * mu * ev[i];
                val /= den.sqrt();
                expo -= mu * bb[i] * bb[i] / den;
            }
            val * expo.exp()
        })
        .collect();
    Ok((0..=m_max)
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, gj) in g.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * ((j * n) % k) as f64 / k as f64;
                acc += gj * Complex64::from_polar(1.0, ang);
            }
            acc.re / k as f64
        })
        .collect())
}

/// `<gamma| rho |gamma>`: the no-click probability behind a displacement by
/// `-gamma`.
pub fn uhd_click_prob(state: &StateSpec, gamma: Complex64) -> Result<f64> {
    match gaussian_moments(state) {
        Some((s, b)) => {
            let m = [[1.0 + 2.0 * s[0][0], 2.0 * s[0][1]], [2.0 * s[1][0], 1.0 + 2.0 * s[1][1]]];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let dx = b[0] - gamma.re;
            let dy = b[1] - gamma.im;
            let quad = (m[1][1] * dx * dx - 2.0 * m[0][1] * dx * dy + m[0][0] * dy * dy) / det;
            Ok((-quad).exp() / det.sqrt())
        }
        None => {
            let StateKind::FockWithLoss { n } = state.kind else {
                unreachable!()
            };
            let p = photon_number_dist(state, n)?;
            let g2 = gamma.norm_sqr();
            Ok(p
                .probs
                .iter()
                .enumerate()
                .map(|(j, pj)| {
                    let w = if g2 == 0.0 {
                        if j == 0 {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        (j as f64 * g2.ln() - g2 - ln_factorial(j)).exp()
                    };
                    pj * w
                })
                .sum())
        }
    }
}

/// Fock-basis evaluation of `<gamma| rho |gamma>` through the loss channel's
/// Kraus operators; used to cross-check the Gaussian formula.
pub fn uhd_click_prob_fock(state: &StateSpec, gamma: Complex64, m_max: usize) -> Result<f64> {
    let amps: Vec<Complex64> = match state.kind {
        StateKind::FockWithLoss { n } => {
            let mut a = vec![Complex64::new(0.0, 0.0); n.max(m_max) + 1];
            a[n] = Complex64::new(1.0, 0.0);
            a
        }
        StateKind::Coherent { alpha } => squeezed_coherent_amplitudes(alpha, 0.0, 0.0, m_max),
        StateKind::SqueezedCoherent { alpha, r, phi } => squeezed_coherent_amplitudes(alpha, r, phi, m_max),
    };
    let norm: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
    if 1.0 - norm > 1e-11 {
        return Err(Error::Truncation {
            m_max,
            tail_mass: 1.0 - norm,
            limit: 1e-11,
        });
    }
    let mm = amps.len();
    let lf = ln_factorials(mm + 1);
    let eta = state.eta;
    // <gamma|j> = e^{-|gamma|^2/2} conj(gamma)^j / sqrt(j!)
    let mut overlap = Vec::with_capacity(mm);
    let mut pw = Complex64::new((-0.5 * gamma.norm_sqr()).exp(), 0.0);
    for j in 0..mm {
        overlap.push(pw * (-0.5 * lf[j]).exp());
        pw *= gamma.conj();
    }
    let mut total = 0.0;
    for k in 0..mm {
        let mut acc = Complex64::new(0.0, 0.0);
        for m in k..mm {
            let coef = if eta == 1.0 {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (0.5 * (lf[m] - lf[k] - lf[m - k] + (m - k) as f64 * eta.ln() + k as f64 * (1.0 - eta).ln()))
                    .exp()
            };
            if coef != 0.0 {
                acc += amps[m] * coef * overlap[m - k];
            }
        }
        total += acc.norm_sqr();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_photon_loss() {
        let p = photon_number_dist(&StateSpec::fock(1, 0.7).unwrap(), 1).unwrap();
        assert!((p.probs[0] - 0.3).abs() < 1e-15 && (p.probs[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn coherent_is_poisson() {
        let s = StateSpec::coherent(c(1.0, 0.0), 1.0).unwrap();
        let p = photon_number_dist(&s, s.default_m_max()).unwrap();
        assert!((p.probs[0] - (-1f64).exp()).abs() < 1e-15);
        assert!(p.tail_mass <= TAIL_LIMIT);
    }

    #[test]
    fn squeezed_vacuum_has_even_support() {
        let s = StateSpec::squeezed_coherent(c(0.0, 0.0), 0.34, 0.0, 1.0).unwrap();
        let p = photon_number_dist(&s, s.default_m_max()).unwrap();
        // |c0| = 1/sqrt(cosh r), so p0 = 1/cosh r
        assert!((p.probs[0] - 1.0 / 0.34f64.cosh()).abs() < 1e-14);
        let c0 = squeezed_coherent_amplitudes(c(0.0, 0.0), 0.34, 0.0, 0)[0];
        assert!((c0.norm() - 1.0 / 0.34f64.cosh().sqrt()).abs() < 1e-15);
        assert!(p.probs.iter().skip(1).step_by(2).all(|&x| x == 0.0));
        // closed form for p_{2k}
        for k in 0..10 {
            let lf = ln_factorial(2 * k) - 2.0 * ln_factorial(k) - (2 * k) as f64 * 2f64.ln();
            let exact = lf.exp() * 0.34f64.tanh().powi(2 * k as i32) / 0.34f64.cosh();
            assert!((p.probs[2 * k] - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn truncation_is_reported() {
        let s = StateSpec::coherent(c(3.0, 0.0), 1.0).unwrap();
        assert!(matches!(photon_number_dist(&s, 5), Err(Error::Truncation { .. })));
        assert!(StateSpec::fock(1, 0.0).is_err());
        assert!(StateSpec::squeezed_coherent(c(0.0, 0.0), -0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn phase_squeezing_convention() {
        let s = StateSpec::phase_squeezed(c(1.0, 0.0), 0.5, 1.0).unwrap();
        let (cov, _) = gaussian_moments(&s).unwrap();
        // antisqueezed along the displacement, squeezed orthogonally
        assert!(cov[0][0] > 0.0 && cov[1][1] < 0.0 && cov[0][1].abs() < 1e-15);
        let s = StateSpec::phase_squeezed(c(0.0, 1.0), 0.5, 1.0).unwrap();
        let (cov, _) = gaussian_moments(&s).unwrap();
        assert!(cov[1][1] > 0.0 && cov[0][0] < 0.0);
    }

    #[test]
    fn vacuum_and_coherent_click_probabilities() {
        let g = c(0.3, -0.4);
        let v = uhd_click_prob(&StateSpec::vacuum(), g).unwrap();
        assert!((v - (-0.25f64).exp()).abs() < 1e-15);
        let a = c(0.7, 0.2);
        let p = uhd_click_prob(&StateSpec::coherent(a, 1.0).unwrap(), g).unwrap();
        assert!((p - (-(a - g).norm_sqr()).exp()).abs() < 1e-15);
        assert_eq!(uhd_click_prob(&StateSpec::coherent(a, 1.0).unwrap(), a).unwrap(), 1.0);
    }

    #[test]
    fn squeezed_vacuum_click_probability_matches_fock_sum() {
        let s = StateSpec::squeezed_coherent(c(0.0, 0.0), 0.34, std::f64::consts::PI, 1.0).unwrap();
        let g = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let a = uhd_click_prob(&s, g).unwrap();
        let b = uhd_click_prob_fock(&s, g, 60).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn fock_state_click_probability_paths_agree() {
        let s = StateSpec::fock(3, 0.6).unwrap();
        let g = c(0.5, 0.9);
        let a = uhd_click_prob(&s, g).unwrap();
        let b = uhd_click_prob_fock(&s, g, 3).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn coherent_counts_reproduce_q_symbols() {
        for d in [DetectorModel::pnr(4).unwrap(), DetectorModel::click(4).unwrap()] {
            for &a in &[0.2, 1.0, 2.3] {
                let p = photocount_dist(&StateSpec::coherent(c(a, 0.0), 1.0).unwrap(), &d).unwrap();
                let q = d.all_symbols(d.t_of(a * a));
                for n in 0..=4 {
                    assert!((p.p(n) - q[n]).abs() < 1e-12, "{d} alpha={a} n={n}");
                }
            }
            let p = photocount_dist(&StateSpec::vacuum(), &d).unwrap();
            assert_eq!(p.p(0), 1.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn loss_commutes_with_gaussian_channel(
            re in -1.5f64..1.5, im in -1.5f64..1.5, r in 0.0f64..0.8, phi in 0.0f64..6.28, eta in 0.05f64..1.0,
        ) {
            let s = StateSpec::squeezed_coherent(c(re, im), r, phi, eta).unwrap();
            let m_max = s.default_m_max();
            let fock = photon_number_dist(&s, m_max).unwrap();
            let gen = photon_number_dist_gaussian(&s, m_max).unwrap();
            for (a, b) in fock.probs.iter().zip(&gen) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn husimi_paths_agree(
            re in -1.2f64..1.2, im in -1.2f64..1.2, r in 0.0f64..0.7, phi in 0.0f64..6.28,
            eta in 0.05f64..1.0, gr in -1.5f64..1.5, gi in -1.5f64..1.5,
        ) {
            let s = StateSpec::squeezed_coherent(c(re, im), r, phi, eta).unwrap();
            let g = c(gr, gi);
            let a = uhd_click_prob(&s, g).unwrap();
            let b = uhd_click_prob_fock(&s, g, 90).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
            prop_assert!(a > 0.0 && a <= 1.0);
        }

        #[test]
        fn amplitudes_are_normalized(re in -2.0f64..2.0, r in 0.0f64..1.0, phi in 0.0f64..6.28) {
            let s = StateSpec::squeezed_coherent(c(re, 0.3), r, phi, 1.0).unwrap();
            let a = squeezed_coherent_amplitudes(c(re, 0.3), r, phi, s.default_m_max());
            let n: f64 = a.iter().map(|x| x.norm_sqr()).sum();
            prop_assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
