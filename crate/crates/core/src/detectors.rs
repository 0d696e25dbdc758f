//! Q symbols of photon-number-resolving and click-array detectors.
//!
//! Both detectors are parametrized by `t = exp(-|alpha|^2 / N)`; `t = 1` is
//! the vacuum and `t = 0` the saturation limit `|alpha| -> infinity`. Only the
//! first `N` outcome probabilities are independent, so vectors returned here
//! have length `N`; the last outcome is fixed by normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ParametricCurve, VectorN};
use crate::special::{binomial, ln_factorial, powi0};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    /// Photon counting truncated at `N`: outcome `N` means "N or more".
    PnrTruncated,
    /// `N` on-off detectors behind a balanced splitter; outcome = clicks.
    ClickArray,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetectorModel {
    pub kind: DetectorKind,
    pub n: usize,
}

impl std::fmt::Display for DetectorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            DetectorKind::PnrTruncated => write!(f, "pnr:{}", self.n),
            DetectorKind::ClickArray => write!(f, "click:{}", self.n),
        }
    }
}

impl std::str::FromStr for DetectorModel {
    type Err = Error;

    /// Parses `pnr:N` or `click:N`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, n) = s
            .split_once(':')
            .ok_or_else(|| Error::Usage(format!("detector must look like pnr:N or click:N, got {s:?}")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("bad detector size in {s:?}")))?;
        match kind.trim() {
            "pnr" => Self::new(DetectorKind::PnrTruncated, n),
            "click" => Self::new(DetectorKind::ClickArray, n),
            other => Err(Error::Usage(format!("unknown detector kind {other:?}"))),
        }
    }
}

impl DetectorModel {
    pub fn new(kind: DetectorKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Usage("detector needs N >= 1".into()));
        }
        Ok(Self { kind, n })
    }

    pub fn pnr(n: usize) -> Result<Self> {
        Self::new(DetectorKind::PnrTruncated, n)
    }

    pub fn click(n: usize) -> Result<Self> {
        Self::new(DetectorKind::ClickArray, n)
    }

    /// Number of outcomes, `N + 1`.
    pub fn outcomes(&self) -> usize {
        self.n + 1
    }

    /// Curve parameter of a coherent state with mean photon number `abs2`.
    pub fn t_of(&self, abs2: f64) -> f64 {
        (-abs2 / self.n as f64).exp()
    }

    fn check_t(t: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("curve parameter t = {t} outside [0, 1]")));
        }
        Ok(())
    }

    /// `Pi(n|t)` for a single outcome.
    pub fn q_symbol(&self, n: usize, t: f64) -> Result<f64> {
        Self::check_t(t)?;
        if n > self.n {
            return Err(Error::Usage(format!("outcome {n} exceeds N = {}", self.n)));
        }
        Ok(self.all_symbols(t)[n])
    }

    /// All `N + 1` outcome probabilities (no domain check).
    pub fn all_symbols(&self, t: f64) -> Vec<f64> {
        let big_n = self.n;
        let mut out = Vec::with_capacity(big_n + 1);
        match self.kind {
            DetectorKind::PnrTruncated => {
                if t <= 0.0 {
                    out.resize(big_n, 0.0);
                    out.push(1.0);
                    return out;
                }
                let u = (-(big_n as f64) * t.ln()).max(0.0);
                let mut acc = 0.0;
                for n in 0..big_n {
                    let p = if u == 0.0 {
                        if n == 0 {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        (n as f64 * u.ln() - u - ln_factorial(n)).exp()
                    };
                    acc += p;
                    out.push(p);
                }
                out.push((1.0 - acc).max(0.0));
            }
            DetectorKind::ClickArray => {
                for n in 0..=big_n {
                    out.push(binomial(big_n, n) * powi0(t, (big_n - n) as i64) * powi0(1.0 - t, n as i64));
                }
            }
        }
        out
    }

    /// Independent components `Pi(0..N-1 | t)`.
    pub fn q_vector(&self, t: f64) -> Result<VectorN> {
        Self::check_t(t)?;
        let mut v = self.all_symbols(t);
        v.truncate(self.n);
        VectorN::new(v)
    }

    /// Closed-form first or second `t`-derivative of the independent components.
    ///
    /// At `t = 0` the PNR second derivative diverges for `N = 2`, `n >= 1`;
    /// those entries are `+inf` and the result is returned as a raw vector by
    /// [`DetectorModel::deriv_raw`] instead.
    pub fn q_vector_deriv(&self, t: f64, order: u8) -> Result<VectorN> {
        Self::check_t(t)?;
        if order != 1 && order != 2 {
            return Err(Error::Usage(format!("derivative order must be 1 or 2, got {order}")));
        }
        VectorN::new(self.deriv_raw(t, order))
    }

    /// Derivative components without validation; may contain `+inf` at `t = 0`.
    pub fn deriv_raw(&self, t: f64, order: u8) -> Vec<f64> {
        let big_n = self.n;
        (0..big_n)
            .map(|n| match self.kind {
                DetectorKind::PnrTruncated => pnr_deriv(big_n, n, t, order),
                DetectorKind::ClickArray => {
                    let c = binomial(big_n, n);
                    let a = (big_n - n) as i64;
                    let b = n as i64;
                    let s = 1.0 - t;
                    let (af, bf) = (a as f64, b as f64);
                    let term = |coef: f64, ea: i64, eb: i64| {
                        if coef == 0.0 {
                            0.0
                        } else {
                            coef * powi0(t, ea) * powi0(s, eb)
                        }
                    };
                    if order == 1 {
                        c * (term(af, a - 1, b) - term(bf, a, b - 1))
                    } else {
                        c * (term(af * (af - 1.0), a - 2, b) - term(2.0 * af * bf, a - 1, b - 1)
                            + term(bf * (bf - 1.0), a, b - 2))
                    }
                }
            })
            .collect()
    }

    /// Fock-basis diagonal `<m| Pi(n) |m>` for `m = 0..=m_max`.
    pub fn povm_fock_diagonal(&self, n: usize, m_max: usize) -> Result<Vec<f64>> {
        if n > self.n {
            return Err(Error::Usage(format!("outcome {n} exceeds N = {}", self.n)));
        }
        if m_max < self.n {
            return Err(Error::Usage(format!("m_max = {m_max} must be at least N = {}", self.n)));
        }
        Ok(match self.kind {
            DetectorKind::PnrTruncated => (0..=m_max)
                .map(|m| {
                    let hit = if n < self.n { m == n } else { m >= self.n };
                    if hit {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            DetectorKind::ClickArray => {
                click_cover_table(self.n, n, m_max).into_iter().map(|e| binomial(self.n, n) * e).collect()
            }
        })
    }

    /// All outcomes' Fock diagonals, indexed `[n][m]`.
    pub fn povm_table(&self, m_max: usize) -> Result<Vec<Vec<f64>>> {
        (0..=self.n).map(|n| self.povm_fock_diagonal(n, m_max)).collect()
    }
}

fn pnr_deriv(big_n: usize, n: usize, t: f64, order: u8) -> f64 {
    let nf = big_n as f64;
    let kf = n as f64;
    if t <= 0.0 {
        return match (order, big_n) {
            (1, 1) => {
                if n == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            (1, _) => 0.0,
            (_, 1) => 0.0,
            (_, 2) => {
                if n == 0 {
                    2.0
                } else {
                    f64::INFINITY
                }
            }
            _ => 0.0,
        };
    }
    let u = (-nf * t.ln()).max(0.0);
    let lf = ln_factorial(n).exp();
    let f = (powi0(u, n as i64) - kf * powi0(u, n as i64 - 1)) / lf;
    if order == 1 {
        return nf * powi0(t, big_n as i64 - 1) * f;
    }
    let fp = (kf * powi0(u, n as i64 - 1) - kf * (kf - 1.0) * powi0(u, n as i64 - 2)) / lf;
    let bracket = (nf - 1.0) * f - nf * fp;
    if big_n >= 2 {
        nf * powi0(t, big_n as i64 - 2) * bracket
    } else {
        nf * bracket / t
    }
}

/// Probability that `m` photons, split uniformly over `N` detectors, land in
/// a fixed set of `n` detectors and hit each of them; `m = 0..=m_max`.
fn click_cover_table(big_n: usize, n: usize, m_max: usize) -> Vec<f64> {
    let nf = big_n as f64;
    // row[k] = probability for a fixed k-subset, updated photon by photon
    let mut row = vec![0.0; n + 1];
    row[0] = 1.0;
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(row[n]);
    for _ in 0..m_max {
        for k in (0..=n).rev() {
            let stay = row[k];
            let grow = if k > 0 { row[k - 1] } else { 0.0 };
            row[k] = k as f64 / nf * (stay + grow);
        }
        out.push(row[n]);
    }
    out
}

impl ParametricCurve for DetectorModel {
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn point(&self, t: f64) -> Vec<f64> {
        let mut v = self.all_symbols(t.clamp(0.0, 1.0));
        v.truncate(self.n);
        v
    }
    fn derivative(&self, t: f64, order: u8) -> Vec<f64> {
        self.deriv_raw(t.clamp(0.0, 1.0), order)
    }
}

pub fn q_symbol(detector: &DetectorModel, n: usize, t: f64) -> Result<f64> {
    detector.q_symbol(n, t)
}

pub fn q_vector(detector: &DetectorModel, t: f64) -> Result<VectorN> {
    detector.q_vector(t)
}

pub fn q_vector_deriv(detector: &DetectorModel, t: f64, order: u8) -> Result<VectorN> {
    detector.q_vector_deriv(t, order)
}

pub fn povm_fock_diagonal(detector: &DetectorModel, n: usize, m_max: usize) -> Result<Vec<f64>> {
    detector.povm_fock_diagonal(n, m_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn both(n: usize) -> [DetectorModel; 2] {
        [DetectorModel::pnr(n).unwrap(), DetectorModel::click(n).unwrap()]
    }

    #[test]
    fn click_two_at_half() {
        let d = DetectorModel::click(2).unwrap();
        let p = d.all_symbols(0.5);
        assert_eq!(p, vec![0.25, 0.5, 0.25]);
        let d1 = d.q_vector_deriv(0.3, 1).unwrap();
        assert!((d1[0] - 0.6).abs() < 1e-15 && (d1[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn pnr_two_photons_at_unit_intensity() {
        for big_n in 3..7 {
            let d = DetectorModel::pnr(big_n).unwrap();
            let t = d.t_of(1.0);
            let p = d.q_symbol(2, t).unwrap();
            assert!((p - (-1f64).exp() / 2.0).abs() < 1e-15);
            assert!((p - 0.1839397).abs() < 1e-7);
        }
    }

    #[test]
    fn vacuum_endpoint_is_exact() {
        for big_n in 1..8 {
            for d in both(big_n) {
                let p = d.all_symbols(1.0);
                assert_eq!(p[0], 1.0);
                assert!(p[1..].iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn pnr_class_conditions() {
        for big_n in 2..7 {
            let d = DetectorModel::pnr(big_n).unwrap();
            let p0 = d.all_symbols(0.0);
            let p1 = d.all_symbols(1.0);
            assert_eq!((p0[0], p0[1], p1[0], p1[1]), (0.0, 0.0, 1.0, 0.0));
        }
    }

    #[test]
    fn domain_and_order_errors() {
        let d = DetectorModel::click(3).unwrap();
        assert!(matches!(d.q_symbol(0, 1.5), Err(Error::Domain(_))));
        assert!(matches!(d.q_vector_deriv(0.5, 3), Err(Error::Usage(_))));
        assert!(DetectorModel::pnr(0).is_err());
        assert!(d.povm_fock_diagonal(0, 2).is_err());
        assert_eq!("click:5".parse::<DetectorModel>().unwrap(), DetectorModel::click(5).unwrap());
        assert!("foo:5".parse::<DetectorModel>().is_err());
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-6;
        for big_n in 1..8 {
            for d in both(big_n) {
                for &t in &[0.3, 0.05, 0.77, 0.95] {
                    let p = |t: f64| d.all_symbols(t);
                    let d1 = d.deriv_raw(t, 1);
                    let d2 = d.deriv_raw(t, 2);
                    let d1_fd = d.deriv_raw(t + h, 1);
                    let d1_bk = d.deriv_raw(t - h, 1);
                    for n in 0..big_n {
                        let fd = (p(t + h)[n] - p(t - h)[n]) / (2.0 * h);
                        let scale = d1[n].abs().max(1.0);
                        assert!((fd - d1[n]).abs() < 1e-8 * scale, "{d} n={n} t={t}: {fd} vs {}", d1[n]);
                        let fd2 = (d1_fd[n] - d1_bk[n]) / (2.0 * h);
                        let scale = d2[n].abs().max(1.0);
                        assert!((fd2 - d2[n]).abs() < 1e-7 * scale, "{d} n={n} t={t}: {fd2} vs {}", d2[n]);
                    }
                }
            }
        }
    }

    #[test]
    fn derivative_limits_at_saturation() {
        let h = 1e-7;
        for big_n in 1..6 {
            for d in both(big_n) {
                let at0 = d.deriv_raw(0.0, 1);
                let near = d.deriv_raw(h, 1);
                for n in 0..big_n {
                    assert!((at0[n] - near[n]).abs() < 1e-4, "{d} n={n}");
                }
            }
        }
        let d = DetectorModel::pnr(2).unwrap();
        let s = d.deriv_raw(0.0, 2);
        assert_eq!(s[0], 2.0);
        assert!(s[1].is_infinite());
    }

    /// Independent closed form: alternating inclusion-exclusion sum.
    fn click_elem_closed(big_n: usize, n: usize, m: usize) -> f64 {
        let mut s = 0.0;
        for k in 0..=n {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binomial(n, k) * ((n - k) as f64 / big_n as f64).powi(m as i32);
        }
        binomial(big_n, n) * s
    }

    #[test]
    fn click_fock_elements_match_inclusion_exclusion() {
        for big_n in 1..7 {
            let d = DetectorModel::click(big_n).unwrap();
            for n in 0..=big_n {
                let e = d.povm_fock_diagonal(n, 25).unwrap();
                for (m, &x) in e.iter().enumerate() {
                    assert!((x - click_elem_closed(big_n, n, m)).abs() < 1e-12, "N={big_n} n={n} m={m}");
                }
            }
            assert_eq!(d.povm_fock_diagonal(0, big_n).unwrap()[0], 1.0);
        }
    }

    #[test]
    fn pnr_fock_elements_are_projectors() {
        let d = DetectorModel::pnr(3).unwrap();
        assert_eq!(d.povm_fock_diagonal(1, 5).unwrap(), vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.povm_fock_diagonal(3, 5).unwrap(), vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn fock_elements_average_to_q_symbols() {
        let m_max = 120;
        for &big_n in &[2usize, 3, 5] {
            for d in both(big_n) {
                let table = d.povm_table(m_max).unwrap();
                for &u in &[0.1, 1.0, 5.0] {
                    let t = d.t_of(u);
                    let q = d.all_symbols(t);
                    for n in 0..=big_n {
                        let avg: f64 = (0..=m_max)
                            .map(|m| (m as f64 * f64::ln(u) - u - ln_factorial(m)).exp() * table[n][m])
                            .sum();
                        assert!((avg - q[n]).abs() < 1e-10, "{d} n={n} u={u}: {avg} vs {}", q[n]);
                    }
                }
            }
        }
    }

    /// Lagrange interpolation through the first `k` nodes, evaluated at `x`.
    fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..xs.len() {
            let mut l = 1.0;
            for j in 0..xs.len() {
                if i != j {
                    l *= (x - xs[j]) / (xs[i] - xs[j]);
                }
            }
            s += ys[i] * l;
        }
        s
    }

    proptest! {
        #[test]
        fn symbols_are_normalized(t in 0.0f64..=1.0, big_n in 1usize..9) {
            for d in both(big_n) {
                let p = d.all_symbols(t);
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
        }

        #[test]
        fn fock_rows_sum_to_one(big_n in 1usize..8, m in 0usize..40) {
            for d in both(big_n) {
                let s: f64 = (0..=big_n).map(|n| d.povm_fock_diagonal(n, 40).unwrap()[m]).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn click_test_functions_are_low_degree_polynomials(
            m in 1usize..4,
            lambda in proptest::collection::vec(-1.0f64..1.0, 7),
            probe in 0.0f64..1.0,
        ) {
            let big_n = 2 * m + 1;
            let d = DetectorModel::click(big_n).unwrap();
            let f = |t: f64| d.point(t).iter().zip(&lambda).map(|(a, b)| a * b).sum::<f64>();
            let xs: Vec<f64> = (0..=big_n).map(|i| (i as f64 + 0.5) / (big_n as f64 + 1.0)).collect();
            let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
            prop_assert!((lagrange(&xs, &ys, probe) - f(probe)).abs() < 1e-9);
        }
    }
}
