//! Small combinatorial helpers shared by the physics modules.

/// `ln k!` for `k = 0..len`.
pub fn ln_factorials(len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len.max(1));
    out.push(0.0);
    for k in 1..len {
        out.push(out[k - 1] + (k as f64).ln());
    }
    out
}

pub fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Binomial coefficient as a float; exact for the small arguments used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// `x^k`, treating `0^0 = 1`; callers multiply by zero when `k < 0` would occur.
#[inline]
pub fn powi0(x: f64, k: i64) -> f64 {
    if k < 0 {
        0.0
    } else {
        x.powi(k as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials_and_factorials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(10, 0), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
        let t = ln_factorials(6);
        assert!((t[5] - 120f64.ln()).abs() < 1e-14);
        assert!((ln_factorial(5) - t[5]).abs() < 1e-14);
    }
}
