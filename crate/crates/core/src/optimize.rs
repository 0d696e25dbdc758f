//! Derivative-free one- and multi-dimensional search used by the violation
//! optimizer, plus a bracketing root finder for critical-point counting.

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Result of a Nelder–Mead run (maximization).
#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `f` with the Nelder–Mead simplex method.
///
/// Non-finite objective values are treated as `-inf`, so infeasible points
/// simply repel the simplex. Convergence means the spread of objective
/// values over the simplex dropped below `tol`.
pub fn nelder_mead_max<F>(f: F, x0: &[f64], step: f64, max_iter: usize, tol: f64) -> NmResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // best first
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        if vals[0].is_finite() && vals[n].is_finite() && (vals[0] - vals[n]).abs() <= tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for x in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr);
        if fr > vals[0] {
            let xe = along(gamma);
            let fe = eval(&xe);
            if fe > fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr > vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr > vals[n] {
            let xc = along(rho);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc > vals[n].max(fr) {
            simplex[n] = xc;
            vals[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + sigma * (x - b))
                .collect();
            vals[i] = eval(&shrunk);
            simplex[i] = shrunk;
        }
    }
    let best = (0..=n).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    NmResult {
        x: simplex[best].clone(),
        value: vals[best],
        iterations,
        converged,
    }
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Roots of `f` on `(a, b)` located by sign changes on `n` uniform interior
/// samples and refined by bisection to `tol`.
///
/// Exact zeros on the sample grid count once; double roots without a sign
/// change are not detected.
pub fn bracket_roots<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize, tol: f64) -> Vec<f64> {
    let xs: Vec<f64> = (1..n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    let mut i = 0;
    while i + 1 < xs.len() {
        let (v0, v1) = (vs[i], vs[i + 1]);
        if v0 == 0.0 {
            // count a grid zero only if the sign actually flips across it
            let before = if i > 0 { vs[i - 1] } else { v1 };
            if before * v1 < 0.0 || i == 0 {
                roots.push(xs[i]);
            }
            i += 1;
            continue;
        }
        if v0 * v1 < 0.0 {
            let (mut lo, mut hi, mut flo) = (xs[i], xs[i + 1], v0);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        i += 1;
    }
    roots
}
