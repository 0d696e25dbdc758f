use std::f64::consts::FRAC_1_SQRT_2;

use rayon::prelude::*;
use serde::Serialize;
use tightbound::sampling::sample_counts;
use tightbound::uhd::{boundary_curve, crossover_eta, uhd_statistics, uhd_verdict, UhdVerdict};
use tightbound::{PhotocountDistribution, StateSpec, UhdConfig, UhdPoint};

use crate::args::UhdArgs;
use crate::manifest::{write_output, RunManifest};
use crate::{check_unit_interval, num, CliError, DETECTION_TOL, EXIT_NONCLASSICAL};

pub const SCHEMA: &str = "tightbound.uhd.v1";
pub const BOUNDARY_SCHEMA: &str = "tightbound.uhd-boundary.v1";

const BOUNDARY_POINTS: usize = 601;
const CROSSOVER_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
struct Row {
    eta: f64,
    point: UhdPoint,
    verdict: UhdVerdict,
    detected: bool,
}

impl Row {
    fn label(&self) -> String {
        if self.detected {
            return self.verdict.triangle.violated.map_or("none", |k| k.name()).to_string();
        }
        match self.verdict.triangle.equalities(DETECTION_TOL).as_slice() {
            [] => "none".into(),
            eq => format!("equality:{}", eq.iter().map(|k| k.name()).collect::<Vec<_>>().join("+")),
        }
    }
}

#[derive(Debug, Serialize)]
struct Summary {
    rows: usize,
    nonclassical_rows: usize,
    /// Half-distance of the effective settings at `--eta`.
    d_eff: f64,
    tight_family_guaranteed: bool,
    crossover_eta: Option<f64>,
    crossover_note: Option<String>,
}

fn validate(a: &UhdArgs) -> Result<(), CliError> {
    if let Some(s) = &a.scan {
        if s.name != "eta" {
            return Err(CliError::Usage(format!("uhd scans eta, not '{}'", s.name)));
        }
        check_unit_interval("scan eta", s.lo)?;
        check_unit_interval("scan eta", s.hi)?;
    }
    a.state.validate(false).map_err(CliError::Usage)?;
    check_unit_interval("eta", a.eta)?;
    check_unit_interval("state-eta", a.state_eta)?;
    check_unit_interval("xi", a.xi)?;
    if a.gamma1 == a.gamma2 {
        return Err(CliError::Usage("--gamma1 and --gamma2 must differ".into()));
    }
    if a.samples == Some(0) {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    Ok(())
}

fn config(a: &UhdArgs, eta: f64) -> Result<UhdConfig, CliError> {
    Ok(UhdConfig::new(a.gamma1.0, a.gamma2.0, eta, a.xi)?)
}

/// One binomial draw per setting; the point estimate replaces the exact
/// probability and the triangle margin must clear two standard errors.
fn sampled(exact: &UhdPoint, n: u64, seed: u64) -> Result<(UhdPoint, [f64; 2]), CliError> {
    let mut est = [0.0; 2];
    let mut se = [0.0; 2];
    for (k, p) in exact.as_array().into_iter().enumerate() {
        let dist = PhotocountDistribution::new(vec![p, 1.0 - p])?;
        let emp = sample_counts(&dist, n, seed.wrapping_mul(2).wrapping_add(k as u64))?;
        est[k] = emp.frequencies()[0];
        se[k] = (est[k] * (1.0 - est[k]) / n as f64).sqrt();
    }
    Ok((UhdPoint::new(est[0], est[1])?, se))
}

/// Delta-method error of the violated triangle side combination.
fn triangle_std_error(v: &UhdVerdict, cfg: &UhdConfig, se: [f64; 2]) -> f64 {
    let g = cfg.factors();
    let q = [v.point.p1 / g[0], v.point.p2 / g[1]];
    // d sqrt(-ln q) / dP = -1 / (2 g q sqrt(-ln q))
    let ds: Vec<f64> = (0..2)
        .map(|k| {
            let side = (-q[k].min(1.0).ln()).sqrt();
            if side > 0.0 {
                se[k] / (2.0 * g[k] * q[k] * side)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    (ds[0] * ds[0] + ds[1] * ds[1]).sqrt()
}

fn evaluate(a: &UhdArgs, state: &StateSpec, eta: f64, seed: u64) -> Result<Row, CliError> {
    let cfg = config(a, eta)?;
    let exact = uhd_statistics(state, &cfg)?;
    let (point, se) = match a.samples {
        Some(n) => {
            let (p, se) = sampled(&exact, n, seed)?;
            (p, Some(se))
        }
        None => (exact, None),
    };
    let verdict = uhd_verdict(&point, &cfg)?;
    let margin = verdict.triangle.margin();
    let threshold = se.map_or(0.0, |se| 2.0 * triangle_std_error(&verdict, &cfg, se));
    Ok(Row {
        eta,
        point,
        verdict,
        detected: verdict.nonclassical() && margin - threshold > DETECTION_TOL,
    })
}

fn render(rows: &[Row]) -> String {
    let mut out = String::from("eta,P1,P2,verdict,violated_inequality,t_star\n");
    for r in rows {
        let verdict = if r.detected { "nonclassical" } else { "classical" };
        let row = [
            num(r.eta),
            num(r.point.p1),
            num(r.point.p2),
            verdict.into(),
            r.label(),
            num(r.verdict.linear.t_star),
        ];
        out += &row.join(",");
        out.push('\n');
    }
    out
}

fn boundary_csv(d: f64) -> String {
    let (lo, hi) = (-d - 3.0, d + 3.0);
    let mut out = String::from("t,P1,P2\n");
    for k in 0..BOUNDARY_POINTS {
        let t = lo + (hi - lo) * k as f64 / (BOUNDARY_POINTS - 1) as f64;
        let b = boundary_curve(t, d);
        out += &format!("{},{},{}\n", num(t), num(b.p1), num(b.p2));
    }
    out
}

pub fn run(a: &UhdArgs) -> Result<u8, CliError> {
    validate(a)?;
    let state = a.state.build(None, a.state_eta)?;
    let etas = a.scan.as_ref().map_or_else(|| vec![a.eta], |s| s.values());
    let seed = a.common.seed;
    let rows = etas
        .par_iter()
        .enumerate()
        .map(|(i, &eta)| evaluate(a, &state, eta, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<Row>, CliError>>()?;

    let base = config(a, a.eta)?;
    let guaranteed = base.d_eff() <= FRAC_1_SQRT_2 + 1e-15;
    if !guaranteed {
        eprintln!(
            "tightbound: warning: effective half-distance {:.4} exceeds 1/sqrt(2); \
             the triangle test remains exact but the linear family is not guaranteed tight",
            base.d_eff()
        );
    }

    let (crossover, note) = if a.crossover {
        let lo = a.scan.as_ref().map_or(1e-3, |s| s.lo);
        let hi = a.scan.as_ref().map_or(1.0, |s| s.hi);
        let f = |eta: f64| -> tightbound::Result<bool> {
            let cfg = UhdConfig::new(a.gamma1.0, a.gamma2.0, eta, a.xi)?;
            Ok(uhd_verdict(&uhd_statistics(&state, &cfg)?, &cfg)?.nonclassical())
        };
        match crossover_eta(f, lo, hi, CROSSOVER_TOL) {
            Ok(x) => {
                eprintln!("tightbound: crossover eta* = {x:.4}");
                (Some(x), None)
            }
            Err(e) => {
                eprintln!("tightbound: no crossover: {e}");
                (None, Some(e.to_string()))
            }
        }
    } else {
        (None, None)
    };

    let mut outputs = vec![write_output(a.common.out.as_deref(), &render(&rows), SCHEMA)?];
    if let Some(path) = &a.boundary {
        outputs.push(write_output(Some(path), &boundary_csv(base.d_eff()), BOUNDARY_SCHEMA)?);
    }
    let summary = Summary {
        rows: rows.len(),
        nonclassical_rows: rows.iter().filter(|r| r.detected).count(),
        d_eff: base.d_eff(),
        tight_family_guaranteed: guaranteed,
        crossover_eta: crossover,
        crossover_note: note,
    };
    let detected = summary.nonclassical_rows > 0;
    RunManifest::new("uhd", a, seed, outputs, summary).emit(a.common.manifest.as_deref())?;
    Ok(if detected { EXIT_NONCLASSICAL } else { 0 })
}
