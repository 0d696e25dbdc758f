//! Cross-check of tight-inequality verdicts against LP hull membership on
//! random photocount distributions (uniform on the probability simplex).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;
use tightbound::geometry::{curve_hull_membership, CurveGrid, DEFAULT_HULL_TOL};
use tightbound::tight::{nonlinear_n2, LinearFamily, TightFamily};
use tightbound::{DetectorModel, PhotocountDistribution};

use crate::args::{DetectorChoice, OracleArgs};
use crate::manifest::{write_output, RunManifest};
use crate::{CliError, EXIT_FAILURE};

pub const SCHEMA: &str = "tightbound.oracle-report.v1";

const GRID: usize = 4001;
const RESTARTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    /// Tight violation if and only if outside the hull.
    Equivalence,
    /// Tight violation implies outside the hull.
    OneWay,
}

#[derive(Debug, Default, Serialize)]
struct DetectorReport {
    detector: String,
    trials: usize,
    /// Trials whose tight margin lies outside the band.
    compared: usize,
    in_band: usize,
    tight_violated: usize,
    oracle_outside: usize,
    disagreements: usize,
    failures: usize,
    agreement: f64,
}

#[derive(Debug, Serialize)]
struct Report {
    n: usize,
    mode: Mode,
    band: f64,
    seed: u64,
    detectors: Vec<DetectorReport>,
    ok: bool,
}

fn simplex_point(seed: u64, k: usize) -> PhotocountDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
    let s: f64 = e.iter().sum();
    PhotocountDistribution::new(e.iter().map(|x| x / s).collect()).expect("normalized by construction")
}

enum Tight {
    Envelope,
    Linear(LinearFamily),
    Family(TightFamily),
}

#[derive(Default)]
struct Trial {
    in_band: bool,
    failed: bool,
    tight: bool,
    outside: bool,
    compared: bool,
}

fn trial(det: &DetectorModel, tight: &Tight, grid: &CurveGrid, mode: Mode, band: f64, seed: u64) -> Trial {
    let p = simplex_point(seed, det.outcomes());
    let margin = match tight {
        Tight::Envelope => nonlinear_n2(&p, det).map(|m| m.value),
        Tight::Linear(f) => Ok(f.max_margin(p.independent()).0),
        Tight::Family(f) => f.max_violation(&p, RESTARTS, seed).map(|r| r.margin),
    };
    let Ok(margin) = margin else {
        return Trial { failed: true, ..Default::default() };
    };
    if margin.abs() < band {
        return Trial { in_band: true, ..Default::default() };
    }
    let tight = margin > 0.0;
    if mode == Mode::OneWay && !tight {
        return Trial::default();
    }
    match curve_hull_membership(det, grid, p.independent(), DEFAULT_HULL_TOL) {
        Ok(r) => Trial {
            tight,
            outside: !r.verdict.inside,
            compared: true,
            ..Default::default()
        },
        Err(_) => Trial { failed: true, ..Default::default() },
    }
}

fn check(det: DetectorModel, a: &OracleArgs, mode: Mode) -> Result<DetectorReport, CliError> {
    let tight = match det.n {
        2 => Tight::Envelope,
        3 => Tight::Linear(LinearFamily::new(&det, GRID)?),
        _ => Tight::Family(TightFamily::new(&det)?),
    };
    let grid = CurveGrid::new(&det, GRID);
    let seed = a.common.seed;
    let trials: Vec<Trial> = (0..a.trials)
        .into_par_iter()
        .map(|i| trial(&det, &tight, &grid, mode, a.band, seed.wrapping_add(i as u64)))
        .collect();
    let mut r = DetectorReport {
        detector: det.to_string(),
        trials: a.trials,
        ..Default::default()
    };
    for t in &trials {
        r.in_band += t.in_band as usize;
        r.failures += t.failed as usize;
        if t.compared {
            r.compared += 1;
            r.tight_violated += t.tight as usize;
            r.oracle_outside += t.outside as usize;
            r.disagreements += (t.tight != t.outside) as usize;
        }
    }
    r.agreement = if r.compared == 0 {
        1.0
    } else {
        1.0 - r.disagreements as f64 / r.compared as f64
    };
    Ok(r)
}

pub fn run(a: &OracleArgs) -> Result<u8, CliError> {
    let mode = match a.n {
        2 | 3 => Mode::Equivalence,
        n if n >= 5 && n % 2 == 1 => Mode::OneWay,
        n => {
            return Err(CliError::Usage(format!(
                "oracle-check supports N = 2, 3 (equivalence) and odd N >= 5 (one-way); got {n}"
            )))
        }
    };
    if a.trials == 0 || !(a.band >= 0.0) {
        return Err(CliError::Usage("--trials must be positive and --band nonnegative".into()));
    }
    let mut detectors = Vec::new();
    if a.detector != DetectorChoice::Click {
        detectors.push(DetectorModel::pnr(a.n)?);
    }
    if a.detector != DetectorChoice::Pnr {
        detectors.push(DetectorModel::click(a.n)?);
    }
    let reports = detectors
        .into_iter()
        .map(|d| check(d, a, mode))
        .collect::<Result<Vec<_>, _>>()?;
    let ok = reports.iter().all(|r| r.disagreements == 0 && r.failures == 0);
    let report = Report {
        n: a.n,
        mode,
        band: a.band,
        seed: a.common.seed,
        detectors: reports,
        ok,
    };
    let json = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)? + "\n";
    let output = write_output(a.common.out.as_deref(), &json, SCHEMA)?;
    RunManifest::new("oracle-check", a, a.common.seed, vec![output], &report).emit(a.common.manifest.as_deref())?;
    if ok {
        Ok(0)
    } else {
        eprintln!("tightbound: tight verdicts disagree with the hull oracle");
        Ok(EXIT_FAILURE)
    }
}
