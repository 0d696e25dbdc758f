use rayon::prelude::*;
use serde::Serialize;
use tightbound::sampling::{estimate_margin, sample_counts};
use tightbound::states::photocount_dist;
use tightbound::tight::optimal_violation;

use crate::args::PhotocountArgs;
use crate::manifest::{write_output, RunManifest};
use crate::{cell, num, check_unit_interval, CliError, DETECTION_TOL, EXIT_NONCLASSICAL};

pub const SCHEMA: &str = "tightbound.photocount.v1";

#[derive(Debug, Clone)]
struct Row {
    alpha0: Option<f64>,
    margin: f64,
    std_error: Option<f64>,
    nodes: Vec<f64>,
    tau: Option<f64>,
}

impl Row {
    fn detected(&self) -> bool {
        self.margin - 2.0 * self.std_error.unwrap_or(0.0) > DETECTION_TOL
    }
}

#[derive(Debug, Serialize)]
struct Summary {
    rows: usize,
    nonclassical_rows: usize,
    max_margin: f64,
    alpha0_at_max: Option<f64>,
}

/// Columns after `std_error`: one per node, then `tau`.
fn node_columns(n: usize) -> usize {
    if n == 2 {
        1
    } else {
        (n - 1) / 2
    }
}

fn validate(a: &PhotocountArgs) -> Result<(), CliError> {
    let scanning = match &a.scan {
        Some(s) if s.name == "alpha0" => true,
        Some(s) => return Err(CliError::Usage(format!("photocount scans alpha0, not '{}'", s.name))),
        None => false,
    };
    a.state.validate(scanning).map_err(CliError::Usage)?;
    check_unit_interval("eta", a.eta)?;
    let n = a.detector.n;
    if n < 2 || (n > 2 && n % 2 == 0) {
        return Err(CliError::Usage(format!(
            "tight inequalities are available for N = 2 and odd N >= 3; got {}",
            a.detector
        )));
    }
    if a.samples == Some(0) {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    if a.restarts == 0 {
        return Err(CliError::Usage("--restarts must be positive".into()));
    }
    Ok(())
}

fn evaluate(a: &PhotocountArgs, alpha0: Option<f64>, seed: u64) -> Result<Row, CliError> {
    let state = a.state.build(alpha0, a.eta)?;
    let p = photocount_dist(&state, &a.detector)?;
    let report = optimal_violation(&p, &a.detector, a.restarts, seed)?;
    let (margin, std_error) = match a.samples {
        Some(n) => {
            let emp = sample_counts(&p, n, seed)?;
            let (m, se) = estimate_margin(&emp, &report.test_function())?;
            (m, Some(se))
        }
        None => (report.margin, None),
    };
    Ok(Row {
        alpha0: alpha0.or(a.state.alpha0()),
        margin,
        std_error,
        nodes: report.nodes,
        tau: report.tau,
    })
}

fn render(a: &PhotocountArgs, rows: &[Row]) -> String {
    let k = node_columns(a.detector.n);
    let mut header = vec!["alpha0".to_string(), "margin".into(), "std_error".into()];
    header.extend((1..=k).map(|i| format!("t{i}")));
    header.extend(["tau".into(), "detector".into()]);
    let mut out = header.join(",") + "\n";
    for r in rows {
        let mut f = vec![cell(r.alpha0), num(r.margin), cell(r.std_error)];
        f.extend((0..k).map(|i| cell(r.nodes.get(i).copied())));
        f.extend([cell(r.tau), a.detector.to_string()]);
        out += &f.join(",");
        out.push('\n');
    }
    out
}

pub fn run(a: &PhotocountArgs) -> Result<u8, CliError> {
    validate(a)?;
    let points: Vec<Option<f64>> = match &a.scan {
        Some(s) => s.values().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let seed = a.common.seed;
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, &x)| evaluate(a, x, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<Row>, CliError>>()?;

    let csv = render(a, &rows);
    let output = write_output(a.common.out.as_deref(), &csv, SCHEMA)?;
    let best = rows.iter().max_by(|x, y| x.margin.total_cmp(&y.margin));
    let summary = Summary {
        rows: rows.len(),
        nonclassical_rows: rows.iter().filter(|r| r.detected()).count(),
        max_margin: best.map_or(f64::NAN, |r| r.margin),
        alpha0_at_max: best.and_then(|r| r.alpha0),
    };
    let detected = summary.nonclassical_rows > 0;
    RunManifest::new("photocount", a, seed, vec![output], summary).emit(a.common.manifest.as_deref())?;
    Ok(if detected { EXIT_NONCLASSICAL } else { 0 })
}
