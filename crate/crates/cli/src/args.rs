use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use tightbound::{DetectorModel, StateSpec};

#[derive(Parser, Debug, Serialize)]
#[command(name = "tightbound", version, about = "Tight nonclassicality tests for photocounting and unbalanced homodyne data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Maximal violation of the tight photocounting inequalities
    Photocount(PhotocountArgs),
    /// Triangle test for unbalanced homodyne detection with two settings
    Uhd(UhdArgs),
    /// Compare tight-inequality verdicts with the LP hull oracle
    OracleCheck(OracleArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct Common {
    /// CSV output file (stdout if omitted)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Manifest path (default: <out>.manifest.json, or stderr without --out)
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Seed for optimizer restarts and sampling
    #[arg(long, env = "TIGHTBOUND_SEED", default_value_t = 0, global = true)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct StateArgs {
    /// vacuum | fock:<n> | coherent:<re>[,<im>] | sq-vac | sq-coh[:<re>[,<im>]]
    #[arg(long)]
    pub state: StateArg,
    /// Squeezing parameter r (squeezed states only)
    #[arg(long)]
    pub r: Option<f64>,
    /// Squeezing phase; defaults to squeezing the phase quadrature
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct PhotocountArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Efficiency of the loss channel acting on the state
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// pnr:<N> or click:<N>, with N = 2 or N odd
    #[arg(long)]
    pub detector: DetectorModel,
    /// Scan the real displacement: alpha0=<lo>:<hi>:<points>
    #[arg(long)]
    pub scan: Option<Scan>,
    /// Estimate each margin from this many simulated events
    #[arg(long)]
    pub samples: Option<u64>,
    /// Optimizer restarts per endpoint
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct UhdArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Loss applied to the state alone
    #[arg(long, default_value_t = 1.0)]
    pub state_eta: f64,
    /// Detection efficiency (acts on signal and local oscillators)
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Scan the detection efficiency: eta=<lo>:<hi>:<points>
    #[arg(long)]
    pub scan: Option<Scan>,
    /// First setting, <re>[,<im>]
    #[arg(long, allow_hyphen_values = true, default_value = "-0.7071067811865476")]
    pub gamma1: ComplexArg,
    /// Second setting, <re>[,<im>]
    #[arg(long, allow_hyphen_values = true, default_value = "0.7071067811865476")]
    pub gamma2: ComplexArg,
    /// Mode-matching parameter
    #[arg(long, default_value_t = 1.0)]
    pub xi: f64,
    /// Estimate the no-click probabilities from this many events per setting
    #[arg(long)]
    pub samples: Option<u64>,
    /// Bisect for the efficiency where the verdict changes (tolerance 1e-4)
    #[arg(long)]
    pub crossover: bool,
    /// Also write the classical boundary (t, P1, P2) to this CSV file
    #[arg(long)]
    pub boundary: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Serialize)]
pub struct OracleArgs {
    /// Number of detectors; 2 and 3 are checked both ways, odd N >= 5 one way
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// pnr, click or both
    #[arg(long, default_value = "both")]
    pub detector: DetectorChoice,
    /// Margins closer to zero than this are not compared
    #[arg(long, default_value_t = 1e-7)]
    pub band: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DetectorChoice {
    Pnr,
    Click,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateArg {
    Vacuum,
    Fock { n: usize },
    Coherent { alpha: Complex64 },
    SqVac,
    SqCoh { alpha: Complex64 },
}

impl StateArg {
    fn squeezed(&self) -> bool {
        matches!(self, Self::SqVac | Self::SqCoh { .. })
    }

    fn displacement(&self) -> Option<Complex64> {
        match *self {
            Self::Coherent { alpha } | Self::SqCoh { alpha } => Some(alpha),
            Self::SqVac => Some(Complex64::new(0.0, 0.0)),
            Self::Vacuum | Self::Fock { .. } => None,
        }
    }
}

impl FromStr for StateArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        let alpha = |t: Option<&str>| -> Result<Complex64, String> {
            t.map(|x| x.parse::<ComplexArg>().map(|c| c.0)).unwrap_or(Ok(Complex64::new(0.0, 0.0)))
        };
        match (head, tail) {
            ("vacuum", None) => Ok(Self::Vacuum),
            ("sq-vac", None) => Ok(Self::SqVac),
            ("fock", Some(n)) => n.parse().map(|n| Self::Fock { n }).map_err(|e| format!("fock:{n}: {e}")),
            ("coherent", t @ Some(_)) => Ok(Self::Coherent { alpha: alpha(t)? }),
            ("sq-coh", t) => Ok(Self::SqCoh { alpha: alpha(t)? }),
            _ => Err(format!(
                "unknown state '{s}' (expected vacuum, fock:<n>, coherent:<alpha>, sq-vac or sq-coh[:<alpha>])"
            )),
        }
    }
}

impl StateArgs {
    /// Checks flag combinations once, before any work is done.
    pub fn validate(&self, scanning_alpha: bool) -> Result<(), String> {
        if self.state.squeezed() && self.r.is_none() {
            return Err("squeezed states need --r".into());
        }
        if !self.state.squeezed() && (self.r.is_some() || self.phi.is_some()) {
            return Err("--r and --phi only apply to sq-vac and sq-coh".into());
        }
        if scanning_alpha && self.state.displacement().is_none() {
            return Err("an alpha0 scan needs a coherent or squeezed state".into());
        }
        if scanning_alpha && self.state == StateArg::SqVac {
            return Err("use sq-coh to scan the displacement".into());
        }
        Ok(())
    }

    /// The state, with its displacement replaced by `alpha0` when given.
    pub fn build(&self, alpha0: Option<f64>, eta: f64) -> tightbound::Result<StateSpec> {
        let alpha = alpha0
            .map(|a| Complex64::new(a, 0.0))
            .or(self.state.displacement())
            .unwrap_or_default();
        match self.state {
            StateArg::Vacuum => StateSpec::fock(0, eta),
            StateArg::Fock { n } => StateSpec::fock(n, eta),
            StateArg::Coherent { .. } => StateSpec::coherent(alpha, eta),
            StateArg::SqVac | StateArg::SqCoh { .. } => {
                let r = self.r.unwrap_or(0.0);
                match self.phi {
                    Some(phi) => StateSpec::squeezed_coherent(alpha, r, phi, eta),
                    None => StateSpec::phase_squeezed(alpha, r, eta),
                }
            }
        }
    }

    /// Real displacement reported in the `alpha0` column, if any.
    pub fn alpha0(&self) -> Option<f64> {
        self.state.displacement().map(|a| a.re)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ComplexArg(pub Complex64);

impl FromStr for ComplexArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"));
        let (re, im) = match s.split_once(',') {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => (parse(s)?, 0.0),
        };
        if !(re.is_finite() && im.is_finite()) {
            return Err(format!("'{s}' is not finite"));
        }
        Ok(Self(Complex64::new(re, im)))
    }
}

/// `name=lo:hi:points`, inclusive at both ends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scan {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Scan {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                let x = self.lo + (self.hi - self.lo) * k as f64 / last;
                // drop the rounding noise of the step (0.30000000000000004 -> 0.3)
                format!("{x:.12e}").parse().unwrap_or(x)
            })
            .collect()
    }
}

impl FromStr for Scan {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let err = || format!("expected <name>=<lo>:<hi>:<points>, got '{s}'");
        let (name, range) = s.split_once('=').ok_or_else(err)?;
        let parts: Vec<&str> = range.split(':').collect();
        let [lo, hi, n] = parts[..] else { return Err(err()) };
        let lo: f64 = lo.parse().map_err(|_| err())?;
        let hi: f64 = hi.parse().map_err(|_| err())?;
        let points: usize = n.parse().map_err(|_| err())?;
        if points == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(format!("invalid scan range in '{s}'"));
        }
        Ok(Self {
            name: name.to_string(),
            lo,
            hi,
            points,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_states() {
        assert_eq!("vacuum".parse::<StateArg>().unwrap(), StateArg::Vacuum);
        assert_eq!("fock:3".parse::<StateArg>().unwrap(), StateArg::Fock { n: 3 });
        assert_eq!(
            "coherent:0.5,-0.25".parse::<StateArg>().unwrap(),
            StateArg::Coherent {
                alpha: Complex64::new(0.5, -0.25)
            }
        );
        assert_eq!(
            "sq-coh".parse::<StateArg>().unwrap(),
            StateArg::SqCoh {
                alpha: Complex64::new(0.0, 0.0)
            }
        );
        assert!("coherent".parse::<StateArg>().is_err());
        assert!("fock:x".parse::<StateArg>().is_err());
        assert!("thermal:1".parse::<StateArg>().is_err());
    }

    #[test]
    fn scan_grid_is_inclusive() {
        let s: Scan = "alpha0=0:3:61".parse().unwrap();
        let v = s.values();
        assert_eq!(v.len(), 61);
        assert_eq!((v[0], v[60]), (0.0, 3.0));
        assert_eq!(v[20], 1.0);
        let e: Scan = "eta=0.1:1:10".parse().unwrap();
        assert_eq!(e.values()[2], 0.3);
        assert!("alpha0=1:0:3".parse::<Scan>().is_err());
        assert!("alpha0=0:1".parse::<Scan>().is_err());
    }
}
