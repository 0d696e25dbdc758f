//! Tight nonclassicality inequalities for measurement statistics.
//!
//! The crate builds test functions whose linear inequalities tightly bound the
//! convex hull of coherent-state statistics, evaluates them on simulated
//! photocounting and unbalanced homodyne data, and cross-checks the verdicts
//! against an LP convex-hull membership oracle.
//!
//! * [`geometry`]: generalized cross products, support-function margins, LP hull membership.
//! * [`detectors`]: Q symbols of truncated PNR and click-array POVMs.
//! * [`states`]: photon-number and photocount statistics of lossy states.
//! * [`tight`]: tight test functions and nonlinear inequalities for photocounting.
//! * [`uhd`]: unbalanced homodyne detection with two local-oscillator settings.
//! * [`sampling`]: finite-sample estimates with delta-method error bars.

pub mod detectors;
pub mod error;
pub mod geometry;
pub mod optimize;
pub mod sampling;
mod special;
pub mod states;
pub mod tight;
pub mod uhd;

pub use detectors::{DetectorKind, DetectorModel};
pub use error::{Error, Result};
pub use geometry::{HullVerdict, VectorN};
pub use states::{PhotocountDistribution, PhotonNumberDist, StateKind, StateSpec};
pub use tight::{TestFunction, ViolationReport};
pub use uhd::{UhdConfig, UhdPoint};
