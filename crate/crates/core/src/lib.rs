//! Verification lab for the photon EPRB experiment.
//!
//! The crate computes three things and lets them confront each other:
//!
//! * closed-form quantum predictions for the two-photon singlet ([`qm`]),
//! * a two-mode hidden-variable signal model with random phase offsets
//!   ([`model`]), evaluated by deterministic quadrature and by seeded
//!   Monte Carlo under several explicit interpretation modes ([`integrate`]),
//! * CHSH bounds for amplitude-capped function classes, with an empirical
//!   auditor for local strategies ([`bounds`]).
//!
//! [`harness`] orchestrates sweeps over the relative analyzer angle,
//! computes residuals of the model against the stated `sin^2/2` coincidence
//! law, and assembles a reproducible run report.

pub mod bounds;
pub mod error;
pub mod harness;
pub mod integrate;
pub mod model;
pub mod qm;
pub mod sum;

pub use error::{Error, Result};
pub use integrate::{Estimate, Interpretation, McSpec, QuadratureRule, QuadratureSpec};
pub use model::{AnalyzerPair, DetectorModel, HiddenVars};
pub use qm::TwoPhotonState;
