//! Quality-model coverage analysis for engineering practice catalogs.
//!
//! The pipeline: integer annotator levels are aggregated per (practice,
//! sub-characteristic) pair, optionally passed through a saturating
//! piecewise-linear scaling, and evaluated with a weighted coverage
//! objective that caps each sub-characteristic's influence total at a
//! threshold k. On top of that objective sit selection algorithms
//! (exhaustive, greedy, cost-aware), coverage curves, agreement statistics
//! for the annotations themselves, and a perturbation-based rank stability
//! study.
//!
//! Everything numeric is exact fixed-point arithmetic with canonical tie
//! handling, so identical inputs produce identical outputs on any platform.

pub mod agreement;
pub mod coverage;
pub mod error;
pub mod optimizer;
pub mod score;
pub mod scores;
pub mod sensitivity;
pub mod sqm;

pub use error::{Error, Result};
pub use score::{Score, Value};
