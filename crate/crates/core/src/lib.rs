//! Unsupervised feature ranking.
//!
//! Two families of rankers are provided:
//!
//! * ensemble scores computed from bagged, random-forest or extra-tree
//!   ensembles of predictive clustering trees ([`scores::genie3`],
//!   [`scores::symbolic`], [`scores::random_forest_score`]);
//! * [`urelief::urelief`], a distance-based Relief variant that needs no model.
//!
//! The [`eval`] module scores rankings by the cross-validated error of a
//! 1-nearest-neighbor regressor restricted to the top-ranked features and
//! compares methods with the Friedman and Nemenyi tests.
//!
//! All randomness flows from explicit seeds through keyed streams, so results
//! are identical whatever the size of the rayon pool.

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod method;
pub mod pct;
pub mod ranking;
pub mod rng;
pub mod scores;
pub mod synth;
pub mod urelief;

pub use dataset::{load_csv, AttributeKind, Dataset, FeatureTable, LoadOptions};
pub use error::{Error, ErrorKind, Result};
pub use method::RankingMethod;
pub use ranking::Ranking;
