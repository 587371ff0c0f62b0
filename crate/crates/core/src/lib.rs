//! Distributional preference modeling over multi-annotator preference data.
//!
//! The crate ingests pairwise preference data with per-annotator judgments, trains
//! single-value (Bradley-Terry, MSE regression) and distributional (mean-variance,
//! Likert classification) reward heads over lightweight feature backbones, detects
//! pairs on which annotators diverge, and ranks divisive prompts in benchmarks.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`, which is what the command-line tool uses.

pub mod encode;
pub mod error;
pub mod evalsuite;
pub mod features;
pub mod model;
pub mod prefdata;
pub mod scalar;
pub mod synthetic;
pub mod trainer;

pub use encode::EncodedPairs;
pub use error::{Error, Result};
pub use scalar::Scalar;

/// Reward-head parameters in `f64`.
pub type Head = model::HeadParameters<f64>;
/// Encoded pairs in `f64`.
pub type Encoded = encode::EncodedPairs<f64>;
/// Checkpoint in `f64`.
pub type Checkpoint = model::Checkpoint<f64>;
/// Training result in `f64`.
pub type Trained = trainer::TrainOutcome<f64>;
/// Feature vector in `f64`.
pub type Features = features::FeatureVector<f64>;
/// Any configured featurizer producing `f64` vectors.
pub type Featurizer = features::AnyFeaturizer<f64>;
