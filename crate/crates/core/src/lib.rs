//! Destination-directed trajectory modeling with conditionally Markov
//! (CM_L) Gaussian sequences.
//!
//! A CM_L sequence pairs a joint origin/destination density with an
//! evolution law that is Markov once the destination state is known. The
//! crate builds such models from ordinary Markov motion models, samples
//! them, filters and predicts them through the stacked state `[x_k; x_N]`,
//! and runs the Monte-Carlo comparison against a plain Markov predictor.

pub mod cml;
pub mod error;
pub mod estimate;
pub mod gaussian;
pub mod markov;
pub mod scenario;
pub mod trajectory;
pub mod verify;

pub use cml::{Boundary, CmlModelParams, EndpointSpec, InteriorTriple};
pub use error::{Error, Result};
pub use estimate::{AugmentedBelief, MarkovBelief, MeasurementModel};
pub use gaussian::GaussianDensity;
pub use markov::{build_cv_model, MarkovModelParams, TerminalPropagation};
pub use trajectory::Trajectory;
