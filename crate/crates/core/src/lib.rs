//! Stochastic cusp catastrophe models fitted with mixture density networks.
//!
//! The crate covers the cusp surface itself ([`cusp`]), synthetic data
//! generators ([`datagen`]), the network and its training loop ([`mdn`]),
//! Delay-convention evaluation ([`eval`]), file formats ([`io`]), and
//! pinned reproduction recipes ([`experiments`]).

pub mod cusp;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod io;
pub mod mdn;
pub mod rng;

pub use cusp::{ControlParams, RootSet, Stability};
pub use datagen::{Dataset, GenConfig, ModelKind, RegressionCoeffs};
pub use error::{Error, Result};
pub use mdn::{MdnModel, MixturePrediction, NetworkConfig, TrainConfig};
