//! Learning RBM-induced magnitude distributions: models, sampling, two-hop
//! structure learning, Alphatron regression of local potentials, metrics and
//! an experiment harness.

pub mod error;
pub mod generators;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod model;
mod pnorm;
pub mod exact;
pub mod potential;
pub mod regression;
pub mod sampling;
pub mod structure;
pub mod table;

pub use error::{Error, Result};
pub use graph::TwoHopGraph;
pub use model::RbmModel;
pub use potential::{MrfPotential, PartialPotential};
pub use sampling::SampleSet;
pub use table::DistributionTable;
