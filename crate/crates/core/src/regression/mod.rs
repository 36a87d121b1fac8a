//! Local potential regression, assembly and conditional queries.

pub mod alphatron;
pub mod assembly;
pub mod node;

pub use alphatron::{alphatron_fit, alphatron_fit_weighted, default_iterations, u_link, AlphatronConfig, AlphatronFit, FeatureMatrix};
pub use assembly::{
    assemble_partial_potential, assemble_potential, conditional_query, reconstruct_distribution, AssemblyConfig,
    AssemblyMode, ConditionalTable,
};
pub use node::{
    build_node_features, feature_masks, learn_node_potential, learn_node_potential_exact, learn_potentials,
    learn_potentials_exact, NodeRegressionResult,
};
