//! Two-hop neighborhood learning.

pub mod learn;
pub mod stats;
pub mod thresholds;

pub use learn::{
    learn_full_structure, learn_node, learn_structure_ferro, learn_structure_lc, LearnedStructure, LearnerConfig,
    NodeLearnOutcome, Symmetrization,
};
pub use stats::{
    empirical_cond_covariance_avg, empirical_influence, exact_cond_covariance_avg, exact_influence,
    EmpiricalInfluence, StatisticSource,
};
pub use thresholds::{
    compute_robustness_limits, compute_sample_bounds, compute_thresholds, LearnThresholds, RobustnessLimits,
    SampleBounds,
};
