//! The backward step: maximum-likelihood updates of the constraint net.

mod constraint;
mod estimator;
mod phase;

pub use constraint::{ConstraintNet, FeatureMap};
pub use estimator::{
    grad_direction, importance_weights, kl_bounds, kl_bounds_exact, kl_bounds_log, log_traj_score, prepare, traj_score,
    GradBatch, ImportanceWeights, Regularizer, WEIGHT_CLIP,
};
pub use phase::{backward_phase, BackwardConfig, ConstraintLearner, PhaseReport};
