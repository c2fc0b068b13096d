//! Monotone neural surrogate: architecture, asymmetric loss, projected
//! training, and the verify-and-grow loop.

mod loss;
mod mlp;
mod model;
mod train;
mod verify;

pub use loss::{asym_loss, asym_loss_deriv, LossParams, Objective};
pub use mlp::{reference_float_count, Gradients, InputMap, Mlp, MonotoneMlp, OutputMap, Scratch};
pub use model::{model_load, model_save, ModelFile, SavedModel, MODEL_VERSION};
pub use train::{
    fit, gradient, objective, total_objective, train, Architecture, GrowPolicy, LossTrace, Optimizer, TrainConfig,
};
pub use verify::{train_until_verified, verify_samples, AttemptRecord, TrainError, TrainOutcome, VerificationReport};
