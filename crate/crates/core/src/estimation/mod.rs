//! Free-space torque prediction and incision force estimation.

mod features;
mod force;
mod model;

pub use features::{extract_features, FeatureConfig, FEATURES_PER_STATE};
pub use force::{
    estimate_force, estimate_force_series, force_from_residual, force_rmse, torque_residual,
    ForceEstimateSeries, D_GUARD,
};
pub use model::{
    train_freespace, FreeSpaceModel, RecordedTau0, TorquePredictor, TrainOptions, TrainReport, TrainingMeta,
    TruthTau0, DEFAULT_LAMBDA_GRID,
};
