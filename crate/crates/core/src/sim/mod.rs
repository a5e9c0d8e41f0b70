//! Simulated trocar/tissue-phantom rig producing ground-truth datasets.

mod dataset;
mod rig;
mod trajectory;

pub use dataset::{
    force_angle_sweep, synthesize_dataset, write_sweep_csv, Dataset, JointSample, SweepRow, CSV_HEADER,
};
pub use rig::{freespace_torque_truth, gravity_torque, tissue_force, RigConfig, D_MAX, D_MIN};
pub use trajectory::{
    gen_pivot_trajectory, gen_teleop_trajectory, gen_trajectory, PivotLaw, TrajectoryKind, TrajectoryPoint,
    TrajectorySpec, TELEOP_Q3_AMPLITUDE,
};
