//! Two-phase estimation of tissue stiffness and RCM misalignment.

mod lsq;
mod oracle;
mod phase1;
mod phase2;
mod residual;

pub use lsq::{solve_bounded_lsq, Bounds, LsqOptions, LsqSolution, Termination};
pub use oracle::{
    grid, grid_oracle, verify_phase2, OracleResult, SurfacePoint, VerifyReport, DEFAULT_D_STEP,
    DEFAULT_K_STEP,
};
pub use phase1::{
    fuse_k, phase1_k_range, phase1_sweep, KRange, KRangeReport, Phase1Config, Phase1Result,
    PivotConfiguration, SweepPoint, PIVOT_ANGLE_TOLERANCE,
};
pub use phase2::{
    filter_samples, optimize_d_on, phase2_cost, phase2_optimize_d, Phase2Config, Phase2Result, StartOutcome,
    DEFAULT_STARTS,
};
pub use residual::{
    prepare_samples, residual_phase1, residual_phase2, total_cost, ForceSource, PreparedSample,
};
