//! Estimation of the misalignment between a surgical robot's remote center of
//! motion and the incision port, from joint positions and torques only.
//!
//! The pipeline: a free-space torque predictor is trained on contact-free
//! motion ([`estimation`]); torque residuals are mapped to incision forces
//! through the incision Jacobian ([`kinematics`]); a tissue stiffness is
//! calibrated on pivoting data and the misalignment distance is fitted with
//! bounded least squares ([`optimizer`]). [`sim`] provides a seeded trocar
//! rig that generates ground-truth datasets for all of the above.

// NaN-rejecting checks are written as `!(x > y)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod estimation;
pub mod kinematics;
pub mod optimizer;
pub mod sim;

pub use error::{Error, Result};
