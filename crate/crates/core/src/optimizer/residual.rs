use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::estimation::{force_from_residual, torque_residual, TorquePredictor};
use crate::kinematics::{pivot_angle, JointConfig};
use crate::sim::Dataset;

/// Misalignment residual for a known incision force and pivot angle:
/// `(k D sin(theta) / |f| - 1) f`.
pub fn residual_phase1(k: f64, d: f64, f_star: &Vector3<f64>, theta_star: f64) -> Vector3<f64> {
    spring_residual(k, d, theta_star, f_star)
}

/// `k D sin(theta) n - g` with `n = g / |g|`. At `g = 0` the direction is
/// arbitrary; a fixed axis keeps `|h| = |k D sin(theta)|` continuous.
pub(crate) fn spring_residual(k: f64, d: f64, theta: f64, g: &Vector3<f64>) -> Vector3<f64> {
    let spring = k * d * theta.sin();
    let norm = g.norm();
    if norm > 0.0 {
        g * (spring / norm - 1.0)
    } else {
        Vector3::new(spring, 0.0, 0.0)
    }
}

/// Which incision force enters the phase-2 residual.
#[derive(Clone, Copy)]
pub enum ForceSource<'a> {
    /// `J(q, D)^-T (tau - tau0_hat)` from a free-space predictor.
    Estimated(&'a dyn TorquePredictor),
    /// The recorded ground-truth force channel.
    GroundTruth,
}

impl std::fmt::Debug for ForceSource<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ForceSource::Estimated(_) => f.write_str("Estimated"),
            ForceSource::GroundTruth => f.write_str("GroundTruth"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Signal {
    TorqueResidual(Vector3<f64>),
    Force(Vector3<f64>),
}

/// One sample reduced to what the phase-2 residual needs. The torque
/// residual does not depend on D, so the predictor runs once per sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedSample {
    pub q: JointConfig,
    pub theta: f64,
    signal: Signal,
}

impl PreparedSample {
    /// Incision force as seen at candidate distance `d`.
    pub fn force_at(&self, d: f64) -> Result<Vector3<f64>> {
        match self.signal {
            Signal::TorqueResidual(r) => force_from_residual(&self.q, d, &r),
            Signal::Force(f) => Ok(f),
        }
    }

    pub fn residual(&self, k: f64, d: f64) -> Result<Vector3<f64>> {
        Ok(spring_residual(k, d, self.theta, &self.force_at(d)?))
    }
}

pub fn prepare_samples(dataset: &Dataset, source: ForceSource<'_>) -> Result<Vec<PreparedSample>> {
    match source {
        ForceSource::GroundTruth => dataset
            .samples
            .iter()
            .map(|s| {
                Ok(PreparedSample {
                    q: s.q,
                    theta: pivot_angle(&s.q),
                    signal: Signal::Force(s.f_true.ok_or(Error::MissingColumn("fx"))?),
                })
            })
            .collect(),
        ForceSource::Estimated(predictor) => {
            let w = predictor.window().max(1);
            (w..=dataset.len())
                .map(|end| {
                    let window = &dataset.samples[end - w..end];
                    let s = &window[w - 1];
                    Ok(PreparedSample {
                        q: s.q,
                        theta: pivot_angle(&s.q),
                        signal: Signal::TorqueResidual(torque_residual(predictor, window)?),
                    })
                })
                .collect()
        }
    }
}

/// Phase-2 residual for one raw sample window, `h(k, D)`.
pub fn residual_phase2(
    k: f64,
    d: f64,
    window: &[crate::sim::JointSample],
    source: ForceSource<'_>,
) -> Result<Vector3<f64>> {
    let s = window.last().ok_or(Error::EmptyDataset)?;
    let g = match source {
        ForceSource::Estimated(p) => force_from_residual(&s.q, d, &torque_residual(p, window)?)?,
        ForceSource::GroundTruth => s.f_true.ok_or(Error::MissingColumn("fx"))?,
    };
    Ok(spring_residual(k, d, pivot_angle(&s.q), &g))
}

/// `sum_i 0.5 |h_i|^2` over `items`.
pub fn total_cost<T, F>(items: &[T], residual: F) -> Result<f64>
where
    F: Fn(&T) -> Result<Vector3<f64>>,
{
    if items.is_empty() {
        return Err(Error::InsufficientExcitation { used: 0, required: 1 });
    }
    items
        .iter()
        .try_fold(0.0, |acc, item| Ok(acc + 0.5 * residual(item)?.norm_squared()))
}

/// Flattened residual vector for the least-squares solver.
pub(crate) fn stacked<T, F>(items: &[T], residual: F) -> Result<Vec<f64>>
where
    F: Fn(&T) -> Result<Vector3<f64>>,
{
    let mut out = Vec::with_capacity(3 * items.len());
    for item in items {
        out.extend_from_slice(residual(item)?.as_slice());
    }
    Ok(out)
}
