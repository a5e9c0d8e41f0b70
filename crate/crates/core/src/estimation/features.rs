use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::JointSample;

/// Features emitted per lagged state.
pub const FEATURES_PER_STATE: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Number of consecutive states per input window (current state last).
    pub window: usize,
    /// Velocity scale of the tanh friction features (rad/s).
    pub velocity_scale: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window: 1,
            velocity_scale: 0.05,
        }
    }
}

impl FeatureConfig {
    pub fn len(&self) -> usize {
        FEATURES_PER_STATE * self.window
    }

    pub fn is_empty(&self) -> bool {
        self.window == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("feature window must be >= 1".into()));
        }
        if !(self.velocity_scale > 0.0 && self.velocity_scale.is_finite()) {
            return Err(Error::Config("velocity_scale must be > 0".into()));
        }
        Ok(())
    }
}

/// Feature vector for the last `cfg.window` states of `window`, oldest first.
///
/// Per state: `[1, q1, q2, q3, sin q1, cos q1, sin q2, cos q2, qd1, qd2, qd3,
/// tanh(qd1/v0), tanh(qd2/v0), tanh(qd3/v0), cos q1 cos q2]`.
pub fn extract_features(window: &[JointSample], cfg: &FeatureConfig) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(cfg.len());
    extract_into(window, cfg, &mut out)?;
    Ok(out)
}

pub(crate) fn extract_into(window: &[JointSample], cfg: &FeatureConfig, out: &mut Vec<f64>) -> Result<()> {
    if window.len() < cfg.window {
        return Err(Error::WindowTooShort {
            got: window.len(),
            need: cfg.window,
        });
    }
    out.clear();
    let v0 = cfg.velocity_scale;
    for s in &window[window.len() - cfg.window..] {
        let (s1, c1) = s.q.q1.sin_cos();
        let (s2, c2) = s.q.q2.sin_cos();
        let v = s.qdot;
        out.extend_from_slice(&[
            1.0,
            s.q.q1,
            s.q.q2,
            s.q.q3,
            s1,
            c1,
            s2,
            c2,
            v[0],
            v[1],
            v[2],
            (v[0] / v0).tanh(),
            (v[1] / v0).tanh(),
            (v[2] / v0).tanh(),
            c1 * c2,
        ]);
    }
    Ok(())
}
