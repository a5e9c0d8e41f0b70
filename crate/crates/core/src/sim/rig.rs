use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::config::{fmt_triple, KvMap};
use crate::error::{Error, Result};
use crate::kinematics::{dh_forward, insertion_axis, pivot_angle, JointConfig};

pub const D_MIN: f64 = -0.020;
pub const D_MAX: f64 = 0.050;

/// Ground truth of the simulated trocar rig.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigConfig {
    /// Signed RCM-to-incision distance along the insertion axis (m).
    pub d_true: f64,
    /// Tissue stiffness (N/m). Zero gives a free-space rig.
    pub k_true: f64,
    /// Radial misalignment between the plumb lines (m).
    pub radial_offset_delta0: f64,
    /// Direction of the preload force from radial misalignment.
    pub radial_direction: [f64; 3],
    /// Gravity amplitude on joint 2 (N m).
    pub gravity_g2: f64,
    /// Gravity load on the insertion joint (N).
    pub gravity_g3: f64,
    pub viscous_b: [f64; 3],
    pub coulomb_c: [f64; 3],
    /// Velocity scale of the tanh-smoothed Coulomb term (rad/s).
    pub coulomb_vel_scale: f64,
    /// Per-joint torque noise standard deviation (N m, N m, N).
    pub torque_noise_sigma: [f64; 3],
    pub seed: u64,
}

impl Default for RigConfig {
    fn default() -> Self {
        Self {
            d_true: 0.030,
            k_true: 900.0,
            radial_offset_delta0: 0.0,
            radial_direction: [1.0, 0.0, 0.0],
            gravity_g2: 0.8,
            gravity_g3: 2.0,
            viscous_b: [0.05, 0.05, 2.0],
            coulomb_c: [0.1, 0.1, 1.0],
            coulomb_vel_scale: 0.05,
            torque_noise_sigma: [0.01, 0.01, 0.1],
            seed: 0,
        }
    }
}

impl RigConfig {
    pub fn free_space() -> Self {
        Self {
            k_true: 0.0,
            ..Self::default()
        }
    }

    pub fn noise_free(mut self) -> Self {
        self.torque_noise_sigma = [0.0; 3];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(D_MIN..=D_MAX).contains(&self.d_true) {
            return Err(Error::Config(format!(
                "d_true = {} m outside [{D_MIN}, {D_MAX}]",
                self.d_true
            )));
        }
        // k_true = 0 is the free-space rig
        if !(self.k_true >= 0.0 && self.k_true.is_finite()) {
            return Err(Error::Config(format!("k_true = {} must be >= 0", self.k_true)));
        }
        if self.torque_noise_sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("torque_noise_sigma must be >= 0".into()));
        }
        if !(self.radial_offset_delta0 >= 0.0) {
            return Err(Error::Config("radial_offset_delta0 must be >= 0".into()));
        }
        if self.radial_offset_delta0 > 0.0 && Vector3::from(self.radial_direction).norm() == 0.0 {
            return Err(Error::Config("radial_direction must be nonzero".into()));
        }
        if !(self.coulomb_vel_scale > 0.0) {
            return Err(Error::Config("coulomb_vel_scale must be > 0".into()));
        }
        Ok(())
    }

    /// Consumes the rig keys present in `kv`, overriding fields of `self`.
    pub fn apply_kv(&mut self, kv: &mut KvMap) -> Result<()> {
        macro_rules! take {
            ($field:ident, $key:literal) => {
                if let Some(v) = kv.take($key)? {
                    self.$field = v;
                }
            };
        }
        macro_rules! take3 {
            ($field:ident, $key:literal) => {
                if let Some(v) = kv.take_triple($key)? {
                    self.$field = v;
                }
            };
        }
        take!(d_true, "d_true");
        take!(k_true, "k_true");
        take!(radial_offset_delta0, "radial_offset_delta0");
        take3!(radial_direction, "radial_direction");
        take!(gravity_g2, "gravity_g2");
        take!(gravity_g3, "gravity_g3");
        take3!(viscous_b, "viscous_b");
        take3!(coulomb_c, "coulomb_c");
        take!(coulomb_vel_scale, "coulomb_vel_scale");
        take3!(torque_noise_sigma, "torque_noise_sigma");
        take!(seed, "noise_seed");
        Ok(())
    }

    pub fn from_kv(kv: &mut KvMap) -> Result<Self> {
        let mut rig = Self::default();
        rig.apply_kv(kv)?;
        rig.validate()?;
        Ok(rig)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.set("d_true", self.d_true);
        kv.set("k_true", self.k_true);
        kv.set("radial_offset_delta0", self.radial_offset_delta0);
        kv.set("radial_direction", fmt_triple(&self.radial_direction));
        kv.set("gravity_g2", self.gravity_g2);
        kv.set("gravity_g3", self.gravity_g3);
        kv.set("viscous_b", fmt_triple(&self.viscous_b));
        kv.set("coulomb_c", fmt_triple(&self.coulomb_c));
        kv.set("coulomb_vel_scale", self.coulomb_vel_scale);
        kv.set("torque_noise_sigma", fmt_triple(&self.torque_noise_sigma));
        kv.set("noise_seed", self.seed);
        kv
    }

    pub fn summary(&self) -> String {
        format!(
            "D = {:.1} mm, k = {} N/m, delta0 = {:.1} mm, noise = ({}, {}, {})",
            self.d_true * 1e3,
            self.k_true,
            self.radial_offset_delta0 * 1e3,
            self.torque_noise_sigma[0],
            self.torque_noise_sigma[1],
            self.torque_noise_sigma[2],
        )
    }
}

/// Force the shaft exerts on the tissue at the incision.
///
/// Linear spring of magnitude `k |D sin(theta)|` along the lateral
/// displacement of the incision point from its zero-deflection position.
pub fn tissue_force(q: &JointConfig, rig: &RigConfig) -> Vector3<f64> {
    let mut f = Vector3::zeros();
    let theta = pivot_angle(q);
    if theta >= 1e-9 && rig.d_true != 0.0 {
        let axis = insertion_axis(q);
        let disp = dh_forward(q, rig.d_true) - dh_forward(&JointConfig::default(), rig.d_true);
        let lateral = disp - axis * axis.dot(&disp);
        let norm = lateral.norm();
        if norm > 0.0 {
            let magnitude = rig.k_true * (rig.d_true * theta.sin()).abs();
            f = lateral * (magnitude / norm);
        }
    }
    if rig.radial_offset_delta0 > 0.0 {
        let n0 = Vector3::from(rig.radial_direction).normalize();
        f += n0 * (rig.k_true * rig.radial_offset_delta0);
    }
    f
}

/// Gravity and smoothed friction torques of the simulated arm in free space.
pub fn freespace_torque_truth(q: &JointConfig, qdot: &Vector3<f64>, rig: &RigConfig) -> Vector3<f64> {
    gravity_torque(q, rig) + friction_torque(qdot, rig)
}

pub fn gravity_torque(q: &JointConfig, rig: &RigConfig) -> Vector3<f64> {
    Vector3::new(
        0.0,
        rig.gravity_g2 * q.q2.sin(),
        rig.gravity_g3 * q.q1.cos() * q.q2.cos(),
    )
}

fn friction_torque(qdot: &Vector3<f64>, rig: &RigConfig) -> Vector3<f64> {
    let v0 = rig.coulomb_vel_scale;
    Vector3::from_fn(|i, _| rig.viscous_b[i] * qdot[i] + rig.coulomb_c[i] * (qdot[i] / v0).tanh())
}
