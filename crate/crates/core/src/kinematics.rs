//! Kinematics of the first three PSM joints about the remote center of motion.
//!
//! The base frame sits at the RCM. Joints 1 and 2 are the outer yaw/pitch
//! revolutes, joint 3 is the insertion prismatic. Frame 3 is placed at the
//! incision, a distance `D` along the insertion axis from the RCM, so its
//! origin is the point on the shaft where tissue forces act.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint positions of the first three joints: two angles (rad) and the
/// insertion depth (m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointConfig {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl JointConfig {
    /// Checked constructor enforcing the `|q1|, |q2| <= pi/2` workspace guard.
    pub fn new(q1: f64, q2: f64, q3: f64) -> Result<Self> {
        let q = Self { q1, q2, q3 };
        if !q.in_workspace() {
            return Err(Error::Invalid(format!(
                "joint angles ({q1}, {q2}) outside |q| <= pi/2"
            )));
        }
        Ok(q)
    }

    pub fn in_workspace(&self) -> bool {
        self.q1.is_finite()
            && self.q2.is_finite()
            && self.q3.is_finite()
            && self.q1.abs() <= FRAC_PI_2
            && self.q2.abs() <= FRAC_PI_2
    }
}

/// One link row of a modified (Craig) DH table.
#[derive(Debug, Clone, Copy)]
struct DhLink {
    a_prev: f64,
    alpha_prev: f64,
    d: f64,
    theta: f64,
}

impl DhLink {
    // Rx(alpha_prev) * Tx(a_prev) * Rz(theta) * Tz(d)
    fn transform(&self) -> Matrix4<f64> {
        let (sa, ca) = self.alpha_prev.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        Matrix4::new(
            ct,
            -st,
            0.0,
            self.a_prev,
            st * ca,
            ct * ca,
            -sa,
            -sa * self.d,
            st * sa,
            ct * sa,
            ca,
            ca * self.d,
            0.0,
            0.0,
            0.0,
            1.0,
        )
    }
}

fn links(q: &JointConfig, d3: f64) -> [DhLink; 3] {
    [
        DhLink {
            a_prev: 0.0,
            alpha_prev: FRAC_PI_2,
            d: 0.0,
            theta: q.q1 + FRAC_PI_2,
        },
        DhLink {
            a_prev: 0.0,
            alpha_prev: -FRAC_PI_2,
            d: 0.0,
            theta: q.q2 - FRAC_PI_2,
        },
        // alpha_2 = +pi/2 as in the dVRK PSM table; this is the sign that makes the
        // frame-3 origin differentiate to the closed-form incision Jacobian.
        DhLink {
            a_prev: 0.0,
            alpha_prev: FRAC_PI_2,
            d: d3,
            theta: 0.0,
        },
    ]
}

/// Homogeneous transform base -> frame 3 for a given frame-3 offset `d3`.
pub fn frame3_transform(q: &JointConfig, d3: f64) -> Matrix4<f64> {
    links(q, d3)
        .iter()
        .fold(Matrix4::identity(), |acc, link| acc * link.transform())
}

/// Incision point in the base frame: origin of frame 3 with `d3 = -D`.
pub fn dh_forward(q: &JointConfig, d: f64) -> Vector3<f64> {
    frame3_transform(q, -d).fixed_view::<3, 1>(0, 3).into_owned()
}

/// Shaft point at `d3 = q3 - D` along the insertion axis. With `q3` taken
/// relative to the current insertion depth this is the material point at the
/// incision, and its joint derivative at `q3 = 0` is the incision Jacobian,
/// insertion column included.
pub fn shaft_point(q: &JointConfig, d: f64) -> Vector3<f64> {
    frame3_transform(q, q.q3 - d)
        .fixed_view::<3, 1>(0, 3)
        .into_owned()
}

/// Unit insertion axis (z of frame 3) in the base frame.
pub fn insertion_axis(q: &JointConfig) -> Vector3<f64> {
    let (s1, c1) = q.q1.sin_cos();
    let (s2, c2) = q.q2.sin_cos();
    Vector3::new(c2 * s1, -s2, -c1 * c2)
}

/// Jacobian mapping joint rates to the incision-point velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncisionJacobian {
    pub m: Matrix3<f64>,
    pub d: f64,
}

impl IncisionJacobian {
    pub fn is_singular(&self) -> bool {
        self.d == 0.0
    }
}

pub fn incision_jacobian(q: &JointConfig, d: f64) -> IncisionJacobian {
    let (s1, c1) = q.q1.sin_cos();
    let (s2, c2) = q.q2.sin_cos();
    #[rustfmt::skip]
    let m = Matrix3::new(
        -d * c1 * c2,  d * s1 * s2,  c2 * s1,
         0.0,          d * c2,      -s2,
        -d * c2 * s1, -d * c1 * s2, -c1 * c2,
    );
    IncisionJacobian { m, d }
}

/// Deflection of the shaft from the RCM plumb line, in `[0, pi]`.
pub fn pivot_angle(q: &JointConfig) -> f64 {
    (q.q1.cos() * q.q2.cos()).clamp(-1.0, 1.0).acos()
}

/// Lateral offset of the incision from the plumb line, `D sin(theta)`.
pub fn coaxial_offset(d: f64, theta: f64) -> f64 {
    d * theta.sin()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotGeometry {
    pub theta: f64,
    pub delta_p: f64,
}

impl PivotGeometry {
    pub fn new(q: &JointConfig, d: f64) -> Self {
        let theta = pivot_angle(q);
        Self {
            theta,
            delta_p: coaxial_offset(d, theta),
        }
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn q(q1: f64, q2: f64, q3: f64) -> JointConfig {
        JointConfig { q1, q2, q3 }
    }

    #[test]
    fn forward_at_zero_deflection() {
        for q3 in [0.0, 0.05, -0.1] {
            let p = dh_forward(&q(0.0, 0.0, q3), 0.03);
            assert_abs_diff_eq!(p.norm(), 0.03, epsilon = 1e-15);
            assert_abs_diff_eq!(dh_forward(&q(0.0, 0.0, q3), 0.0).norm(), 0.0);
        }
    }

    #[test]
    fn forward_lies_along_axis() {
        let c = q(0.3, -0.7, 0.1);
        let p = dh_forward(&c, 0.025);
        assert_abs_diff_eq!((p + 0.025 * insertion_axis(&c)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn jacobian_zero_angles() {
        let j = incision_jacobian(&q(0.0, 0.0, 0.2), 0.03).m;
        let expect = Matrix3::new(-0.03, 0.0, 0.0, 0.0, 0.03, 0.0, 0.0, 0.0, -1.0);
        assert_abs_diff_eq!(j, expect, epsilon = 1e-15);
    }

    #[test]
    fn jacobian_at_rcm_keeps_only_insertion_column() {
        let c = q(0.4, -0.2, 0.0);
        let j = incision_jacobian(&c, 0.0);
        assert!(j.is_singular());
        assert_eq!(j.m.column(0).norm(), 0.0);
        assert_eq!(j.m.column(1).norm(), 0.0);
        let col3 = Vector3::new(
            0.2f64.cos() * 0.4f64.sin(),
            0.2f64.sin(),
            -0.4f64.cos() * 0.2f64.cos(),
        );
        assert_abs_diff_eq!(j.m.column(2).into_owned(), col3, epsilon = 1e-15);
    }

    #[test]
    fn jacobian_thirty_degrees() {
        let j = incision_jacobian(&q(0.5236, 0.0, 0.0), 0.02).m;
        let expect = Matrix3::new(-0.017321, 0.0, 0.5, 0.0, 0.02, 0.0, -0.01, 0.0, -0.86603);
        assert_abs_diff_eq!(j, expect, epsilon = 1e-5);
    }

    #[test]
    fn pivot_angle_values() {
        assert_eq!(pivot_angle(&q(0.0, 0.0, 0.0)), 0.0);
        assert_abs_diff_eq!(pivot_angle(&q(0.0, 0.3, 0.0)), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(
            pivot_angle(&q(FRAC_PI_4, FRAC_PI_4, 0.0)),
            PI / 3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            pivot_angle(&q(FRAC_PI_4, FRAC_PI_4, 0.0)),
            1.04720,
            epsilon = 1e-5
        );
    }

    #[test]
    fn coaxial_offset_values() {
        assert_abs_diff_eq!(coaxial_offset(0.030, 0.5236), 0.015, epsilon = 1e-6);
        assert_eq!(coaxial_offset(0.7, 0.0), 0.0);
        assert_abs_diff_eq!(coaxial_offset(-0.020, 0.7854), -0.014142, epsilon = 1e-6);
        let g = PivotGeometry::new(&q(0.0, 0.0, 0.0), 0.04);
        assert_eq!((g.theta, g.delta_p), (0.0, 0.0));
    }

    #[test]
    fn guard() {
        assert!(JointConfig::new(1.0, -1.5, 0.0).is_ok());
        assert!(JointConfig::new(1.6, 0.0, 0.0).is_err());
        assert!(JointConfig::new(0.0, f64::NAN, 0.0).is_err());
    }
}
