use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::model::TorquePredictor;
use crate::kinematics::{incision_jacobian, JointConfig};
use crate::sim::{Dataset, JointSample};

/// Smallest |D| (m) at which the incision Jacobian is inverted.
pub const D_GUARD: f64 = 1e-3;
const COND_LIMIT: f64 = 1e8;
const TIKHONOV: f64 = 1e-9;

/// Solves `J^T f = r` for the incision force. Falls back to a Tikhonov-damped
/// least-squares solve when the 1-norm condition number of `J` exceeds 1e8.
pub fn force_from_residual(q: &JointConfig, d: f64, residual: &Vector3<f64>) -> Result<Vector3<f64>> {
    if !(d.abs() >= D_GUARD) {
        return Err(Error::Singular { d, guard: D_GUARD });
    }
    let jac = incision_jacobian(q, d).m;
    let jt = jac.transpose();
    let lu = jt.lu();
    if let Some(inv) = lu.try_inverse() {
        if norm1(&jt) * norm1(&inv) <= COND_LIMIT {
            if let Some(f) = lu.solve(residual) {
                return Ok(f);
            }
        }
    }
    let damped = jac * jt + Matrix3::identity() * TIKHONOV;
    damped
        .lu()
        .solve(&(jac * residual))
        .ok_or(Error::Singular { d, guard: D_GUARD })
}

fn norm1(m: &Matrix3<f64>) -> f64 {
    m.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max)
}

/// Torque residual `tau - tau0_hat` at the last sample of `window`.
pub fn torque_residual(predictor: &dyn TorquePredictor, window: &[JointSample]) -> Result<Vector3<f64>> {
    let s = window.last().ok_or(Error::EmptyDataset)?;
    Ok(s.tau - predictor.predict_tau0(window)?)
}

/// Incision force estimate at the last sample of `window`.
pub fn estimate_force(
    predictor: &dyn TorquePredictor,
    window: &[JointSample],
    d: f64,
) -> Result<Vector3<f64>> {
    let r = torque_residual(predictor, window)?;
    let s = window.last().ok_or(Error::EmptyDataset)?;
    force_from_residual(&s.q, d, &r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceEstimateSeries {
    pub t: Vec<f64>,
    pub f_hat: Vec<[f64; 3]>,
    pub truth: Option<Vec<[f64; 3]>>,
    pub rmse: Option<[f64; 3]>,
}

impl ForceEstimateSeries {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "fx_hat", "fy_hat", "fz_hat", "fx", "fy", "fz"])?;
        for (i, (t, f)) in self.t.iter().zip(&self.f_hat).enumerate() {
            let mut rec = vec![
                t.to_string(),
                f[0].to_string(),
                f[1].to_string(),
                f[2].to_string(),
            ];
            match &self.truth {
                Some(truth) => rec.extend(truth[i].iter().map(f64::to_string)),
                None => rec.extend(std::iter::repeat_n(String::new(), 3)),
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Estimates the incision force over every sample with a full predictor
/// window; the RMSE is filled in when the dataset carries ground truth.
pub fn estimate_force_series(
    predictor: &dyn TorquePredictor,
    dataset: &Dataset,
    d: f64,
) -> Result<ForceEstimateSeries> {
    let w = predictor.window().max(1);
    if dataset.len() < w {
        return Err(Error::WindowTooShort {
            got: dataset.len(),
            need: w,
        });
    }
    let mut t = Vec::with_capacity(dataset.len());
    let mut f_hat = Vec::with_capacity(dataset.len());
    for end in w..=dataset.len() {
        let window = &dataset.samples[end - w..end];
        t.push(window[w - 1].t);
        f_hat.push(estimate_force(predictor, window, d)?.into());
    }
    let truth: Option<Vec<[f64; 3]>> = dataset.samples[w - 1..]
        .iter()
        .map(|s| s.f_true.map(Into::into))
        .collect();
    let rmse = truth.as_ref().map(|tr| force_rmse(&f_hat, tr)).transpose()?;
    Ok(ForceEstimateSeries {
        t,
        f_hat,
        truth,
        rmse,
    })
}

pub fn force_rmse(series: &[[f64; 3]], truth: &[[f64; 3]]) -> Result<[f64; 3]> {
    if series.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: series.len(),
            right: truth.len(),
        });
    }
    if series.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = series.len() as f64;
    Ok(std::array::from_fn(|axis| {
        let sq: f64 = series
            .iter()
            .zip(truth)
            .map(|(a, b)| (a[axis] - b[axis]).powi(2))
            .sum();
        (sq / n).sqrt()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::model::{RecordedTau0, TruthTau0};
    use crate::sim::{synthesize_dataset, RigConfig, TrajectorySpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn rmse_cases() {
        let a = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        assert_eq!(force_rmse(&a, &a).unwrap(), [0.0; 3]);
        let shifted: Vec<_> = a.iter().map(|v| [v[0] + 1.0, v[1], v[2]]).collect();
        assert_eq!(force_rmse(&shifted, &a).unwrap(), [1.0, 0.0, 0.0]);
        let r = force_rmse(&[[0.0; 3], [2.0, 0.0, 0.0]], &[[0.0; 3]; 2]).unwrap();
        assert_abs_diff_eq!(r[0], 2f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(
            force_rmse(&a, &a[..1]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn inversion_with_truth_predictor() {
        let rig = RigConfig::default().noise_free();
        let ds = synthesize_dataset(&TrajectorySpec::teleop(9, 5.0), &rig).unwrap();
        let truth = TruthTau0 { rig: rig.clone() };
        for end in 1..=ds.len() {
            let s = &ds.samples[end - 1];
            let f = estimate_force(&truth, &ds.samples[..end], rig.d_true).unwrap();
            let ft = s.f_true.unwrap();
            assert!((f - ft).norm() <= 1e-9 * ft.norm().max(1.0));
            // J^T f reproduces the torque residual
            let back = incision_jacobian(&s.q, rig.d_true).m.transpose() * f;
            assert!((back - (s.tau - s.tau0_true.unwrap())).norm() <= 1e-9);
        }
    }

    #[test]
    fn free_space_gives_zero_force() {
        let rig = RigConfig::free_space().noise_free();
        let ds = synthesize_dataset(&TrajectorySpec::teleop(10, 2.0), &rig).unwrap();
        let series = estimate_force_series(&RecordedTau0, &ds, 0.03).unwrap();
        assert!(series.f_hat.iter().all(|f| f.iter().all(|x| x.abs() < 1e-12)));
        assert!(series.rmse.unwrap().iter().all(|x| *x < 1e-12));
    }

    #[test]
    fn guard_rejects_small_d() {
        let q = JointConfig {
            q1: 0.2,
            q2: 0.1,
            q3: 0.1,
        };
        assert!(matches!(
            force_from_residual(&q, 5e-4, &Vector3::zeros()),
            Err(Error::Singular { .. })
        ));
        assert!(force_from_residual(&q, -2e-3, &Vector3::new(0.01, 0.0, 0.0)).is_ok());
    }

    #[test]
    fn ill_conditioned_uses_damping() {
        // q2 near pi/2 collapses the first column
        let q = JointConfig {
            q1: 0.3,
            q2: std::f64::consts::FRAC_PI_2 - 1e-12,
            q3: 0.1,
        };
        let f = force_from_residual(&q, 0.03, &Vector3::new(0.1, 0.1, 0.1)).unwrap();
        assert!(f.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn series_without_truth() {
        let rig = RigConfig::default();
        let mut ds = synthesize_dataset(&TrajectorySpec::teleop(11, 1.0), &rig).unwrap();
        for s in &mut ds.samples {
            s.f_true = None;
        }
        let series = estimate_force_series(&TruthTau0 { rig }, &ds, 0.03).unwrap();
        assert_eq!(series.f_hat.len(), ds.len());
        assert!(series.truth.is_none() && series.rmse.is_none());
    }
}
