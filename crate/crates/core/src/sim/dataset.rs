use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kinematics::{incision_jacobian, JointConfig};
use crate::sim::rig::{freespace_torque_truth, tissue_force, RigConfig};
use crate::sim::trajectory::{gen_trajectory, TrajectorySpec};

pub const CSV_HEADER: [&str; 16] = [
    "t", "q1", "q2", "q3", "qd1", "qd2", "qd3", "tau1", "tau2", "tau3", "fx", "fy", "fz", "tau01", "tau02",
    "tau03",
];

/// One timestamped measurement. `f_true` and `tau0_true` are simulator
/// ground truth and absent for externally sourced data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSample {
    pub t: f64,
    pub q: JointConfig,
    pub qdot: Vector3<f64>,
    pub tau: Vector3<f64>,
    pub f_true: Option<Vector3<f64>>,
    pub tau0_true: Option<Vector3<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<JointSample>,
    pub rig: Option<RigConfig>,
    pub traj: Option<TrajectorySpec>,
}

impl Dataset {
    pub fn from_samples(samples: Vec<JointSample>) -> Self {
        Self {
            samples,
            rig: None,
            traj: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_forces(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.f_true.is_some())
    }

    /// Checks the timestamp contract: strictly increasing, uniform spacing.
    pub fn check_timing(&self) -> Result<()> {
        let n = self.samples.len();
        if n < 2 {
            return Ok(());
        }
        let span = self.samples[n - 1].t - self.samples[0].t;
        let dt = span / (n - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Invalid("timestamps not increasing".into()));
        }
        for (i, w) in self.samples.windows(2).enumerate() {
            let step = w[1].t - w[0].t;
            if !(step > 0.0) || (step - dt).abs() > 1e-6 * dt.max(1.0) {
                return Err(Error::Invalid(format!(
                    "non-uniform timestamps at row {} (step {step}, expected {dt})",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        let opt = |v: Option<Vector3<f64>>, i: usize| v.map(|v| v[i].to_string()).unwrap_or_default();
        for s in &self.samples {
            let mut rec = vec![
                s.t.to_string(),
                s.q.q1.to_string(),
                s.q.q2.to_string(),
                s.q.q3.to_string(),
            ];
            rec.extend((0..3).map(|i| s.qdot[i].to_string()));
            rec.extend((0..3).map(|i| s.tau[i].to_string()));
            rec.extend((0..3).map(|i| opt(s.f_true, i)));
            rec.extend((0..3).map(|i| opt(s.tau0_true, i)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = r.headers()?.clone();
        let mut index = [usize::MAX; 16];
        for (slot, name) in index.iter_mut().zip(CSV_HEADER) {
            if let Some(pos) = headers.iter().position(|h| h == name) {
                *slot = pos;
            }
        }
        for (i, name) in CSV_HEADER.iter().enumerate().take(10) {
            if index[i] == usize::MAX {
                return Err(Error::MissingColumn(name));
            }
        }
        let mut samples = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let field = |col: usize| -> Result<Option<f64>> {
                let idx = index[col];
                if idx == usize::MAX {
                    return Ok(None);
                }
                let raw = record.get(idx).unwrap_or("");
                if raw.is_empty() {
                    return Ok(None);
                }
                raw.parse::<f64>().map(Some).map_err(|_| {
                    Error::Invalid(format!(
                        "row {}: cannot parse `{raw}` in {}",
                        row + 1,
                        CSV_HEADER[col]
                    ))
                })
            };
            let req = |col: usize| -> Result<f64> {
                field(col)?.ok_or_else(|| {
                    Error::Invalid(format!(
                        "row {}: empty required field {}",
                        row + 1,
                        CSV_HEADER[col]
                    ))
                })
            };
            let triple = |start: usize| -> Result<Option<Vector3<f64>>> {
                match (field(start)?, field(start + 1)?, field(start + 2)?) {
                    (Some(a), Some(b), Some(c)) => Ok(Some(Vector3::new(a, b, c))),
                    (None, None, None) => Ok(None),
                    _ => Err(Error::Invalid(format!(
                        "row {}: partially filled vector",
                        row + 1
                    ))),
                }
            };
            samples.push(JointSample {
                t: req(0)?,
                q: JointConfig {
                    q1: req(1)?,
                    q2: req(2)?,
                    q3: req(3)?,
                },
                qdot: Vector3::new(req(4)?, req(5)?, req(6)?),
                tau: Vector3::new(req(7)?, req(8)?, req(9)?),
                f_true: triple(10)?,
                tau0_true: triple(13)?,
            });
        }
        let ds = Self::from_samples(samples);
        ds.check_timing()?;
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Runs the rig along the trajectory: `tau = tau0 + J^T(d_true) f + noise`.
pub fn synthesize_dataset(traj: &TrajectorySpec, rig: &RigConfig) -> Result<Dataset> {
    rig.validate()?;
    let points = gen_trajectory(traj)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rig.seed);
    // keep noise independent of a teleop trajectory drawn from the same seed
    rng.set_stream(1);
    let sigma = Vector3::from(rig.torque_noise_sigma);
    let samples = points
        .into_iter()
        .map(|p| {
            let f = tissue_force(&p.q, rig);
            let tau0 = freespace_torque_truth(&p.q, &p.qdot, rig);
            let jac = incision_jacobian(&p.q, rig.d_true);
            let noise = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng)).component_mul(&sigma);
            JointSample {
                t: p.t,
                q: p.q,
                qdot: p.qdot,
                tau: tau0 + jac.m.transpose() * f + noise,
                f_true: Some(f),
                tau0_true: Some(tau0),
            }
        })
        .collect();
    Ok(Dataset {
        samples,
        rig: Some(rig.clone()),
        traj: Some(traj.clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub d: f64,
    pub theta: f64,
    pub force: f64,
}

/// Static force magnitude `k |D sin(theta)|` over a (D, theta) grid, rows
/// grouped by D in grid order.
pub fn force_angle_sweep(k: f64, theta_grid: &[f64], d_grid: &[f64]) -> Result<Vec<SweepRow>> {
    if theta_grid.is_empty() || d_grid.is_empty() {
        return Err(Error::Invalid("sweep grids must be nonempty".into()));
    }
    Ok(d_grid
        .iter()
        .flat_map(|&d| {
            theta_grid.iter().map(move |&theta| SweepRow {
                d,
                theta,
                force: k * crate::kinematics::coaxial_offset(d, theta).abs(),
            })
        })
        .collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["d", "theta", "force"])?;
    for r in rows {
        w.write_record([r.d.to_string(), r.theta.to_string(), r.force.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    fn short_teleop(seed: u64) -> TrajectorySpec {
        TrajectorySpec::teleop(seed, 5.0)
    }

    #[test]
    fn free_space_noise_free_is_exact() {
        let rig = RigConfig::free_space().noise_free();
        let ds = synthesize_dataset(&short_teleop(1), &rig).unwrap();
        for s in &ds.samples {
            assert_eq!(s.tau, s.tau0_true.unwrap());
            assert_eq!(s.f_true.unwrap(), Vector3::zeros());
        }
    }

    #[test]
    fn construction_identity() {
        let rig = RigConfig::default().noise_free();
        let ds = synthesize_dataset(&short_teleop(2), &rig).unwrap();
        for s in &ds.samples {
            let jt_f = incision_jacobian(&s.q, rig.d_true).m.transpose() * s.f_true.unwrap();
            assert!((jt_f - (s.tau - s.tau0_true.unwrap())).norm() <= 1e-12);
        }
    }

    #[test]
    fn stiffness_scales_force() {
        let rig = RigConfig::default();
        let twice = RigConfig {
            k_true: 2.0 * rig.k_true,
            ..rig.clone()
        };
        let a = synthesize_dataset(&short_teleop(3), &rig).unwrap();
        let b = synthesize_dataset(&short_teleop(3), &twice).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(2.0 * x.f_true.unwrap(), y.f_true.unwrap());
        }
    }

    #[test]
    fn deterministic_bytes() {
        let rig = RigConfig {
            seed: 11,
            ..RigConfig::default()
        };
        let bytes = |ds: &Dataset| {
            let mut v = Vec::new();
            ds.write_csv(&mut v).unwrap();
            v
        };
        let a = synthesize_dataset(&short_teleop(4), &rig).unwrap();
        let b = synthesize_dataset(&short_teleop(4), &rig).unwrap();
        assert_eq!(bytes(&a), bytes(&b));
        let c = synthesize_dataset(&short_teleop(4), &RigConfig { seed: 12, ..rig }).unwrap();
        assert_ne!(bytes(&a), bytes(&c));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = synthesize_dataset(&short_teleop(5), &RigConfig::default()).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.samples, ds.samples);
    }

    #[test]
    fn csv_without_debug_columns() {
        let text = "t,q1,q2,q3,qd1,qd2,qd3,tau1,tau2,tau3\n0,0.1,0.2,0.1,0,0,0,0.5,0.4,1.0\n0.01,0.1,0.2,0.1,0,0,0,0.5,0.4,1.0\n";
        let ds = Dataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert!(ds.samples[0].f_true.is_none());
        assert!(!ds.has_forces());
        let empty_cols =
            "t,q1,q2,q3,qd1,qd2,qd3,tau1,tau2,tau3,fx,fy,fz,tau01,tau02,tau03\n0,0,0,0,0,0,0,0,0,0,,,,,,\n";
        let ds = Dataset::read_csv(empty_cols.as_bytes()).unwrap();
        assert!(ds.samples[0].tau0_true.is_none());
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(matches!(
            Dataset::read_csv("t,q1\n0,0\n".as_bytes()),
            Err(Error::MissingColumn("q2"))
        ));
        let nonuniform = "t,q1,q2,q3,qd1,qd2,qd3,tau1,tau2,tau3\n0,0,0,0,0,0,0,0,0,0\n0.1,0,0,0,0,0,0,0,0,0\n0.3,0,0,0,0,0,0,0,0,0\n";
        assert!(Dataset::read_csv(nonuniform.as_bytes()).is_err());
        let partial = "t,q1,q2,q3,qd1,qd2,qd3,tau1,tau2,tau3,fx,fy,fz\n0,0,0,0,0,0,0,0,0,0,1,,\n";
        assert!(Dataset::read_csv(partial.as_bytes()).is_err());
    }

    #[test]
    fn sweep_table() {
        let thetas: Vec<f64> = (0..=18).map(|i| f64::to_radians(5.0 * i as f64)).collect();
        let ds = [0.0, 0.02, 0.04];
        let rows = force_angle_sweep(900.0, &thetas, &ds).unwrap();
        assert_eq!(rows.len(), thetas.len() * ds.len());
        assert!(rows.iter().filter(|r| r.d == 0.0).all(|r| r.force == 0.0));
        for d in ds {
            let row: Vec<_> = rows.iter().filter(|r| r.d == d).collect();
            assert!(row.windows(2).all(|w| w[1].force >= w[0].force));
        }
        let at = |d: f64| force_angle_sweep(900.0, &[FRAC_PI_4], &[d]).unwrap()[0].force;
        assert_abs_diff_eq!(at(0.020), 12.728, epsilon = 1e-3);
        assert_abs_diff_eq!(at(0.040), 25.456, epsilon = 1e-3);
        assert!(force_angle_sweep(900.0, &[], &ds).is_err());
    }
}
