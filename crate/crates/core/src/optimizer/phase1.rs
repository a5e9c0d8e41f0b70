//! Stiffness calibration on controlled pivoting data.
//!
//! For each pivot configuration `(D*, theta*)` a grid of candidate stiffness
//! values is swept. At every fixed `k` the distance `D` is fitted to the
//! ground-truth incision forces; `k` is admissible when the fit lands within
//! `e` of the measured `D*`. The admissible ranges of all configurations are
//! then intersected and the midpoint becomes the working stiffness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::pivot_angle;
use crate::optimizer::lsq::{solve_bounded_lsq, Bounds, LsqOptions};
use crate::optimizer::residual::{residual_phase1, stacked};
use crate::sim::{Dataset, TrajectoryKind, D_MAX, D_MIN};

/// Allowed spread of the measured pivot angle around the declared theta*
/// before a dataset is refused as non-pivot (rad).
pub const PIVOT_ANGLE_TOLERANCE: f64 = 0.035;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KRange {
    pub lower: f64,
    pub upper: f64,
}

impl KRange {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::Invalid(format!(
                "empty stiffness range [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, k: f64) -> bool {
        self.lower <= k && k <= self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Config {
    pub k_min: f64,
    pub k_max: f64,
    pub k_step: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Acceptable |D - D*| (m).
    pub tolerance: f64,
    /// Samples with |f*| at or below this are dropped (N).
    pub f_floor: f64,
    pub lsq: LsqOptions,
}

impl Default for Phase1Config {
    fn default() -> Self {
        Self {
            k_min: 100.0,
            k_max: 3000.0,
            k_step: 10.0,
            d_min: D_MIN,
            d_max: D_MAX,
            tolerance: 0.002,
            f_floor: 1e-6,
            lsq: LsqOptions::default(),
        }
    }
}

impl Phase1Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_min < self.k_max) {
            return Err(Error::Config(format!(
                "k_min {} must be < k_max {}",
                self.k_min, self.k_max
            )));
        }
        if !(self.k_step > 0.0) {
            return Err(Error::Config("k_step must be > 0".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be > 0".into()));
        }
        if !(self.d_min < self.d_max) {
            return Err(Error::Config("d_min must be < d_max".into()));
        }
        Ok(())
    }

    pub fn k_grid(&self) -> Vec<f64> {
        let n = ((self.k_max - self.k_min) / self.k_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.k_min + i as f64 * self.k_step).collect()
    }
}

/// A pivot dataset together with its measured misalignment and pivot angle.
#[derive(Debug, Clone)]
pub struct PivotConfiguration {
    pub dataset: Dataset,
    pub d_star: f64,
    pub theta_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: f64,
    pub d_hat: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRangeReport {
    pub d_star: f64,
    pub theta_star: f64,
    pub range: KRange,
    pub samples_used: usize,
    pub sweep: Vec<SweepPoint>,
}

fn check_pivot(dataset: &Dataset, theta_star: f64) -> Result<()> {
    if let Some(traj) = &dataset.traj {
        if traj.kind != TrajectoryKind::Pivot {
            return Err(Error::Invalid("phase 1 needs a pivot dataset".into()));
        }
    }
    if let Some(worst) = dataset
        .samples
        .iter()
        .map(|s| (pivot_angle(&s.q) - theta_star).abs())
        .max_by(f64::total_cmp)
    {
        if worst > PIVOT_ANGLE_TOLERANCE {
            return Err(Error::Invalid(format!(
                "not a pivot dataset for theta* = {theta_star} rad (pivot angle deviates by {worst} rad)"
            )));
        }
    }
    Ok(())
}

/// Fits D at fixed `k` against the ground-truth forces.
fn fit_d(
    forces: &[nalgebra::Vector3<f64>],
    k: f64,
    d_star: f64,
    theta_star: f64,
    cfg: &Phase1Config,
) -> Result<f64> {
    let bounds = Bounds::scalar(cfg.d_min, cfg.d_max)?;
    let init = d_star.clamp(cfg.d_min, cfg.d_max);
    let sol = solve_bounded_lsq(
        |x| stacked(forces, |f| Ok(residual_phase1(k, x[0], f, theta_star))),
        &bounds,
        &[init],
        &cfg.lsq,
    )?;
    Ok(sol.x[0])
}

/// Admissible stiffness range of one pivot configuration, with the sweep.
pub fn phase1_sweep(config: &PivotConfiguration, cfg: &Phase1Config) -> Result<KRangeReport> {
    cfg.validate()?;
    let PivotConfiguration {
        dataset,
        d_star,
        theta_star,
    } = config;
    check_pivot(dataset, *theta_star)?;
    let forces = dataset
        .samples
        .iter()
        .map(|s| s.f_true.ok_or(Error::MissingColumn("fx")))
        .filter(|f| f.as_ref().map_or(true, |f| f.norm() > cfg.f_floor))
        .collect::<Result<Vec<_>>>()?;
    if forces.is_empty() {
        return Err(Error::InsufficientExcitation { used: 0, required: 1 });
    }
    let sweep = cfg
        .k_grid()
        .into_par_iter()
        .map(|k| {
            let d_hat = fit_d(&forces, k, *d_star, *theta_star, cfg)?;
            Ok(SweepPoint {
                k,
                d_hat,
                accepted: (d_hat - d_star).abs() <= cfg.tolerance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut accepted = sweep.iter().filter(|p| p.accepted).map(|p| p.k);
    let Some(first) = accepted.next() else {
        return Err(Error::EmptyAcceptance {
            d_star: *d_star,
            tolerance: cfg.tolerance,
            tried: sweep.len(),
            sweep: sweep.iter().map(|p| (p.k, p.d_hat)).collect(),
        });
    };
    let last = accepted.next_back().unwrap_or(first);
    Ok(KRangeReport {
        d_star: *d_star,
        theta_star: *theta_star,
        range: KRange::new(first, last)?,
        samples_used: forces.len(),
        sweep,
    })
}

pub fn phase1_k_range(config: &PivotConfiguration, cfg: &Phase1Config) -> Result<KRange> {
    phase1_sweep(config, cfg).map(|r| r.range)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase1Result {
    pub ranges: Vec<KRange>,
    pub common: KRange,
    pub k_hat: f64,
}

/// Intersects the per-configuration ranges and takes the midpoint.
pub fn fuse_k(ranges: &[KRange]) -> Result<Phase1Result> {
    if ranges.is_empty() {
        return Err(Error::Invalid("no stiffness ranges to fuse".into()));
    }
    let lower = ranges.iter().map(|r| r.lower).fold(f64::NEG_INFINITY, f64::max);
    let upper = ranges.iter().map(|r| r.upper).fold(f64::INFINITY, f64::min);
    if lower > upper {
        return Err(Error::EmptyIntersection {
            ranges: ranges.to_vec(),
        });
    }
    let common = KRange { lower, upper };
    Ok(Phase1Result {
        ranges: ranges.to_vec(),
        common,
        k_hat: common.midpoint(),
    })
}
