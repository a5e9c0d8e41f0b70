//! Exhaustive grid evaluation of the misalignment cost, used to cross-check
//! the local solver.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::phase2::{filter_samples, optimize_d_on, phase2_cost, Phase2Config};
use crate::optimizer::residual::{prepare_samples, ForceSource};
use crate::sim::Dataset;

pub const DEFAULT_D_STEP: f64 = 0.0005;
pub const DEFAULT_K_STEP: f64 = 10.0;

/// Inclusive grid `lo, lo + step, ...` up to `hi`.
pub fn grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(lo <= hi) {
        return Err(Error::Invalid(format!("bad grid [{lo}, {hi}] step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub k: f64,
    pub d: f64,
    /// `inf` where the cost is undefined (singular Jacobian).
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub k: f64,
    pub d: f64,
    pub cost: f64,
    pub surface: Vec<SurfacePoint>,
}

impl OracleResult {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "D", "cost"])?;
        for p in &self.surface {
            w.write_record([p.k.to_string(), p.d.to_string(), p.cost.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Evaluates `cost(k, d)` at every grid node, k-major. Nodes where the cost
/// fails with a singular Jacobian are recorded as `inf`; other errors abort.
pub fn grid_oracle<F>(cost: F, k_grid: &[f64], d_grid: &[f64]) -> Result<OracleResult>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if k_grid.is_empty() || d_grid.is_empty() {
        return Err(Error::Invalid("oracle grids must be nonempty".into()));
    }
    let nodes: Vec<(f64, f64)> = k_grid
        .iter()
        .flat_map(|&k| d_grid.iter().map(move |&d| (k, d)))
        .collect();
    let surface = nodes
        .into_par_iter()
        .map(|(k, d)| match cost(k, d) {
            Ok(c) => Ok(SurfacePoint { k, d, cost: c }),
            Err(Error::Singular { .. }) => Ok(SurfacePoint {
                k,
                d,
                cost: f64::INFINITY,
            }),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let best = surface
        .iter()
        .fold(None::<&SurfacePoint>, |best, p| match best {
            Some(b) if b.cost <= p.cost => Some(b),
            _ => Some(p),
        })
        .copied()
        .expect("nonempty grid");
    Ok(OracleResult {
        k: best.k,
        d: best.d,
        cost: best.cost,
        surface,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub k_hat: f64,
    pub solver_d: f64,
    pub solver_cost: f64,
    pub oracle_d: f64,
    pub oracle_cost: f64,
    pub d_step: f64,
    pub surface_rows: usize,
    pub samples_used: usize,
    pub agree: bool,
}

/// Runs the phase-2 solver and a D-grid oracle on the same filtered samples.
pub fn verify_phase2(
    dataset: &Dataset,
    source: ForceSource<'_>,
    cfg: &Phase2Config,
    d_step: f64,
) -> Result<(VerifyReport, OracleResult)> {
    cfg.validate()?;
    let all = prepare_samples(dataset, source)?;
    let kept = filter_samples(&all, cfg)?;
    if kept.len() < cfg.min_samples {
        return Err(Error::InsufficientExcitation {
            used: kept.len(),
            required: cfg.min_samples,
        });
    }
    let (solver_d, solver_cost, _, _) = optimize_d_on(&kept, cfg)?;
    let d_grid = grid(cfg.d_min, cfg.d_max, d_step)?;
    let oracle = grid_oracle(|k, d| phase2_cost(&kept, k, d), &[cfg.k_hat], &d_grid)?;
    let report = VerifyReport {
        k_hat: cfg.k_hat,
        solver_d,
        solver_cost,
        oracle_d: oracle.d,
        oracle_cost: oracle.cost,
        d_step,
        surface_rows: oracle.surface.len(),
        samples_used: kept.len(),
        agree: (solver_d - oracle.d).abs() <= d_step * (1.0 + 1e-9),
    };
    Ok((report, oracle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::TruthTau0;
    use crate::sim::{synthesize_dataset, RigConfig, TrajectorySpec};

    #[test]
    fn grid_nodes() {
        let g = grid(-0.020, 0.050, 0.0005).unwrap();
        assert_eq!(g.len(), 141);
        assert_eq!(g[0], -0.020);
        assert!((g[140] - 0.050).abs() < 1e-15);
        assert!(grid(1.0, 0.0, 0.1).is_err());
        assert!(grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn surface_shape_and_argmin() {
        let ks = [1.0, 2.0, 3.0];
        let ds = [-1.0, 0.0, 0.5, 2.0];
        let r = grid_oracle(|k, d| Ok((k - 2.0).powi(2) + (d - 0.5).powi(2)), &ks, &ds).unwrap();
        assert_eq!(r.surface.len(), ks.len() * ds.len());
        assert_eq!((r.k, r.d, r.cost), (2.0, 0.5, 0.0));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 13);
    }

    #[test]
    fn singular_nodes_are_infinite() {
        let rig = RigConfig::default().noise_free();
        let ds = synthesize_dataset(&TrajectorySpec::teleop(1, 10.0), &rig).unwrap();
        let truth = TruthTau0 { rig: rig.clone() };
        let samples = prepare_samples(&ds, ForceSource::Estimated(&truth)).unwrap();
        let r = grid_oracle(|k, d| phase2_cost(&samples, k, d), &[900.0], &[0.0, 0.03]).unwrap();
        assert!(r.surface[0].cost.is_infinite());
        assert_eq!(r.d, 0.03);
        assert!(r.cost <= 1e-12);
    }

    #[test]
    fn truth_is_surface_minimum_and_solver_agrees() {
        let rig = RigConfig {
            d_true: 0.040,
            ..RigConfig::default()
        }
        .noise_free();
        let ds = synthesize_dataset(&TrajectorySpec::teleop(2, 20.0), &rig).unwrap();
        let truth = TruthTau0 { rig: rig.clone() };
        let (report, oracle) = verify_phase2(
            &ds,
            ForceSource::Estimated(&truth),
            &Phase2Config::default(),
            DEFAULT_D_STEP,
        )
        .unwrap();
        assert!(report.agree, "{report:?}");
        assert!((oracle.d - 0.040).abs() < 1e-12);
        assert_eq!(report.surface_rows, 141);
    }
}
