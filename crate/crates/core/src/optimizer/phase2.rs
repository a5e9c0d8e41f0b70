//! Misalignment distance estimation at a fixed stiffness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::D_GUARD;
use crate::optimizer::lsq::{solve_bounded_lsq, Bounds, LsqOptions, Termination};
use crate::optimizer::residual::{prepare_samples, stacked, total_cost, ForceSource, PreparedSample};
use crate::sim::{Dataset, D_MAX, D_MIN};

#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Config {
    pub k_hat: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Minimum incision force magnitude for a sample to enter the cost (N).
    pub f_min: f64,
    /// Minimum pivot angle for a sample to enter the cost (rad).
    pub theta_min: f64,
    pub min_samples: usize,
    /// Candidate D at which the force filter is evaluated. `None` uses the
    /// largest |D| inside the bounds, which gives the smallest lateral force.
    pub filter_d: Option<f64>,
    pub starts: Vec<f64>,
    pub lsq: LsqOptions,
}

pub const DEFAULT_STARTS: [f64; 8] = [-0.005, 0.005, -0.015, 0.015, -0.025, 0.025, 0.035, 0.045];

impl Default for Phase2Config {
    fn default() -> Self {
        Self {
            k_hat: 900.0,
            d_min: D_MIN,
            d_max: D_MAX,
            f_min: 2.0,
            theta_min: 5f64.to_radians(),
            min_samples: 100,
            filter_d: None,
            starts: DEFAULT_STARTS.to_vec(),
            lsq: LsqOptions::default(),
        }
    }
}

impl Phase2Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min < self.d_max) {
            return Err(Error::Config("d_min must be < d_max".into()));
        }
        if !(self.k_hat.is_finite()) {
            return Err(Error::Config("k_hat must be finite".into()));
        }
        if self.branches().is_empty() {
            return Err(Error::Config(format!(
                "D bounds [{}, {}] leave no room outside |D| < {D_GUARD}",
                self.d_min, self.d_max
            )));
        }
        Ok(())
    }

    /// Feasible sub-boxes with `|D| >= D_GUARD`.
    pub fn branches(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        if self.d_min <= -D_GUARD {
            out.push((self.d_min, self.d_max.min(-D_GUARD)));
        }
        if self.d_max >= D_GUARD {
            out.push((self.d_min.max(D_GUARD), self.d_max));
        }
        out
    }

    fn filter_distance(&self) -> f64 {
        self.filter_d.unwrap_or_else(|| {
            if self.d_max.abs() >= self.d_min.abs() {
                self.d_max
            } else {
                self.d_min
            }
        })
    }
}

/// Drops samples carrying too little force or deflection to inform D.
pub fn filter_samples(samples: &[PreparedSample], cfg: &Phase2Config) -> Result<Vec<PreparedSample>> {
    let d_ref = cfg.filter_distance();
    let mut kept = Vec::with_capacity(samples.len());
    for s in samples {
        if s.theta < cfg.theta_min {
            continue;
        }
        if s.force_at(d_ref)?.norm() < cfg.f_min {
            continue;
        }
        kept.push(*s);
    }
    Ok(kept)
}

pub fn phase2_cost(samples: &[PreparedSample], k: f64, d: f64) -> Result<f64> {
    total_cost(samples, |s| s.residual(k, d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub init: f64,
    pub d: f64,
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase2Result {
    pub k_hat: f64,
    pub d_hat: f64,
    pub cost: f64,
    pub iterations: usize,
    pub samples_used: usize,
    pub samples_rejected: usize,
    /// `| |D*| - |D_hat| |` when the true distance is known.
    pub e_abs: Option<f64>,
    pub starts: Vec<StartOutcome>,
}

/// Multi-start bounded least squares over D on pre-filtered samples.
pub fn optimize_d_on(
    samples: &[PreparedSample],
    cfg: &Phase2Config,
) -> Result<(f64, f64, usize, Vec<StartOutcome>)> {
    let branches = cfg.branches();
    let mut outcomes = Vec::new();
    for &init in &cfg.starts {
        let Some(&(lo, hi)) = branches.iter().find(|(lo, hi)| *lo <= init && init <= *hi) else {
            continue;
        };
        let sol = solve_bounded_lsq(
            |x| stacked(samples, |s| s.residual(cfg.k_hat, x[0])),
            &Bounds::scalar(lo, hi)?,
            &[init],
            &cfg.lsq,
        )?;
        outcomes.push(StartOutcome {
            init,
            d: sol.x[0],
            cost: sol.cost,
            iterations: sol.iterations,
            termination: sol.termination,
        });
    }
    let best = outcomes
        .iter()
        .fold(None::<&StartOutcome>, |best, o| match best {
            Some(b) if b.cost <= o.cost => Some(b),
            _ => Some(o),
        })
        .ok_or_else(|| Error::Config("no multi-start point lies inside the D bounds".into()))?;
    Ok((best.d, best.cost, best.iterations, outcomes.clone()))
}

pub fn phase2_optimize_d(
    dataset: &Dataset,
    source: ForceSource<'_>,
    cfg: &Phase2Config,
    d_star: Option<f64>,
) -> Result<Phase2Result> {
    cfg.validate()?;
    let all = prepare_samples(dataset, source)?;
    let kept = filter_samples(&all, cfg)?;
    if kept.len() < cfg.min_samples {
        return Err(Error::InsufficientExcitation {
            used: kept.len(),
            required: cfg.min_samples,
        });
    }
    let (d_hat, cost, iterations, starts) = optimize_d_on(&kept, cfg)?;
    Ok(Phase2Result {
        k_hat: cfg.k_hat,
        d_hat,
        cost,
        iterations,
        samples_used: kept.len(),
        samples_rejected: dataset.len() - kept.len(),
        e_abs: d_star.map(|d| (d.abs() - d_hat.abs()).abs()),
        starts,
    })
}
