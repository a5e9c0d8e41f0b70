//! Command-line front end. Flags take millimeters and degrees; everything is
//! converted to SI before it reaches the library.

mod commands;
mod run_config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::KvMap;
use crate::sim::{PivotLaw, TrajectoryKind};

pub use commands::{run, Outcome};
pub use run_config::{Paths, PivotInput, RunConfig, SEED_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "rcm-align",
    version,
    about = "Remote-center-of-motion misalignment estimation"
)]
pub struct Cli {
    /// Key = value config file. Flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed. Overrides RCM_ALIGN_SEED and the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a joint-state dataset.
    Simulate(SimulateArgs),
    /// Fit the free-space torque model on a force-free dataset.
    Train(TrainArgs),
    /// Estimate incision forces at a given misalignment.
    EstimateForce(EstimateForceArgs),
    /// Calibrate tissue stiffness from pivot datasets.
    CalibrateK(CalibrateArgs),
    /// Estimate the misalignment distance at a fixed stiffness.
    EstimateD(EstimateDArgs),
    /// Tabulate spring force against pivot angle and distance.
    Sweep(SweepArgs),
    /// Cross-check the D solver against a grid search.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `pivot` or `teleop`.
    #[arg(long)]
    pub kind: Option<TrajectoryKind>,
    /// `cone` (constant pivot angle) or `planar`.
    #[arg(long)]
    pub pivot_law: Option<PivotLaw>,
    #[arg(long)]
    pub theta_star_deg: Option<f64>,
    /// Pivot angular rate (rad/s).
    #[arg(long)]
    pub omega: Option<f64>,
    /// Seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Hz.
    #[arg(long)]
    pub sample_rate: Option<f64>,
    #[arg(long)]
    pub q3_depth_mm: Option<f64>,
    #[arg(long)]
    pub amp_max_deg: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub d_true_mm: Option<f64>,
    /// N/m.
    #[arg(long)]
    pub k_true: Option<f64>,
    #[arg(long)]
    pub delta0_mm: Option<f64>,
    /// Zero the torque noise.
    #[arg(long)]
    pub noise_free: bool,
    /// Force-free run (k = 0), for training data.
    #[arg(long)]
    pub free_space: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Where to write the model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateForceArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Use the recorded free-space torque instead of a model.
    #[arg(long)]
    pub oracle_tau0: bool,
    /// Misalignment at which forces are evaluated.
    #[arg(long, allow_hyphen_values = true)]
    pub d_mm: Option<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// PATH:D_STAR_MM:THETA_STAR_DEG, repeatable.
    #[arg(long = "pivot", value_name = "SPEC")]
    pub pivots: Vec<String>,
    #[arg(long)]
    pub tolerance_mm: Option<f64>,
    #[arg(long)]
    pub k_min: Option<f64>,
    #[arg(long)]
    pub k_max: Option<f64>,
    #[arg(long)]
    pub k_step: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateDArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub oracle_tau0: bool,
    /// Fit against the recorded forces instead of estimated ones.
    #[arg(long)]
    pub use_true_forces: bool,
    #[arg(long)]
    pub k_hat: Option<f64>,
    /// Known distance, only used to report the error.
    #[arg(long, allow_hyphen_values = true)]
    pub d_star_mm: Option<f64>,
    /// N.
    #[arg(long)]
    pub f_min: Option<f64>,
    #[arg(long)]
    pub theta_min_deg: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub k_true: Option<f64>,
    /// Comma-separated pivot angles.
    #[arg(long, value_delimiter = ',')]
    pub theta_deg: Vec<f64>,
    /// Comma-separated distances.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub d_mm: Vec<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub oracle_tau0: bool,
    #[arg(long)]
    pub use_true_forces: bool,
    #[arg(long)]
    pub k_hat: Option<f64>,
    #[arg(long)]
    pub d_step_mm: Option<f64>,
    #[arg(long)]
    pub f_min: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Where to write the cost surface CSV.
    #[arg(long)]
    pub surface: Option<PathBuf>,
}

struct Overrides(KvMap);

impl Overrides {
    fn put<T: ToString>(&mut self, key: &str, v: Option<T>) {
        if let Some(v) = v {
            self.0.set(key, v);
        }
    }

    fn mm(&mut self, key: &str, v: Option<f64>) {
        self.put(key, v.map(|x| x * 1e-3));
    }

    fn path(&mut self, key: &str, v: &Option<PathBuf>) {
        self.put(key, v.as_ref().map(|p| p.display().to_string()));
    }

    fn flag(&mut self, key: &str, on: bool) {
        if on {
            self.0.set(key, true);
        }
    }
}

impl Cli {
    /// Flag values as config keys, in SI units.
    pub fn overrides(&self) -> crate::Result<KvMap> {
        let mut o = Overrides(KvMap::new());
        o.put("seed", self.seed);
        match &self.command {
            Command::Simulate(a) => {
                o.put("kind", a.kind);
                o.put("pivot_law", a.pivot_law);
                o.put("theta_star_deg", a.theta_star_deg);
                o.put("omega", a.omega);
                o.put("duration", a.duration);
                o.put("sample_rate", a.sample_rate);
                o.mm("q3_depth", a.q3_depth_mm);
                o.put("amp_max_deg", a.amp_max_deg);
                o.mm("d_true", a.d_true_mm);
                o.put("k_true", a.k_true);
                o.mm("radial_offset_delta0", a.delta0_mm);
                if a.noise_free {
                    o.0.set("torque_noise_sigma", "0, 0, 0");
                }
                if a.free_space {
                    o.0.set("k_true", 0);
                }
                o.path("out", &a.out);
                o.path("report", &a.report);
            }
            Command::Train(a) => {
                o.path("dataset", &a.dataset);
                o.path("model", &a.model);
                o.put("window", a.window);
                o.path("report", &a.report);
            }
            Command::EstimateForce(a) => {
                o.path("dataset", &a.dataset);
                o.path("model", &a.model);
                o.flag("oracle_tau0", a.oracle_tau0);
                o.mm("d_eval", a.d_mm);
                o.path("out", &a.out);
                o.path("report", &a.report);
            }
            Command::CalibrateK(a) => {
                if !a.pivots.is_empty() {
                    let specs = a
                        .pivots
                        .iter()
                        .map(|s| {
                            let p = PivotInput::parse(s, 1e-3)?;
                            let theta_deg = s.rsplit(':').next().unwrap_or_default().trim();
                            Ok(format!("{}:{}:{theta_deg}", p.path.display(), p.d_star))
                        })
                        .collect::<crate::Result<Vec<_>>>()?;
                    o.0.set("pivots", specs.join(", "));
                }
                o.mm("tolerance", a.tolerance_mm);
                o.put("k_min", a.k_min);
                o.put("k_max", a.k_max);
                o.put("k_step", a.k_step);
                o.path("report", &a.report);
            }
            Command::EstimateD(a) => {
                o.path("dataset", &a.dataset);
                o.path("model", &a.model);
                o.flag("oracle_tau0", a.oracle_tau0);
                o.flag("use_true_forces", a.use_true_forces);
                o.put("k_hat", a.k_hat);
                o.mm("d_star", a.d_star_mm);
                o.put("f_min", a.f_min);
                o.put("theta_min_deg", a.theta_min_deg);
                o.path("report", &a.report);
            }
            Command::Sweep(a) => {
                o.put("k_true", a.k_true);
                let list = |v: &[f64], scale: f64| {
                    v.iter()
                        .map(|x| (x * scale).to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                if !a.theta_deg.is_empty() {
                    o.0.set("sweep_theta_deg", list(&a.theta_deg, 1.0));
                }
                if !a.d_mm.is_empty() {
                    o.0.set("sweep_d", list(&a.d_mm, 1e-3));
                }
                o.path("out", &a.out);
                o.path("report", &a.report);
            }
            Command::Verify(a) => {
                o.path("dataset", &a.dataset);
                o.path("model", &a.model);
                o.flag("oracle_tau0", a.oracle_tau0);
                o.flag("use_true_forces", a.use_true_forces);
                o.put("k_hat", a.k_hat);
                o.mm("d_step", a.d_step_mm);
                o.put("f_min", a.f_min);
                o.path("report", &a.report);
                o.path("surface", &a.surface);
            }
        }
        Ok(o.0)
    }
}
