use std::path::{Path, PathBuf};

use crate::config::KvMap;
use crate::error::{Error, Result};
use crate::estimation::FeatureConfig;
use crate::optimizer::{Phase1Config, Phase2Config, DEFAULT_D_STEP};
use crate::sim::{RigConfig, TrajectorySpec};

pub const SEED_ENV: &str = "RCM_ALIGN_SEED";

/// A pivot dataset with its declared `D*` (m) and `theta*` (rad).
#[derive(Debug, Clone, PartialEq)]
pub struct PivotInput {
    pub path: PathBuf,
    pub d_star: f64,
    pub theta_star: f64,
}

impl PivotInput {
    /// Parses `path:d_star:theta_star_deg`, scaling `d_star` by `d_scale` to
    /// reach meters.
    pub fn parse(spec: &str, d_scale: f64) -> Result<Self> {
        let mut parts = spec.rsplitn(3, ':');
        let (theta, d, path) = match (parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(d), Some(p)) if !p.is_empty() => (t, d, p),
            _ => {
                return Err(Error::Config(format!(
                    "pivot `{spec}` must look like PATH:D_STAR:THETA_STAR_DEG"
                )))
            }
        };
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse `{s}` in pivot `{spec}`")))
        };
        Ok(Self {
            path: PathBuf::from(path.trim()),
            d_star: num(d)? * d_scale,
            theta_star: num(theta)?.to_radians(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub surface: Option<PathBuf>,
}

/// Everything a command needs, resolved from defaults, a config file, the
/// seed environment variable and command-line flags (in increasing priority).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub rig: RigConfig,
    pub traj: TrajectorySpec,
    pub paths: Paths,
    pub pivots: Vec<PivotInput>,
    pub features: FeatureConfig,
    pub d_eval: Option<f64>,
    pub d_star: Option<f64>,
    pub oracle_tau0: bool,
    pub use_true_forces: bool,
    pub phase1: Phase1Config,
    pub phase2: Phase2Config,
    pub d_step: f64,
    pub sweep_theta: Vec<f64>,
    pub sweep_d: Vec<f64>,
}

impl RunConfig {
    /// Builds a config from a merged key map. Unknown keys are an error.
    pub fn from_kv(mut kv: KvMap) -> Result<Self> {
        let seed = kv.take::<u64>("seed")?.unwrap_or(0);

        let mut rig = RigConfig {
            seed,
            ..RigConfig::default()
        };
        rig.apply_kv(&mut kv)?;
        rig.validate()?;
        let mut traj = TrajectorySpec {
            seed,
            ..TrajectorySpec::default()
        };
        traj.apply_kv(&mut kv)?;
        traj.validate()?;

        let path = |kv: &mut KvMap, key: &str| kv.take::<String>(key).map(|v| v.map(PathBuf::from));
        let paths = Paths {
            dataset: path(&mut kv, "dataset")?,
            model: path(&mut kv, "model")?,
            out: path(&mut kv, "out")?,
            report: path(&mut kv, "report")?,
            surface: path(&mut kv, "surface")?,
        };
        let pivots = kv
            .take_list::<String>("pivots")?
            .unwrap_or_default()
            .iter()
            .map(|s| PivotInput::parse(s, 1.0))
            .collect::<Result<Vec<_>>>()?;

        let mut features = FeatureConfig::default();
        if let Some(w) = kv.take("window")? {
            features.window = w;
        }
        if let Some(v) = kv.take("velocity_scale")? {
            features.velocity_scale = v;
        }
        features.validate()?;

        let d_eval = kv.take("d_eval")?;
        let d_star = kv.take("d_star")?;
        let oracle_tau0 = kv.take("oracle_tau0")?.unwrap_or(false);
        let use_true_forces = kv.take("use_true_forces")?.unwrap_or(false);

        let mut phase1 = Phase1Config::default();
        let mut phase2 = Phase2Config::default();
        if let Some(v) = kv.take("k_min")? {
            phase1.k_min = v;
        }
        if let Some(v) = kv.take("k_max")? {
            phase1.k_max = v;
        }
        if let Some(v) = kv.take("k_step")? {
            phase1.k_step = v;
        }
        if let Some(v) = kv.take("tolerance")? {
            phase1.tolerance = v;
        }
        if let Some(v) = kv.take("k_hat")? {
            phase2.k_hat = v;
        }
        match kv.take("f_min")? {
            Some(v) => phase2.f_min = v,
            // a force sensor needs no small-force rejection
            None if use_true_forces => phase2.f_min = 0.0,
            None => {}
        }
        if let Some(v) = kv.take_angle("theta_min")? {
            phase2.theta_min = v;
        }
        if let Some(v) = kv.take::<f64>("d_min")? {
            phase1.d_min = v;
            phase2.d_min = v;
        }
        if let Some(v) = kv.take::<f64>("d_max")? {
            phase1.d_max = v;
            phase2.d_max = v;
        }
        phase1.validate()?;
        phase2.validate()?;
        let d_step = kv.take("d_step")?.unwrap_or(DEFAULT_D_STEP);
        if !(d_step > 0.0) {
            return Err(Error::Config("d_step must be > 0".into()));
        }

        let sweep_theta = match (
            kv.take_list::<f64>("sweep_theta")?,
            kv.take_list::<f64>("sweep_theta_deg")?,
        ) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "both `sweep_theta` and `sweep_theta_deg` given".into(),
                ))
            }
            (Some(r), None) => r,
            (None, Some(d)) => d.into_iter().map(f64::to_radians).collect(),
            (None, None) => (0..=18).map(|i| f64::to_radians(5.0 * i as f64)).collect(),
        };
        let sweep_d = kv
            .take_list("sweep_d")?
            .unwrap_or_else(|| vec![0.0, 0.010, 0.020, 0.030, 0.040, 0.050]);

        kv.finish()?;
        let cfg = Self {
            seed,
            rig,
            traj,
            paths,
            pivots,
            features,
            d_eval,
            d_star,
            oracle_tau0,
            use_true_forces,
            phase1,
            phase2,
            d_step,
            sweep_theta,
            sweep_d,
        };
        cfg.check_inputs_exist()?;
        Ok(cfg)
    }

    /// Layers: `file` < `RCM_ALIGN_SEED` < `overrides`.
    pub fn load(file: Option<&Path>, env_seed: Option<&str>, overrides: KvMap) -> Result<Self> {
        let mut kv = match file {
            Some(p) => KvMap::load(p)?,
            None => KvMap::new(),
        };
        if let Some(s) = env_seed {
            let seed: u64 = s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} = `{s}` is not an integer")))?;
            kv.set("seed", seed);
        }
        kv.merge(overrides);
        Self::from_kv(kv)
    }

    fn check_inputs_exist(&self) -> Result<()> {
        let inputs = self
            .paths
            .dataset
            .iter()
            .chain(self.pivots.iter().map(|p| &p.path));
        for p in inputs {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "input path {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn require_dataset(&self) -> Result<&Path> {
        self.paths
            .dataset
            .as_deref()
            .ok_or_else(|| Error::Config("a dataset path is required (`dataset` / --dataset)".into()))
    }

    pub fn require_model(&self) -> Result<&Path> {
        self.paths
            .model
            .as_deref()
            .ok_or_else(|| Error::Config("a model path is required (`model` / --model)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::from_kv(KvMap::new()).unwrap();
        assert_eq!(cfg.rig, RigConfig::default());
        assert_eq!(cfg.phase2.f_min, 2.0);
        assert_eq!(cfg.sweep_theta.len(), 19);
    }

    #[test]
    fn precedence_file_env_cli() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        std::fs::write(&file, "seed = 3\nk_true = 700\nd_true = 0.02\n").unwrap();
        let cfg = RunConfig::load(Some(&file), None, KvMap::new()).unwrap();
        assert_eq!(
            (cfg.seed, cfg.rig.k_true, cfg.rig.seed, cfg.traj.seed),
            (3, 700.0, 3, 3)
        );
        let cfg = RunConfig::load(Some(&file), Some("8"), KvMap::new()).unwrap();
        assert_eq!(cfg.seed, 8);
        let mut cli = KvMap::new();
        cli.set("seed", 11);
        cli.set("k_true", 650);
        let cfg = RunConfig::load(Some(&file), Some("8"), cli).unwrap();
        assert_eq!((cfg.seed, cfg.rig.k_true, cfg.rig.d_true), (11, 650.0, 0.02));
    }

    #[test]
    fn unknown_key_and_missing_input() {
        let kv = KvMap::parse("k_ture = 1").unwrap();
        assert!(RunConfig::from_kv(kv).is_err());
        let kv = KvMap::parse("dataset = /definitely/not/here.csv").unwrap();
        let err = RunConfig::from_kv(kv).unwrap_err().to_string();
        assert!(err.contains("does not exist"), "{err}");
    }

    #[test]
    fn true_forces_relax_force_filter() {
        let kv = KvMap::parse("use_true_forces = true").unwrap();
        assert_eq!(RunConfig::from_kv(kv).unwrap().phase2.f_min, 0.0);
        let kv = KvMap::parse("use_true_forces = true\nf_min = 1.5").unwrap();
        assert_eq!(RunConfig::from_kv(kv).unwrap().phase2.f_min, 1.5);
    }

    #[test]
    fn pivot_specs() {
        let p = PivotInput::parse("data/a:b.csv:15:30", 1e-3).unwrap();
        assert_eq!(p.path, PathBuf::from("data/a:b.csv"));
        assert!((p.d_star - 0.015).abs() < 1e-15);
        assert!((p.theta_star - 30f64.to_radians()).abs() < 1e-15);
        assert!(PivotInput::parse("a.csv:15", 1e-3).is_err());
        assert!(PivotInput::parse("a.csv:x:15", 1e-3).is_err());
    }
}
