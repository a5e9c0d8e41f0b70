use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::{Cli, Command, RunConfig};
use crate::config::KvMap;
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_force_series, train_freespace, FreeSpaceModel, RecordedTau0, TorquePredictor, TrainOptions,
};
use crate::optimizer::{
    fuse_k, phase1_sweep, phase2_optimize_d, verify_phase2, ForceSource, PivotConfiguration,
};
use crate::sim::{
    force_angle_sweep, synthesize_dataset, write_sweep_csv, Dataset, RigConfig, TrajectorySpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The command ran but its check did not hold (empty stiffness
    /// intersection, solver/oracle disagreement).
    CheckFailed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::CheckFailed => 1,
        }
    }
}

/// Resolves the configuration and runs the selected command. A JSON report
/// goes to the report path, or stdout, including on failure.
pub fn run(cli: &Cli, env_seed: Option<&str>) -> Result<Outcome> {
    let overrides = cli.overrides()?;
    let flag_report = overrides.get("report").map(PathBuf::from);
    let cfg = match RunConfig::load(cli.config.as_deref(), env_seed, overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            emit(flag_report.as_deref(), &error_json(&e))?;
            return Err(e);
        }
    };
    let result = match &cli.command {
        Command::Simulate(_) => simulate(&cfg),
        Command::Train(_) => train(&cfg),
        Command::EstimateForce(_) => estimate_force(&cfg),
        Command::CalibrateK(_) => calibrate_k(&cfg),
        Command::EstimateD(_) => estimate_d(&cfg),
        Command::Sweep(_) => sweep(&cfg),
        Command::Verify(_) => verify(&cfg),
    };
    if let Err(e) = &result {
        if !stdout_taken(cli, &cfg) {
            emit(cfg.paths.report.as_deref(), &error_json(e))?;
        }
    }
    result
}

fn error_json(e: &Error) -> Value {
    json!({ "status": "error", "error": e.to_string() })
}

/// `sweep` without an output file prints its table on stdout.
fn stdout_taken(cli: &Cli, cfg: &RunConfig) -> bool {
    matches!(cli.command, Command::Sweep(_)) && cfg.paths.out.is_none() && cfg.paths.report.is_none()
}

/// Writes a JSON report to `path`, or to stdout when no path is set.
fn emit(path: Option<&Path>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => write_text(p, &text),
        None => {
            use std::io::Write as _;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".cfg");
    PathBuf::from(s)
}

/// Loads a dataset CSV and, if present, the generator settings written next
/// to it by `simulate`.
fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut ds = Dataset::load(path)?;
    let side = sidecar(path);
    if side.exists() {
        let mut kv = KvMap::load(&side)?;
        ds.rig = Some(RigConfig::from_kv(&mut kv)?);
        ds.traj = Some(TrajectorySpec::from_kv(&mut kv)?);
        kv.finish()?;
    }
    Ok(ds)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_report(cfg: &RunConfig, value: Value) -> Result<()> {
    emit(cfg.paths.report.as_deref(), &value)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(file))
}

fn require_out(cfg: &RunConfig) -> Result<&Path> {
    cfg.paths
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("an output path is required (`out` / --out)".into()))
}

fn predictor(cfg: &RunConfig) -> Result<Box<dyn TorquePredictor>> {
    if cfg.oracle_tau0 {
        Ok(Box::new(RecordedTau0))
    } else {
        Ok(Box::new(FreeSpaceModel::load(cfg.require_model()?)?))
    }
}

fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let out = require_out(cfg)?;
    let ds = synthesize_dataset(&cfg.traj, &cfg.rig)?;
    ds.save(out)?;
    let mut kv = cfg.rig.to_kv();
    kv.merge(cfg.traj.to_kv());
    write_text(&sidecar(out), &kv.to_text())?;
    eprintln!(
        "wrote {} samples ({} trajectory) to {}",
        ds.len(),
        cfg.traj.kind,
        out.display()
    );
    eprintln!("rig: {}", cfg.rig.summary());
    write_report(
        cfg,
        json!({ "status": "ok", "samples": ds.len(), "kind": cfg.traj.kind.to_string(), "rig": cfg.rig.summary() }),
    )?;
    Ok(Outcome::Success)
}

fn train(cfg: &RunConfig) -> Result<Outcome> {
    let ds = load_dataset(cfg.require_dataset()?)?;
    let opts = TrainOptions {
        features: cfg.features,
        seed: Some(cfg.seed),
        ..TrainOptions::default()
    };
    let (model, report) = train_freespace(&ds, &opts)?;
    let model_path = cfg.require_model()?;
    model.save(model_path)?;
    eprintln!(
        "trained on {} rows, lambdas {:?}, test RMSE {:?} N m",
        report.n_train, report.lambdas, report.rmse_test
    );
    eprintln!("model written to {}", model_path.display());
    write_report(cfg, json!({ "status": "ok", "training": report }))?;
    Ok(Outcome::Success)
}

fn estimate_force(cfg: &RunConfig) -> Result<Outcome> {
    let ds = load_dataset(cfg.require_dataset()?)?;
    let d = cfg
        .d_eval
        .ok_or_else(|| Error::Config("a misalignment is required (`d_eval` / --d-mm)".into()))?;
    let predictor = predictor(cfg)?;
    let series = estimate_force_series(predictor.as_ref(), &ds, d)?;
    if let Some(out) = &cfg.paths.out {
        series.write_csv(create(out)?)?;
    }
    match series.rmse {
        Some(r) => eprintln!(
            "{} estimates, RMSE (x, y, z) = ({}, {}, {}) N",
            series.t.len(),
            r[0],
            r[1],
            r[2]
        ),
        None => eprintln!("{} estimates", series.t.len()),
    }
    write_report(
        cfg,
        json!({ "status": "ok", "d": d, "samples": series.t.len(), "rmse": series.rmse }),
    )?;
    Ok(Outcome::Success)
}

fn calibrate_k(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.pivots.is_empty() {
        return Err(Error::Config(
            "at least one pivot dataset is required (`pivots` / --pivot)".into(),
        ));
    }
    let mut entries = Vec::new();
    let mut ranges = Vec::new();
    let mut failed = false;
    for p in &cfg.pivots {
        let config = PivotConfiguration {
            dataset: load_dataset(&p.path)?,
            d_star: p.d_star,
            theta_star: p.theta_star,
        };
        let base = json!({
            "dataset": p.path.display().to_string(),
            "d_star": p.d_star,
            "theta_star": p.theta_star,
        });
        let mut entry = base.as_object().cloned().unwrap_or_default();
        match phase1_sweep(&config, &cfg.phase1) {
            Ok(report) => {
                eprintln!(
                    "{}: k in [{}, {}] N/m",
                    p.path.display(),
                    report.range.lower,
                    report.range.upper
                );
                ranges.push(report.range);
                entry.insert("range".into(), json!(report.range));
                entry.insert("samples_used".into(), json!(report.samples_used));
                entry.insert("sweep".into(), json!(report.sweep));
            }
            Err(e @ Error::EmptyAcceptance { .. }) => {
                eprintln!("{}: {e}", p.path.display());
                failed = true;
                if let Error::EmptyAcceptance { sweep, .. } = &e {
                    entry.insert("sweep".into(), json!(sweep));
                }
                entry.insert("range".into(), Value::Null);
                entry.insert("error".into(), json!(e.to_string()));
            }
            Err(e) => return Err(e),
        }
        entries.push(Value::Object(entry));
    }
    let mut report = json!({ "configurations": entries });
    if failed {
        report["status"] = json!("failed");
        write_report(cfg, report)?;
        return Ok(Outcome::CheckFailed);
    }
    match fuse_k(&ranges) {
        Ok(fused) => {
            eprintln!(
                "common range [{}, {}] N/m, k_hat = {} N/m",
                fused.common.lower, fused.common.upper, fused.k_hat
            );
            report["status"] = json!("ok");
            report["common"] = json!(fused.common);
            report["k_hat"] = json!(fused.k_hat);
            write_report(cfg, report)?;
            Ok(Outcome::Success)
        }
        Err(e @ Error::EmptyIntersection { .. }) => {
            eprintln!("{e}");
            report["status"] = json!("failed");
            report["error"] = json!(e.to_string());
            write_report(cfg, report)?;
            Ok(Outcome::CheckFailed)
        }
        Err(e) => Err(e),
    }
}

fn estimate_d(cfg: &RunConfig) -> Result<Outcome> {
    let ds = load_dataset(cfg.require_dataset()?)?;
    let predictor = if cfg.use_true_forces {
        None
    } else {
        Some(predictor(cfg)?)
    };
    let source = match &predictor {
        Some(p) => ForceSource::Estimated(p.as_ref()),
        None => ForceSource::GroundTruth,
    };
    let r = phase2_optimize_d(&ds, source, &cfg.phase2, cfg.d_star)?;
    eprint!(
        "D_hat = {} mm at k = {} N/m ({} samples used)",
        r.d_hat * 1e3,
        r.k_hat,
        r.samples_used
    );
    match r.e_abs {
        Some(e) => eprintln!(", |error| = {} mm", e * 1e3),
        None => eprintln!(),
    }
    write_report(cfg, json!({ "status": "ok", "result": r }))?;
    Ok(Outcome::Success)
}

fn sweep(cfg: &RunConfig) -> Result<Outcome> {
    let rows = force_angle_sweep(cfg.rig.k_true, &cfg.sweep_theta, &cfg.sweep_d)?;
    match &cfg.paths.out {
        Some(out) => write_sweep_csv(&rows, create(out)?)?,
        None => write_sweep_csv(&rows, std::io::stdout().lock())?,
    }
    if cfg.paths.out.is_some() || cfg.paths.report.is_some() {
        write_report(
            cfg,
            json!({ "status": "ok", "k": cfg.rig.k_true, "rows": rows.len() }),
        )?;
    }
    Ok(Outcome::Success)
}

fn verify(cfg: &RunConfig) -> Result<Outcome> {
    let ds = load_dataset(cfg.require_dataset()?)?;
    let predictor = if cfg.use_true_forces {
        None
    } else {
        Some(predictor(cfg)?)
    };
    let source = match &predictor {
        Some(p) => ForceSource::Estimated(p.as_ref()),
        None => ForceSource::GroundTruth,
    };
    let (report, oracle) = verify_phase2(&ds, source, &cfg.phase2, cfg.d_step)?;
    if let Some(path) = &cfg.paths.surface {
        oracle.write_csv(create(path)?)?;
    }
    eprintln!(
        "solver D = {} mm, grid D = {} mm, step {} mm: {}",
        report.solver_d * 1e3,
        report.oracle_d * 1e3,
        report.d_step * 1e3,
        if report.agree { "agree" } else { "DISAGREE" }
    );
    let status = if report.agree { "ok" } else { "failed" };
    write_report(cfg, json!({ "status": status, "verify": report }))?;
    Ok(if report.agree {
        Outcome::Success
    } else {
        Outcome::CheckFailed
    })
}
