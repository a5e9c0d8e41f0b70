use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::features::{extract_into, FeatureConfig};
use crate::sim::{freespace_torque_truth, Dataset, JointSample, RigConfig};

/// Predicts free-space joint torques from a window of recent samples
/// (oldest first, current sample last).
pub trait TorquePredictor: Sync {
    fn window(&self) -> usize;
    fn predict_tau0(&self, window: &[JointSample]) -> Result<Vector3<f64>>;
}

pub const DEFAULT_LAMBDA_GRID: [f64; 6] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: Option<u64>,
}

/// Ridge-regressed linear map from features to the three joint torques.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeSpaceModel {
    pub features: FeatureConfig,
    pub lambdas: [f64; 3],
    pub weights: [Vec<f64>; 3],
    pub meta: TrainingMeta,
}

impl FreeSpaceModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.features.validate()?;
        if model.weights.iter().any(|w| w.len() != model.features.len()) {
            return Err(Error::Invalid(format!(
                "model weights must have {} entries per joint",
                model.features.len()
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn apply(&self, x: &[f64]) -> Vector3<f64> {
        Vector3::from_fn(|j, _| self.weights[j].iter().zip(x).map(|(w, f)| w * f).sum())
    }
}

impl TorquePredictor for FreeSpaceModel {
    fn window(&self) -> usize {
        self.features.window
    }

    fn predict_tau0(&self, window: &[JointSample]) -> Result<Vector3<f64>> {
        let mut x = Vec::with_capacity(self.features.len());
        extract_into(window, &self.features, &mut x)?;
        Ok(self.apply(&x))
    }
}

/// The simulator's own free-space torque law, as an exact predictor.
#[derive(Debug, Clone)]
pub struct TruthTau0 {
    pub rig: RigConfig,
}

impl TorquePredictor for TruthTau0 {
    fn window(&self) -> usize {
        1
    }

    fn predict_tau0(&self, window: &[JointSample]) -> Result<Vector3<f64>> {
        let s = window.last().ok_or(Error::WindowTooShort { got: 0, need: 1 })?;
        Ok(freespace_torque_truth(&s.q, &s.qdot, &self.rig))
    }
}

/// Reads the recorded `tau0` debug channel of each sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct RecordedTau0;

impl TorquePredictor for RecordedTau0 {
    fn window(&self) -> usize {
        1
    }

    fn predict_tau0(&self, window: &[JointSample]) -> Result<Vector3<f64>> {
        let s = window.last().ok_or(Error::WindowTooShort { got: 0, need: 1 })?;
        s.tau0_true.ok_or(Error::MissingColumn("tau01"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub features: FeatureConfig,
    /// Train/validation/test fractions, applied chronologically.
    pub split: [f64; 3],
    pub lambda_grid: Vec<f64>,
    pub seed: Option<u64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            split: [0.7, 0.2, 0.1],
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub split: [f64; 3],
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub lambdas: [f64; 3],
    pub rmse_train: [f64; 3],
    pub rmse_val: [f64; 3],
    pub rmse_test: [f64; 3],
}

/// Fits one ridge regressor per joint on the chronological training split,
/// picking each joint's lambda by validation RMSE.
pub fn train_freespace(dataset: &Dataset, opts: &TrainOptions) -> Result<(FreeSpaceModel, TrainReport)> {
    opts.features.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(index) = dataset
        .samples
        .iter()
        .position(|s| s.f_true.is_some_and(|f| f != Vector3::zeros()))
    {
        return Err(Error::NotFreeSpace { index });
    }
    let split_sum: f64 = opts.split.iter().sum();
    if opts.split.iter().any(|f| !(*f >= 0.0)) || (split_sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions {:?} must sum to 1",
            opts.split
        )));
    }
    if opts.lambda_grid.is_empty() || opts.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::Config(
            "lambda grid must be nonempty and nonnegative".into(),
        ));
    }

    let w = opts.features.window;
    let p = opts.features.len();
    let rows = dataset.len().saturating_sub(w - 1);
    let n_train = (opts.split[0] * rows as f64).floor() as usize;
    let n_val = (opts.split[1] * rows as f64).floor() as usize;
    let n_test = rows - n_train - n_val;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::Invalid(format!(
            "dataset too small to split: {rows} usable rows"
        )));
    }

    let mut x = DMatrix::<f64>::zeros(rows, p);
    let mut y = DMatrix::<f64>::zeros(rows, 3);
    let mut buf = Vec::with_capacity(p);
    for r in 0..rows {
        let end = r + w;
        extract_into(&dataset.samples[..end], &opts.features, &mut buf)?;
        x.row_mut(r).copy_from_slice(&buf);
        let tau = dataset.samples[end - 1].tau;
        for j in 0..3 {
            y[(r, j)] = tau[j];
        }
    }

    let x_train = x.rows(0, n_train);
    let gram = x_train.transpose() * x_train;
    let xty = x_train.transpose() * y.rows(0, n_train);

    let mut weights: [Vec<f64>; 3] = Default::default();
    let mut lambdas = [0.0; 3];
    for j in 0..3 {
        let rhs = xty.column(j).into_owned();
        let mut best: Option<(f64, f64, DVector<f64>)> = None;
        for &lambda in &opts.lambda_grid {
            let wj = ridge_solve(&gram, &rhs, lambda)?;
            let val = rmse(&x.rows(n_train, n_val), &y.column(j).rows(n_train, n_val), &wj);
            if best.as_ref().is_none_or(|(_, b, _)| val < *b) {
                best = Some((lambda, val, wj));
            }
        }
        let (lambda, _, wj) = best.expect("nonempty lambda grid");
        lambdas[j] = lambda;
        weights[j] = wj.iter().copied().collect();
    }

    let model = FreeSpaceModel {
        features: opts.features,
        lambdas,
        weights,
        meta: TrainingMeta {
            n_train,
            n_val,
            n_test,
            seed: opts.seed,
        },
    };

    let split_rmse = |start: usize, len: usize| -> [f64; 3] {
        std::array::from_fn(|j| {
            let wj = DVector::from_column_slice(&model.weights[j]);
            rmse(&x.rows(start, len), &y.column(j).rows(start, len), &wj)
        })
    };
    let report = TrainReport {
        split: opts.split,
        n_train,
        n_val,
        n_test,
        lambdas,
        rmse_train: split_rmse(0, n_train),
        rmse_val: split_rmse(n_train, n_val),
        rmse_test: split_rmse(n_train + n_val, n_test),
    };
    Ok((model, report))
}

fn ridge_solve(gram: &DMatrix<f64>, rhs: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let n = gram.nrows();
    let a = gram + DMatrix::<f64>::identity(n, n) * lambda;
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(rhs));
    }
    // lambda = 0 on rank-deficient features; fall back to least-norm
    a.svd(true, true)
        .solve(rhs, 1e-12)
        .map_err(|e| Error::Invalid(format!("ridge solve failed: {e}")))
}

fn rmse<S1, S2>(
    x: &nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::Dyn, S1>,
    y: &nalgebra::Matrix<f64, nalgebra::Dyn, nalgebra::U1, S2>,
    w: &DVector<f64>,
) -> f64
where
    S1: nalgebra::storage::Storage<f64, nalgebra::Dyn, nalgebra::Dyn>,
    S2: nalgebra::storage::Storage<f64, nalgebra::Dyn, nalgebra::U1>,
{
    let n = x.nrows();
    if n == 0 {
        return 0.0;
    }
    let resid = x * w - y;
    (resid.norm_squared() / n as f64).sqrt()
}
