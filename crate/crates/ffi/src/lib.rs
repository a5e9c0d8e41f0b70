//! C bindings for `rcm_align`.
//!
//! Every function returns an [`RcmStatus`]; results come back through out
//! pointers. On failure `rcm_last_error()` describes the problem. Datasets and
//! models are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use rcm_align::estimation::{estimate_force, FreeSpaceModel, RecordedTau0, TorquePredictor};
use rcm_align::kinematics::{dh_forward, incision_jacobian, pivot_angle, JointConfig};
use rcm_align::optimizer::{fuse_k, phase2_optimize_d, ForceSource, KRange, Phase2Config};
use rcm_align::sim::{synthesize_dataset, Dataset, RigConfig, TrajectorySpec};
use rcm_align::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Singular = 3,
    InsufficientExcitation = 4,
    EmptyAcceptance = 5,
    EmptyIntersection = 6,
    Io = 7,
    Parse = 8,
    NotFreeSpace = 9,
    Panic = 10,
}

/// Loaded joint-state dataset.
pub struct RcmDataset(Dataset);

/// Trained free-space torque model.
pub struct RcmModel(FreeSpaceModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RcmPhase2Result {
    pub d_hat: f64,
    pub cost: f64,
    pub samples_used: usize,
    pub samples_rejected: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RcmStiffness {
    pub lower: f64,
    pub upper: f64,
    pub k_hat: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RcmStatus {
    match e {
        Error::Singular { .. } => RcmStatus::Singular,
        Error::InsufficientExcitation { .. } => RcmStatus::InsufficientExcitation,
        Error::EmptyAcceptance { .. } => RcmStatus::EmptyAcceptance,
        Error::EmptyIntersection { .. } => RcmStatus::EmptyIntersection,
        Error::Io { .. } => RcmStatus::Io,
        Error::Csv(_) | Error::Json(_) | Error::MissingColumn(_) => RcmStatus::Parse,
        Error::NotFreeSpace { .. } => RcmStatus::NotFreeSpace,
        _ => RcmStatus::InvalidArgument,
    }
}

struct Fail(RcmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RcmStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, recording any error or panic for `rcm_last_error`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RcmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RcmStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RcmStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

fn joints(q1: f64, q2: f64, q3: f64) -> Result<JointConfig, Fail> {
    Ok(JointConfig::new(q1, q2, q3)?)
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rcm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rcm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Incision point for distance `d` (m). Writes 3 values to `out`.
///
/// # Safety
/// `out` must point to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rcm_dh_forward(q1: f64, q2: f64, q3: f64, d: f64, out: *mut f64) -> RcmStatus {
    guard(|| {
        let out = out_ref(out.cast::<[f64; 3]>(), "out")?;
        *out = dh_forward(&joints(q1, q2, q3)?, d).into();
        Ok(())
    })
}

/// Incision Jacobian, row-major, 9 values.
///
/// # Safety
/// `out` must point to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rcm_incision_jacobian(
    q1: f64,
    q2: f64,
    q3: f64,
    d: f64,
    out: *mut f64,
) -> RcmStatus {
    guard(|| {
        let out = out_ref(out.cast::<[f64; 9]>(), "out")?;
        let m = incision_jacobian(&joints(q1, q2, q3)?, d).m;
        for r in 0..3 {
            for c in 0..3 {
                out[3 * r + c] = m[(r, c)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn rcm_pivot_angle(q1: f64, q2: f64, out: *mut f64) -> RcmStatus {
    guard(|| {
        *out_ref(out, "out")? = pivot_angle(&joints(q1, q2, 0.0)?);
        Ok(())
    })
}

/// Loads a dataset CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rcm_dataset_load(path: *const c_char, out: *mut *mut RcmDataset) -> RcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let ds = Dataset::load(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(RcmDataset(ds)));
        Ok(())
    })
}

/// Synthesizes a teleoperation dataset with the default rig.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rcm_dataset_simulate_teleop(
    d_true: f64,
    k_true: f64,
    duration: f64,
    seed: u64,
    noise_free: bool,
    out: *mut *mut RcmDataset,
) -> RcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let mut rig = RigConfig {
            d_true,
            k_true,
            seed,
            ..RigConfig::default()
        };
        if noise_free {
            rig = rig.noise_free();
        }
        let ds = synthesize_dataset(&TrajectorySpec::teleop(seed, duration), &rig)?;
        *out = Box::into_raw(Box::new(RcmDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rcm_dataset_len(dataset: *const RcmDataset, out: *mut usize) -> RcmStatus {
    guard(|| {
        let ds = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        *out_ref(out, "out")? = ds.0.len();
        Ok(())
    })
}

/// Releases a dataset. Null is ignored.
///
/// # Safety
/// `dataset` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rcm_dataset_free(dataset: *mut RcmDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Loads a model JSON written by `rcm-align train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rcm_model_load(path: *const c_char, out: *mut *mut RcmModel) -> RcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let model = FreeSpaceModel::load(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(RcmModel(model)));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rcm_model_free(model: *mut RcmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn predictor<'a>(model: *const RcmModel) -> &'a dyn TorquePredictor {
    match model.as_ref() {
        Some(m) => &m.0,
        None => &RecordedTau0,
    }
}

/// Incision force at sample `index` for distance `d`. A null `model` uses
/// the recorded free-space torque columns.
///
/// # Safety
/// Handles must come from this library; `out` must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn rcm_estimate_force(
    model: *const RcmModel,
    dataset: *const RcmDataset,
    index: usize,
    d: f64,
    out: *mut f64,
) -> RcmStatus {
    guard(|| {
        let ds = &dataset.as_ref().ok_or_else(|| null("dataset"))?.0;
        let out = out_ref(out.cast::<[f64; 3]>(), "out")?;
        let p = predictor(model);
        let w = p.window().max(1);
        if index >= ds.len() || index + 1 < w {
            return Err(Fail(
                RcmStatus::InvalidArgument,
                format!("index {index} outside [{}, {})", w - 1, ds.len()),
            ));
        }
        *out = estimate_force(p, &ds.samples[index + 1 - w..=index], d)?.into();
        Ok(())
    })
}

/// Estimates the misalignment at stiffness `k_hat` with default bounds and
/// filters, except `f_min`. With `use_true_forces` the recorded forces are
/// fitted and `model` is ignored; otherwise a null `model` uses the recorded
/// free-space torque.
///
/// # Safety
/// Handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rcm_phase2_optimize_d(
    dataset: *const RcmDataset,
    model: *const RcmModel,
    use_true_forces: bool,
    k_hat: f64,
    f_min: f64,
    out: *mut RcmPhase2Result,
) -> RcmStatus {
    guard(|| {
        let ds = &dataset.as_ref().ok_or_else(|| null("dataset"))?.0;
        let out = out_ref(out, "out")?;
        let source = if use_true_forces {
            ForceSource::GroundTruth
        } else {
            ForceSource::Estimated(predictor(model))
        };
        let cfg = Phase2Config {
            k_hat,
            f_min,
            ..Phase2Config::default()
        };
        let r = phase2_optimize_d(ds, source, &cfg, None)?;
        *out = RcmPhase2Result {
            d_hat: r.d_hat,
            cost: r.cost,
            samples_used: r.samples_used,
            samples_rejected: r.samples_rejected,
        };
        Ok(())
    })
}

/// Intersects `n` stiffness ranges and takes the midpoint.
///
/// # Safety
/// `lower` and `upper` must point to `n` doubles each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rcm_fuse_k(
    lower: *const f64,
    upper: *const f64,
    n: usize,
    out: *mut RcmStiffness,
) -> RcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if n > 0 && (lower.is_null() || upper.is_null()) {
            return Err(null("lower/upper"));
        }
        let (lo, hi) = if n == 0 {
            (&[][..], &[][..])
        } else {
            (
                std::slice::from_raw_parts(lower, n),
                std::slice::from_raw_parts(upper, n),
            )
        };
        let ranges = lo
            .iter()
            .zip(hi)
            .map(|(&l, &u)| KRange::new(l, u))
            .collect::<Result<Vec<_>, _>>()?;
        let fused = fuse_k(&ranges)?;
        *out = RcmStiffness {
            lower: fused.common.lower,
            upper: fused.common.upper,
            k_hat: fused.k_hat,
        };
        Ok(())
    })
}
