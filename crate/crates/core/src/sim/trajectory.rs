use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::KvMap;
use crate::error::{Error, Result};
use crate::kinematics::JointConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Pivot,
    Teleop,
}

/// How the pivot sweep maps `(theta*, omega t)` to joint angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PivotLaw {
    /// Shaft sweeps a cone of half-angle theta* about the plumb line, so the
    /// pivot angle is exactly theta* at every sample.
    #[default]
    Cone,
    /// `q1 = theta* cos(wt)`, `q2 = theta* sin(wt)`. Holds the pivot angle only
    /// to first order in theta*.
    Planar,
}

macro_rules! str_enum {
    ($ty:ty { $($name:literal => $variant:expr),* $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)*
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"),
                        other
                    ))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = match self { $(v if *v == $variant => $name,)* _ => unreachable!() };
                f.write_str(s)
            }
        }
    };
}

str_enum!(TrajectoryKind { "pivot" => TrajectoryKind::Pivot, "teleop" => TrajectoryKind::Teleop });
str_enum!(PivotLaw { "cone" => PivotLaw::Cone, "planar" => PivotLaw::Planar });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub pivot_law: PivotLaw,
    /// Pivot half-angle (rad).
    pub theta_star: f64,
    /// Sweep rate (rad/s).
    pub omega: f64,
    /// Duration (s).
    pub duration: f64,
    /// Sample rate (Hz).
    pub sample_rate: f64,
    /// Nominal insertion depth (m).
    pub q3_depth: f64,
    pub seed: u64,
    /// Teleop bound on |q1|, |q2| (rad).
    pub amp_max: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Teleop,
            pivot_law: PivotLaw::Cone,
            theta_star: 15f64.to_radians(),
            omega: 0.5,
            duration: 60.0,
            sample_rate: 200.0,
            q3_depth: 0.10,
            seed: 0,
            amp_max: 0.6,
        }
    }
}

/// Insertion amplitude of teleop motion about `q3_depth` (m).
pub const TELEOP_Q3_AMPLITUDE: f64 = 0.01;

impl TrajectorySpec {
    pub fn pivot(theta_star: f64, duration: f64) -> Self {
        Self {
            kind: TrajectoryKind::Pivot,
            theta_star,
            duration,
            ..Self::default()
        }
    }

    pub fn teleop(seed: u64, duration: f64) -> Self {
        Self {
            kind: TrajectoryKind::Teleop,
            seed,
            duration,
            ..Self::default()
        }
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration = {} must be > 0", self.duration)));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::Config(format!(
                "sample_rate = {} must be > 0",
                self.sample_rate
            )));
        }
        if self.sample_count() == 0 {
            return Err(Error::Config("trajectory has no samples".into()));
        }
        match self.kind {
            TrajectoryKind::Pivot => {
                if !(self.theta_star > 0.0 && self.theta_star < FRAC_PI_2) {
                    return Err(Error::Config(format!(
                        "theta_star = {} rad outside (0, pi/2)",
                        self.theta_star
                    )));
                }
                if !self.omega.is_finite() {
                    return Err(Error::Config("omega must be finite".into()));
                }
            }
            TrajectoryKind::Teleop => {
                if !(self.amp_max >= 0.0 && self.amp_max <= FRAC_PI_2) {
                    return Err(Error::Config(format!(
                        "amp_max = {} rad outside [0, pi/2]",
                        self.amp_max
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn apply_kv(&mut self, kv: &mut KvMap) -> Result<()> {
        if let Some(v) = kv.take("kind")? {
            self.kind = v;
        }
        if let Some(v) = kv.take("pivot_law")? {
            self.pivot_law = v;
        }
        if let Some(v) = kv.take_angle("theta_star")? {
            self.theta_star = v;
        }
        if let Some(v) = kv.take("omega")? {
            self.omega = v;
        }
        if let Some(v) = kv.take("duration")? {
            self.duration = v;
        }
        if let Some(v) = kv.take("sample_rate")? {
            self.sample_rate = v;
        }
        if let Some(v) = kv.take("q3_depth")? {
            self.q3_depth = v;
        }
        if let Some(v) = kv.take("traj_seed")? {
            self.seed = v;
        }
        if let Some(v) = kv.take_angle("amp_max")? {
            self.amp_max = v;
        }
        Ok(())
    }

    pub fn from_kv(kv: &mut KvMap) -> Result<Self> {
        let mut spec = Self::default();
        spec.apply_kv(kv)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.set("kind", self.kind);
        kv.set("pivot_law", self.pivot_law);
        kv.set("theta_star", self.theta_star);
        kv.set("omega", self.omega);
        kv.set("duration", self.duration);
        kv.set("sample_rate", self.sample_rate);
        kv.set("q3_depth", self.q3_depth);
        kv.set("traj_seed", self.seed);
        kv.set("amp_max", self.amp_max);
        kv
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub q: JointConfig,
    pub qdot: Vector3<f64>,
}

fn sample_times(spec: &TrajectorySpec) -> impl Iterator<Item = f64> + '_ {
    (0..spec.sample_count()).map(move |i| i as f64 / spec.sample_rate)
}

pub fn gen_pivot_trajectory(spec: &TrajectorySpec) -> Result<Vec<TrajectoryPoint>> {
    if spec.kind != TrajectoryKind::Pivot {
        return Err(Error::Config(
            "pivot trajectory requested for a teleop spec".into(),
        ));
    }
    spec.validate()?;
    Ok(sample_times(spec).map(|t| pivot_state(spec, t)).collect())
}

fn pivot_state(spec: &TrajectorySpec, t: f64) -> TrajectoryPoint {
    let th = spec.theta_star;
    let w = spec.omega;
    let (sp, cp) = (w * t).sin_cos();
    let (q, qdot) = match spec.pivot_law {
        PivotLaw::Planar => (
            JointConfig {
                q1: th * cp,
                q2: th * sp,
                q3: spec.q3_depth,
            },
            Vector3::new(-th * w * sp, th * w * cp, 0.0),
        ),
        PivotLaw::Cone => {
            // shaft direction (s cos wt, s sin wt, c) in the plumb-line frame
            let (s, c) = th.sin_cos();
            let q1 = (s * cp).atan2(c);
            let q2 = (s * sp).asin();
            let denom = 1.0 - s * s * sp * sp;
            let q1dot = -c * s * w * sp / denom;
            let q2dot = s * w * cp / denom.sqrt();
            (
                JointConfig {
                    q1,
                    q2,
                    q3: spec.q3_depth,
                },
                Vector3::new(q1dot, q2dot, 0.0),
            )
        }
    };
    TrajectoryPoint { t, q, qdot }
}

#[derive(Debug, Clone, Copy)]
struct Harmonic {
    amplitude: f64,
    omega: f64,
    phase: f64,
}

fn draw_harmonics(rng: &mut ChaCha8Rng, amp: f64) -> [Harmonic; 3] {
    let mut h = [Harmonic {
        amplitude: 0.0,
        omega: 0.0,
        phase: 0.0,
    }; 3];
    for item in &mut h {
        item.omega = TAU * rng.gen_range(0.1..=0.8);
        item.phase = rng.gen_range(0.0..TAU);
        item.amplitude = rng.gen_range(0.2..=1.0);
    }
    let total: f64 = h.iter().map(|x| x.amplitude).sum();
    for item in &mut h {
        item.amplitude *= amp / total;
    }
    h
}

fn eval_harmonics(h: &[Harmonic; 3], t: f64) -> (f64, f64) {
    h.iter().fold((0.0, 0.0), |(p, v), x| {
        let (s, c) = (x.omega * t + x.phase).sin_cos();
        (p + x.amplitude * s, v + x.amplitude * x.omega * c)
    })
}

/// Seeded stand-in for teleoperated motion: each joint is a sum of three
/// sinusoids with random frequency in [0.1, 0.8] Hz and random phase.
pub fn gen_teleop_trajectory(spec: &TrajectorySpec) -> Result<Vec<TrajectoryPoint>> {
    if spec.kind != TrajectoryKind::Teleop {
        return Err(Error::Config(
            "teleop trajectory requested for a pivot spec".into(),
        ));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let h1 = draw_harmonics(&mut rng, spec.amp_max);
    let h2 = draw_harmonics(&mut rng, spec.amp_max);
    let h3 = draw_harmonics(&mut rng, TELEOP_Q3_AMPLITUDE);
    let points = sample_times(spec)
        .map(|t| {
            let (q1, v1) = eval_harmonics(&h1, t);
            let (q2, v2) = eval_harmonics(&h2, t);
            let (q3, v3) = eval_harmonics(&h3, t);
            TrajectoryPoint {
                t,
                q: JointConfig {
                    q1,
                    q2,
                    q3: spec.q3_depth + q3,
                },
                qdot: Vector3::new(v1, v2, v3),
            }
        })
        .collect();
    Ok(points)
}

pub fn gen_trajectory(spec: &TrajectorySpec) -> Result<Vec<TrajectoryPoint>> {
    match spec.kind {
        TrajectoryKind::Pivot => gen_pivot_trajectory(spec),
        TrajectoryKind::Teleop => gen_teleop_trajectory(spec),
    }
}
