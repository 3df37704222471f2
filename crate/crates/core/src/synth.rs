//! Synthetic ground truth and the evaluation protocols.
//!
//! Trajectories are sums of per-DOF sinusoidal profiles whose common angular
//! frequency is chosen so no DOF exceeds the velocity bound. Each generated
//! frame is rendered with the same rasterizer the tracker uses.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::body::{dof, BodyModel, JointPositions, PostureParams, NUM_DOF};
use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::io::TrajectoryRow;
use crate::mask::SilhouetteMask;
use crate::matching::render_posture;
use crate::rng::{derive_seed, stream};
use crate::tracker::{ResamplerKind, Tracker, TrackerConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum MotionKind {
    WaveHands,
    BendAside,
    BowForward,
    /// Piecewise-linear interpolation between (frame, posture) keys. Frames
    /// before the first key and after the last hold the nearest key.
    Keyframes(Vec<(usize, PostureParams)>),
}

impl std::str::FromStr for MotionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wave-hands" => Ok(MotionKind::WaveHands),
            "bend-aside" => Ok(MotionKind::BendAside),
            "bow-forward" => Ok(MotionKind::BowForward),
            other => Err(Error::Format(format!(
                "unknown motion {other:?}, expected wave-hands, bend-aside or bow-forward"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub kind: MotionKind,
    pub frames: usize,
    /// Upper bound on any rotational DOF's change per frame (rad).
    pub max_velocity: f64,
    /// Posture at frame 0 (sinusoidal motions only).
    pub start: PostureParams,
    /// Jitters the profile amplitudes.
    pub seed: u64,
}

impl TrajectorySpec {
    pub fn new(kind: MotionKind, frames: usize) -> Self {
        TrajectorySpec {
            kind,
            frames,
            max_velocity: 3f64.to_radians(),
            start: PostureParams::ZERO,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::InvalidParameter {
                name: "frames",
                value: 0.0,
            });
        }
        if !(self.max_velocity >= 0.0 && self.max_velocity.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "max_velocity",
                value: self.max_velocity,
            });
        }
        if let MotionKind::Keyframes(keys) = &self.kind {
            if keys.is_empty() || keys.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::Format("keyframes must be non-empty with increasing frames".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    /// (A/2)(1 − cos ωt): rises from 0 to A and back, peak velocity Aω/2.
    Raise,
    /// A sin ωt, peak velocity Aω.
    Swing,
}

struct Profile {
    dof: usize,
    amplitude: f64,
    shape: Shape,
    /// Frequency multiple of the common ω.
    harmonic: f64,
}

impl Profile {
    fn peak_velocity_per_omega(&self) -> f64 {
        let k = match self.shape {
            Shape::Raise => 0.5,
            Shape::Swing => 1.0,
        };
        self.amplitude.abs() * self.harmonic * k
    }

    fn value(&self, omega: f64, t: f64) -> f64 {
        let phase = self.harmonic * omega * t;
        match self.shape {
            Shape::Raise => 0.5 * self.amplitude * (1.0 - phase.cos()),
            Shape::Swing => self.amplitude * phase.sin(),
        }
    }
}

fn profiles(kind: &MotionKind) -> Vec<Profile> {
    let p = |dof, amplitude, shape, harmonic| Profile {
        dof,
        amplitude,
        shape,
        harmonic,
    };
    use Shape::*;
    match kind {
        MotionKind::WaveHands => vec![
            p(dof::L_SHOULDER_ABD, 1.2, Raise, 1.0),
            p(dof::R_SHOULDER_ABD, 1.2, Raise, 1.0),
            p(dof::L_SHOULDER_FLEX, 0.3, Swing, 1.0),
            p(dof::R_SHOULDER_FLEX, -0.3, Swing, 1.0),
            p(dof::L_ELBOW_ABD, 0.6, Swing, 2.0),
            p(dof::R_ELBOW_ABD, 0.6, Swing, 2.0),
        ],
        MotionKind::BendAside => vec![
            p(dof::TORSO_ROLL, 0.5, Swing, 1.0),
            p(dof::L_SHOULDER_ABD, 0.3, Raise, 1.0),
            p(dof::R_SHOULDER_ABD, 0.3, Raise, 1.0),
        ],
        MotionKind::BowForward => vec![
            p(dof::TORSO_PITCH, 0.6, Raise, 1.0),
            p(dof::L_SHOULDER_FLEX, 0.5, Raise, 1.0),
            p(dof::R_SHOULDER_FLEX, 0.5, Raise, 1.0),
        ],
        MotionKind::Keyframes(_) => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub postures: Vec<PostureParams>,
    /// Some generated value fell outside the joint limits and was clamped.
    pub clamped: bool,
}

fn interpolate(keys: &[(usize, PostureParams)], frame: usize) -> PostureParams {
    let after = keys.partition_point(|(f, _)| *f <= frame);
    if after == 0 {
        return keys[0].1;
    }
    if after == keys.len() {
        return keys[keys.len() - 1].1;
    }
    let (f0, p0) = keys[after - 1];
    let (f1, p1) = keys[after];
    let s = (frame - f0) as f64 / (f1 - f0) as f64;
    let mut out = p0;
    for i in 0..NUM_DOF {
        out.0[i] = p0.0[i] + s * (p1.0[i] - p0.0[i]);
    }
    out
}

pub fn generate_trajectory(spec: &TrajectorySpec, model: &BodyModel) -> Result<Trajectory> {
    spec.validate()?;
    let raw: Vec<PostureParams> = match &spec.kind {
        MotionKind::Keyframes(keys) => (0..spec.frames).map(|f| interpolate(keys, f)).collect(),
        kind => {
            let mut rng = stream(spec.seed, &[0x5ed]);
            let mut profs = profiles(kind);
            for p in &mut profs {
                p.amplitude *= rng.random_range(0.75..=1.0);
            }
            let omega = profs
                .iter()
                .map(|p| spec.max_velocity / p.peak_velocity_per_omega())
                .fold(PI, f64::min);
            (0..spec.frames)
                .map(|f| {
                    let mut posture = spec.start;
                    for p in &profs {
                        posture.0[p.dof] += p.value(omega, f as f64);
                    }
                    posture
                })
                .collect()
        }
    };
    let limits = model.limits();
    let mut clamped = false;
    let postures = raw
        .iter()
        .map(|p| {
            if p.0.iter().any(|v| !v.is_finite()) {
                return Err(limits.check(p).unwrap_err());
            }
            let c = limits.clamp_posture(p);
            clamped |= c != *p;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    Ok(Trajectory { postures, clamped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub postures: Vec<PostureParams>,
    pub masks: Vec<SilhouetteMask>,
    pub clamped: bool,
}

/// Ground-truth postures and their rendered silhouettes.
pub fn generate_sequence(spec: &TrajectorySpec, model: &BodyModel, cam: &CameraModel) -> Result<SyntheticSequence> {
    let traj = generate_trajectory(spec, model)?;
    let masks = traj
        .postures
        .par_iter()
        .map(|p| render_posture(model, p, cam))
        .collect::<Result<_>>()?;
    Ok(SyntheticSequence {
        postures: traj.postures,
        masks,
        clamped: traj.clamped,
    })
}

/// Per-joint mean Euclidean distance (cm) over frames, in
/// [`JointPositions::NAMES`] order.
pub fn eval_3d_error(estimated: &[JointPositions], truth: &[JointPositions]) -> Result<[f64; 7]> {
    if estimated.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: estimated.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidParameter {
            name: "frame count",
            value: 0.0,
        });
    }
    let mut sum = [0.0; 7];
    for (e, t) in estimated.iter().zip(truth) {
        for (k, (a, b)) in e.as_array().iter().zip(t.as_array()).enumerate() {
            sum[k] += (a - b).norm();
        }
    }
    Ok(sum.map(|s| s / truth.len() as f64))
}

/// Statistics across repeated runs of the same experiment. Standard
/// deviations are population values (divide by R).
#[derive(Debug, Clone, PartialEq)]
pub struct RunStatistics {
    pub runs: usize,
    pub cost_mean: Vec<f64>,
    pub cost_std: Vec<f64>,
    pub dof_mean: Vec<[f64; NUM_DOF]>,
    pub dof_std: Vec<[f64; NUM_DOF]>,
    /// Per-joint 3D error averaged over frames and runs, when ground truth is known.
    pub joint_error: Option<[f64; 7]>,
}

impl RunStatistics {
    pub fn frames(&self) -> usize {
        self.cost_mean.len()
    }

    pub fn mean_cost(&self) -> f64 {
        self.cost_mean.iter().sum::<f64>() / self.frames() as f64
    }

    /// Per-DOF standard deviation averaged over frames and DOF.
    pub fn mean_dof_std(&self) -> f64 {
        let total: f64 = self.dof_std.iter().flat_map(|s| s.iter()).sum();
        total / (self.frames() * NUM_DOF) as f64
    }
}

/// Population mean and standard deviation, accumulated relative to the first
/// value so identical inputs give exactly zero spread.
fn mean_std(mut values: impl Iterator<Item = f64>) -> (f64, f64) {
    let first = values.next().expect("at least one value");
    let (mut n, mut sum, mut sq) = (1.0, 0.0, 0.0);
    for v in values {
        let d = v - first;
        n += 1.0;
        sum += d;
        sq += d * d;
    }
    let shift = sum / n;
    (first + shift, (sq / n - shift * shift).max(0.0).sqrt())
}

pub fn reproducibility(runs: &[Vec<TrajectoryRow>]) -> Result<RunStatistics> {
    if runs.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "R",
            value: runs.len() as f64,
        });
    }
    let frames = runs[0].len();
    if let Some(bad) = runs.iter().find(|r| r.len() != frames) {
        return Err(Error::LengthMismatch {
            expected: frames,
            actual: bad.len(),
        });
    }
    let mut stats = RunStatistics {
        runs: runs.len(),
        cost_mean: Vec::with_capacity(frames),
        cost_std: Vec::with_capacity(frames),
        dof_mean: Vec::with_capacity(frames),
        dof_std: Vec::with_capacity(frames),
        joint_error: None,
    };
    for f in 0..frames {
        let (m, s) = mean_std(runs.iter().map(|r| r[f].cost.0 as f64));
        stats.cost_mean.push(m);
        stats.cost_std.push(s);
        let mut means = [0.0; NUM_DOF];
        let mut stds = [0.0; NUM_DOF];
        for d in 0..NUM_DOF {
            (means[d], stds[d]) = mean_std(runs.iter().map(|r| r[f].posture.0[d]));
        }
        stats.dof_mean.push(means);
        stats.dof_std.push(stds);
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub drs: RunStatistics,
    pub srs: RunStatistics,
}

impl Comparison {
    pub fn get(&self, kind: ResamplerKind) -> &RunStatistics {
        match kind {
            ResamplerKind::Drs => &self.drs,
            ResamplerKind::Srs => &self.srs,
        }
    }

    /// Fraction of frames where the DRS mean cost is not above the SRS one.
    pub fn drs_not_worse_fraction(&self) -> f64 {
        let n = self.drs.frames();
        let ok = (0..n).filter(|&f| self.drs.cost_mean[f] <= self.srs.cost_mean[f]).count();
        ok as f64 / n as f64
    }

    /// Long-format rows for [`crate::io::format_stats`].
    pub fn stats_rows(&self) -> Vec<(Option<usize>, String, f64)> {
        let mut rows = Vec::new();
        for kind in [ResamplerKind::Drs, ResamplerKind::Srs] {
            let s = self.get(kind);
            let name = kind.name();
            for f in 0..s.frames() {
                rows.push((Some(f), format!("{name}_cost_mean"), s.cost_mean[f]));
                rows.push((Some(f), format!("{name}_cost_std"), s.cost_std[f]));
                for d in 0..NUM_DOF {
                    rows.push((Some(f), format!("{name}_d{}_mean", d + 1), s.dof_mean[f][d]));
                    rows.push((Some(f), format!("{name}_d{}_std", d + 1), s.dof_std[f][d]));
                }
            }
            rows.push((None, format!("{name}_runs"), s.runs as f64));
            rows.push((None, format!("{name}_mean_cost"), s.mean_cost()));
            rows.push((None, format!("{name}_mean_dof_std"), s.mean_dof_std()));
            if let Some(err) = s.joint_error {
                for (k, e) in err.iter().enumerate() {
                    rows.push((None, format!("{name}_{}_error_cm", JointPositions::NAMES[k]), *e));
                }
            }
        }
        rows.push((None, "drs_not_worse_fraction".into(), self.drs_not_worse_fraction()));
        rows
    }
}

/// Tracks `masks` `runs` times with each resampler, every run with its own
/// seed derived from `config.seed`. Runs execute concurrently. With ground
/// truth postures the per-joint 3D error is filled in as well.
pub fn compare_resamplers(
    model: &BodyModel,
    cam: &CameraModel,
    config: &TrackerConfig,
    d_ref: &PostureParams,
    masks: &[SilhouetteMask],
    truth: Option<&[PostureParams]>,
    runs: usize,
) -> Result<Comparison> {
    let run_kind = |kind: ResamplerKind| -> Result<RunStatistics> {
        let trajectories: Vec<Vec<TrajectoryRow>> = (0..runs)
            .into_par_iter()
            .map(|r| {
                let cfg = TrackerConfig {
                    resampler: kind,
                    seed: derive_seed(config.seed, &[r as u64]),
                    ..config.clone()
                };
                Tracker::new(model.clone(), *cam, cfg)?.track_sequence(d_ref, masks)
            })
            .collect::<Result<_>>()?;
        let mut stats = reproducibility(&trajectories)?;
        if let Some(truth) = truth {
            let gt = truth.iter().map(|p| model.joint_positions(p)).collect::<Result<Vec<_>>>()?;
            let mut sum = [0.0; 7];
            for t in &trajectories {
                let est = t
                    .iter()
                    .map(|row| model.joint_positions(&row.posture))
                    .collect::<Result<Vec<_>>>()?;
                let e = eval_3d_error(&est, &gt)?;
                for k in 0..7 {
                    sum[k] += e[k];
                }
            }
            stats.joint_error = Some(sum.map(|s| s / runs as f64));
        }
        Ok(stats)
    };
    let (drs, srs) = rayon::join(|| run_kind(ResamplerKind::Drs), || run_kind(ResamplerKind::Srs));
    Ok(Comparison { drs: drs?, srs: srs? })
}
