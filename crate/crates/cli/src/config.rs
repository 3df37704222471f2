//! Flat `key = value` run configuration.
//!
//! Keys carry a section prefix (`camera.fx`, `tracker.torso.N`, ...). Blank
//! lines and `#` comments are ignored. Unknown keys are rejected, and every
//! value error names its key.

use std::collections::BTreeMap;
use std::path::Path;

use cardbox::body::{JointLimits, NUM_SIZES};
use cardbox::io::{parse_posture, parse_values};
use cardbox::synth::MotionKind;
use cardbox::tracker::{default_reference_postures, InitConfig, ReferenceView, Stage};
use cardbox::vision::DEFAULT_SIGMA_FLOOR;
use cardbox::{CameraModel, CameraPose, PostureParams, SizeParams, TrackerConfig};

use crate::CliError;

const CAMERA_KEYS: [&str; 12] = [
    "camera.fx",
    "camera.fy",
    "camera.cx",
    "camera.cy",
    "camera.width",
    "camera.height",
    "camera.yaw",
    "camera.pitch",
    "camera.roll",
    "camera.x",
    "camera.y",
    "camera.z",
];

const OTHER_KEYS: [&str; 22] = [
    "seed",
    "body.fixed_x",
    "body.fixed_z",
    "body.sizes",
    "tracker.resampler",
    "tracker.cycles_per_frame",
    "tracker.d_ref",
    "init.M",
    "init.sigma_alpha",
    "init.max_iterations",
    "init.min_relative_improvement",
    "init.patience",
    "init.min_size",
    "init.ref1",
    "init.ref2",
    "init.ref3",
    "synth.motion",
    "synth.frames",
    "synth.max_velocity_deg",
    "synth.start",
    "segment.sigma_floor",
    "compare.runs",
];

const STAGE_FIELDS: [&str; 5] = ["N", "e", "sigma_beta_rot", "sigma_beta_trans", "sigma_gamma"];

fn stage_prefix(stage: Stage) -> &'static str {
    match stage {
        Stage::Torso => "tracker.torso",
        Stage::LeftArm => "tracker.left_arm",
        Stage::RightArm => "tracker.right_arm",
    }
}

/// Fields a stage block must define once any of its keys is present. The
/// arm stages have no translational DOF.
fn required_stage_fields(stage: Stage) -> &'static [&'static str] {
    match stage {
        Stage::Torso => &STAGE_FIELDS,
        _ => &["N", "e", "sigma_beta_rot", "sigma_gamma"],
    }
}

fn is_known(key: &str) -> bool {
    CAMERA_KEYS.contains(&key)
        || OTHER_KEYS.contains(&key)
        || Stage::ALL.iter().any(|&s| {
            key.strip_prefix(stage_prefix(s))
                .and_then(|rest| rest.strip_prefix('.'))
                .is_some_and(|f| STAGE_FIELDS.contains(&f))
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSettings {
    pub m: usize,
    pub sigma_alpha: f64,
    pub max_iterations: usize,
    pub min_relative_improvement: f64,
    pub patience: usize,
    pub min_size: f64,
    pub reference_postures: [PostureParams; 3],
}

impl InitSettings {
    pub fn to_config(&self, references: Vec<ReferenceView>, seed: u64) -> InitConfig {
        InitConfig {
            m: self.m,
            sigma_alpha: self.sigma_alpha,
            references,
            max_iterations: self.max_iterations,
            min_relative_improvement: self.min_relative_improvement,
            patience: self.patience,
            min_size: self.min_size,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub motion: MotionKind,
    pub frames: usize,
    /// rad/frame
    pub max_velocity: f64,
    pub start: PostureParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub camera: CameraModel,
    pub fixed_x: f64,
    pub fixed_z: f64,
    pub sizes: SizeParams,
    pub tracker: TrackerConfig,
    pub d_ref: PostureParams,
    pub init: InitSettings,
    pub synth: SynthSettings,
    pub sigma_floor: f64,
    pub runs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            camera: CameraModel::default(),
            fixed_x: -250.0,
            fixed_z: -45.0,
            sizes: SizeParams::default(),
            tracker: TrackerConfig::default(),
            d_ref: PostureParams::ZERO,
            init: InitSettings {
                m: 50,
                sigma_alpha: 5.0,
                max_iterations: 50,
                min_relative_improvement: 0.005,
                patience: 3,
                min_size: 1.0,
                reference_postures: default_reference_postures(),
            },
            synth: SynthSettings {
                motion: MotionKind::WaveHands,
                frames: 30,
                max_velocity: 3f64.to_radians(),
                start: PostureParams::ZERO,
            },
            sigma_floor: DEFAULT_SIGMA_FLOOR,
            runs: 20,
        }
    }
}

struct Entries(BTreeMap<String, String>);

impl Entries {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !is_known(key) {
                return Err(CliError::Config(format!("line {}: unknown config key {key:?}", n + 1)));
            }
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate config key {key:?}", n + 1)));
            }
        }
        Ok(Entries(map))
    }

    fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.0
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Config(format!("invalid value {v:?} for config key {key}")))
            })
            .transpose()
    }

    fn set<T: std::str::FromStr>(&self, key: &str, slot: &mut T) -> Result<(), CliError> {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn posture(&self, key: &str, slot: &mut PostureParams) -> Result<(), CliError> {
        if let Some(v) = self.0.get(key) {
            *slot = parse_posture(v).map_err(|e| CliError::Config(format!("config key {key}: {e}")))?;
        }
        Ok(())
    }
}

fn check(key: &str, ok: bool) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("config key {key} is out of range")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let e = Entries::parse(text)?;
        let mut cfg = RunConfig::default();
        e.set("seed", &mut cfg.seed)?;

        let cam = &mut cfg.camera;
        e.set("camera.fx", &mut cam.fx)?;
        e.set("camera.fy", &mut cam.fy)?;
        e.set("camera.cx", &mut cam.cx)?;
        e.set("camera.cy", &mut cam.cy)?;
        e.set("camera.width", &mut cam.width)?;
        e.set("camera.height", &mut cam.height)?;
        let mut pose = [0.0; 6];
        for (i, key) in CAMERA_KEYS[6..].iter().enumerate() {
            e.set(key, &mut pose[i])?;
        }
        cam.pose = CameraPose::from_params(pose);
        cam.validate().map_err(|err| CliError::Config(format!("camera block: {err}")))?;

        e.set("body.fixed_x", &mut cfg.fixed_x)?;
        e.set("body.fixed_z", &mut cfg.fixed_z)?;
        check("body.fixed_x", cfg.fixed_x.is_finite())?;
        check("body.fixed_z", cfg.fixed_z.is_finite())?;
        if let Some(v) = e.0.get("body.sizes") {
            let values = parse_values(v).map_err(|err| CliError::Config(format!("config key body.sizes: {err}")))?;
            if values.len() != NUM_SIZES {
                return Err(CliError::Config(format!(
                    "config key body.sizes needs {NUM_SIZES} values, got {}",
                    values.len()
                )));
            }
            cfg.sizes =
                SizeParams::from_slice(&values).map_err(|err| CliError::Config(format!("config key body.sizes: {err}")))?;
        }

        let t = &mut cfg.tracker;
        t.seed = cfg.seed;
        e.set("tracker.resampler", &mut t.resampler)?;
        e.set("tracker.cycles_per_frame", &mut t.cycles_per_frame)?;
        check("tracker.cycles_per_frame", t.cycles_per_frame >= 1)?;
        for stage in Stage::ALL {
            let prefix = stage_prefix(stage);
            let key = |f: &str| format!("{prefix}.{f}");
            if !STAGE_FIELDS.iter().any(|f| e.has(&key(f))) {
                continue;
            }
            for f in required_stage_fields(stage) {
                if !e.has(&key(f)) {
                    return Err(CliError::Config(format!("missing config key {}", key(f))));
                }
            }
            let sc = t.stage_mut(stage);
            e.set(&key("N"), &mut sc.n)?;
            e.set(&key("e"), &mut sc.e)?;
            e.set(&key("sigma_beta_rot"), &mut sc.sigma_rot)?;
            e.set(&key("sigma_beta_trans"), &mut sc.sigma_trans)?;
            e.set(&key("sigma_gamma"), &mut sc.sigma_gamma)?;
            sc.validate().map_err(|err| CliError::Config(format!("{prefix}: {err}")))?;
        }
        e.posture("tracker.d_ref", &mut cfg.d_ref)?;
        JointLimits::default()
            .check(&cfg.d_ref)
            .map_err(|err| CliError::Config(format!("config key tracker.d_ref: {err}")))?;

        let i = &mut cfg.init;
        e.set("init.M", &mut i.m)?;
        e.set("init.sigma_alpha", &mut i.sigma_alpha)?;
        e.set("init.max_iterations", &mut i.max_iterations)?;
        e.set("init.min_relative_improvement", &mut i.min_relative_improvement)?;
        e.set("init.patience", &mut i.patience)?;
        e.set("init.min_size", &mut i.min_size)?;
        for (k, key) in ["init.ref1", "init.ref2", "init.ref3"].iter().enumerate() {
            e.posture(key, &mut i.reference_postures[k])?;
        }
        check("init.M", i.m >= 2)?;
        check("init.sigma_alpha", i.sigma_alpha > 0.0 && i.sigma_alpha.is_finite())?;
        check("init.max_iterations", i.max_iterations >= 1)?;
        check(
            "init.min_relative_improvement",
            (0.0..1.0).contains(&i.min_relative_improvement),
        )?;
        check("init.min_size", i.min_size > 0.0 && i.min_size.is_finite())?;

        let s = &mut cfg.synth;
        if let Some(v) = e.0.get("synth.motion") {
            s.motion = v.parse().map_err(|err| CliError::Config(format!("config key synth.motion: {err}")))?;
        }
        e.set("synth.frames", &mut s.frames)?;
        check("synth.frames", s.frames >= 1)?;
        if let Some(deg) = e.get::<f64>("synth.max_velocity_deg")? {
            check("synth.max_velocity_deg", deg >= 0.0 && deg.is_finite())?;
            s.max_velocity = deg.to_radians();
        }
        e.posture("synth.start", &mut s.start)?;

        e.set("segment.sigma_floor", &mut cfg.sigma_floor)?;
        check("segment.sigma_floor", cfg.sigma_floor >= 0.0 && cfg.sigma_floor.is_finite())?;
        e.set("compare.runs", &mut cfg.runs)?;
        check("compare.runs", (2..=100).contains(&cfg.runs))?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.tracker.seed = seed;
        self
    }
}
