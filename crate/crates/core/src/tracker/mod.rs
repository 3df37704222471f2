//! Hierarchical tracking: one particle filter for the torso, then one per
//! arm conditioned on the fresh torso estimate.

mod init;

pub use init::{estimate_sizes, default_reference_postures, InitConfig, InitReport, ReferenceView, SubsetReport};

use std::ops::Range;

use rayon::prelude::*;

use crate::body::{dof, BodyModel, JointLimits, PostureParams, Segment, Side};
use crate::camera::CameraModel;
use crate::error::{Error, Result};
use crate::io::TrajectoryRow;
use crate::mask::SilhouetteMask;
use crate::matching::{cost_of_posture, silhouette_cost, Cost};
use crate::raster::{fill_polygon, project_quad};
use crate::resampling::{
    assign_probabilities, drs_step, drs_survivors, normalize_and_accumulate, srs_step, uniform_weights,
    ParticleSet, Perturbation,
};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ResamplerKind {
    #[default]
    Drs,
    Srs,
}

impl ResamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            ResamplerKind::Drs => "drs",
            ResamplerKind::Srs => "srs",
        }
    }
}

impl std::str::FromStr for ResamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drs" => Ok(ResamplerKind::Drs),
            "srs" => Ok(ResamplerKind::Srs),
            other => Err(Error::Format(format!("unknown resampler {other:?}, expected drs or srs"))),
        }
    }
}

/// Filter parameters of one hierarchy stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageConfig {
    /// Particle count N.
    pub n: usize,
    /// DRS survival rate e.
    pub e: f64,
    /// σβ for rotational DOF (rad).
    pub sigma_rot: f64,
    /// σβ for the translational DOF (cm); unused by the arm stages.
    pub sigma_trans: f64,
    /// σγ of the SRS likelihood (px).
    pub sigma_gamma: f64,
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter {
                name: "N",
                value: self.n as f64,
            });
        }
        drs_survivors(self.n, self.e)?;
        for (name, v) in [("sigma_beta_rot", self.sigma_rot), ("sigma_beta_trans", self.sigma_trans)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter { name, value: v });
            }
        }
        if !(self.sigma_gamma > 0.0 && self.sigma_gamma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma_gamma",
                value: self.sigma_gamma,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Torso,
    LeftArm,
    RightArm,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Torso, Stage::LeftArm, Stage::RightArm];

    pub fn dofs(self) -> Range<usize> {
        match self {
            Stage::Torso => dof::TORSO,
            Stage::LeftArm => dof::LEFT_ARM,
            Stage::RightArm => dof::RIGHT_ARM,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Torso => "torso",
            Stage::LeftArm => "left_arm",
            Stage::RightArm => "right_arm",
        }
    }

    /// Whether a patch of `segment` moves with this stage's DOF.
    fn moves(self, segment: Segment) -> bool {
        match (self, segment) {
            (Stage::Torso, _) => true,
            (Stage::LeftArm, Segment::UpperArm(s) | Segment::Forearm(s) | Segment::Hand(s)) => s == Side::Left,
            (Stage::RightArm, Segment::UpperArm(s) | Segment::Forearm(s) | Segment::Hand(s)) => s == Side::Right,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub torso: StageConfig,
    pub left_arm: StageConfig,
    pub right_arm: StageConfig,
    pub resampler: ResamplerKind,
    pub seed: u64,
    pub limits: JointLimits,
    /// Resample-evaluate cycles per stage per frame.
    pub cycles_per_frame: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            torso: StageConfig {
                n: 200,
                e: 0.2,
                sigma_rot: 0.1,
                sigma_trans: 2.0,
                sigma_gamma: 8000.0,
            },
            left_arm: StageConfig {
                n: 200,
                e: 0.4,
                sigma_rot: 0.25,
                sigma_trans: 0.0,
                sigma_gamma: 4000.0,
            },
            right_arm: StageConfig {
                n: 200,
                e: 0.4,
                sigma_rot: 0.25,
                sigma_trans: 0.0,
                sigma_gamma: 4000.0,
            },
            resampler: ResamplerKind::Drs,
            seed: 0,
            limits: JointLimits::default(),
            cycles_per_frame: 1,
        }
    }
}

impl TrackerConfig {
    pub fn stage(&self, stage: Stage) -> &StageConfig {
        match stage {
            Stage::Torso => &self.torso,
            Stage::LeftArm => &self.left_arm,
            Stage::RightArm => &self.right_arm,
        }
    }

    pub fn stage_mut(&mut self, stage: Stage) -> &mut StageConfig {
        match stage {
            Stage::Torso => &mut self.torso,
            Stage::LeftArm => &mut self.left_arm,
            Stage::RightArm => &mut self.right_arm,
        }
    }

    pub fn total_particles(&self) -> usize {
        self.torso.n + self.left_arm.n + self.right_arm.n
    }

    pub fn validate(&self) -> Result<()> {
        for s in Stage::ALL {
            self.stage(s).validate()?;
        }
        if self.cycles_per_frame == 0 {
            return Err(Error::InvalidParameter {
                name: "cycles_per_frame",
                value: 0.0,
            });
        }
        Ok(())
    }

    fn perturbation(&self, stage: Stage) -> Perturbation {
        let cfg = self.stage(stage);
        let range = stage.dofs();
        Perturbation {
            sigma: range
                .clone()
                .map(|i| if dof::is_translation(i) { cfg.sigma_trans } else { cfg.sigma_rot })
                .collect(),
            lo: self.limits.lo[range.clone()].to_vec(),
            hi: self.limits.hi[range].to_vec(),
        }
    }

    fn stage_seed(&self, stage: Stage) -> u64 {
        derive_seed(self.seed, &[stage.index() as u64])
    }
}

/// Order in which the two arm stages run within a frame. Results do not
/// depend on it; the sequential variants exist to check exactly that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArmSchedule {
    #[default]
    Parallel,
    LeftFirst,
    RightFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub torso: ParticleSet,
    pub left_arm: ParticleSet,
    pub right_arm: ParticleSet,
    /// Assembled best posture after the last processed frame.
    pub estimate: PostureParams,
    /// Full-body cost of `estimate` against the last observation.
    pub cost: Cost,
    /// Frames processed by [`Tracker::track_frame`] so far.
    pub frame: usize,
}

impl TrackState {
    pub fn set(&self, stage: Stage) -> &ParticleSet {
        match stage {
            Stage::Torso => &self.torso,
            Stage::LeftArm => &self.left_arm,
            Stage::RightArm => &self.right_arm,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tracker {
    pub model: BodyModel,
    pub camera: CameraModel,
    pub config: TrackerConfig,
}

/// Renders a stage's particles on top of a precomputed silhouette of every
/// patch the stage does not move. Because patches are OR-ed one by one this
/// is bit-identical to rendering the whole body.
struct StageRenderer<'a> {
    model: &'a BodyModel,
    camera: &'a CameraModel,
    base: SilhouetteMask,
    moving: Vec<usize>,
}

impl<'a> StageRenderer<'a> {
    fn new(model: &'a BodyModel, camera: &'a CameraModel, stage: Stage, context: &PostureParams) -> Result<Self> {
        let mut base = SilhouetteMask::new(camera.width, camera.height);
        let mut moving = Vec::new();
        let fixed_quads = if stage == Stage::Torso {
            Vec::new()
        } else {
            model.forward_kinematics(context)?.quads
        };
        for (i, patch) in model.patches().iter().enumerate() {
            if stage.moves(patch.segment) {
                moving.push(i);
            } else if let Some(poly) = project_quad(camera, &fixed_quads[i]) {
                fill_polygon(&mut base, &poly);
            }
        }
        Ok(StageRenderer {
            model,
            camera,
            base,
            moving,
        })
    }

    fn cost(&self, posture: &PostureParams, observed: &SilhouetteMask, scratch: &mut SilhouetteMask) -> Result<Cost> {
        let quads = self.model.forward_kinematics(posture)?.quads;
        scratch.clone_from(&self.base);
        for &i in &self.moving {
            if let Some(poly) = project_quad(self.camera, &quads[i]) {
                fill_polygon(scratch, &poly);
            }
        }
        silhouette_cost(scratch, observed)
    }
}

fn with_stage_values(context: &PostureParams, stage: Stage, values: &[f64]) -> PostureParams {
    let mut p = *context;
    p.0[stage.dofs()].copy_from_slice(values);
    p
}

impl Tracker {
    pub fn new(model: BodyModel, camera: CameraModel, config: TrackerConfig) -> Result<Self> {
        camera.validate()?;
        config.validate()?;
        let model = model.with_limits(config.limits)?;
        Ok(Tracker { model, camera, config })
    }

    fn check_observation(&self, observed: &SilhouetteMask) -> Result<()> {
        let expected = (self.camera.width, self.camera.height);
        if observed.dims() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: observed.dims(),
            });
        }
        Ok(())
    }

    /// Evaluates particles of `set` (all of them, or only unevaluated ones)
    /// with the stage's DOF spliced into `context`.
    fn evaluate(
        &self,
        stage: Stage,
        set: &mut ParticleSet,
        context: &PostureParams,
        observed: &SilhouetteMask,
        all: bool,
    ) -> Result<()> {
        let renderer = StageRenderer::new(&self.model, &self.camera, stage, context)?;
        set.particles
            .par_iter_mut()
            .filter(|p| all || p.cost.is_none())
            .map_init(
                || SilhouetteMask::new(self.camera.width, self.camera.height),
                |scratch, p| {
                    let posture = with_stage_values(context, stage, &p.params);
                    p.cost = Some(renderer.cost(&posture, observed, scratch)?);
                    Ok(())
                },
            )
            .collect::<Result<()>>()
    }

    /// Seeds the three particle sets around `d_ref` and evaluates them on the
    /// first observation. The estimate starts at `d_ref` itself.
    pub fn init_particles(&self, d_ref: &PostureParams, first: &SilhouetteMask) -> Result<TrackState> {
        self.check_observation(first)?;
        self.model.limits().check(d_ref)?;
        let mut sets = Vec::with_capacity(3);
        for stage in Stage::ALL {
            let mut set = ParticleSet::around(
                &d_ref.0[stage.dofs()],
                self.config.stage(stage).n,
                &self.config.perturbation(stage),
                self.config.stage_seed(stage),
            )?;
            self.evaluate(stage, &mut set, d_ref, first, true)?;
            sets.push(set);
        }
        let right_arm = sets.pop().unwrap();
        let left_arm = sets.pop().unwrap();
        let torso = sets.pop().unwrap();
        Ok(TrackState {
            torso,
            left_arm,
            right_arm,
            estimate: *d_ref,
            cost: cost_of_posture(&self.model, d_ref, &self.camera, first)?,
            frame: 0,
        })
    }

    fn resample(&self, stage: Stage, set: &ParticleSet) -> Result<ParticleSet> {
        let noise = self.config.perturbation(stage);
        match self.config.resampler {
            ResamplerKind::Drs => drs_step(set, self.config.stage(stage).e, &noise),
            ResamplerKind::Srs => {
                let mut weighted = set.clone();
                assign_probabilities(&mut weighted, self.config.stage(stage).sigma_gamma)?;
                if let Err(Error::DegenerateWeights) = normalize_and_accumulate(&mut weighted) {
                    uniform_weights(&mut weighted);
                }
                srs_step(&weighted, &noise)
            }
        }
    }

    /// Runs the configured number of cycles of one stage and returns the new
    /// set plus its best parameters. The whole set is re-costed against the
    /// current observation and context before the first resampling.
    pub fn step_stage(
        &self,
        stage: Stage,
        set: &ParticleSet,
        context: &PostureParams,
        observed: &SilhouetteMask,
    ) -> Result<(ParticleSet, PostureParams)> {
        let mut current = set.clone();
        self.evaluate(stage, &mut current, context, observed, true)?;
        for _ in 0..self.config.cycles_per_frame {
            let mut next = self.resample(stage, &current)?;
            self.evaluate(stage, &mut next, context, observed, false)?;
            current = next;
        }
        let best = current.best()?.params.clone();
        let estimate = with_stage_values(context, stage, &best);
        Ok((current, estimate))
    }

    pub fn track_frame(&self, state: &TrackState, observed: &SilhouetteMask) -> Result<TrackState> {
        self.track_frame_with(state, observed, ArmSchedule::Parallel)
    }

    /// One frame: torso with the arms held at the previous estimate, then
    /// both arms from the same snapshot with the fresh torso.
    pub fn track_frame_with(
        &self,
        state: &TrackState,
        observed: &SilhouetteMask,
        schedule: ArmSchedule,
    ) -> Result<TrackState> {
        self.check_observation(observed)?;
        let (torso, with_torso) = self.step_stage(Stage::Torso, &state.torso, &state.estimate, observed)?;
        let left = || self.step_stage(Stage::LeftArm, &state.left_arm, &with_torso, observed);
        let right = || self.step_stage(Stage::RightArm, &state.right_arm, &with_torso, observed);
        let (l, r) = match schedule {
            ArmSchedule::Parallel => rayon::join(left, right),
            ArmSchedule::LeftFirst => {
                let l = left();
                (l, right())
            }
            ArmSchedule::RightFirst => {
                let r = right();
                (left(), r)
            }
        };
        let (left_arm, l_est) = l?;
        let (right_arm, r_est) = r?;
        let mut estimate = with_torso;
        estimate.0[dof::LEFT_ARM].copy_from_slice(&l_est.0[dof::LEFT_ARM]);
        estimate.0[dof::RIGHT_ARM].copy_from_slice(&r_est.0[dof::RIGHT_ARM]);
        let cost = cost_of_posture(&self.model, &estimate, &self.camera, observed)?;
        Ok(TrackState {
            torso,
            left_arm,
            right_arm,
            estimate,
            cost,
            frame: state.frame + 1,
        })
    }

    /// Initializes on the first mask and tracks every mask in turn, the
    /// first one included.
    pub fn track_sequence(&self, d_ref: &PostureParams, masks: &[SilhouetteMask]) -> Result<Vec<TrajectoryRow>> {
        let first = masks.first().ok_or(Error::InvalidParameter {
            name: "frame count",
            value: 0.0,
        })?;
        let mut state = self.init_particles(d_ref, first)?;
        let mut rows = Vec::with_capacity(masks.len());
        for (frame, mask) in masks.iter().enumerate() {
            state = self.track_frame(&state, mask)?;
            rows.push(TrajectoryRow {
                frame,
                posture: state.estimate,
                cost: state.cost,
            });
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::SizeParams;
    use crate::matching::render_posture;

    fn small_config(resampler: ResamplerKind) -> TrackerConfig {
        let mut cfg = TrackerConfig {
            resampler,
            seed: 5,
            ..TrackerConfig::default()
        };
        for s in Stage::ALL {
            cfg.stage_mut(s).n = 30;
        }
        cfg
    }

    fn tracker(cfg: TrackerConfig) -> Tracker {
        Tracker::new(
            BodyModel::build(SizeParams::default(), -250.0, -45.0).unwrap(),
            CameraModel::default(),
            cfg,
        )
        .unwrap()
    }

    #[test]
    fn table_defaults() {
        let c = TrackerConfig::default();
        assert_eq!(c.total_particles(), 600);
        assert_eq!((c.torso.e, c.left_arm.e, c.right_arm.e), (0.2, 0.4, 0.4));
        assert_eq!((c.torso.sigma_rot, c.left_arm.sigma_rot, c.right_arm.sigma_rot), (0.1, 0.25, 0.25));
        assert_eq!(c.torso.sigma_trans, 2.0);
        assert_eq!(
            (c.torso.sigma_gamma, c.left_arm.sigma_gamma, c.right_arm.sigma_gamma),
            (8000.0, 4000.0, 4000.0)
        );
        c.validate().unwrap();
    }

    #[test]
    fn stages_partition_the_posture() {
        let mut seen = [0; 12];
        for s in Stage::ALL {
            for i in s.dofs() {
                seen[i] += 1;
            }
        }
        assert_eq!(seen, [1; 12]);
        let p = TrackerConfig::default().perturbation(Stage::Torso);
        assert_eq!(p.sigma, vec![0.1, 0.1, 0.1, 2.0]);
    }

    #[test]
    fn partial_render_equals_full_render() {
        let t = tracker(TrackerConfig::default());
        let mut ctx = PostureParams::ZERO;
        ctx.0 = [0.1, 0.05, -0.1, 2.0, 0.3, 0.9, 0.1, 0.5, -0.2, 1.1, 0.3, 0.2];
        let observed = render_posture(&t.model, &PostureParams::ZERO, &t.camera).unwrap();
        let mut scratch = SilhouetteMask::new(320, 240);
        for stage in Stage::ALL {
            let r = StageRenderer::new(&t.model, &t.camera, stage, &ctx).unwrap();
            let mut p = ctx;
            for i in stage.dofs() {
                p[i] += 0.07;
            }
            let full = cost_of_posture(&t.model, &p, &t.camera, &observed).unwrap();
            assert_eq!(r.cost(&p, &observed, &mut scratch).unwrap(), full, "{stage:?}");
        }
    }

    #[test]
    fn init_with_zero_noise_is_exact() {
        let mut cfg = small_config(ResamplerKind::Drs);
        for s in Stage::ALL {
            cfg.stage_mut(s).sigma_rot = 0.0;
            cfg.stage_mut(s).sigma_trans = 0.0;
        }
        let t = tracker(cfg);
        let mut d_ref = PostureParams::ZERO;
        d_ref[dof::L_SHOULDER_ABD] = 0.5;
        let obs = render_posture(&t.model, &d_ref, &t.camera).unwrap();
        let state = t.init_particles(&d_ref, &obs).unwrap();
        for s in Stage::ALL {
            for p in &state.set(s).particles {
                assert_eq!(p.params, d_ref.0[s.dofs()].to_vec());
                assert_eq!(p.cost, Some(Cost(0)));
            }
            assert_eq!(state.set(s).cycle, 0);
        }
    }

    #[test]
    fn elitism_never_loses_the_best() {
        for kind in [ResamplerKind::Drs, ResamplerKind::Srs] {
            let t = tracker(small_config(kind));
            let mut target = PostureParams::ZERO;
            target[dof::R_SHOULDER_ABD] = 0.6;
            target[dof::TORSO_Y] = 3.0;
            let obs = render_posture(&t.model, &target, &t.camera).unwrap();
            let state = t.init_particles(&PostureParams::ZERO, &obs).unwrap();
            for stage in Stage::ALL {
                let mut set = state.set(stage).clone();
                let mut prev = set.best().unwrap().cost.unwrap();
                for _ in 0..6 {
                    let (next, est) = t.step_stage(stage, &set, &PostureParams::ZERO, &obs).unwrap();
                    let best = next.best().unwrap().cost.unwrap();
                    assert!(best <= prev, "{kind:?} {stage:?}");
                    t.model.limits().check(&est).unwrap();
                    prev = best;
                    set = next;
                }
            }
        }
    }

    #[test]
    fn arm_schedule_does_not_matter() {
        let t = tracker(small_config(ResamplerKind::Srs));
        let mut target = PostureParams::ZERO;
        target[dof::L_SHOULDER_ABD] = 0.4;
        target[dof::R_ELBOW_FLEX] = 0.3;
        let obs = render_posture(&t.model, &target, &t.camera).unwrap();
        let s0 = t.init_particles(&PostureParams::ZERO, &obs).unwrap();
        let a = t.track_frame_with(&s0, &obs, ArmSchedule::LeftFirst).unwrap();
        let b = t.track_frame_with(&s0, &obs, ArmSchedule::RightFirst).unwrap();
        let c = t.track_frame_with(&s0, &obs, ArmSchedule::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn bad_observation_size() {
        let t = tracker(small_config(ResamplerKind::Drs));
        let obs = SilhouetteMask::new(32, 24);
        assert!(matches!(
            t.init_particles(&PostureParams::ZERO, &obs),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_configs() {
        let mut c = TrackerConfig::default();
        c.torso.e = 0.001;
        assert!(c.validate().is_err());
        let mut c = TrackerConfig::default();
        c.left_arm.sigma_gamma = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrackerConfig::default();
        c.right_arm.n = 1;
        assert!(c.validate().is_err());
        assert!("xyz".parse::<ResamplerKind>().is_err());
        assert_eq!("srs".parse::<ResamplerKind>().unwrap(), ResamplerKind::Srs);
    }
}
