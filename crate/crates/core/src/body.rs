//! The 3D cardbox body model.
//!
//! Every body part is drawn as two (head, waist, upper arms, forearms, hands)
//! or three (torso) planar patches that are mutually perpendicular and pass
//! through the part's central axis. Patches hang on a skeleton tree:
//!
//! ```text
//! root (hip) ── torso, waist, head patches
//!  ├── left shoulder ── left elbow ── left wrist (hand tip at its end)
//!  └── right shoulder ── right elbow ── right wrist
//! ```
//!
//! World axes: X points from the subject towards the camera (opposite the
//! optical axis), Y is horizontal and parallel to the image plane (towards
//! the subject's left when facing the camera), Z = X × Y points up.
//!
//! In the zero posture the subject stands upright facing the camera with the
//! arms hanging straight down.

use nalgebra::{IsometryMatrix3, Point3, Rotation3, Translation3, Vector3};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use crate::error::{Error, Result};

pub const NUM_DOF: usize = 12;
pub const NUM_SIZES: usize = 18;

/// Indices into [`PostureParams`].
pub mod dof {
    /// Torso rotation about world Z (turning), first of the Z-Y-X sequence.
    pub const TORSO_YAW: usize = 0;
    /// Torso rotation about the intermediate Y axis; positive bows towards the camera.
    pub const TORSO_PITCH: usize = 1;
    /// Torso rotation about the final X axis; positive bends towards the subject's right.
    pub const TORSO_ROLL: usize = 2;
    /// Torso translation along world Y (cm).
    pub const TORSO_Y: usize = 3;
    pub const L_SHOULDER_FLEX: usize = 4;
    pub const L_SHOULDER_ABD: usize = 5;
    pub const L_ELBOW_FLEX: usize = 6;
    pub const L_ELBOW_ABD: usize = 7;
    pub const R_SHOULDER_FLEX: usize = 8;
    pub const R_SHOULDER_ABD: usize = 9;
    pub const R_ELBOW_FLEX: usize = 10;
    pub const R_ELBOW_ABD: usize = 11;

    pub const TORSO: std::ops::Range<usize> = 0..4;
    pub const LEFT_ARM: std::ops::Range<usize> = 4..8;
    pub const RIGHT_ARM: std::ops::Range<usize> = 8..12;

    pub const NAMES: [&str; 12] = [
        "torso_yaw",
        "torso_pitch",
        "torso_roll",
        "torso_y",
        "l_shoulder_flex",
        "l_shoulder_abd",
        "l_elbow_flex",
        "l_elbow_abd",
        "r_shoulder_flex",
        "r_shoulder_abd",
        "r_elbow_flex",
        "r_elbow_abd",
    ];

    /// True for the single translational DOF.
    pub fn is_translation(index: usize) -> bool {
        index == TORSO_Y
    }
}

/// Indices into [`SizeParams`] (all lengths in cm).
///
/// | subset | index | meaning |
/// |---|---|---|
/// | front view | a1 | torso width at the shoulder line |
/// | | a2 | torso width at the bottom |
/// | | a3 | torso height |
/// | | a4 | waist width |
/// | | a5 | waist height |
/// | | a6 | head width |
/// | | a7 | head height |
/// | | a8 | shoulder joint drop below the torso top |
/// | side view | a9 | torso depth |
/// | | a10 | waist depth |
/// | | a11 | head depth |
/// | | a12 | neck depth (forward offset of the head centre) |
/// | arms | a13 | upper-arm length |
/// | | a14 | upper-arm width |
/// | | a15 | forearm length |
/// | | a16 | forearm width |
/// | | a17 | hand length |
/// | | a18 | hand width |
///
/// Left and right arms share the arm entries.
pub mod size {
    pub const TORSO_WIDTH_TOP: usize = 0;
    pub const TORSO_WIDTH_BOTTOM: usize = 1;
    pub const TORSO_HEIGHT: usize = 2;
    pub const WAIST_WIDTH: usize = 3;
    pub const WAIST_HEIGHT: usize = 4;
    pub const HEAD_WIDTH: usize = 5;
    pub const HEAD_HEIGHT: usize = 6;
    pub const SHOULDER_DROP: usize = 7;
    pub const TORSO_DEPTH: usize = 8;
    pub const WAIST_DEPTH: usize = 9;
    pub const HEAD_DEPTH: usize = 10;
    pub const NECK_DEPTH: usize = 11;
    pub const UPPER_ARM_LENGTH: usize = 12;
    pub const UPPER_ARM_WIDTH: usize = 13;
    pub const FOREARM_LENGTH: usize = 14;
    pub const FOREARM_WIDTH: usize = 15;
    pub const HAND_LENGTH: usize = 16;
    pub const HAND_WIDTH: usize = 17;

    /// The three subsets estimated one after another during initialization.
    pub const SUBSETS: [std::ops::Range<usize>; 3] = [0..8, 8..12, 12..18];
}

/// The 12-DOF posture vector: three torso angles, the torso Y translation,
/// then flexion/abduction pairs for left shoulder, left elbow, right
/// shoulder and right elbow. Angles in radians, translation in cm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PostureParams(pub [f64; NUM_DOF]);

impl PostureParams {
    pub const ZERO: PostureParams = PostureParams([0.0; NUM_DOF]);

    pub fn new(values: [f64; NUM_DOF]) -> Self {
        PostureParams(values)
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; NUM_DOF] = values.try_into().map_err(|_| Error::LengthMismatch {
            expected: NUM_DOF,
            actual: values.len(),
        })?;
        Ok(PostureParams(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn torso_rot(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn torso_trans_y(&self) -> f64 {
        self.0[dof::TORSO_Y]
    }

    pub fn l_shoulder(&self) -> [f64; 2] {
        [self.0[4], self.0[5]]
    }

    pub fn l_elbow(&self) -> [f64; 2] {
        [self.0[6], self.0[7]]
    }

    pub fn r_shoulder(&self) -> [f64; 2] {
        [self.0[8], self.0[9]]
    }

    pub fn r_elbow(&self) -> [f64; 2] {
        [self.0[10], self.0[11]]
    }
}

impl std::ops::Index<usize> for PostureParams {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for PostureParams {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Per-DOF closed intervals a posture must lie in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub lo: [f64; NUM_DOF],
    pub hi: [f64; NUM_DOF],
}

impl Default for JointLimits {
    /// ±π for torso yaw, ±π/2 for every other angle, unbounded translation.
    fn default() -> Self {
        let mut lo = [-FRAC_PI_2; NUM_DOF];
        let mut hi = [FRAC_PI_2; NUM_DOF];
        lo[dof::TORSO_YAW] = -PI;
        hi[dof::TORSO_YAW] = PI;
        lo[dof::TORSO_Y] = f64::NEG_INFINITY;
        hi[dof::TORSO_Y] = f64::INFINITY;
        JointLimits { lo, hi }
    }
}

impl JointLimits {
    pub fn clamp(&self, index: usize, value: f64) -> f64 {
        value.clamp(self.lo[index], self.hi[index])
    }

    pub fn clamp_posture(&self, posture: &PostureParams) -> PostureParams {
        let mut out = *posture;
        for i in 0..NUM_DOF {
            out.0[i] = self.clamp(i, out.0[i]);
        }
        out
    }

    pub fn check(&self, posture: &PostureParams) -> Result<()> {
        for (i, &v) in posture.0.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinitePosture { index: i + 1, value: v });
            }
            if v < self.lo[i] || v > self.hi[i] {
                return Err(Error::OutOfLimits {
                    index: i + 1,
                    value: v,
                    lo: self.lo[i],
                    hi: self.hi[i],
                });
            }
        }
        Ok(())
    }
}

/// The 18 body dimensions, see [`size`] for the index mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeParams([f64; NUM_SIZES]);

impl SizeParams {
    pub fn new(values: [f64; NUM_SIZES]) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSize { index: i + 1, value: v });
            }
        }
        Ok(SizeParams(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; NUM_SIZES] = values.try_into().map_err(|_| Error::LengthMismatch {
            expected: NUM_SIZES,
            actual: values.len(),
        })?;
        Self::new(arr)
    }

    pub fn values(&self) -> &[f64; NUM_SIZES] {
        &self.0
    }

    pub fn get(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.map(|v| v * factor))
    }
}

impl Default for SizeParams {
    /// An average adult, roughly 175 cm tall.
    fn default() -> Self {
        SizeParams([
            36.0, 30.0, 50.0, 32.0, 20.0, 16.0, 22.0, 5.0, // front view
            22.0, 20.0, 19.0, 2.0, // side view
            30.0, 10.0, 26.0, 8.0, 18.0, 8.0, // arms
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// World-Y sign of this side in the zero posture.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Segment {
    Torso,
    Waist,
    Head,
    UpperArm(Side),
    Forearm(Side),
    Hand(Side),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    /// Torso root: Z-Y-X rotation from d1..d3, translation (fixed_x, d4, fixed_z).
    Root,
    /// Flexion about local Y followed by abduction about the rotated local X.
    /// Positive flexion swings the limb towards the camera, positive
    /// abduction swings it away from the body midline on either side.
    Hinge2 {
        flexion: usize,
        abduction: usize,
        side: Side,
    },
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: &'static str,
    pub parent: Option<usize>,
    /// Joint origin in the parent frame.
    pub offset: Vector3<f64>,
    pub kind: JointKind,
}

pub mod joint {
    pub const ROOT: usize = 0;
    pub const L_SHOULDER: usize = 1;
    pub const L_ELBOW: usize = 2;
    pub const L_WRIST: usize = 3;
    pub const R_SHOULDER: usize = 4;
    pub const R_ELBOW: usize = 5;
    pub const R_WRIST: usize = 6;
}

/// A planar quadrilateral with corners listed in cyclic order.
pub type Quad3 = [Point3<f64>; 4];

/// One cardbox patch, with corners expressed in its joint's local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub segment: Segment,
    pub joint: usize,
    pub corners: Quad3,
}

/// Posed 3D positions (cm, world frame) of the tracked body points. Hands
/// sit at the fingertip end of the hand patches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointPositions {
    pub torso: Point3<f64>,
    pub l_shoulder: Point3<f64>,
    pub r_shoulder: Point3<f64>,
    pub l_elbow: Point3<f64>,
    pub r_elbow: Point3<f64>,
    pub l_hand: Point3<f64>,
    pub r_hand: Point3<f64>,
}

impl JointPositions {
    pub const NAMES: [&'static str; 7] = ["torso", "ls", "rs", "le", "re", "lh", "rh"];

    pub fn as_array(&self) -> [Point3<f64>; 7] {
        [
            self.torso,
            self.l_shoulder,
            self.r_shoulder,
            self.l_elbow,
            self.r_elbow,
            self.l_hand,
            self.r_hand,
        ]
    }
}

/// Output of [`BodyModel::forward_kinematics`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub joints: JointPositions,
    pub quads: Vec<Quad3>,
}

/// Skeleton plus patches for one person. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyModel {
    sizes: SizeParams,
    fixed_x: f64,
    fixed_z: f64,
    limits: JointLimits,
    joints: Vec<Joint>,
    patches: Vec<Patch>,
}

fn quad(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> Quad3 {
    [a.into(), b.into(), c.into(), d.into()]
}

/// Frontal (local Y-Z) patch centred on `centre`.
fn frontal(centre: [f64; 3], width: f64, z_lo: f64, z_hi: f64) -> Quad3 {
    let [x, y, _] = centre;
    let w = width / 2.0;
    quad(
        [x, y - w, z_lo],
        [x, y + w, z_lo],
        [x, y + w, z_hi],
        [x, y - w, z_hi],
    )
}

/// Sagittal (local X-Z) patch centred on `centre`.
fn sagittal(centre: [f64; 3], depth: f64, z_lo: f64, z_hi: f64) -> Quad3 {
    let [x, y, _] = centre;
    let d = depth / 2.0;
    quad(
        [x - d, y, z_lo],
        [x + d, y, z_lo],
        [x + d, y, z_hi],
        [x - d, y, z_hi],
    )
}

impl BodyModel {
    /// Builds the model with default joint limits.
    pub fn build(sizes: SizeParams, fixed_x: f64, fixed_z: f64) -> Result<Self> {
        Self::build_with_limits(sizes, fixed_x, fixed_z, JointLimits::default())
    }

    pub fn build_with_limits(
        sizes: SizeParams,
        fixed_x: f64,
        fixed_z: f64,
        limits: JointLimits,
    ) -> Result<Self> {
        // re-validate: SizeParams may have been built through a path that skipped checks
        let sizes = SizeParams::new(sizes.0)?;
        if !fixed_x.is_finite() || !fixed_z.is_finite() {
            return Err(Error::InvalidParameter {
                name: "fixed torso translation",
                value: if fixed_x.is_finite() { fixed_z } else { fixed_x },
            });
        }
        let a = |i: usize| sizes.get(i);
        use size::*;

        let torso_lo = a(WAIST_HEIGHT);
        let torso_hi = a(WAIST_HEIGHT) + a(TORSO_HEIGHT);
        let shoulder_z = torso_hi - a(SHOULDER_DROP);
        let shoulder_y = (a(TORSO_WIDTH_TOP) + a(UPPER_ARM_WIDTH)) / 2.0;

        let mut joints = vec![Joint {
            name: "root",
            parent: None,
            offset: Vector3::zeros(),
            kind: JointKind::Root,
        }];
        for side in [Side::Left, Side::Right] {
            let (flex_s, abd_s, flex_e, abd_e, names) = match side {
                Side::Left => (
                    dof::L_SHOULDER_FLEX,
                    dof::L_SHOULDER_ABD,
                    dof::L_ELBOW_FLEX,
                    dof::L_ELBOW_ABD,
                    ["l_shoulder", "l_elbow", "l_wrist"],
                ),
                Side::Right => (
                    dof::R_SHOULDER_FLEX,
                    dof::R_SHOULDER_ABD,
                    dof::R_ELBOW_FLEX,
                    dof::R_ELBOW_ABD,
                    ["r_shoulder", "r_elbow", "r_wrist"],
                ),
            };
            let base = joints.len();
            joints.push(Joint {
                name: names[0],
                parent: Some(joint::ROOT),
                offset: Vector3::new(0.0, side.sign() * shoulder_y, shoulder_z),
                kind: JointKind::Hinge2 {
                    flexion: flex_s,
                    abduction: abd_s,
                    side,
                },
            });
            joints.push(Joint {
                name: names[1],
                parent: Some(base),
                offset: Vector3::new(0.0, 0.0, -a(UPPER_ARM_LENGTH)),
                kind: JointKind::Hinge2 {
                    flexion: flex_e,
                    abduction: abd_e,
                    side,
                },
            });
            joints.push(Joint {
                name: names[2],
                parent: Some(base + 1),
                offset: Vector3::new(0.0, 0.0, -a(FOREARM_LENGTH)),
                kind: JointKind::Fixed,
            });
        }

        let mut patches = Vec::with_capacity(19);
        let mut push = |segment, joint, corners| {
            patches.push(Patch {
                segment,
                joint,
                corners,
            })
        };

        // torso: trapezoidal front, side and a transverse patch at mid height
        let (wt, wb) = (a(TORSO_WIDTH_TOP) / 2.0, a(TORSO_WIDTH_BOTTOM) / 2.0);
        push(
            Segment::Torso,
            joint::ROOT,
            quad(
                [0.0, -wb, torso_lo],
                [0.0, wb, torso_lo],
                [0.0, wt, torso_hi],
                [0.0, -wt, torso_hi],
            ),
        );
        push(
            Segment::Torso,
            joint::ROOT,
            sagittal([0.0; 3], a(TORSO_DEPTH), torso_lo, torso_hi),
        );
        let zm = torso_lo + a(TORSO_HEIGHT) / 2.0;
        let (dm, wm) = (a(TORSO_DEPTH) / 2.0, (wt + wb) / 2.0);
        push(
            Segment::Torso,
            joint::ROOT,
            quad([-dm, -wm, zm], [dm, -wm, zm], [dm, wm, zm], [-dm, wm, zm]),
        );

        push(
            Segment::Waist,
            joint::ROOT,
            frontal([0.0; 3], a(WAIST_WIDTH), 0.0, torso_lo),
        );
        push(
            Segment::Waist,
            joint::ROOT,
            sagittal([0.0; 3], a(WAIST_DEPTH), 0.0, torso_lo),
        );

        let head = [a(NECK_DEPTH), 0.0, 0.0];
        let (head_lo, head_hi) = (torso_hi, torso_hi + a(HEAD_HEIGHT));
        push(Segment::Head, joint::ROOT, frontal(head, a(HEAD_WIDTH), head_lo, head_hi));
        push(Segment::Head, joint::ROOT, sagittal(head, a(HEAD_DEPTH), head_lo, head_hi));

        for (side, shoulder, elbow, wrist) in [
            (Side::Left, joint::L_SHOULDER, joint::L_ELBOW, joint::L_WRIST),
            (Side::Right, joint::R_SHOULDER, joint::R_ELBOW, joint::R_WRIST),
        ] {
            for (segment, j, len, width) in [
                (Segment::UpperArm(side), shoulder, a(UPPER_ARM_LENGTH), a(UPPER_ARM_WIDTH)),
                (Segment::Forearm(side), elbow, a(FOREARM_LENGTH), a(FOREARM_WIDTH)),
                (Segment::Hand(side), wrist, a(HAND_LENGTH), a(HAND_WIDTH)),
            ] {
                push(segment, j, frontal([0.0; 3], width, -len, 0.0));
                push(segment, j, sagittal([0.0; 3], width, -len, 0.0));
            }
        }

        Ok(BodyModel {
            sizes,
            fixed_x,
            fixed_z,
            limits,
            joints,
            patches,
        })
    }

    pub fn sizes(&self) -> &SizeParams {
        &self.sizes
    }

    pub fn fixed_x(&self) -> f64 {
        self.fixed_x
    }

    pub fn fixed_z(&self) -> f64 {
        self.fixed_z
    }

    pub fn limits(&self) -> &JointLimits {
        &self.limits
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    /// Same body with different size parameters.
    pub fn with_sizes(&self, sizes: SizeParams) -> Result<Self> {
        Self::build_with_limits(sizes, self.fixed_x, self.fixed_z, self.limits)
    }

    /// Same body with different joint limits.
    pub fn with_limits(&self, limits: JointLimits) -> Result<Self> {
        Self::build_with_limits(self.sizes, self.fixed_x, self.fixed_z, limits)
    }

    fn local_transform(&self, joint: &Joint, posture: &PostureParams) -> IsometryMatrix3<f64> {
        let rotation = match joint.kind {
            JointKind::Root => {
                let [yaw, pitch, roll] = posture.torso_rot();
                rot_z(yaw) * rot_y(pitch) * rot_x(roll)
            }
            JointKind::Hinge2 {
                flexion,
                abduction,
                side,
            } => rot_y(-posture[flexion]) * rot_x(side.sign() * posture[abduction]),
            JointKind::Fixed => Rotation3::identity(),
        };
        let offset = match joint.kind {
            JointKind::Root => Vector3::new(self.fixed_x, posture.torso_trans_y(), self.fixed_z),
            _ => joint.offset,
        };
        IsometryMatrix3::from_parts(Translation3::from(offset), rotation)
    }

    /// World transform of every joint frame, parents before children.
    pub fn joint_frames(&self, posture: &PostureParams) -> Result<Vec<IsometryMatrix3<f64>>> {
        self.limits.check(posture)?;
        let mut frames: Vec<IsometryMatrix3<f64>> = Vec::with_capacity(self.joints.len());
        for joint in &self.joints {
            let local = self.local_transform(joint, posture);
            let world = match joint.parent {
                Some(p) => frames[p] * local,
                None => local,
            };
            frames.push(world);
        }
        Ok(frames)
    }

    /// Poses the model: joint positions plus every patch in world coordinates.
    pub fn forward_kinematics(&self, posture: &PostureParams) -> Result<Pose> {
        let frames = self.joint_frames(posture)?;
        let mut quads = Vec::with_capacity(self.patches.len());
        for patch in &self.patches {
            let f = &frames[patch.joint];
            quads.push(patch.corners.map(|c| f * c));
        }
        Ok(Pose {
            joints: self.joint_positions_from_frames(&frames),
            quads,
        })
    }

    fn joint_positions_from_frames(&self, frames: &[IsometryMatrix3<f64>]) -> JointPositions {
        let origin = |j: usize| frames[j] * Point3::origin();
        let tip = Point3::new(0.0, 0.0, -self.sizes.get(size::HAND_LENGTH));
        let torso_z = self.sizes.get(size::WAIST_HEIGHT) + self.sizes.get(size::TORSO_HEIGHT) / 2.0;
        JointPositions {
            torso: frames[joint::ROOT] * Point3::new(0.0, 0.0, torso_z),
            l_shoulder: origin(joint::L_SHOULDER),
            r_shoulder: origin(joint::R_SHOULDER),
            l_elbow: origin(joint::L_ELBOW),
            r_elbow: origin(joint::R_ELBOW),
            l_hand: frames[joint::L_WRIST] * tip,
            r_hand: frames[joint::R_WRIST] * tip,
        }
    }

    pub fn joint_positions(&self, posture: &PostureParams) -> Result<JointPositions> {
        Ok(self.joint_positions_from_frames(&self.joint_frames(posture)?))
    }
}

pub fn rot_x(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), a)
}

pub fn rot_y(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), a)
}

pub fn rot_z(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), a)
}

impl fmt::Display for PostureParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl fmt::Display for SizeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
