//! Pinhole camera without lens distortion.

use nalgebra::{Matrix3, Point2, Point3, Rotation3, Vector3};

use crate::body::{rot_x, rot_y, rot_z};
use crate::error::{Error, Result};

/// Rigid world→camera transform, `p_cam = rotation * p_world + translation`.
///
/// The camera frame is the usual computer-vision one: x to the image right,
/// y down, z along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

/// World→camera rotation for a camera looking along world −X with image
/// right = world +Y and image up = world +Z.
pub fn canonical_rotation() -> Rotation3<f64> {
    Rotation3::from_matrix_unchecked(Matrix3::new(
        0.0, 1.0, 0.0, //
        0.0, 0.0, -1.0, //
        -1.0, 0.0, 0.0,
    ))
}

impl CameraPose {
    /// Builds a pose from the six config values: the camera's yaw, pitch and
    /// roll (intrinsic Z-Y-X, radians) relative to the canonical orientation,
    /// and the camera centre in world coordinates (cm).
    pub fn from_params(params: [f64; 6]) -> Self {
        let [yaw, pitch, roll, x, y, z] = params;
        let orientation = rot_z(yaw) * rot_y(pitch) * rot_x(roll);
        let rotation = canonical_rotation() * orientation.inverse();
        let centre = Vector3::new(x, y, z);
        CameraPose {
            rotation,
            translation: -(rotation * centre),
        }
    }

    pub fn to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation * p + self.translation
    }
}

impl Default for CameraPose {
    fn default() -> Self {
        Self::from_params([0.0; 6])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub pose: CameraPose,
}

impl Default for CameraModel {
    /// 320×240, f = 280 px, principal point at the image centre, canonical
    /// orientation at the world origin.
    fn default() -> Self {
        CameraModel {
            fx: 280.0,
            fy: 280.0,
            cx: 160.0,
            cy: 120.0,
            width: 320,
            height: 240,
            pose: CameraPose::default(),
        }
    }
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        pose: CameraPose,
    ) -> Result<Self> {
        let cam = CameraModel {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            pose,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("image size must be positive".into()));
        }
        if !(0.0 <= self.cx && self.cx < self.width as f64) {
            return Err(Error::InvalidCamera(format!("cx={} outside [0, {})", self.cx, self.width)));
        }
        if !(0.0 <= self.cy && self.cy < self.height as f64) {
            return Err(Error::InvalidCamera(format!("cy={} outside [0, {})", self.cy, self.height)));
        }
        Ok(())
    }

    /// Pixel coordinates of a camera-frame point with positive depth.
    /// Pixel `(i, j)` covers `[i, i+1) × [j, j+1)`, so its centre is at `(i+0.5, j+0.5)`.
    #[inline]
    pub fn project_camera_point(&self, p: &Point3<f64>) -> Point2<f64> {
        Point2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    /// Projects a world point to sub-pixel image coordinates.
    pub fn project_point(&self, p: &Point3<f64>) -> Result<Point2<f64>> {
        let c = self.pose.to_camera(p);
        if !(c.z > 0.0) {
            return Err(Error::BehindCamera(c.z));
        }
        Ok(self.project_camera_point(&c))
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}
