//! Silhouette matching cost: the number of pixels where the rendered model
//! and the observed silhouette disagree.

use std::fmt;

use crate::body::{BodyModel, PostureParams};
use crate::camera::CameraModel;
use crate::error::Result;
use crate::mask::SilhouetteMask;
use crate::raster::rasterize_into;

/// XOR pixel count between model and observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cost(pub u64);

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn silhouette_cost(model_mask: &SilhouetteMask, observed: &SilhouetteMask) -> Result<Cost> {
    Ok(Cost(model_mask.xor_count(observed)?))
}

pub fn render_posture(
    model: &BodyModel,
    posture: &PostureParams,
    cam: &CameraModel,
) -> Result<SilhouetteMask> {
    let mut mask = SilhouetteMask::new(cam.width, cam.height);
    render_posture_into(model, posture, cam, &mut mask)?;
    Ok(mask)
}

pub fn render_posture_into(
    model: &BodyModel,
    posture: &PostureParams,
    cam: &CameraModel,
    scratch: &mut SilhouetteMask,
) -> Result<()> {
    let pose = model.forward_kinematics(posture)?;
    if scratch.dims() != (cam.width, cam.height) {
        *scratch = SilhouetteMask::new(cam.width, cam.height);
    }
    rasterize_into(cam, &pose.quads, scratch);
    Ok(())
}

/// Renders `posture` and scores it against `observed`. This is the only
/// evaluation path used by initialization and tracking.
pub fn cost_of_posture(
    model: &BodyModel,
    posture: &PostureParams,
    cam: &CameraModel,
    observed: &SilhouetteMask,
) -> Result<Cost> {
    let mut scratch = SilhouetteMask::new(cam.width, cam.height);
    cost_of_posture_with(model, posture, cam, observed, &mut scratch)
}

/// [`cost_of_posture`] reusing a caller-owned render buffer.
pub fn cost_of_posture_with(
    model: &BodyModel,
    posture: &PostureParams,
    cam: &CameraModel,
    observed: &SilhouetteMask,
    scratch: &mut SilhouetteMask,
) -> Result<Cost> {
    render_posture_into(model, posture, cam, scratch)?;
    silhouette_cost(scratch, observed)
}
