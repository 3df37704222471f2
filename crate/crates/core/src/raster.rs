//! Binary polygon rasterization of posed patches.
//!
//! A pixel is set iff its centre lies inside at least one projected patch.
//! "Inside" is the even-odd crossing rule evaluated on a horizontal ray
//! through the pixel centre: an edge counts when exactly one endpoint lies
//! strictly below the ray, and a crossing counts when it lies strictly to
//! the right of the centre. This makes left and top boundaries inclusive,
//! right and bottom boundaries exclusive. Every patch is filled on its own
//! and OR-ed into the mask, so rasterizing a union of quad lists is the
//! bitwise OR of the individual masks.

use nalgebra::Point3;

use crate::body::Quad3;
use crate::camera::CameraModel;
use crate::mask::SilhouetteMask;

/// Patches are clipped against this camera depth (cm) before projection.
pub const NEAR_PLANE: f64 = 1.0;

/// A projected, near-clipped patch: a convex polygon with up to 8 vertices
/// in sub-pixel image coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Polygon2 {
    pts: [[f64; 2]; 8],
    len: usize,
}

impl Polygon2 {
    pub fn points(&self) -> &[[f64; 2]] {
        &self.pts[..self.len]
    }

    fn push(&mut self, p: [f64; 2]) {
        self.pts[self.len] = p;
        self.len += 1;
    }
}

/// Clips a world-space quad at the near plane and projects it. Returns
/// `None` when nothing of the quad lies in front of the near plane.
pub fn project_quad(cam: &CameraModel, quad: &Quad3) -> Option<Polygon2> {
    let c: [Point3<f64>; 4] = quad.map(|p| cam.pose.to_camera(&p));
    let mut out = Polygon2 {
        pts: [[0.0; 2]; 8],
        len: 0,
    };
    if c.iter().all(|p| p.z >= NEAR_PLANE) {
        for p in &c {
            let uv = cam.project_camera_point(p);
            out.push([uv.x, uv.y]);
        }
        return Some(out);
    }
    // Sutherland-Hodgman against z = NEAR_PLANE
    for i in 0..4 {
        let a = &c[i];
        let b = &c[(i + 1) % 4];
        let (ina, inb) = (a.z >= NEAR_PLANE, b.z >= NEAR_PLANE);
        if ina {
            let uv = cam.project_camera_point(a);
            out.push([uv.x, uv.y]);
        }
        if ina != inb {
            let t = (NEAR_PLANE - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * t;
            p.z = NEAR_PLANE;
            let uv = cam.project_camera_point(&p);
            out.push([uv.x, uv.y]);
        }
    }
    (out.len >= 3).then_some(out)
}

/// Index of the first pixel whose centre is at or right of `x`, clamped to `0..=len`.
#[inline]
fn first_centre_at_or_after(x: f64, len: usize) -> usize {
    if x <= 0.5 {
        return 0;
    }
    if x > len as f64 - 0.5 {
        return len;
    }
    let mut i = (x - 0.5).ceil() as usize;
    while i > 0 && (i - 1) as f64 + 0.5 >= x {
        i -= 1;
    }
    while i < len && (i as f64 + 0.5) < x {
        i += 1;
    }
    i
}

/// Horizontal crossing of the edge (p, q) with the row `py`, using the same
/// half-open rule and arithmetic as the classic point-in-polygon test.
#[inline]
pub fn edge_crossing(p: [f64; 2], q: [f64; 2], py: f64) -> Option<f64> {
    if (p[1] > py) != (q[1] > py) {
        Some((q[0] - p[0]) * (py - p[1]) / (q[1] - p[1]) + p[0])
    } else {
        None
    }
}

pub fn fill_polygon(mask: &mut SilhouetteMask, poly: &Polygon2) {
    let pts = poly.points();
    if pts.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return;
    }
    let (w, h) = mask.dims();
    let (ymin, ymax) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])));
    if ymax < 0.0 || ymin > h as f64 {
        return;
    }
    let row0 = first_centre_at_or_after(ymin, h).saturating_sub(1);
    let row1 = (first_centre_at_or_after(ymax, h) + 1).min(h);
    let n = pts.len();
    let mut xs = [0.0f64; 8];
    for row in row0..row1 {
        let py = row as f64 + 0.5;
        let mut k = 0;
        for i in 0..n {
            if let Some(x) = edge_crossing(pts[i], pts[(i + n - 1) % n], py) {
                xs[k] = x;
                k += 1;
            }
        }
        if k < 2 {
            continue;
        }
        let xs = &mut xs[..k];
        xs.sort_unstable_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let x0 = first_centre_at_or_after(pair[0], w);
            let x1 = first_centre_at_or_after(pair[1], w);
            mask.fill_span(row, x0, x1);
        }
    }
}

/// Renders the union of `quads` into `mask`, which is cleared first.
pub fn rasterize_into(cam: &CameraModel, quads: &[Quad3], mask: &mut SilhouetteMask) {
    mask.clear();
    for q in quads {
        if let Some(poly) = project_quad(cam, q) {
            fill_polygon(mask, &poly);
        }
    }
}

/// The model silhouette h(x, y) for a list of posed patches.
pub fn rasterize(cam: &CameraModel, quads: &[Quad3]) -> SilhouetteMask {
    let mut mask = SilhouetteMask::new(cam.width, cam.height);
    rasterize_into(cam, quads, &mut mask);
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{BodyModel, PostureParams, SizeParams};

    /// Literal per-pixel even-odd test on the projected polygon.
    fn brute_force(cam: &CameraModel, quads: &[Quad3]) -> SilhouetteMask {
        let polys: Vec<Vec<[f64; 2]>> = quads
            .iter()
            .filter_map(|q| project_quad(cam, q))
            .map(|p| p.points().to_vec())
            .collect();
        SilhouetteMask::from_fn(cam.width, cam.height, |x, y| {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            polys.iter().any(|poly| {
                let n = poly.len();
                let mut inside = false;
                let mut j = n - 1;
                for i in 0..n {
                    let (xi, yi) = (poly[i][0], poly[i][1]);
                    let (xj, yj) = (poly[j][0], poly[j][1]);
                    if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                    j = i;
                }
                inside
            })
        })
    }

    fn square(x: f64, yc: f64, zc: f64, half: f64) -> Quad3 {
        [
            Point3::new(x, yc - half, zc - half),
            Point3::new(x, yc + half, zc - half),
            Point3::new(x, yc + half, zc + half),
            Point3::new(x, yc - half, zc + half),
        ]
    }

    #[test]
    fn empty_list_gives_empty_mask() {
        let cam = CameraModel::default();
        assert_eq!(rasterize(&cam, &[]).count_ones(), 0);
    }

    #[test]
    fn fronto_parallel_square() {
        let cam = CameraModel::default();
        // 40 cm square at 250 cm: 44.8 px on a side
        let q = square(-250.0, 3.3, -1.7, 20.0);
        let m = rasterize(&cam, &[q]);
        assert_eq!(m, brute_force(&cam, &[q]));
        let side = 40.0 * 280.0 / 250.0;
        let expected_area = side * side;
        assert!((m.count_ones() as f64 - expected_area).abs() < 2.0 * side + 2.0);
        // exact pixel box: centres within [u0, u1) x [v0, v1)
        let u0 = 160.0 + 280.0 * (3.3 - 20.0) / 250.0;
        let u1 = 160.0 + 280.0 * (3.3 + 20.0) / 250.0;
        let v0 = 120.0 - 280.0 * (-1.7 + 20.0) / 250.0;
        let v1 = 120.0 - 280.0 * (-1.7 - 20.0) / 250.0;
        let count = |lo: f64, hi: f64| (0..400).filter(|&i| lo <= i as f64 + 0.5 && (i as f64 + 0.5) < hi).count();
        assert_eq!(m.count_ones() as usize, count(u0, u1) * count(v0, v1));
    }

    #[test]
    fn behind_camera_is_culled() {
        let cam = CameraModel::default();
        let q = square(250.0, 0.0, 0.0, 20.0);
        assert_eq!(rasterize(&cam, &[q]).count_ones(), 0);
        assert!(project_quad(&cam, &q).is_none());
    }

    #[test]
    fn crossing_the_near_plane_is_clipped() {
        let cam = CameraModel::default();
        // a floor-like patch running from behind the camera to 200 cm in front
        let q = [
            Point3::new(50.0, -10.0, -30.0),
            Point3::new(50.0, 10.0, -30.0),
            Point3::new(-200.0, 10.0, -30.0),
            Point3::new(-200.0, -10.0, -30.0),
        ];
        let poly = project_quad(&cam, &q).unwrap();
        assert_eq!(poly.points().len(), 4);
        let m = rasterize(&cam, &[q]);
        assert!(m.count_ones() > 0);
        assert_eq!(m, brute_force(&cam, &[q]));
    }

    #[test]
    fn shared_edges_are_not_double_counted_or_dropped() {
        let cam = CameraModel::default();
        // two squares sharing an edge fill the same pixels as their union rectangle
        let a = square(-250.0, -10.0, 0.0, 10.0);
        let b = square(-250.0, 10.0, 0.0, 10.0);
        let both = rasterize(&cam, &[a, b]);
        let union = [
            Point3::new(-250.0, -20.0, -10.0),
            Point3::new(-250.0, 20.0, -10.0),
            Point3::new(-250.0, 20.0, 10.0),
            Point3::new(-250.0, -20.0, 10.0),
        ];
        assert_eq!(both, rasterize(&cam, &[union]));
        let ma = rasterize(&cam, &[a]);
        let mb = rasterize(&cam, &[b]);
        assert_eq!(ma.count_ones() + mb.count_ones(), both.count_ones());
    }

    #[test]
    fn body_matches_brute_force_small_image() {
        let cam = CameraModel {
            fx: 56.0,
            fy: 56.0,
            cx: 32.0,
            cy: 32.0,
            width: 64,
            height: 64,
            ..CameraModel::default()
        };
        let m = BodyModel::build(SizeParams::default(), -250.0, -45.0).unwrap();
        let mut p = PostureParams::ZERO;
        p.0 = [0.4, 0.2, -0.1, 3.0, 0.5, 1.2, 0.3, 0.9, -0.2, 1.4, 0.0, 1.1];
        let quads = m.forward_kinematics(&p).unwrap().quads;
        assert_eq!(rasterize(&cam, &quads), brute_force(&cam, &quads));
    }

    #[test]
    fn translation_moves_centroid_right() {
        let cam = CameraModel::default();
        let m = BodyModel::build(SizeParams::default(), -250.0, -45.0).unwrap();
        let mut p = PostureParams::ZERO;
        let c0 = rasterize(&cam, &m.forward_kinematics(&p).unwrap().quads)
            .centroid()
            .unwrap();
        p[crate::body::dof::TORSO_Y] = 10.0;
        let c1 = rasterize(&cam, &m.forward_kinematics(&p).unwrap().quads)
            .centroid()
            .unwrap();
        assert!(c1.0 > c0.0 + 5.0);
        assert!((c1.1 - c0.1).abs() < 0.5);
    }
}
