//! Rasterizer against a per-pixel point-in-polygon test with its own
//! projection.

use cardbox::body::{dof, SizeParams};
use cardbox::{rasterize, BodyModel, CameraModel, PostureParams, Quad3, SilhouetteMask};
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_camera() -> CameraModel {
    CameraModel {
        fx: 56.0,
        fy: 56.0,
        cx: 32.0,
        cy: 32.0,
        width: 64,
        height: 64,
        ..CameraModel::default()
    }
}

/// Default camera at the origin looking along world −X, image right = +Y,
/// image up = +Z. Only valid for points in front of it.
fn project(cam: &CameraModel, p: &Point3<f64>) -> [f64; 2] {
    let depth = -p.x;
    assert!(depth > 1.0, "oracle only handles points in front of the camera");
    [cam.cx + cam.fx * p.y / depth, cam.cy - cam.fy * p.z / depth]
}

fn inside(poly: &[[f64; 2]], px: f64, py: f64) -> bool {
    let mut c = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = (poly[i][0], poly[i][1]);
        let (xj, yj) = (poly[j][0], poly[j][1]);
        if ((yi > py) != (yj > py)) && (px < (xj - xi) * (py - yi) / (yj - yi) + xi) {
            c = !c;
        }
        j = i;
    }
    c
}

fn brute_force(cam: &CameraModel, quads: &[Quad3]) -> SilhouetteMask {
    let polys: Vec<Vec<[f64; 2]>> = quads.iter().map(|q| q.iter().map(|p| project(cam, p)).collect()).collect();
    SilhouetteMask::from_fn(cam.width, cam.height, |x, y| {
        polys.iter().any(|p| inside(p, x as f64 + 0.5, y as f64 + 0.5))
    })
}

fn random_posture(rng: &mut ChaCha8Rng, model: &BodyModel) -> PostureParams {
    let lim = model.limits();
    PostureParams(std::array::from_fn(|i| {
        if dof::is_translation(i) {
            rng.random_range(-20.0..20.0)
        } else {
            rng.random_range(lim.lo[i]..=lim.hi[i])
        }
    }))
}

#[test]
fn random_postures_match_point_in_polygon() {
    let cam = small_camera();
    let model = BodyModel::build(SizeParams::default(), -250.0, -45.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let p = random_posture(&mut rng, &model);
        let quads = model.forward_kinematics(&p).unwrap().quads;
        assert_eq!(rasterize(&cam, &quads), brute_force(&cam, &quads), "posture {p}");
    }
}

fn random_quad(rng: &mut ChaCha8Rng) -> Quad3 {
    // a planar rectangle with random centre, orientation and size
    let c = Point3::new(rng.random_range(-300.0..-150.0), rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0));
    let u = nalgebra::Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
    let w = u.cross(&nalgebra::Vector3::new(rng.random_range(-1.0..1.0), 1.0, rng.random_range(-1.0..1.0))).normalize();
    let (a, b) = (rng.random_range(1.0..40.0), rng.random_range(1.0..40.0));
    [c - u * a - w * b, c + u * a - w * b, c + u * a + w * b, c - u * a + w * b]
}

#[test]
fn union_of_quads_is_or_of_masks() {
    let cam = small_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (a, b) = (random_quad(&mut rng), random_quad(&mut rng));
        let both = rasterize(&cam, &[a, b]);
        let or = rasterize(&cam, &[a]).or(&rasterize(&cam, &[b])).unwrap();
        assert_eq!(both, or);
        assert_eq!(both, brute_force(&cam, &[a, b]));
    }
}
