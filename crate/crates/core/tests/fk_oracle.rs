//! Forward kinematics against a hand-written chain of 4x4 homogeneous
//! transforms.

use cardbox::body::{dof, size, SizeParams};
use cardbox::{BodyModel, PostureParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type M4 = [[f64; 4]; 4];

fn mul(a: &M4, b: &M4) -> M4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn apply(m: &M4, p: [f64; 3]) -> [f64; 3] {
    let v = [p[0], p[1], p[2], 1.0];
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..4).map(|k| m[i][k] * v[k]).sum();
    }
    out
}

fn trans(x: f64, y: f64, z: f64) -> M4 {
    [[1.0, 0.0, 0.0, x], [0.0, 1.0, 0.0, y], [0.0, 0.0, 1.0, z], [0.0, 0.0, 0.0, 1.0]]
}

fn rx(a: f64) -> M4 {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0, 0.0], [0.0, c, -s, 0.0], [0.0, s, c, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

fn ry(a: f64) -> M4 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s, 0.0], [0.0, 1.0, 0.0, 0.0], [-s, 0.0, c, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

fn rz(a: f64) -> M4 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0, 0.0], [s, c, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

fn chain(ms: &[M4]) -> M4 {
    ms.iter().skip(1).fold(ms[0], |acc, m| mul(&acc, m))
}

/// Joint positions in the order torso, ls, rs, le, re, lh, rh.
fn oracle(a: &[f64; 18], fx: f64, fz: f64, d: &[f64; 12]) -> [[f64; 3]; 7] {
    let root = chain(&[trans(fx, d[3], fz), rz(d[0]), ry(d[1]), rx(d[2])]);
    let sh_z = a[size::WAIST_HEIGHT] + a[size::TORSO_HEIGHT] - a[size::SHOULDER_DROP];
    let sh_y = (a[size::TORSO_WIDTH_TOP] + a[size::UPPER_ARM_WIDTH]) / 2.0;
    let arm = |sign: f64, o: usize| {
        let shoulder = chain(&[root, trans(0.0, sign * sh_y, sh_z), ry(-d[o]), rx(sign * d[o + 1])]);
        let elbow = chain(&[
            shoulder,
            trans(0.0, 0.0, -a[size::UPPER_ARM_LENGTH]),
            ry(-d[o + 2]),
            rx(sign * d[o + 3]),
        ]);
        let wrist = mul(&elbow, &trans(0.0, 0.0, -a[size::FOREARM_LENGTH]));
        (
            apply(&shoulder, [0.0; 3]),
            apply(&elbow, [0.0; 3]),
            apply(&wrist, [0.0, 0.0, -a[size::HAND_LENGTH]]),
        )
    };
    let (ls, le, lh) = arm(1.0, dof::L_SHOULDER_FLEX);
    let (rs, re, rh) = arm(-1.0, dof::R_SHOULDER_FLEX);
    let torso = apply(&root, [0.0, 0.0, a[size::WAIST_HEIGHT] + a[size::TORSO_HEIGHT] / 2.0]);
    [torso, ls, rs, le, re, lh, rh]
}

#[test]
fn forward_kinematics_matches_homogeneous_chain() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let sizes: [f64; 18] = std::array::from_fn(|_| rng.random_range(2.0..60.0));
        let (fx, fz) = (rng.random_range(-400.0..-150.0), rng.random_range(-80.0..20.0));
        let model = BodyModel::build(SizeParams::new(sizes).unwrap(), fx, fz).unwrap();
        let lim = *model.limits();
        let d: [f64; 12] = std::array::from_fn(|i| {
            if dof::is_translation(i) {
                rng.random_range(-40.0..40.0)
            } else {
                rng.random_range(lim.lo[i]..=lim.hi[i])
            }
        });
        let got = model.joint_positions(&PostureParams(d)).unwrap().as_array();
        let expected = oracle(&sizes, fx, fz, &d);
        for (g, e) in got.iter().zip(expected) {
            for k in 0..3 {
                worst = worst.max((g[k] - e[k]).abs());
            }
        }
    }
    assert!(worst < 1e-9, "max joint deviation {worst:e} cm");
}
