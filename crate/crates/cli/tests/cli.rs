use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cardbox::io::{frame_file_name, read_trajectory, write_gray};
use cardbox::GrayImage;

fn cardbox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cardbox"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn short_config(dir: &Path, frames: usize) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    fs::write(
        &path,
        format!("# small run\nseed = 3\nsynth.frames = {frames}\nsynth.motion = wave-hands\n"),
    )
    .unwrap();
    path
}

#[test]
fn synth_track_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), 6);
    let seq = dir.path().join("seq");
    let out = cardbox(&["--config", s(&cfg), "synth", "--out", s(&seq)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["truth.csv", "truth_joints.csv", "sizes.txt", "ref_1.pgm", "ref_3.pgm"] {
        assert!(seq.join(name).exists(), "{name}");
    }
    assert!(seq.join(frame_file_name(5)).exists());

    let est = dir.path().join("est.csv");
    let joints = dir.path().join("joints.csv");
    let overlays = dir.path().join("ov");
    let out = cardbox(&[
        "--config",
        s(&cfg),
        "track",
        "--masks",
        s(&seq),
        "--sizes",
        s(&seq.join("sizes.txt")),
        "--out",
        s(&est),
        "--joints",
        s(&joints),
        "--dump-overlays",
        s(&overlays),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_trajectory(&est).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0].cost.0, 0, "first frame is the reference posture");
    assert_eq!(fs::read_to_string(&joints).unwrap().lines().count(), 7);
    assert!(overlays.join("overlay_00005.pgm").exists());
    assert!(overlays.join("diff_00005.pgm").exists());

    let stats = dir.path().join("eval.csv");
    let out = cardbox(&[
        "evaluate",
        "--estimate",
        s(&est),
        "--truth",
        s(&seq.join("truth.csv")),
        "--out",
        s(&stats),
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&stats).unwrap();
    assert!(text.starts_with("frame,metric,value\n"));
    assert!(text.contains("all,rh_error_cm,"));
}

#[test]
fn evaluate_rejects_length_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short");
    let long = dir.path().join("long");
    assert!(cardbox(&["--config", s(&short_config(dir.path(), 3)), "synth", "--out", s(&short)])
        .status
        .success());
    assert!(cardbox(&["--config", s(&short_config(dir.path(), 5)), "synth", "--out", s(&long)])
        .status
        .success());
    let out = cardbox(&[
        "evaluate",
        "--estimate",
        s(&short.join("truth.csv")),
        "--truth",
        s(&long.join("truth.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("length mismatch"));
}

#[test]
fn init_model_recovers_synthetic_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    assert!(cardbox(&["--config", s(&short_config(dir.path(), 1)), "synth", "--out", s(&seq)])
        .status
        .success());
    let fitted = dir.path().join("fitted.txt");
    let out = cardbox(&["init-model", "--references", s(&seq), "--out", s(&fitted)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read_to_string(&fitted).unwrap(),
        fs::read_to_string(seq.join("sizes.txt")).unwrap()
    );

    fs::remove_file(seq.join("ref_2.pgm")).unwrap();
    let out = cardbox(&["init-model", "--references", s(&seq), "--out", s(&fitted)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("subset 2"));
}

fn noisy_frame(w: usize, h: usize, seed: usize, person: bool) -> GrayImage {
    let data = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if person && (12..20).contains(&x) && (4..28).contains(&y) {
                200
            } else {
                (60 + (i * 7 + seed * 13) % 5) as u8
            }
        })
        .collect();
    GrayImage::new(w, h, data).unwrap()
}

#[test]
fn learn_background_then_track_gray_frames() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    write_gray(&empty.join(frame_file_name(0)), &noisy_frame(32, 32, 0, false)).unwrap();
    let bg = dir.path().join("bg.bin");
    let out = cardbox(&["learn-background", "--frames", s(&empty), "--out", s(&bg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("need at least 2 frames"));

    for k in 1..4 {
        write_gray(&empty.join(frame_file_name(k)), &noisy_frame(32, 32, k, false)).unwrap();
    }
    assert!(cardbox(&["learn-background", "--frames", s(&empty), "--out", s(&bg)])
        .status
        .success());

    let frames = dir.path().join("frames");
    fs::create_dir(&frames).unwrap();
    for k in 0..2 {
        write_gray(&frames.join(frame_file_name(k)), &noisy_frame(32, 32, k, true)).unwrap();
    }
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, "camera.width = 32\ncamera.height = 32\ncamera.cx = 16\ncamera.cy = 16\ncamera.fx = 28\ncamera.fy = 28\ntracker.cycles_per_frame = 1\n").unwrap();
    let est = dir.path().join("est.csv");
    let out = cardbox(&[
        "--config",
        s(&cfg),
        "track",
        "--frames",
        s(&frames),
        "--background",
        s(&bg),
        "--out",
        s(&est),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_trajectory(&est).unwrap().len(), 2);
}

#[test]
fn usage_and_config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cardbox(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(cardbox(&["--help"]).status.code(), Some(0));
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "tracker.torso.N = 100\n").unwrap();
    let out = cardbox(&["--config", s(&bad), "synth", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing config key tracker.torso."));
    let out = cardbox(&["--threads", "0", "synth", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_resamplers_writes_stats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "synth.frames = 3\ncompare.runs = 2\n").unwrap();
    let seq = dir.path().join("seq");
    assert!(cardbox(&["--config", s(&cfg), "synth", "--out", s(&seq)]).status.success());
    let stats = dir.path().join("cmp.csv");
    let out = cardbox(&[
        "--config",
        s(&cfg),
        "compare-resamplers",
        "--masks",
        s(&seq),
        "--truth",
        s(&seq.join("truth.csv")),
        "--out",
        s(&stats),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&stats).unwrap();
    assert!(text.contains("all,drs_not_worse_fraction,"));
    assert!(text.contains("all,srs_rh_error_cm,"));
    assert!(text.contains("0,drs_d12_std,"));
    let out = cardbox(&["compare-resamplers", "--masks", s(&seq), "--runs", "1", "--out", s(&stats)]);
    assert_eq!(out.status.code(), Some(1));
}
