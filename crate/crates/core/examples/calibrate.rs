//! Measures the quantities behind the frozen test thresholds.
//!
//! Run with `cargo run --release -p cardbox --example calibrate [wave|init|compare|fps]`. Every
//! experiment is repeated over several seeds and the worst value is printed;
//! the frozen thresholds in the tests add a margin on top of it.

use std::time::Instant;

use cardbox::body::SizeParams;
use cardbox::matching::render_posture;
use cardbox::synth::{compare_resamplers, eval_3d_error, generate_sequence, MotionKind, SyntheticSequence, TrajectorySpec};
use cardbox::tracker::{default_reference_postures, estimate_sizes, InitConfig, ReferenceView, Tracker};
use cardbox::{BodyModel, CameraModel, PostureParams, TrackerConfig};

const SEEDS: u64 = 8;

fn main() -> cardbox::Result<()> {
    let only: Option<String> = std::env::args().nth(1);
    let run = |name: &str| only.as_deref().is_none_or(|o| o == name);
    let cam = CameraModel::default();
    let body = BodyModel::build(SizeParams::default(), -250.0, -45.0)?;

    let seq = generate_sequence(&TrajectorySpec::new(MotionKind::WaveHands, 30), &body, &cam)?;
    if run("wave") {
        wave(&body, &cam, &seq)?;
    }
    if run("init") {
        init(&body, &cam)?;
    }
    if run("compare") {
        compare(&body, &cam, &seq)?;
    }
    if run("fps") {
        fps(&body, &cam, &seq)?;
    }
    Ok(())
}

/// Slow wave, default tracker config, DRS: worst per-frame output cost and final-frame joint error.
fn wave(body: &BodyModel, cam: &CameraModel, seq: &SyntheticSequence) -> cardbox::Result<()> {
    let (body, cam) = (body.clone(), *cam);
    let mut worst_cost = 0;
    let mut worst_err = [0.0f64; 7];
    for seed in 0..SEEDS {
        let cfg = TrackerConfig { seed, ..TrackerConfig::default() };
        let tracker = Tracker::new(body.clone(), cam, cfg)?;
        let rows = tracker.track_sequence(&PostureParams::ZERO, &seq.masks)?;
        let max = rows.iter().map(|r| r.cost.0).max().unwrap();
        worst_cost = worst_cost.max(max);
        let last = rows.last().unwrap().posture;
        let err = eval_3d_error(
            &[body.joint_positions(&last)?],
            &[body.joint_positions(seq.postures.last().unwrap())?],
        )?;
        for k in 0..7 {
            worst_err[k] = worst_err[k].max(err[k]);
        }
        println!("seed {seed}: max frame cost {max}, final joint error {err:.2?}");
    }
    println!("slow wave: worst per-frame cost {worst_cost}");
    println!("slow wave: worst final-frame joint error {worst_err:.2?}");
    Ok(())
}

/// Size initialization from every size +4 cm. The "full-body" cost is the
/// worst of the three reference views with the fitted sizes.
fn init(body: &BodyModel, cam: &CameraModel) -> cardbox::Result<()> {
    let cam = *cam;
    let refs: Vec<ReferenceView> = default_reference_postures()
        .into_iter()
        .map(|posture| Ok(ReferenceView { posture, mask: render_posture(body, &posture, &cam)? }))
        .collect::<cardbox::Result<_>>()?;
    let offset = SizeParams::from_slice(&body.sizes().values().map(|v| v + 4.0))?;
    let start = body.with_sizes(offset)?;
    let mut costs = Vec::new();
    for seed in 0..SEEDS {
        let cfg = InitConfig { seed, ..InitConfig::new(refs.clone()) };
        let report = estimate_sizes(&cfg, &start, &cam)?;
        let fitted = body.with_sizes(report.sizes)?;
        let per_view = refs
            .iter()
            .map(|r| cardbox::cost_of_posture(&fitted, &r.posture, &cam, &r.mask).map(|c| c.0))
            .collect::<cardbox::Result<Vec<_>>>()?;
        let generations: Vec<usize> = report.subsets.iter().map(|s| s.history.len()).collect();
        println!("init seed {seed}: per-view cost {per_view:?}, generations {generations:?}");
        costs.push(*per_view.iter().max().unwrap());
    }
    costs.sort_unstable();
    let median = (costs[costs.len() / 2 - 1] + costs[costs.len() / 2]) as f64 / 2.0;
    println!(
        "init from +4 cm: median {median} worst {} of {} px (1% = {})",
        costs.last().unwrap(),
        cam.pixel_count(),
        cam.pixel_count() / 100
    );
    Ok(())
}

/// DRS against SRS, 20 runs each.
fn compare(body: &BodyModel, cam: &CameraModel, seq: &SyntheticSequence) -> cardbox::Result<()> {
    let t = Instant::now();
    let cmp = compare_resamplers(body, cam, &TrackerConfig::default(), &PostureParams::ZERO, &seq.masks, Some(&seq.postures), 20)?;
    println!(
        "compare: drs mean cost {:.1}, srs {:.1}, drs<=srs on {:.0}% frames, dof std drs {:.4} srs {:.4}, {:.1?}",
        cmp.drs.mean_cost(),
        cmp.srs.mean_cost(),
        100.0 * cmp.drs_not_worse_fraction(),
        cmp.drs.mean_dof_std(),
        cmp.srs.mean_dof_std(),
        t.elapsed()
    );

    Ok(())
}

fn fps(body: &BodyModel, cam: &CameraModel, seq: &SyntheticSequence) -> cardbox::Result<()> {
    let tracker = Tracker::new(body.clone(), *cam, TrackerConfig::default())?;
    let t = Instant::now();
    tracker.track_sequence(&PostureParams::ZERO, &seq.masks)?;
    println!("throughput: {:.1} fps with 600 particles", seq.masks.len() as f64 / t.elapsed().as_secs_f64());
    Ok(())
}
