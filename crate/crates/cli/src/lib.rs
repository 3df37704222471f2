//! The `cardbox` command line: background learning, size initialization,
//! synthetic sequences, tracking and evaluation.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use cardbox::io::{
    format_joints, format_stats, format_trajectory, frame_file_name, list_frames, read_gray, read_mask,
    read_sizes, read_trajectory, write_gray, write_mask, write_sizes, TrajectoryRow,
};
use cardbox::matching::render_posture;
use cardbox::synth::{compare_resamplers, eval_3d_error, generate_sequence, TrajectorySpec};
use cardbox::tracker::{estimate_sizes, ReferenceView, Tracker};
use cardbox::vision::{learn_background, segment};
use cardbox::{BackgroundModel, BodyModel, Cost, GrayImage, JointPositions, SilhouetteMask};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Data(#[from] cardbox::Error),
    #[error("{context}: {source}")]
    DataAt {
        context: String,
        source: cardbox::Error,
    },
}

impl CliError {
    /// 1 for usage and configuration problems, 2 for bad or missing data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) | CliError::DataAt { .. } => 2,
        }
    }
}

trait Context<T> {
    fn at(self, path: &Path) -> Result<T, CliError>;
}

impl<T> Context<T> for cardbox::Result<T> {
    fn at(self, path: &Path) -> Result<T, CliError> {
        self.map_err(|source| CliError::DataAt {
            context: path.display().to_string(),
            source,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "cardbox", version, about = "Silhouette-based upper-body tracking")]
pub struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured root seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 runs everything serially
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learns per-pixel background statistics from empty-scene frames
    LearnBackground {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fits the 18 size parameters to three reference silhouettes
    InitModel {
        /// Directory with ref_1.pgm, ref_2.pgm, ref_3.pgm
        #[arg(long)]
        references: PathBuf,
        /// Initial sizes; defaults to body.sizes from the config
        #[arg(long)]
        sizes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Renders a synthetic ground-truth sequence
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Tracks a silhouette or gray-frame sequence
    Track {
        /// Directory of binary masks (segmentation is skipped)
        #[arg(long, conflicts_with = "frames")]
        masks: Option<PathBuf>,
        /// Directory of gray frames; needs --background
        #[arg(long, requires = "background")]
        frames: Option<PathBuf>,
        #[arg(long)]
        background: Option<PathBuf>,
        /// Fitted sizes; defaults to body.sizes from the config
        #[arg(long)]
        sizes: Option<PathBuf>,
        /// Trajectory CSV
        #[arg(long)]
        out: PathBuf,
        /// Joint positions CSV
        #[arg(long)]
        joints: Option<PathBuf>,
        /// Writes model/observation overlays and XOR differences per frame
        #[arg(long)]
        dump_overlays: Option<PathBuf>,
    },
    /// Compares an estimated trajectory with ground truth
    Evaluate {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        sizes: Option<PathBuf>,
        /// Statistics CSV; printed to stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated DRS and SRS runs on one sequence
    CompareResamplers {
        #[arg(long)]
        masks: PathBuf,
        /// Ground-truth trajectory for the 3D joint error
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Runs per strategy; defaults to compare.runs
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        sizes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(&cfg, cli.command))
}

fn dispatch(cfg: &RunConfig, command: Command) -> Result<(), CliError> {
    match command {
        Command::LearnBackground { frames, out } => cmd_learn_background(&frames, &out),
        Command::InitModel { references, sizes, out } => cmd_init_model(cfg, &references, sizes.as_deref(), &out),
        Command::Synth { out } => cmd_synth(cfg, &out),
        Command::Track {
            masks,
            frames,
            background,
            sizes,
            out,
            joints,
            dump_overlays,
        } => {
            let input = match (masks, frames, background) {
                (Some(m), None, _) => TrackInput::Masks(m),
                (None, Some(f), Some(b)) => TrackInput::Frames { frames: f, background: b },
                _ => {
                    return Err(CliError::Usage(
                        "track needs --masks DIR, or --frames DIR with --background PATH".into(),
                    ))
                }
            };
            cmd_track(
                cfg,
                &input,
                sizes.as_deref(),
                &out,
                joints.as_deref(),
                dump_overlays.as_deref(),
            )
        }
        Command::Evaluate {
            estimate,
            truth,
            sizes,
            out,
        } => cmd_evaluate(cfg, &estimate, &truth, sizes.as_deref(), out.as_deref()),
        Command::CompareResamplers {
            masks,
            truth,
            runs,
            sizes,
            out,
        } => cmd_compare_resamplers(cfg, &masks, truth.as_deref(), runs, sizes.as_deref(), &out),
    }
}

fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(cardbox::Error::from).at(dir)?;
    }
    fs::write(path, text).map_err(cardbox::Error::from).at(path)
}

fn body_model(cfg: &RunConfig, sizes: Option<&Path>) -> Result<BodyModel, CliError> {
    let sizes = match sizes {
        Some(p) => read_sizes(p).at(p)?,
        None => cfg.sizes,
    };
    let model = BodyModel::build_with_limits(sizes, cfg.fixed_x, cfg.fixed_z, cfg.tracker.limits)?;
    Ok(model)
}

fn read_images(dir: &Path) -> Result<Vec<GrayImage>, CliError> {
    list_frames(dir)
        .at(dir)?
        .iter()
        .map(|p| read_gray(p).at(p))
        .collect()
}

pub fn cmd_learn_background(frames: &Path, out: &Path) -> Result<(), CliError> {
    let images = read_images(frames)?;
    let model = learn_background(&images).at(frames)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(cardbox::Error::from).at(dir)?;
    }
    model.save(out).at(out)?;
    println!("learned background from {} frames -> {}", images.len(), out.display());
    Ok(())
}

pub fn reference_file(j: usize) -> String {
    format!("ref_{}.pgm", j + 1)
}

pub fn cmd_init_model(cfg: &RunConfig, references: &Path, sizes: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let start = body_model(cfg, sizes)?;
    let mut views = Vec::with_capacity(3);
    for (j, posture) in cfg.init.reference_postures.iter().enumerate() {
        let path = references.join(reference_file(j));
        if !path.exists() {
            return Err(CliError::DataAt {
                context: path.display().to_string(),
                source: cardbox::Error::MissingReference(j + 1),
            });
        }
        views.push(ReferenceView {
            posture: *posture,
            mask: read_mask(&path).at(&path)?,
        });
    }
    let report = estimate_sizes(&cfg.init.to_config(views, cfg.seed), &start, &cfg.camera)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(cardbox::Error::from).at(dir)?;
    }
    write_sizes(out, &report.sizes).at(out)?;
    for s in &report.subsets {
        println!(
            "subset {}: cost {} after {} generations",
            s.subset + 1,
            s.final_cost(),
            s.history.len()
        );
    }
    Ok(())
}

/// Writes `frame_NNNNN.pgm` masks, `truth.csv`, `truth_joints.csv`,
/// `sizes.txt` and the reference silhouettes `ref_1..3.pgm`.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let model = body_model(cfg, None)?;
    let spec = TrajectorySpec {
        kind: cfg.synth.motion.clone(),
        frames: cfg.synth.frames,
        max_velocity: cfg.synth.max_velocity,
        start: cfg.synth.start,
        seed: cfg.seed,
    };
    let seq = generate_sequence(&spec, &model, &cfg.camera)?;
    fs::create_dir_all(out).map_err(cardbox::Error::from).at(out)?;
    for (i, mask) in seq.masks.iter().enumerate() {
        let path = out.join(frame_file_name(i));
        write_mask(&path, mask).at(&path)?;
    }
    for (j, posture) in cfg.init.reference_postures.iter().enumerate() {
        let path = out.join(reference_file(j));
        write_mask(&path, &render_posture(&model, posture, &cfg.camera)?).at(&path)?;
    }
    let rows: Vec<TrajectoryRow> = seq
        .postures
        .iter()
        .enumerate()
        .map(|(frame, p)| TrajectoryRow {
            frame,
            posture: *p,
            cost: Cost(0),
        })
        .collect();
    write_output(&out.join("truth.csv"), &format_trajectory(&rows))?;
    let joints = seq
        .postures
        .iter()
        .map(|p| model.joint_positions(p))
        .collect::<cardbox::Result<Vec<_>>>()?;
    write_output(&out.join("truth_joints.csv"), &format_joints(&joints))?;
    let sizes_path = out.join("sizes.txt");
    write_sizes(&sizes_path, model.sizes()).at(&sizes_path)?;
    if seq.clamped {
        eprintln!("warning: trajectory left the joint limits and was clamped");
    }
    println!("wrote {} frames to {}", seq.masks.len(), out.display());
    Ok(())
}

pub enum TrackInput {
    Masks(PathBuf),
    Frames { frames: PathBuf, background: PathBuf },
}

fn load_masks(dir: &Path) -> Result<Vec<SilhouetteMask>, CliError> {
    let masks: Vec<SilhouetteMask> = list_frames(dir)
        .at(dir)?
        .iter()
        .map(|p| read_mask(p).at(p))
        .collect::<Result<_, _>>()?;
    if masks.is_empty() {
        return Err(CliError::DataAt {
            context: dir.display().to_string(),
            source: cardbox::Error::Format("no frame_NNNNN images found".into()),
        });
    }
    Ok(masks)
}

fn observations(cfg: &RunConfig, input: &TrackInput) -> Result<Vec<SilhouetteMask>, CliError> {
    match input {
        TrackInput::Masks(dir) => load_masks(dir),
        TrackInput::Frames { frames, background } => {
            let bg = BackgroundModel::load(background).at(background)?;
            let images = read_images(frames)?;
            if images.is_empty() {
                return Err(CliError::DataAt {
                    context: frames.display().to_string(),
                    source: cardbox::Error::Format("no frame_NNNNN images found".into()),
                });
            }
            images
                .iter()
                .map(|img| segment(&bg, img, cfg.sigma_floor).at(frames))
                .collect()
        }
    }
}

/// Gray overlay: observation only 96, model only 160, both 255.
fn overlay(model: &SilhouetteMask, observed: &SilhouetteMask) -> GrayImage {
    let (w, h) = observed.dims();
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            data.push(match (model.get(x, y), observed.get(x, y)) {
                (true, true) => 255,
                (true, false) => 160,
                (false, true) => 96,
                (false, false) => 0,
            });
        }
    }
    GrayImage::new(w, h, data).expect("dimensions match")
}

pub fn cmd_track(
    cfg: &RunConfig,
    input: &TrackInput,
    sizes: Option<&Path>,
    out: &Path,
    joints: Option<&Path>,
    overlays: Option<&Path>,
) -> Result<(), CliError> {
    let model = body_model(cfg, sizes)?;
    let masks = observations(cfg, input)?;
    let tracker = Tracker::new(model, cfg.camera, cfg.tracker.clone())?;
    let rows = tracker.track_sequence(&cfg.d_ref, &masks)?;
    write_output(out, &format_trajectory(&rows))?;
    if let Some(path) = joints {
        let positions = rows
            .iter()
            .map(|r| tracker.model.joint_positions(&r.posture))
            .collect::<cardbox::Result<Vec<_>>>()?;
        write_output(path, &format_joints(&positions))?;
    }
    if let Some(dir) = overlays {
        fs::create_dir_all(dir).map_err(cardbox::Error::from).at(dir)?;
        for (row, observed) in rows.iter().zip(&masks) {
            let rendered = render_posture(&tracker.model, &row.posture, &tracker.camera)?;
            let path = dir.join(format!("overlay_{:05}.pgm", row.frame));
            write_gray(&path, &overlay(&rendered, observed)).at(&path)?;
            let path = dir.join(format!("diff_{:05}.pgm", row.frame));
            write_mask(&path, &rendered.xor(observed)?).at(&path)?;
        }
    }
    let mean = rows.iter().map(|r| r.cost.0 as f64).sum::<f64>() / rows.len() as f64;
    println!("tracked {} frames, mean cost {mean:.1} px", rows.len());
    Ok(())
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    estimate: &Path,
    truth: &Path,
    sizes: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let model = body_model(cfg, sizes)?;
    let est = read_trajectory(estimate).at(estimate)?;
    let gt = read_trajectory(truth).at(truth)?;
    let joints = |rows: &[TrajectoryRow]| -> cardbox::Result<Vec<JointPositions>> {
        rows.iter().map(|r| model.joint_positions(&r.posture)).collect()
    };
    let errors = eval_3d_error(&joints(&est).at(estimate)?, &joints(&gt).at(truth)?).at(estimate)?;
    let mut rows: Vec<(Option<usize>, String, f64)> = Vec::new();
    for (k, e) in errors.iter().enumerate() {
        rows.push((None, format!("{}_error_cm", JointPositions::NAMES[k]), *e));
    }
    rows.push((None, "mean_error_cm".into(), errors.iter().sum::<f64>() / 7.0));
    rows.push((
        None,
        "mean_cost".into(),
        est.iter().map(|r| r.cost.0 as f64).sum::<f64>() / est.len() as f64,
    ));
    for r in &est {
        rows.push((Some(r.frame), "cost".into(), r.cost.0 as f64));
    }
    let text = format_stats(&rows);
    match out {
        Some(p) => write_output(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn cmd_compare_resamplers(
    cfg: &RunConfig,
    masks: &Path,
    truth: Option<&Path>,
    runs: Option<usize>,
    sizes: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let runs = runs.unwrap_or(cfg.runs);
    if !(2..=100).contains(&runs) {
        return Err(CliError::Usage(format!("--runs must be between 2 and 100, got {runs}")));
    }
    let model = body_model(cfg, sizes)?;
    let observed = load_masks(masks)?;
    let gt = match truth {
        Some(p) => {
            let rows = read_trajectory(p).at(p)?;
            if rows.len() != observed.len() {
                return Err(CliError::DataAt {
                    context: p.display().to_string(),
                    source: cardbox::Error::LengthMismatch {
                        expected: observed.len(),
                        actual: rows.len(),
                    },
                });
            }
            Some(rows.iter().map(|r| r.posture).collect::<Vec<_>>())
        }
        None => None,
    };
    let cmp = compare_resamplers(
        &model,
        &cfg.camera,
        &cfg.tracker,
        &cfg.d_ref,
        &observed,
        gt.as_deref(),
        runs,
    )?;
    write_output(out, &format_stats(&cmp.stats_rows()))?;
    println!(
        "mean cost drs {:.1} srs {:.1}; mean DOF std drs {:.4} srs {:.4}; drs <= srs on {:.0}% of frames",
        cmp.drs.mean_cost(),
        cmp.srs.mean_cost(),
        cmp.drs.mean_dof_std(),
        cmp.srs.mean_dof_std(),
        100.0 * cmp.drs_not_worse_fraction()
    );
    Ok(())
}
