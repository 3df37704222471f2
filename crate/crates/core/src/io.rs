//! File formats: PGM/PNG images, numbered frame directories, parameter
//! lines and the trajectory / joint / statistics CSVs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::body::{JointPositions, PostureParams, SizeParams, NUM_DOF};
use crate::error::{Error, Result};
use crate::mask::SilhouetteMask;
use crate::matching::Cost;
use crate::vision::GrayImage;

/// Encodes an 8-bit binary PGM (P5).
pub fn encode_pgm(width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

/// Decodes an 8-bit P5 PGM. Values are rescaled to 0..=255 when maxval < 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(Error::Format("only binary P5 PGM is supported".into()));
    }
    let mut num = |what: &str| -> Result<usize> {
        token()?
            .parse()
            .map_err(|_| Error::Format(format!("bad PGM {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let n = width * height;
    let raster = bytes
        .get(start..start + n)
        .ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
    let data = if maxval == 255 {
        raster.to_vec()
    } else {
        raster
            .iter()
            .map(|&v| ((v as usize).min(maxval) * 255 / maxval) as u8)
            .collect()
    };
    GrayImage::new(width, height, data)
}

/// Reads a PGM or PNG as brightness; colour PNGs go through BT.601 luma.
pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P5") {
        return decode_pgm(&bytes);
    }
    let img = image::load_from_memory(&bytes)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        image::DynamicImage::ImageLuma8(g) => GrayImage::new(w, h, g.into_raw()),
        other => GrayImage::from_rgb(w, h, &other.to_rgb8().into_raw()),
    }
}

pub fn write_gray(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img.width(), img.height(), img.data()))?;
    Ok(())
}

pub fn write_mask(path: &Path, mask: &SilhouetteMask) -> Result<()> {
    fs::write(path, encode_pgm(mask.width(), mask.height(), &mask.to_bytes()))?;
    Ok(())
}

/// Any nonzero pixel is foreground.
pub fn read_mask(path: &Path) -> Result<SilhouetteMask> {
    let img = read_gray(path)?;
    SilhouetteMask::from_bytes(img.width(), img.height(), img.data())
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.pgm")
}

/// `frame_NNNNN.pgm` / `frame_NNNNN.png` files of a directory, in frame order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some((stem, ext)) = name.rsplit_once('.') else {
            continue;
        };
        let ext = ext.to_ascii_lowercase();
        if ext != "pgm" && ext != "png" {
            continue;
        }
        if let Some(digits) = stem.strip_prefix("frame_") {
            if digits.len() == 5 && digits.bytes().all(|b| b.is_ascii_digit()) {
                frames.push((digits.parse::<usize>().unwrap(), path));
            }
        }
    }
    frames.sort();
    Ok(frames.into_iter().map(|(_, p)| p).collect())
}

/// Parses one line of comma-separated decimals.
pub fn parse_values(line: &str) -> Result<Vec<f64>> {
    line.trim()
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("not a number: {t:?}")))
        })
        .collect()
}

fn first_line(text: &str) -> &str {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("")
}

pub fn parse_sizes(text: &str) -> Result<SizeParams> {
    SizeParams::from_slice(&parse_values(first_line(text))?)
}

pub fn parse_posture(text: &str) -> Result<PostureParams> {
    let p = PostureParams::from_slice(&parse_values(first_line(text))?)?;
    if let Some((i, v)) = p.0.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinitePosture { index: i + 1, value: *v });
    }
    Ok(p)
}

pub fn read_sizes(path: &Path) -> Result<SizeParams> {
    parse_sizes(&fs::read_to_string(path)?)
}

pub fn write_sizes(path: &Path, sizes: &SizeParams) -> Result<()> {
    fs::write(path, format!("{sizes}\n"))?;
    Ok(())
}

/// One trajectory row: the posture estimate for a frame and its cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub frame: usize,
    pub posture: PostureParams,
    pub cost: Cost,
}

pub fn trajectory_header() -> String {
    let mut h = String::from("frame");
    for i in 1..=NUM_DOF {
        write!(h, ",d{i}").unwrap();
    }
    h.push_str(",cost");
    h
}

/// CSV with header `frame,d1,...,d12,cost`. Floats use the shortest
/// representation that round-trips exactly.
pub fn format_trajectory(rows: &[TrajectoryRow]) -> String {
    let mut out = trajectory_header();
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{}", r.frame, r.posture, r.cost.0).unwrap();
    }
    out
}

pub fn parse_trajectory(text: &str) -> Result<Vec<TrajectoryRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == trajectory_header() => {}
        _ => return Err(Error::Format("missing trajectory header".into())),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != NUM_DOF + 2 {
                return Err(Error::Format(format!(
                    "trajectory row {} has {} fields, expected {}",
                    i + 1,
                    fields.len(),
                    NUM_DOF + 2
                )));
            }
            let bad = |f: &str| Error::Format(format!("trajectory row {}: bad value {f:?}", i + 1));
            let frame = fields[0].parse().map_err(|_| bad(fields[0]))?;
            let mut values = [0.0; NUM_DOF];
            for (v, f) in values.iter_mut().zip(&fields[1..=NUM_DOF]) {
                *v = f.parse().map_err(|_| bad(f))?;
            }
            let cost = fields[NUM_DOF + 1].parse().map_err(|_| bad(fields[NUM_DOF + 1]))?;
            Ok(TrajectoryRow {
                frame,
                posture: PostureParams(values),
                cost: Cost(cost),
            })
        })
        .collect()
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    parse_trajectory(&fs::read_to_string(path)?)
}

pub fn joints_header() -> String {
    let mut h = String::from("frame");
    for name in JointPositions::NAMES {
        for axis in ["x", "y", "z"] {
            write!(h, ",{name}_{axis}").unwrap();
        }
    }
    h
}

pub fn format_joints(joints: &[JointPositions]) -> String {
    let mut out = joints_header();
    out.push('\n');
    for (frame, j) in joints.iter().enumerate() {
        write!(out, "{frame}").unwrap();
        for p in j.as_array() {
            write!(out, ",{},{},{}", p.x, p.y, p.z).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Long-format statistics rows: `frame,metric,value`. A `None` frame marks a
/// whole-sequence value and is written as `all`.
pub fn format_stats(rows: &[(Option<usize>, String, f64)]) -> String {
    let mut out = String::from("frame,metric,value\n");
    for (frame, metric, value) in rows {
        match frame {
            Some(f) => writeln!(out, "{f},{metric},{value}").unwrap(),
            None => writeln!(out, "all,{metric},{value}").unwrap(),
        }
    }
    out
}
