//! Static background model and per-pixel foreground thresholding.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::SilhouetteMask;

/// Default variance floor, in brightness levels.
pub const DEFAULT_SIGMA_FLOOR: f64 = 2.0;

const MAGIC: &[u8; 8] = b"CBXBGM01";

/// 8-bit brightness image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Format(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Converts packed RGB to brightness with ITU-R BT.601 luma weights.
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != 3 * width * height {
            return Err(Error::LengthMismatch {
                expected: 3 * width * height,
                actual: rgb.len(),
            });
        }
        let data = rgb
            .chunks_exact(3)
            .map(|c| {
                let y = 0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64;
                y.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

/// Per-pixel brightness mean I_B and standard deviation σ_B of the empty scene.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    mean: Vec<f64>,
    stddev: Vec<f64>,
    frame_count: usize,
}

impl BackgroundModel {
    pub fn from_parts(
        width: usize,
        height: usize,
        mean: Vec<f64>,
        stddev: Vec<f64>,
        frame_count: usize,
    ) -> Result<Self> {
        let n = width * height;
        for v in [&mean, &stddev] {
            if v.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: v.len(),
                });
            }
        }
        if frame_count < 2 {
            return Err(Error::TooFewFrames(frame_count));
        }
        if let Some(s) = stddev.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::Format(format!("invalid standard deviation {s}")));
        }
        Ok(BackgroundModel {
            width,
            height,
            mean,
            stddev,
            frame_count,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn stddev(&self) -> &[f64] {
        &self.stddev
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [self.width, self.height, self.frame_count] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        for v in self.mean.iter().chain(&self.stddev) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a background model file".into()));
        }
        let mut header = [0u32; 3];
        for h in &mut header {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *h = u32::from_le_bytes(b);
        }
        let [width, height, frame_count] = header.map(|v| v as usize);
        let n = width
            .checked_mul(height)
            .filter(|&n| n > 0 && n <= 1 << 28)
            .ok_or_else(|| Error::Format(format!("bad dimensions {width}x{height}")))?;
        let mut read_plane = || -> Result<Vec<f64>> {
            let mut buf = vec![0u8; n * 8];
            r.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let mean = read_plane()?;
        let stddev = read_plane()?;
        Self::from_parts(width, height, mean, stddev, frame_count)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Learns the background from a stack of empty-scene frames: per-pixel
/// sample mean and population standard deviation (divide by n), accumulated
/// in one streaming pass.
pub fn learn_background(frames: &[GrayImage]) -> Result<BackgroundModel> {
    if frames.len() < 2 {
        return Err(Error::TooFewFrames(frames.len()));
    }
    let dims = frames[0].dims();
    let n = dims.0 * dims.1;
    let mut mean = vec![0.0f64; n];
    let mut m2 = vec![0.0f64; n];
    for (k, frame) in frames.iter().enumerate() {
        if frame.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: frame.dims(),
            });
        }
        let count = (k + 1) as f64;
        for ((m, s), &px) in mean.iter_mut().zip(m2.iter_mut()).zip(&frame.data) {
            let x = px as f64;
            let delta = x - *m;
            *m += delta / count;
            *s += delta * (x - *m);
        }
    }
    let count = frames.len() as f64;
    let stddev = m2.into_iter().map(|s| (s.max(0.0) / count).sqrt()).collect();
    BackgroundModel::from_parts(dims.0, dims.1, mean, stddev, frames.len())
}

/// Thresholds a frame against the background: a pixel is background iff
/// |I_B − I_t| < 2·max(σ_B, sigma_floor), foreground otherwise.
pub fn segment(bg: &BackgroundModel, frame: &GrayImage, sigma_floor: f64) -> Result<SilhouetteMask> {
    if bg.dims() != frame.dims() {
        return Err(Error::DimensionMismatch {
            expected: bg.dims(),
            actual: frame.dims(),
        });
    }
    if !(sigma_floor >= 0.0 && sigma_floor.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "sigma_floor",
            value: sigma_floor,
        });
    }
    let (w, h) = frame.dims();
    let mut mask = SilhouetteMask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let diff = (bg.mean[i] - frame.data[i] as f64).abs();
            if !(diff < 2.0 * bg.stddev[i].max(sigma_floor)) {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}
