//! Bit-packed binary silhouettes.

use crate::error::{Error, Result};

/// Binary image, one bit per pixel, rows padded to whole 64-bit words.
/// Padding bits are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SilhouetteMask {
    width: usize,
    height: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl std::fmt::Debug for SilhouetteMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "SilhouetteMask({}x{}, {} set)",
            self.width,
            self.height,
            self.count_ones()
        )
    }
}

impl SilhouetteMask {
    pub fn new(width: usize, height: usize) -> Self {
        let words_per_row = width.div_ceil(64);
        SilhouetteMask {
            width,
            height,
            words_per_row,
            bits: vec![0; words_per_row * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
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

    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        (self.bits[y * self.words_per_row + x / 64] >> (x % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        let w = &mut self.bits[y * self.words_per_row + x / 64];
        let bit = 1u64 << (x % 64);
        if value {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    pub fn clear(&mut self) {
        self.bits.fill(0);
    }

    /// Sets pixels `x0..x1` of row `y`. Callers guarantee `x0 <= x1 <= width`.
    #[inline]
    pub fn fill_span(&mut self, y: usize, x0: usize, x1: usize) {
        debug_assert!(x0 <= x1 && x1 <= self.width);
        if x0 >= x1 {
            return;
        }
        let row = &mut self.bits[y * self.words_per_row..(y + 1) * self.words_per_row];
        let (w0, w1) = (x0 / 64, (x1 - 1) / 64);
        let lo_mask = !0u64 << (x0 % 64);
        let hi_mask = !0u64 >> (63 - (x1 - 1) % 64);
        if w0 == w1 {
            row[w0] |= lo_mask & hi_mask;
        } else {
            row[w0] |= lo_mask;
            for w in &mut row[w0 + 1..w1] {
                *w = !0;
            }
            row[w1] |= hi_mask;
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    fn check_dims(&self, other: &SilhouetteMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    /// Number of pixels where the two masks differ.
    pub fn xor_count(&self, other: &SilhouetteMask) -> Result<u64> {
        self.check_dims(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum())
    }

    pub fn xor(&self, other: &SilhouetteMask) -> Result<SilhouetteMask> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (a, b) in out.bits.iter_mut().zip(&other.bits) {
            *a ^= b;
        }
        Ok(out)
    }

    pub fn or(&self, other: &SilhouetteMask) -> Result<SilhouetteMask> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (a, b) in out.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(out)
    }

    pub fn complement(&self) -> SilhouetteMask {
        Self::from_fn(self.width, self.height, |x, y| !self.get(x, y))
    }

    /// Mean (x, y) of the set pixel centres, `None` for an empty mask.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0u64);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// 8-bit values, 0 for background and 255 for foreground, row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(if self.get(x, y) { 255 } else { 0 });
            }
        }
        out
    }

    /// Any nonzero byte is foreground.
    pub fn from_bytes(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self::from_fn(width, height, |x, y| data[y * width + x] != 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_masks_cost_nothing() {
        let m = SilhouetteMask::from_fn(70, 9, |x, y| (x * 7 + y) % 3 == 0);
        assert_eq!(m.xor_count(&m).unwrap(), 0);
    }

    #[test]
    fn complement_differs_everywhere() {
        let m = SilhouetteMask::from_fn(320, 240, |x, y| (x ^ y) & 4 == 0);
        assert_eq!(m.xor_count(&m.complement()).unwrap(), 76800);
    }

    #[test]
    fn dimension_mismatch() {
        let a = SilhouetteMask::new(10, 10);
        let b = SilhouetteMask::new(10, 11);
        assert!(matches!(a.xor_count(&b), Err(Error::DimensionMismatch { .. })));
    }

    proptest! {
        #[test]
        fn fill_span_matches_per_pixel(w in 1usize..200, a in 0usize..200, b in 0usize..200) {
            let (x0, x1) = (a.min(b).min(w), a.max(b).min(w));
            let mut m = SilhouetteMask::new(w, 2);
            m.fill_span(1, x0, x1);
            let expected = SilhouetteMask::from_fn(w, 2, |x, y| y == 1 && x >= x0 && x < x1);
            prop_assert_eq!(m, expected);
        }

        #[test]
        fn hamming_metric(seed in any::<u64>()) {
            let mut s = seed;
            let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 33) & 1 == 1 };
            let a = SilhouetteMask::from_fn(67, 5, |_, _| next());
            let b = SilhouetteMask::from_fn(67, 5, |_, _| next());
            let c = SilhouetteMask::from_fn(67, 5, |_, _| next());
            prop_assert_eq!(a.xor_count(&b).unwrap(), b.xor_count(&a).unwrap());
            prop_assert!(a.xor_count(&c).unwrap() <= a.xor_count(&b).unwrap() + b.xor_count(&c).unwrap());
            prop_assert_eq!(a.xor(&b).unwrap().count_ones(), a.xor_count(&b).unwrap());
        }
    }
}
