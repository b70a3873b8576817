//! Raster containers and PGM (P2/P5) I/O.
//!
//! Foreground convention throughout the crate: in a [`BinaryImage`] a value
//! of 1 is ink, 0 is background.

use std::fmt::Write as _;

use crate::error::{Error, PgmErrorKind, Result};

/// An 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image dimensions must be > 0".into()));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be > 0");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be > 0");
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.data[row * self.width + col] = value;
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl BoundingBox {
    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }

    pub fn width(&self) -> usize {
        self.right - self.left + 1
    }

    pub(crate) fn point(row: usize, col: usize) -> Self {
        Self {
            top: row,
            left: col,
            bottom: row,
            right: col,
        }
    }

    pub(crate) fn include(&mut self, row: usize, col: usize) {
        self.top = self.top.min(row);
        self.bottom = self.bottom.max(row);
        self.left = self.left.min(col);
        self.right = self.right.max(col);
    }

    pub(crate) fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            top: self.top.min(other.top),
            left: self.left.min(other.left),
            bottom: self.bottom.max(other.bottom),
            right: self.right.max(other.right),
        }
    }
}

/// A two-valued raster, row-major, values in {0, 1} with 1 = ink.
///
/// Zero-sized images are allowed here (unlike [`GrayImage`]) so that
/// intermediate results such as an empty crop can be represented.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidArgument(format!(
                "binary image value {bad} is not 0 or 1"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c) as u8);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Builds an image from rows of `0`/`1` (anything else counts as ink).
    /// Handy for small literal fixtures.
    pub fn from_rows(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        Self::from_fn(width, height, |r, c| rows[r].as_bytes()[c] != b'0' && rows[r].as_bytes()[c] != b'.')
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] != 0
    }

    /// Bounds-checked access with signed coordinates; outside counts as background.
    #[inline]
    pub fn get_or_bg(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && self.get(row as usize, col as usize)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value as u8;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_blank(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Iterates `(row, col)` of every foreground pixel in raster order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| (i / w, i % w))
    }

    /// Bounding box of all foreground pixels, `None` when blank.
    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let mut it = self.foreground();
        let (r0, c0) = it.next()?;
        let mut bb = BoundingBox::point(r0, c0);
        for (r, c) in it {
            bb.include(r, c);
        }
        Some(bb)
    }

    pub fn crop(&self, bb: &BoundingBox) -> BinaryImage {
        BinaryImage::from_fn(bb.width(), bb.height(), |r, c| {
            self.get(bb.top + r, bb.left + c)
        })
    }

    pub fn inverted(&self) -> BinaryImage {
        BinaryImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }
}

/// Embeds a binary image as grayscale: ink 1 → 255, background 0 → 0.
pub fn to_gray(bin: &BinaryImage) -> GrayImage {
    GrayImage {
        width: bin.width,
        height: bin.height,
        data: bin.data.iter().map(|&v| if v != 0 { 255 } else { 0 }).collect(),
    }
}

/// Raw global threshold: a pixel becomes 1 iff `intensity / 255 > t01`.
///
/// No polarity correction happens here; see [`crate::preprocess::binarize`].
pub fn from_gray_thresholded(img: &GrayImage, t01: f64) -> Result<BinaryImage> {
    if !(0.0..=1.0).contains(&t01) {
        return Err(Error::InvalidArgument(format!(
            "threshold {t01} outside [0, 1]"
        )));
    }
    Ok(BinaryImage {
        width: img.width,
        height: img.height,
        data: img
            .data
            .iter()
            .map(|&v| (f64::from(v) / 255.0 > t01) as u8)
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmMode {
    /// `P2`, plain text samples.
    Ascii,
    /// `P5`, one byte per sample.
    Binary,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&b) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn uint(&mut self) -> Result<u32> {
        self.skip_ws_and_comments();
        let start = self.pos;
        if start >= self.bytes.len() {
            return Err(Error::pgm(start, PgmErrorKind::Truncated));
        }
        let mut value: u32 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u32::from(b - b'0')))
                .ok_or_else(|| Error::pgm(start, PgmErrorKind::BadInteger))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::pgm(start, PgmErrorKind::BadInteger));
        }
        Ok(value)
    }
}

fn scale_to_255(value: u32, maxval: u32) -> u8 {
    if maxval == 255 {
        return value as u8;
    }
    // round-half-up of value * 255 / maxval
    ((2 * value * 255 + maxval) / (2 * maxval)) as u8
}

/// Parses a P2 or P5 PGM with maxval ≤ 255. Samples are rescaled to 0..=255.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return Err(Error::pgm(0, PgmErrorKind::BadMagic)),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    match bytes.get(2) {
        Some(b) if b.is_ascii_whitespace() || *b == b'#' => {}
        None => return Err(Error::pgm(2, PgmErrorKind::Truncated)),
        _ => return Err(Error::pgm(0, PgmErrorKind::BadMagic)),
    }

    let dims_at = cur.pos;
    let width = cur.uint()? as usize;
    let height = cur.uint()? as usize;
    if width == 0 || height == 0 {
        return Err(Error::pgm(dims_at, PgmErrorKind::ZeroDimension));
    }
    cur.skip_ws_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.uint()?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::pgm(maxval_at, PgmErrorKind::BadMaxval(maxval)));
    }

    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::pgm(dims_at, PgmErrorKind::BadInteger))?;
    let mut data = Vec::with_capacity(n.min(1 << 24));
    if binary {
        // exactly one whitespace byte separates maxval from the raster
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(Error::pgm(cur.pos, PgmErrorKind::Truncated)),
        }
        let raster = &bytes[cur.pos..];
        if raster.len() < n {
            return Err(Error::pgm(bytes.len(), PgmErrorKind::Truncated));
        }
        for (i, &b) in raster[..n].iter().enumerate() {
            let v = u32::from(b);
            if v > maxval {
                return Err(Error::pgm(
                    cur.pos + i,
                    PgmErrorKind::SampleOutOfRange { value: v, maxval },
                ));
            }
            data.push(scale_to_255(v, maxval));
        }
    } else {
        for _ in 0..n {
            cur.skip_ws_and_comments();
            let at = cur.pos;
            let v = cur.uint()?;
            if v > maxval {
                return Err(Error::pgm(
                    at,
                    PgmErrorKind::SampleOutOfRange { value: v, maxval },
                ));
            }
            data.push(scale_to_255(v, maxval));
        }
    }
    GrayImage::new(width, height, data)
}

/// Serializes with maxval 255. Plain output keeps lines ≤ 70 characters and
/// starts every raster row on a new line.
pub fn write_pgm(img: &GrayImage, mode: PgmMode) -> Vec<u8> {
    let magic = match mode {
        PgmMode::Ascii => "P2",
        PgmMode::Binary => "P5",
    };
    let header = format!("{magic}\n{} {}\n255\n", img.width, img.height);
    match mode {
        PgmMode::Binary => {
            let mut out = header.into_bytes();
            out.extend_from_slice(&img.data);
            out
        }
        PgmMode::Ascii => {
            let mut out = header;
            for row in img.data.chunks(img.width) {
                let mut line_len = 0;
                for (i, v) in row.iter().enumerate() {
                    let digits = if *v >= 100 {
                        3
                    } else if *v >= 10 {
                        2
                    } else {
                        1
                    };
                    if i > 0 {
                        if line_len + 1 + digits > 70 {
                            out.push('\n');
                            line_len = 0;
                        } else {
                            out.push(' ');
                            line_len += 1;
                        }
                    }
                    let _ = write!(out, "{v}");
                    line_len += digits;
                }
                out.push('\n');
            }
            out.into_bytes()
        }
    }
}
