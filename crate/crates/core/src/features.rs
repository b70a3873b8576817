//! The fixed 133-value feature vector and min-max normalization.
//!
//! Layout (indices inclusive):
//!
//! | index     | feature                                          |
//! |-----------|--------------------------------------------------|
//! | 0..=29    | upper profile                                    |
//! | 30..=59   | lower profile                                    |
//! | 60..=89   | vertical projection (per column group)           |
//! | 90..=119  | horizontal projection (per row group)            |
//! | 120       | component count / 10                             |
//! | 121       | secondary component count / 10                   |
//! | 122       | main-body end points / 10                        |
//! | 123       | pixel ratio (ink / background)                   |
//! | 124       | height / width of the ink before resizing        |
//! | 125, 126  | secondary union height, width / norm size        |
//! | 127       | secondary ink / background                       |
//! | 128       | secondary union height / width                   |
//! | 129, 130  | secondary centroid dx, dy                        |
//! | 131, 132  | secondary above / below flags                    |

use std::ops::Index;

use crate::components::{label_components, secondary_summary, ComponentSet, Connectivity};
use crate::error::{Error, Result};
use crate::imgio::BinaryImage;
use crate::preprocess::dilate2x2;

pub const FEATURE_LEN: usize = 133;
pub const BINS: usize = 30;

pub mod index {
    pub const UPPER: usize = 0;
    pub const LOWER: usize = 30;
    pub const VERTICAL: usize = 60;
    pub const HORIZONTAL: usize = 90;
    pub const COMPONENTS: usize = 120;
    pub const SECONDARIES: usize = 121;
    pub const END_POINTS: usize = 122;
    pub const PIXEL_RATIO: usize = 123;
    pub const ASPECT: usize = 124;
    pub const SEC_HEIGHT: usize = 125;
    pub const SEC_WIDTH: usize = 126;
    pub const SEC_PIXEL_RATIO: usize = 127;
    pub const SEC_ASPECT: usize = 128;
    pub const SEC_DX: usize = 129;
    pub const SEC_DY: usize = 130;
    pub const ABOVE: usize = 131;
    pub const BELOW: usize = 132;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector([f64; FEATURE_LEN]);

impl FeatureVector {
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; FEATURE_LEN] = values.try_into().map_err(|_| Error::DimensionMismatch {
            expected: FEATURE_LEN,
            got: values.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        FEATURE_LEN
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Index<usize> for FeatureVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSide {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Ink per column group.
    Vertical,
    /// Ink per row group.
    Horizontal,
}

fn check_square(bin: &BinaryImage, bins: usize) -> Result<usize> {
    let n = bin.width();
    if bin.height() != n || bins == 0 || n == 0 || !n.is_multiple_of(bins) {
        return Err(Error::InvalidArgument(format!(
            "expected a square image whose side is a multiple of {bins}, got {}x{}",
            bin.width(),
            bin.height()
        )));
    }
    Ok(n)
}

/// Distance from the top (or bottom) edge to the nearest ink pixel in each
/// column group, over the image side. Empty groups read 1.0.
pub fn profile(bin: &BinaryImage, side: ProfileSide, bins: usize) -> Result<Vec<f64>> {
    let n = check_square(bin, bins)?;
    let group = n / bins;
    Ok((0..bins)
        .map(|b| {
            let cols = b * group..(b + 1) * group;
            let dist = cols
                .filter_map(|c| {
                    let mut rows = 0..n;
                    match side {
                        ProfileSide::Upper => rows.find(|&r| bin.get(r, c)),
                        ProfileSide::Lower => rows.rev().find(|&r| bin.get(r, c)).map(|r| n - 1 - r),
                    }
                })
                .min();
            dist.map_or(1.0, |d| d as f64 / n as f64)
        })
        .collect())
}

/// Ink density per column (vertical) or row (horizontal) group, in `[0, 1]`.
pub fn projection(bin: &BinaryImage, axis: Axis, bins: usize) -> Result<Vec<f64>> {
    let n = check_square(bin, bins)?;
    let group = n / bins;
    let mut counts = vec![0usize; bins];
    for (r, c) in bin.foreground() {
        let line = match axis {
            Axis::Vertical => c,
            Axis::Horizontal => r,
        };
        counts[line / group] += 1;
    }
    let denom = (n * group) as f64;
    Ok(counts.into_iter().map(|k| k as f64 / denom).collect())
}

/// Zhang–Suen thinning to a fixpoint. Pixels outside the image are background.
pub fn zhang_suen_thin(bin: &BinaryImage) -> BinaryImage {
    let mut img = bin.clone();
    let (w, h) = (img.width(), img.height());
    // P2..P9 clockwise from north
    const RING: [(isize, isize); 8] = [
        (-1, 0),
        (-1, 1),
        (0, 1),
        (1, 1),
        (1, 0),
        (1, -1),
        (0, -1),
        (-1, -1),
    ];
    let mut doomed = Vec::new();
    loop {
        let mut changed = false;
        for step in 0..2 {
            doomed.clear();
            for r in 0..h {
                for c in 0..w {
                    if !img.get(r, c) {
                        continue;
                    }
                    let p: [bool; 8] = std::array::from_fn(|i| {
                        img.get_or_bg(r as isize + RING[i].0, c as isize + RING[i].1)
                    });
                    let b = p.iter().filter(|&&v| v).count();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
                    if a != 1 {
                        continue;
                    }
                    // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
                    let ok = if step == 0 {
                        !(p[0] && p[2] && p[4]) && !(p[2] && p[4] && p[6])
                    } else {
                        !(p[0] && p[2] && p[6]) && !(p[0] && p[4] && p[6])
                    };
                    if ok {
                        doomed.push((r, c));
                    }
                }
            }
            for &(r, c) in &doomed {
                img.set(r, c, false);
            }
            changed |= !doomed.is_empty();
        }
        if !changed {
            return img;
        }
    }
}

fn count_degree_one(bin: &BinaryImage) -> usize {
    bin.foreground()
        .filter(|&(r, c)| {
            let mut n = 0;
            for dr in -1..=1isize {
                for dc in -1..=1isize {
                    if (dr, dc) != (0, 0) && bin.get_or_bg(r as isize + dr, c as isize + dc) {
                        n += 1;
                    }
                }
            }
            n == 1
        })
        .count()
}

/// Thins the main body (largest 8-connected component) and counts skeleton
/// pixels with exactly one ink 8-neighbor. Blank images have none.
pub fn count_end_points(bin: &BinaryImage) -> usize {
    let cs = label_components(bin, Connectivity::Eight);
    match cs.main_id() {
        Some(main) => count_degree_one(&zhang_suen_thin(&cs.mask(main))),
        None => 0,
    }
}

/// Ink pixels over background pixels.
pub fn pixel_ratio(bin: &BinaryImage) -> Result<f64> {
    let fg = bin.foreground_count();
    let bg = bin.data().len() - fg;
    if bg == 0 {
        return Err(Error::RatioUndefined);
    }
    Ok(fg as f64 / bg as f64)
}

/// Height over width of the ink bounding box.
pub fn aspect_ratio(bin: &BinaryImage) -> Result<f64> {
    let bb = bin.bounding_box().ok_or(Error::BlankImage)?;
    Ok(bb.height() as f64 / bb.width() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExtractOptions {
    /// Dilate by the 2×2 element before counting end points.
    pub dilate_endpoints: bool,
}

/// Assembles the feature vector.
///
/// `pre_resize` is the slant-corrected image before size normalization and
/// only feeds the aspect ratio; everything else comes from `normalized` and
/// its component set `cs`.
pub fn extract(
    pre_resize: &BinaryImage,
    normalized: &BinaryImage,
    cs: &ComponentSet,
    opts: ExtractOptions,
) -> Result<FeatureVector> {
    let n = check_square(normalized, BINS)?;
    if cs.width() != n || cs.height() != n {
        return Err(Error::InvalidArgument(
            "component set was not computed on the normalized image".into(),
        ));
    }
    let mut v = [0.0; FEATURE_LEN];
    let blocks = [
        (index::UPPER, profile(normalized, ProfileSide::Upper, BINS)?),
        (index::LOWER, profile(normalized, ProfileSide::Lower, BINS)?),
        (index::VERTICAL, projection(normalized, Axis::Vertical, BINS)?),
        (index::HORIZONTAL, projection(normalized, Axis::Horizontal, BINS)?),
    ];
    for (start, values) in blocks {
        v[start..start + BINS].copy_from_slice(&values);
    }

    let end_points = if opts.dilate_endpoints {
        count_end_points(&dilate2x2(normalized))
    } else {
        count_end_points(normalized)
    };
    let secondaries = cs.secondary_ids().len();
    v[index::COMPONENTS] = cs.count() as f64 / 10.0;
    v[index::SECONDARIES] = secondaries as f64 / 10.0;
    v[index::END_POINTS] = end_points as f64 / 10.0;
    v[index::PIXEL_RATIO] = pixel_ratio(normalized)?;
    v[index::ASPECT] = aspect_ratio(pre_resize)?;

    let s = secondary_summary(cs)?;
    if secondaries > 0 {
        let background = (n * n - normalized.foreground_count()) as f64;
        v[index::SEC_HEIGHT] = s.height as f64 / n as f64;
        v[index::SEC_WIDTH] = s.width as f64 / n as f64;
        v[index::SEC_PIXEL_RATIO] = s.area as f64 / background;
        v[index::SEC_ASPECT] = s.height as f64 / s.width as f64;
        v[index::SEC_DX] = s.dx;
        v[index::SEC_DY] = s.dy;
        v[index::ABOVE] = f64::from(u8::from(s.above));
        v[index::BELOW] = f64::from(u8::from(s.below));
    }
    Ok(FeatureVector(v))
}

/// Per-dimension training minima and maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormStats {
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>) -> Result<Self> {
        if mins.len() != maxs.len() {
            return Err(Error::DimensionMismatch {
                expected: mins.len(),
                got: maxs.len(),
            });
        }
        if let Some(i) = (0..mins.len()).find(|&i| mins[i].is_nan() || maxs[i].is_nan() || mins[i] > maxs[i]) {
            return Err(Error::InvalidArgument(format!(
                "norm stats: min > max at dimension {i}"
            )));
        }
        Ok(Self { mins, maxs })
    }

    /// Identity stats over `[0, 1]` for `len` dimensions.
    pub fn unit(len: usize) -> Self {
        Self {
            mins: vec![0.0; len],
            maxs: vec![1.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.mins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mins.is_empty()
    }

    /// `(v − min) / (max − min)` clamped to `[0, 1]`; constant dimensions map to 0.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: v.len(),
            });
        }
        Ok(v.iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(&x, (&lo, &hi))| {
                if hi > lo {
                    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect())
    }
}

pub fn fit_minmax<'a, I>(vectors: I) -> Result<NormStats>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut it = vectors.into_iter();
    let first = it.next().ok_or(Error::EmptyBatch)?;
    let mut mins = first.to_vec();
    let mut maxs = first.to_vec();
    for v in it {
        if v.len() != mins.len() {
            return Err(Error::DimensionMismatch {
                expected: mins.len(),
                got: v.len(),
            });
        }
        for (i, &x) in v.iter().enumerate() {
            mins[i] = mins[i].min(x);
            maxs[i] = maxs[i].max(x);
        }
    }
    NormStats::new(mins, maxs)
}

pub fn apply_minmax(v: &FeatureVector, stats: &NormStats) -> Result<FeatureVector> {
    FeatureVector::from_slice(&stats.apply(v.as_slice())?)
}
