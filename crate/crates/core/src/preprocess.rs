//! Character image preprocessing: global Otsu binarization, moment-based
//! slant correction, backward-mapped size normalization, 3×3 median
//! filtering and the neighbor-count morphology used for noise removal.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::imgio::{from_gray_thresholded, BinaryImage, GrayImage};

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    /// Side of the normalized square output.
    pub norm_size: usize,
    pub median_passes: usize,
    /// A background pixel with at least this many ink 8-neighbors is filled.
    pub fill_threshold: u8,
    /// Dilate with the 2×2 element before thinning for the end-point count.
    pub dilate_endpoints: bool,
    pub slant_clamp_deg: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            norm_size: 60,
            median_passes: 1,
            fill_threshold: 7,
            dilate_endpoints: false,
            slant_clamp_deg: 45.0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.norm_size < 8 || !self.norm_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "norm_size must be even and >= 8, got {}",
                self.norm_size
            )));
        }
        if !(4..=8).contains(&self.fill_threshold) {
            return Err(Error::InvalidConfig(format!(
                "fill_threshold must be in 4..=8, got {}",
                self.fill_threshold
            )));
        }
        if self.median_passes == 0 {
            return Err(Error::InvalidConfig("median_passes must be >= 1".into()));
        }
        if !(0.0..=60.0).contains(&self.slant_clamp_deg) {
            return Err(Error::InvalidConfig(format!(
                "slant_clamp_deg must be in [0, 60], got {}",
                self.slant_clamp_deg
            )));
        }
        Ok(())
    }

    /// Applies one `key=value` setting. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: &dyn fmt::Display| Error::InvalidConfig(format!("{key}={value}: {e}"));
        match key {
            "norm_size" => self.norm_size = value.parse().map_err(|e| bad(&e))?,
            "median_passes" => self.median_passes = value.parse().map_err(|e| bad(&e))?,
            "fill_threshold" => self.fill_threshold = value.parse().map_err(|e| bad(&e))?,
            "dilate_endpoints" => self.dilate_endpoints = value.parse().map_err(|e| bad(&e))?,
            "slant_clamp_deg" => self.slant_clamp_deg = value.parse().map_err(|e| bad(&e))?,
            _ => return Err(Error::InvalidConfig(format!("unknown key {key}"))),
        }
        Ok(())
    }

    pub const KEYS: [&'static str; 5] = [
        "norm_size",
        "median_passes",
        "fill_threshold",
        "dilate_endpoints",
        "slant_clamp_deg",
    ];

    /// Flat `key=value` lines, one per field, in a fixed order.
    pub fn to_kv(&self) -> String {
        format!(
            "norm_size={}\nmedian_passes={}\nfill_threshold={}\ndilate_endpoints={}\nslant_clamp_deg={}\n",
            self.norm_size,
            self.median_passes,
            self.fill_threshold,
            self.dilate_endpoints,
            self.slant_clamp_deg
        )
    }

    /// Parses `key=value` text; `#` starts a comment, blank lines are skipped.
    /// Keys that are not preprocessing keys are returned untouched so callers
    /// can share one config file between subsystems.
    pub fn from_kv(text: &str) -> Result<(Self, BTreeMap<String, String>)> {
        let mut cfg = Self::default();
        let mut rest = BTreeMap::new();
        for (key, value) in parse_kv(text)? {
            if Self::KEYS.contains(&key.as_str()) {
                cfg.set(&key, &value)?;
            } else {
                rest.insert(key, value);
            }
        }
        cfg.validate()?;
        Ok((cfg, rest))
    }
}

pub(crate) fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected key=value", n + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    hist
}

/// Between-class variance at one threshold, kept as an exact fraction.
///
/// σ²_B·N² = (s0·N − S·n0)² / (n0·n1), with n0/s0 the count/sum of the
/// class at or below the threshold and N/S the totals.
#[derive(Clone, Copy)]
struct Separation {
    num: u128,
    den: u128,
}

impl Separation {
    fn greater_than(&self, other: &Separation) -> bool {
        match (
            self.num.checked_mul(other.den),
            other.num.checked_mul(self.den),
        ) {
            (Some(a), Some(b)) => a > b,
            // only reachable for very large images
            _ => self.num as f64 / self.den as f64 > other.num as f64 / other.den as f64,
        }
    }
}

/// Otsu's global threshold, normalized to `[0, 1]`.
///
/// Returns `k/255` for the smallest `k` maximizing the between-class
/// variance of the split `{v ≤ k}` / `{v > k}`. A constant image has zero
/// variance everywhere and yields its own intensity.
pub fn otsu_threshold(img: &GrayImage) -> f64 {
    let hist = histogram(img);
    let total_n: u64 = hist.iter().sum();
    let total_s: u64 = hist.iter().enumerate().map(|(v, &h)| v as u64 * h).sum();

    let mut best: Option<(usize, Separation)> = None;
    let (mut n0, mut s0) = (0u64, 0u64);
    for (k, &h) in hist.iter().enumerate() {
        n0 += h;
        s0 += k as u64 * h;
        let n1 = total_n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (i128::from(s0) * i128::from(total_n) - i128::from(total_s) * i128::from(n0))
            .unsigned_abs();
        let sep = Separation {
            num: diff * diff,
            den: u128::from(n0) * u128::from(n1),
        };
        if sep.num == 0 {
            continue;
        }
        match &best {
            Some((_, b)) if !sep.greater_than(b) => {}
            _ => best = Some((k, sep)),
        }
    }
    match best {
        Some((k, _)) => k as f64 / 255.0,
        // constant image
        None => img.data()[0] as f64 / 255.0,
    }
}

fn is_constant(img: &GrayImage) -> bool {
    let first = img.data()[0];
    img.data().iter().all(|&v| v == first)
}

/// Otsu binarization with ink-minority polarity: when more than half of the
/// thresholded pixels are foreground, the result is inverted so that 1 is
/// always the (minority) ink. A constant image is all background.
pub fn binarize(img: &GrayImage) -> BinaryImage {
    if is_constant(img) {
        return BinaryImage::zeros(img.width(), img.height());
    }
    let t = otsu_threshold(img);
    let raw = from_gray_thresholded(img, t).expect("otsu threshold lies in [0, 1]");
    if 2 * raw.foreground_count() > raw.data().len() {
        raw.inverted()
    } else {
        raw
    }
}

/// Estimated slant in degrees, positive when the top of the glyph leans to
/// the right.
///
/// Uses the second-order central moments of the ink pixels with `x` to the
/// right and `y` pointing up: `θ = atan(μ11 / μ02)`, clamped to
/// `±clamp_deg`; zero when `μ02 = 0`.
pub fn estimate_slant(bin: &BinaryImage, clamp_deg: f64) -> Result<f64> {
    let n = bin.foreground_count();
    if n == 0 {
        return Err(Error::BlankImage);
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for (r, c) in bin.foreground() {
        sx += c as f64;
        sy -= r as f64;
    }
    let (mx, my) = (sx / n as f64, sy / n as f64);
    let (mut mu11, mut mu02) = (0.0, 0.0);
    for (r, c) in bin.foreground() {
        let dx = c as f64 - mx;
        let dy = -(r as f64) - my;
        mu11 += dx * dy;
        mu02 += dy * dy;
    }
    if mu02 == 0.0 {
        return Ok(0.0);
    }
    let theta = (mu11 / mu02).atan().to_degrees();
    Ok(theta.clamp(-clamp_deg, clamp_deg))
}

/// Output of a horizontal shear: the image plus how many columns the
/// original column 0 moved to the right when the canvas was widened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sheared {
    pub image: BinaryImage,
    pub x_shift: usize,
}

/// Horizontal shear about the vertical center row:
/// `(x, y) → (round(x − (y − y_c)·tan θ), y)` with `y` the row index.
///
/// A positive angle moves rows above the center to the right, producing a
/// positive [`estimate_slant`]. The canvas keeps its height and widens just
/// enough to hold every mapped pixel.
pub fn shear_with_shift(bin: &BinaryImage, theta_deg: f64) -> Result<Sheared> {
    if !(-60.0..=60.0).contains(&theta_deg) || theta_deg.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "shear angle {theta_deg} outside [-60, 60]"
        )));
    }
    let t = theta_deg.to_radians().tan();
    let yc = (bin.height() as f64 - 1.0) / 2.0;
    let mapped: Vec<(usize, i64)> = bin
        .foreground()
        .map(|(r, c)| (r, (c as f64 - (r as f64 - yc) * t).round() as i64))
        .collect();
    let min_x = mapped.iter().map(|p| p.1).min().unwrap_or(0).min(0);
    let max_x = mapped
        .iter()
        .map(|p| p.1)
        .max()
        .unwrap_or(0)
        .max(bin.width() as i64 - 1);
    let width = (max_x - min_x + 1) as usize;
    let mut out = BinaryImage::zeros(width, bin.height());
    for (r, x) in mapped {
        out.set(r, (x - min_x) as usize, true);
    }
    Ok(Sheared {
        image: out,
        x_shift: (-min_x) as usize,
    })
}

pub fn shear(bin: &BinaryImage, theta_deg: f64) -> Result<BinaryImage> {
    shear_with_shift(bin, theta_deg).map(|s| s.image)
}

/// Estimates the slant and shears by the negated estimate.
pub fn correct_slant(bin: &BinaryImage, clamp_deg: f64) -> Result<BinaryImage> {
    let theta = estimate_slant(bin, clamp_deg)?;
    shear(bin, -theta)
}

/// Crops to the ink bounding box and maps it onto a `norm_size` square by
/// linear backward mapping (nearest source pixel, floor rounding).
pub fn resize_normalize(bin: &BinaryImage, norm_size: usize) -> Result<BinaryImage> {
    let bb = bin.bounding_box().ok_or(Error::BlankImage)?;
    let crop = bin.crop(&bb);
    let (h_in, w_in) = (crop.height(), crop.width());
    Ok(BinaryImage::from_fn(norm_size, norm_size, |r, c| {
        crop.get(r * h_in / norm_size, c * w_in / norm_size)
    }))
}

/// 3×3 median filter with replicate padding, applied `passes` times.
pub fn median3x3(img: &GrayImage, passes: usize) -> Result<GrayImage> {
    if passes == 0 {
        return Err(Error::InvalidArgument("median passes must be >= 1".into()));
    }
    let (w, h) = (img.width(), img.height());
    let mut cur = img.clone();
    for _ in 0..passes {
        let src = &cur;
        let next = GrayImage::from_fn(w, h, |r, c| {
            let mut win = [0u8; 9];
            let mut i = 0;
            for dr in [-1isize, 0, 1] {
                let rr = (r as isize + dr).clamp(0, h as isize - 1) as usize;
                for dc in [-1isize, 0, 1] {
                    let cc = (c as isize + dc).clamp(0, w as isize - 1) as usize;
                    win[i] = src.get(rr, cc);
                    i += 1;
                }
            }
            win.sort_unstable();
            win[4]
        });
        cur = next;
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorphMode {
    /// Set a background pixel whose ink 8-neighbor count reaches the fill threshold.
    Fill,
    /// Clear ink pixels with no ink 8-neighbor.
    Clean,
    /// Clear ink pixels with no ink 4-neighbor.
    Remove,
}

const N4: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
const N8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

fn count_neighbors(bin: &BinaryImage, r: usize, c: usize, offsets: &[(isize, isize)]) -> u8 {
    offsets
        .iter()
        .filter(|(dr, dc)| bin.get_or_bg(r as isize + dr, c as isize + dc))
        .count() as u8
}

/// One synchronous pass of fill / clean / remove. Pixels outside the image
/// are background.
pub fn morph(bin: &BinaryImage, mode: MorphMode, fill_threshold: u8) -> BinaryImage {
    BinaryImage::from_fn(bin.width(), bin.height(), |r, c| {
        let v = bin.get(r, c);
        match mode {
            MorphMode::Fill => v || count_neighbors(bin, r, c, &N8) >= fill_threshold,
            MorphMode::Clean => v && count_neighbors(bin, r, c, &N8) > 0,
            MorphMode::Remove => v && count_neighbors(bin, r, c, &N4) > 0,
        }
    })
}

/// Dilation by a 2×2 square of ones anchored at its top-left cell.
pub fn dilate2x2(bin: &BinaryImage) -> BinaryImage {
    BinaryImage::from_fn(bin.width(), bin.height(), |r, c| {
        let (r, c) = (r as isize, c as isize);
        bin.get_or_bg(r, c)
            || bin.get_or_bg(r, c - 1)
            || bin.get_or_bg(r - 1, c)
            || bin.get_or_bg(r - 1, c - 1)
    })
}

/// Every intermediate image of [`preprocess`], in pipeline order.
#[derive(Debug, Clone)]
pub struct Stages {
    pub median: GrayImage,
    pub binary: BinaryImage,
    pub cleaned: BinaryImage,
    pub removed: BinaryImage,
    pub filled: BinaryImage,
    /// Slant-corrected, before size normalization.
    pub deslanted: BinaryImage,
    pub normalized: BinaryImage,
}

impl Stages {
    pub fn named_binary(&self) -> [(&'static str, &BinaryImage); 6] {
        [
            ("2_binary", &self.binary),
            ("3_cleaned", &self.cleaned),
            ("4_removed", &self.removed),
            ("5_filled", &self.filled),
            ("6_deslanted", &self.deslanted),
            ("7_normalized", &self.normalized),
        ]
    }
}

/// median → binarize → clean → remove → fill → slant correction → resize.
pub fn preprocess(img: &GrayImage, cfg: &PreprocessConfig) -> Result<Stages> {
    cfg.validate()?;
    let median = median3x3(img, cfg.median_passes)?;
    let binary = binarize(&median);
    let cleaned = morph(&binary, MorphMode::Clean, cfg.fill_threshold);
    let removed = morph(&cleaned, MorphMode::Remove, cfg.fill_threshold);
    let filled = morph(&removed, MorphMode::Fill, cfg.fill_threshold);
    let deslanted = correct_slant(&filled, cfg.slant_clamp_deg)?;
    let normalized = resize_normalize(&deslanted, cfg.norm_size)?;
    Ok(Stages {
        median,
        binary,
        cleaned,
        removed,
        filled,
        deslanted,
        normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgio::to_gray;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, data: &[u8]) -> GrayImage {
        GrayImage::new(w, h, data.to_vec()).unwrap()
    }

    #[test]
    fn median_figure_patch() {
        let img = gray(3, 3, &[25, 30, 35, 30, 100, 40, 35, 40, 45]);
        let out = median3x3(&img, 1).unwrap();
        assert_eq!(out.get(1, 1), 35);
    }

    #[test]
    fn median_constant_unchanged() {
        let img = GrayImage::filled(6, 4, 77);
        assert_eq!(median3x3(&img, 3).unwrap(), img);
        assert!(median3x3(&img, 0).is_err());
    }

    #[test]
    fn otsu_two_level() {
        let mut data = vec![0u8; 50];
        data.extend(std::iter::repeat_n(255, 50));
        let img = gray(10, 10, &data);
        assert_eq!(otsu_threshold(&img), 0.0);
    }

    #[test]
    fn otsu_constant() {
        assert_eq!(otsu_threshold(&GrayImage::filled(4, 4, 128)), 128.0 / 255.0);
        assert!(binarize(&GrayImage::filled(4, 4, 128)).is_blank());
    }

    fn glyph_on_ground(ink: u8, ground: u8) -> GrayImage {
        // 10×10 with a 10-pixel vertical stroke: 10% coverage
        GrayImage::from_fn(10, 10, |_, c| if c == 4 { ink } else { ground })
    }

    #[test]
    fn binarize_polarity() {
        let dark = binarize(&glyph_on_ground(20, 230));
        assert_eq!(dark.foreground_count(), 10);
        assert!((0..10).all(|r| dark.get(r, 4)));
        let light = binarize(&glyph_on_ground(235, 25));
        assert_eq!(dark, light);
    }

    #[test]
    fn slant_of_vertical_and_horizontal_bars() {
        let v = BinaryImage::from_fn(9, 20, |_, c| c == 4 || c == 5);
        assert_eq!(estimate_slant(&v, 45.0).unwrap(), 0.0);
        let h = BinaryImage::from_fn(20, 5, |r, _| r == 2);
        assert_eq!(estimate_slant(&h, 45.0).unwrap(), 0.0);
        assert!(matches!(
            estimate_slant(&BinaryImage::zeros(3, 3), 45.0),
            Err(Error::BlankImage)
        ));
    }

    #[test]
    fn slant_recovers_known_shear() {
        let bar = BinaryImage::from_fn(30, 60, |r, c| (5..55).contains(&r) && (13..17).contains(&c));
        let slanted = shear(&bar, 15.0).unwrap();
        let est = estimate_slant(&slanted, 45.0).unwrap();
        assert!((est - 15.0).abs() <= 1.0, "{est}");
        let slanted = shear(&bar, -15.0).unwrap();
        let est = estimate_slant(&slanted, 45.0).unwrap();
        assert!((est + 15.0).abs() <= 1.0, "{est}");
    }

    #[test]
    fn slant_is_clamped() {
        let bar = BinaryImage::from_fn(80, 40, |r, c| c + r == 60 || c + r == 61);
        let est = estimate_slant(&bar, 10.0).unwrap();
        assert_eq!(est, 10.0);
    }

    #[test]
    fn shear_identity_and_fixed_point() {
        let img = BinaryImage::from_rows(&["0110", "1001", "0110"]);
        assert_eq!(shear(&img, 0.0).unwrap(), img);
        let dot = BinaryImage::from_rows(&["000", "010", "000"]);
        assert_eq!(shear(&dot, 30.0).unwrap(), dot);
        assert!(shear(&img, 61.0).is_err());
    }

    #[test]
    fn resize_examples() {
        let full = BinaryImage::from_fn(8, 8, |r, c| r == 0 || c == 0 || r == 7 || c == 7 || r == c);
        assert_eq!(resize_normalize(&full, 8).unwrap(), full);

        let mut one = BinaryImage::zeros(5, 5);
        one.set(2, 3, true);
        let out = resize_normalize(&one, 10).unwrap();
        assert_eq!(out.foreground_count(), 100);

        let checker = BinaryImage::from_rows(&["10", "01"]);
        let out = resize_normalize(&checker, 4).unwrap();
        let expected = BinaryImage::from_rows(&["1100", "1100", "0011", "0011"]);
        assert_eq!(out, expected);

        assert!(matches!(
            resize_normalize(&BinaryImage::zeros(4, 4), 8),
            Err(Error::BlankImage)
        ));
    }

    #[test]
    fn morph_examples() {
        let hole = BinaryImage::from_rows(&["111", "101", "111"]);
        assert_eq!(morph(&hole, MorphMode::Fill, 7).foreground_count(), 9);

        let mut single = BinaryImage::zeros(5, 5);
        single.set(2, 2, true);
        assert!(morph(&single, MorphMode::Clean, 7).is_blank());

        let diag = BinaryImage::from_rows(&["000", "010", "001"]);
        let removed = morph(&diag, MorphMode::Remove, 7);
        assert!(removed.is_blank());
        assert_eq!(morph(&diag, MorphMode::Clean, 7), diag);
    }

    #[test]
    fn fill_threshold_seven_vs_eight() {
        // corner notch: hole with 7 ink neighbors
        let img = BinaryImage::from_rows(&["011", "101", "111"]);
        assert!(morph(&img, MorphMode::Fill, 7).get(1, 1));
        assert!(!morph(&img, MorphMode::Fill, 8).get(1, 1));
    }

    #[test]
    fn dilate_examples() {
        let mut img = BinaryImage::zeros(3, 3);
        img.set(0, 0, true);
        let out = dilate2x2(&img);
        let expected = BinaryImage::from_rows(&["110", "110", "000"]);
        assert_eq!(out, expected);
        assert!(dilate2x2(&BinaryImage::zeros(4, 4)).is_blank());
        // no growth past the canvas
        let mut corner = BinaryImage::zeros(3, 3);
        corner.set(2, 2, true);
        assert_eq!(dilate2x2(&corner).foreground_count(), 1);
    }

    #[test]
    fn kv_round_trip() {
        let cfg = PreprocessConfig {
            norm_size: 40,
            median_passes: 2,
            fill_threshold: 8,
            dilate_endpoints: true,
            slant_clamp_deg: 30.0,
        };
        let (back, rest) = PreprocessConfig::from_kv(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
        assert!(rest.is_empty());
        let (_, rest) = PreprocessConfig::from_kv("hidden=70\n# c\nnorm_size=60").unwrap();
        assert_eq!(rest.get("hidden").map(String::as_str), Some("70"));
        assert!(PreprocessConfig::from_kv("norm_size=7").is_err());
        assert!(PreprocessConfig::from_kv("fill_threshold=3").is_err());
        assert!(PreprocessConfig::from_kv("garbage").is_err());
    }

    fn arb_binary(max: usize) -> impl Strategy<Value = BinaryImage> {
        (1..max, 1..max).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::bool::weighted(0.3), w * h)
                .prop_map(move |v| BinaryImage::from_fn(w, h, |r, c| v[r * w + c]))
        })
    }

    fn arb_gray(max: usize) -> impl Strategy<Value = GrayImage> {
        (1..max, 1..max).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h)
                .prop_map(move |v| GrayImage::new(w, h, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn binarize_is_idempotent(img in arb_gray(24)) {
            let once = binarize(&img);
            prop_assert_eq!(binarize(&to_gray(&once)), once);
        }

        #[test]
        fn clean_is_idempotent(img in arb_binary(20)) {
            let once = morph(&img, MorphMode::Clean, 7);
            prop_assert_eq!(morph(&once, MorphMode::Clean, 7), once);
        }

        #[test]
        fn dilation_is_extensive_and_monotone(img in arb_binary(20), extra in any::<u64>()) {
            let out = dilate2x2(&img);
            for (r, c) in img.foreground() {
                prop_assert!(out.get(r, c));
            }
            let mut bigger = img.clone();
            let n = bigger.data().len();
            bigger.set((extra as usize % n) / img.width(), (extra as usize % n) % img.width(), true);
            let out2 = dilate2x2(&bigger);
            for (r, c) in out.foreground() {
                prop_assert!(out2.get(r, c));
            }
        }

        #[test]
        fn threshold_is_monotone(img in arb_gray(16), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let low = from_gray_thresholded(&img, lo).unwrap();
            let high = from_gray_thresholded(&img, hi).unwrap();
            for (r, c) in high.foreground() {
                prop_assert!(low.get(r, c));
            }
        }

        #[test]
        fn shear_zero_and_same_size_resize_are_identity(img in arb_binary(20)) {
            prop_assert_eq!(&shear(&img, 0.0).unwrap(), &img);
            if let Some(bb) = img.bounding_box() {
                let crop = img.crop(&bb);
                if crop.width() == crop.height() {
                    prop_assert_eq!(resize_normalize(&crop, crop.width()).unwrap(), crop);
                }
            }
        }

        #[test]
        fn resize_output_is_square(img in arb_binary(30), half in 4usize..40) {
            if !img.is_blank() {
                let out = resize_normalize(&img, 2 * half).unwrap();
                prop_assert_eq!((out.width(), out.height()), (2 * half, 2 * half));
            }
        }
    }

    /// Random thick strokes, the kind of input slant correction sees.
    fn stroke_image(angle_deg: f64, len: usize, thick: usize, bend: f64) -> BinaryImage {
        let h = len + 10;
        let w = len + 10;
        let t = angle_deg.to_radians().tan();
        let cy = h as f64 / 2.0;
        BinaryImage::from_fn(w, h, |r, c| {
            if r < 5 || r >= 5 + len {
                return false;
            }
            let y = cy - r as f64;
            let center = w as f64 / 2.0 + y * t + bend * (y / len as f64).powi(2) * len as f64;
            (c as f64 - center).abs() < thick as f64 / 2.0
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn slant_correction_leaves_little_residual(
            angle in -30.0f64..30.0,
            len in 30usize..70,
            thick in 2usize..7,
            bend in -0.3f64..0.3,
        ) {
            let img = stroke_image(angle, len, thick, bend);
            let before = estimate_slant(&img, 45.0).unwrap();
            prop_assume!(before.abs() < 45.0);
            let after = estimate_slant(&correct_slant(&img, 45.0).unwrap(), 45.0).unwrap();
            prop_assert!(after.abs() <= 2.0, "before {before}, after {after}");
        }

        #[test]
        fn shear_round_trip_is_near_identity(
            angle in -40.0f64..40.0,
            len in 20usize..60,
            thick in 2usize..8,
        ) {
            let img = stroke_image(0.0, len, thick, 0.2);
            let fwd = shear_with_shift(&img, angle).unwrap();
            let back = shear_with_shift(&fwd.image, -angle).unwrap();
            let shift = (fwd.x_shift + back.x_shift) as i64;
            let orig: std::collections::HashSet<(usize, i64)> =
                img.foreground().map(|(r, c)| (r, c as i64)).collect();
            let round: std::collections::HashSet<(usize, i64)> =
                back.image.foreground().map(|(r, c)| (r, c as i64 - shift)).collect();
            let differ = orig.symmetric_difference(&round).count();
            let total = orig.len();
            prop_assert!(differ as f64 <= 0.05 * total as f64, "differ {differ} of {total}");
        }
    }
}
