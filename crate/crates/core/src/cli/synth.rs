//! Procedural glyph corpus for smoke and end-to-end tests.
//!
//! Each class is a stroke skeleton plus optional dots in a unit box
//! (`u` right, `v` down). Samples are rendered with a random scale, shear,
//! translation and ink and background tones, then salted with 1% impulse noise.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::augment_noisy;
use crate::error::{Error, Result};
use crate::imgio::{write_pgm, GrayImage, PgmMode};

const CANVAS_W: usize = 128;
const CANVAS_H: usize = 120;
/// Pixel size of the unit box at scale 1.
const BOX: f64 = 64.0;
const HALF_STROKE: f64 = 0.045;
const DOT_RADIUS: f64 = 0.065;
pub const NOISE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Default)]
pub struct Archetype {
    pub name: &'static str,
    pub strokes: Vec<Vec<(f64, f64)>>,
    pub dots: Vec<(f64, f64)>,
    /// Short detached strokes (kaf's inner bar): secondaries that are not dots.
    pub marks: Vec<Vec<(f64, f64)>>,
}

/// Elliptic arc, angles in degrees with 0 = right and 90 = down.
fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from: f64, to: f64) -> Vec<(f64, f64)> {
    let steps = (((to - from).abs() / 10.0).ceil() as usize).max(2);
    (0..=steps)
        .map(|i| {
            let t = (from + (to - from) * i as f64 / steps as f64) * PI / 180.0;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

fn line(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    points.to_vec()
}

fn glyph(name: &'static str, strokes: Vec<Vec<(f64, f64)>>, dots: &[(f64, f64)]) -> Archetype {
    Archetype {
        name,
        strokes,
        dots: dots.to_vec(),
        marks: Vec::new(),
    }
}

/// The 28 class archetypes, loosely modelled on the isolated letter forms.
pub fn archetypes() -> Vec<Archetype> {
    let bowl = || arc(0.5, 0.35, 0.45, 0.3, 0.0, 180.0);
    let open_c = || arc(0.5, 0.6, 0.35, 0.35, 40.0, 320.0);
    let dal = || line(&[(0.35, 0.1), (0.8, 0.72), (0.2, 0.82)]);
    let reh = || arc(0.1, 0.2, 0.7, 0.7, 10.0, 80.0);
    let teeth = || line(&[(0.05, 0.15), (0.25, 0.6), (0.45, 0.15), (0.65, 0.6), (0.85, 0.15)]);
    let sad = || {
        vec![
            arc(0.62, 0.35, 0.3, 0.18, 0.0, 360.0),
            line(&[(0.32, 0.4), (0.2, 0.7), (0.05, 0.55)]),
        ]
    };
    let tah = || {
        vec![
            arc(0.55, 0.72, 0.35, 0.2, 0.0, 360.0),
            line(&[(0.3, 0.0), (0.3, 0.72)]),
        ]
    };
    // small C on top, larger C below; both open to the right
    let ain = || {
        vec![
            arc(0.5, 0.22, 0.2, 0.2, 40.0, 300.0),
            arc(0.5, 0.68, 0.3, 0.3, -90.0, -300.0),
        ]
    };

    let mut kaf = glyph(
        "kaf",
        vec![line(&[(0.85, 0.05), (0.85, 0.9), (0.1, 0.9)])],
        &[],
    );
    kaf.marks.push(line(&[(0.35, 0.4), (0.6, 0.6)]));

    vec![
        glyph("alef", vec![line(&[(0.5, 0.05), (0.5, 0.9), (0.36, 0.98)])], &[]),
        glyph("beh", vec![bowl()], &[(0.5, 0.9)]),
        glyph("teh", vec![bowl()], &[(0.39, 0.1), (0.61, 0.1)]),
        glyph("theh", vec![bowl()], &[(0.39, 0.12), (0.61, 0.12), (0.5, -0.08)]),
        glyph("jeem", vec![open_c()], &[(0.56, 0.6)]),
        glyph("hah", vec![open_c()], &[]),
        glyph("khah", vec![open_c()], &[(0.5, 0.04)]),
        glyph("dal", vec![dal()], &[]),
        glyph("thal", vec![dal()], &[(0.3, -0.14)]),
        glyph("reh", vec![reh()], &[]),
        glyph("zain", vec![reh()], &[(0.72, 0.08)]),
        glyph("seen", vec![teeth()], &[]),
        glyph("sheen", vec![teeth()], &[(0.34, -0.1), (0.56, -0.1), (0.45, -0.29)]),
        glyph("sad", sad(), &[]),
        glyph("dad", sad(), &[(0.62, -0.04)]),
        glyph("tah", tah(), &[]),
        glyph("zah", tah(), &[(0.7, 0.28)]),
        glyph("ain", ain(), &[]),
        glyph("ghain", ain(), &[(0.5, -0.17)]),
        glyph(
            "feh",
            vec![arc(0.75, 0.35, 0.15, 0.15, 0.0, 360.0), line(&[(0.05, 0.55), (0.92, 0.55)])],
            &[(0.75, 0.04)],
        ),
        glyph(
            "qaf",
            vec![
                arc(0.8, 0.28, 0.13, 0.13, 0.0, 360.0),
                arc(0.5, 0.45, 0.4, 0.45, 0.0, 180.0),
                line(&[(0.82, 0.41), (0.9, 0.47)]),
            ],
            &[(0.7, -0.02), (0.92, -0.02)],
        ),
        kaf,
        glyph(
            "lam",
            vec![line(&[(0.7, 0.0), (0.7, 0.7)]), arc(0.45, 0.7, 0.25, 0.25, 0.0, 180.0)],
            &[],
        ),
        glyph(
            "meem",
            vec![arc(0.4, 0.3, 0.15, 0.15, 0.0, 360.0), line(&[(0.4, 0.45), (0.45, 1.0)])],
            &[],
        ),
        glyph("noon", vec![arc(0.5, 0.45, 0.38, 0.38, 0.0, 180.0)], &[(0.5, 0.28)]),
        glyph("heh", vec![arc(0.5, 0.5, 0.4, 0.4, 0.0, 360.0)], &[]),
        glyph(
            "waw",
            vec![arc(0.6, 0.3, 0.2, 0.2, 0.0, 360.0), line(&[(0.78, 0.38), (0.7, 0.7), (0.3, 0.95)])],
            &[],
        ),
        glyph(
            "yeh",
            vec![arc(0.5, 0.28, 0.22, 0.22, 0.0, -270.0), arc(0.5, 0.72, 0.22, 0.22, -90.0, 180.0)],
            &[(0.38, 1.15), (0.62, 1.15)],
        ),
    ]
}

fn seg_dist2(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    qx * qx + qy * qy
}

impl Archetype {
    fn covers(&self, p: (f64, f64)) -> bool {
        let stroke2 = HALF_STROKE * HALF_STROKE;
        let on_poly = |poly: &Vec<(f64, f64)>| poly.windows(2).any(|w| seg_dist2(p, w[0], w[1]) <= stroke2);
        self.strokes.iter().any(on_poly)
            || self.marks.iter().any(on_poly)
            || self
                .dots
                .iter()
                .any(|d| (p.0 - d.0).powi(2) + (p.1 - d.1).powi(2) <= DOT_RADIUS * DOT_RADIUS)
    }

    fn extent(&self) -> (f64, f64, f64, f64) {
        let pad = HALF_STROKE.max(DOT_RADIUS);
        let pts = self
            .strokes
            .iter()
            .chain(&self.marks)
            .flatten()
            .chain(&self.dots);
        let (mut u0, mut v0, mut u1, mut v1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(u, v) in pts {
            u0 = u0.min(u);
            v0 = v0.min(v);
            u1 = u1.max(u);
            v1 = v1.max(v);
        }
        (u0 - pad, v0 - pad, u1 + pad, v1 + pad)
    }
}

/// Renders one jittered sample: scale ±20%, shear ±15°, random placement,
/// random ink and background tones, then 1% salt-and-pepper noise.
pub fn render_sample(a: &Archetype, rng: &mut ChaCha8Rng) -> GrayImage {
    let scale = BOX * rng.random_range(0.8..=1.2);
    let shear = rng.random_range(-15.0f64..=15.0).to_radians().tan();
    let bg = rng.random_range(190..=240) as f64;
    let ink = rng.random_range(10..=70) as f64;

    let (u0, v0, u1, v1) = a.extent();
    let (uc, vc) = ((u0 + u1) / 2.0, (v0 + v1) / 2.0);
    // half extents in pixels after scale and shear
    let half_h = (v1 - v0) / 2.0 * scale;
    let half_w = (u1 - u0) / 2.0 * scale + half_h * shear.abs();
    let slack_x = (CANVAS_W as f64 / 2.0 - half_w - 3.0).max(0.0);
    let slack_y = (CANVAS_H as f64 / 2.0 - half_h - 3.0).max(0.0);
    let cx = CANVAS_W as f64 / 2.0 + rng.random_range(-slack_x..=slack_x);
    let cy = CANVAS_H as f64 / 2.0 + rng.random_range(-slack_y..=slack_y);

    let noise_seed = rng.random::<u64>();
    let clean = GrayImage::from_fn(CANVAS_W, CANVAS_H, |r, c| {
        let y = r as f64 + 0.5 - cy;
        // x = x0 − y·shear, inverted
        let x = c as f64 + 0.5 - cx + y * shear;
        let p = (uc + x / scale, vc + y / scale);
        let tone = if a.covers(p) { ink } else { bg };
        tone as u8
    });
    augment_noisy(&clean, NOISE_RATE, noise_seed).expect("rate in range")
}

/// Writes `per_class` samples for each of the first `classes` archetypes to
/// `<out>/<name>/<index>.pgm`. Returns the number of files written.
pub fn generate(out: &Path, classes: usize, per_class: usize, seed: u64) -> Result<usize> {
    let all = archetypes();
    if classes == 0 || classes > all.len() {
        return Err(Error::InvalidArgument(format!(
            "classes must be in 1..={}, got {classes}",
            all.len()
        )));
    }
    let mut written = 0;
    for (k, a) in all.iter().take(classes).enumerate() {
        let dir = out.join(format!("{k:02}_{}", a.name));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for i in 0..per_class {
            let img = render_sample(a, &mut rng);
            let path = dir.join(format!("{i:04}.pgm"));
            fs::write(&path, write_pgm(&img, PgmMode::Binary)).map_err(|e| Error::io(&path, e))?;
            written += 1;
        }
    }
    Ok(written)
}
