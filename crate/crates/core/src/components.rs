//! Connected-component labeling and the main-body / secondary split.
//!
//! The main body is the component with the largest area (smallest id on a
//! tie); every other component is a secondary (dots, hamza).

use crate::error::{Error, Result};
use crate::imgio::{BinaryImage, BoundingBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl std::str::FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "4" | "four" => Ok(Connectivity::Four),
            "8" | "eight" => Ok(Connectivity::Eight),
            _ => Err(Error::InvalidArgument(format!("unknown connectivity {s}"))),
        }
    }
}

/// Disjoint-set forest with path halving and union by size.
struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self {
            parent: Vec::new(),
            size: Vec::new(),
        }
    }

    fn make_set(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.size.push(1);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSet {
    width: usize,
    height: usize,
    /// Row-major; 0 = background, k ≥ 1 = component k.
    labels: Vec<u32>,
    boxes: Vec<BoundingBox>,
    areas: Vec<usize>,
    /// Sum of row / column indices per component, for centroids.
    sums: Vec<(u64, u64)>,
    main_id: Option<u32>,
}

impl ComponentSet {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.areas.len()
    }

    /// Bounding box of component `id` (1-based).
    pub fn bbox(&self, id: u32) -> BoundingBox {
        self.boxes[id as usize - 1]
    }

    pub fn area(&self, id: u32) -> usize {
        self.areas[id as usize - 1]
    }

    pub fn areas(&self) -> &[usize] {
        &self.areas
    }

    /// `(row, col)` centroid of component `id`.
    pub fn centroid(&self, id: u32) -> (f64, f64) {
        let (sr, sc) = self.sums[id as usize - 1];
        let a = self.area(id) as f64;
        (sr as f64 / a, sc as f64 / a)
    }

    /// `None` for a blank image.
    pub fn main_id(&self) -> Option<u32> {
        self.main_id
    }

    pub fn secondary_ids(&self) -> Vec<u32> {
        match self.main_id {
            Some(main) => (1..=self.count() as u32).filter(|&id| id != main).collect(),
            None => Vec::new(),
        }
    }

    /// Binary mask of a single component.
    pub fn mask(&self, id: u32) -> BinaryImage {
        BinaryImage::from_fn(self.width, self.height, |r, c| self.label_at(r, c) == id)
    }
}

/// Labels ink pixels so that two share a label iff they are connected under
/// `connectivity`. Ids are assigned in order of each component's first pixel
/// in raster scan, starting at 1.
pub fn label_components(bin: &BinaryImage, connectivity: Connectivity) -> ComponentSet {
    let (w, h) = (bin.width(), bin.height());
    let mut provisional = vec![u32::MAX; w * h];
    let mut sets = DisjointSet::new();

    // previously visited neighbors in raster order
    let back: &[(isize, isize)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (0, -1)],
        Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1)],
    };

    for r in 0..h {
        for c in 0..w {
            if !bin.get(r, c) {
                continue;
            }
            let mut label = None;
            for &(dr, dc) in back {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if !bin.get_or_bg(rr, cc) {
                    continue;
                }
                let other = provisional[rr as usize * w + cc as usize];
                match label {
                    None => label = Some(other),
                    Some(l) => sets.union(l, other),
                }
            }
            provisional[r * w + c] = label.unwrap_or_else(|| sets.make_set());
        }
    }

    let mut final_id = vec![0u32; sets.parent.len()];
    let mut labels = vec![0u32; w * h];
    let mut boxes = Vec::new();
    let mut areas: Vec<usize> = Vec::new();
    let mut sums = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let p = provisional[r * w + c];
            if p == u32::MAX {
                continue;
            }
            let root = sets.find(p) as usize;
            if final_id[root] == 0 {
                boxes.push(BoundingBox::point(r, c));
                areas.push(0);
                sums.push((0, 0));
                final_id[root] = areas.len() as u32;
            }
            let id = final_id[root];
            let k = id as usize - 1;
            labels[r * w + c] = id;
            boxes[k].include(r, c);
            areas[k] += 1;
            sums[k].0 += r as u64;
            sums[k].1 += c as u64;
        }
    }

    let main_id = areas
        .iter()
        .enumerate()
        // max_by_key keeps the last maximum; reverse to prefer the smallest id
        .rev()
        .max_by_key(|(_, &a)| a)
        .map(|(i, _)| i as u32 + 1);

    ComponentSet {
        width: w,
        height: h,
        labels,
        boxes,
        areas,
        sums,
        main_id,
    }
}

/// Aggregate description of all secondary components taken together.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SecondaryStats {
    /// Bounding-box height of the union of secondaries, in pixels.
    pub height: usize,
    pub width: usize,
    pub area: usize,
    /// Union centroid minus main-body centroid, over canvas width.
    pub dx: f64,
    /// Union centroid minus main-body centroid, over canvas height.
    pub dy: f64,
    pub above: bool,
    pub below: bool,
}

/// Summarizes the union of every secondary component relative to the main
/// body. All-zero when there are no secondaries.
pub fn secondary_summary(cs: &ComponentSet) -> Result<SecondaryStats> {
    let main = cs.main_id().ok_or(Error::BlankImage)?;
    let secondaries = cs.secondary_ids();
    let Some(&first) = secondaries.first() else {
        return Ok(SecondaryStats::default());
    };

    let mut bb = cs.bbox(first);
    let (mut area, mut sr, mut sc) = (0usize, 0u64, 0u64);
    for &id in &secondaries {
        bb = bb.union(&cs.bbox(id));
        area += cs.area(id);
        sr += cs.sums[id as usize - 1].0;
        sc += cs.sums[id as usize - 1].1;
    }
    let (cr, cc) = (sr as f64 / area as f64, sc as f64 / area as f64);
    let (mr, mc) = cs.centroid(main);
    let main_box = cs.bbox(main);
    Ok(SecondaryStats {
        height: bb.height(),
        width: bb.width(),
        area,
        dx: (cc - mc) / cs.width() as f64,
        dy: (cr - mr) / cs.height() as f64,
        above: cr < main_box.top as f64,
        below: cr > main_box.bottom as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal_pair() {
        let img = BinaryImage::from_rows(&["10", "01"]);
        assert_eq!(label_components(&img, Connectivity::Eight).count(), 1);
        assert_eq!(label_components(&img, Connectivity::Four).count(), 2);
    }

    #[test]
    fn blank_has_no_main() {
        let cs = label_components(&BinaryImage::zeros(4, 3), Connectivity::Eight);
        assert_eq!(cs.count(), 0);
        assert_eq!(cs.main_id(), None);
        assert!(matches!(secondary_summary(&cs), Err(Error::BlankImage)));
    }

    #[test]
    fn raster_order_ids_and_main_tie_break() {
        let img = BinaryImage::from_rows(&[
            "0011", //
            "1000", //
            "1001", //
        ]);
        let cs = label_components(&img, Connectivity::Four);
        assert_eq!(cs.count(), 3);
        assert_eq!(cs.label_at(0, 2), 1);
        assert_eq!(cs.label_at(1, 0), 2);
        assert_eq!(cs.label_at(2, 3), 3);
        // areas 2, 2, 1: tie between 1 and 2 goes to 1
        assert_eq!(cs.main_id(), Some(1));
        assert_eq!(cs.secondary_ids(), vec![2, 3]);
    }

    #[test]
    fn u_shape_merges() {
        // the two arms only meet at the bottom row
        let img = BinaryImage::from_rows(&["101", "101", "111"]);
        let cs = label_components(&img, Connectivity::Four);
        assert_eq!(cs.count(), 1);
        assert_eq!(cs.area(1), 7);
    }

    #[test]
    fn no_secondaries_is_zero() {
        let img = BinaryImage::from_rows(&["0110", "0110"]);
        let cs = label_components(&img, Connectivity::Eight);
        assert_eq!(secondary_summary(&cs).unwrap(), SecondaryStats::default());
    }

    #[test]
    fn dot_above_main_body() {
        let img = BinaryImage::from_rows(&[
            "00110000", //
            "00110000", //
            "00000000", //
            "11111111", //
            "11111111", //
        ]);
        let cs = label_components(&img, Connectivity::Eight);
        let s = secondary_summary(&cs).unwrap();
        assert!(s.above && !s.below);
        assert_eq!((s.height, s.width, s.area), (2, 2, 4));
        // dot centroid (0.5, 2.5), main centroid (3.5, 3.5)
        assert!((s.dy - (-3.0 / 5.0)).abs() < 1e-12);
        assert!((s.dx - (-1.0 / 8.0)).abs() < 1e-12);
    }

    #[test]
    fn three_dots_union() {
        // main bar on rows 6..=7; dots at rows 0-1 cols 0-1, rows 0-1 cols 4-5, rows 2-3 cols 8-9
        let mut img = BinaryImage::zeros(12, 8);
        for c in 0..12 {
            img.set(6, c, true);
            img.set(7, c, true);
        }
        for (r0, c0) in [(0, 0), (0, 4), (2, 8)] {
            for r in r0..r0 + 2 {
                for c in c0..c0 + 2 {
                    img.set(r, c, true);
                }
            }
        }
        let cs = label_components(&img, Connectivity::Eight);
        assert_eq!(cs.count(), 4);
        let s = secondary_summary(&cs).unwrap();
        // union box rows 0..=3, cols 0..=9
        assert_eq!((s.height, s.width, s.area), (4, 10, 12));
        assert!(s.above);
    }

    /// Recursive flood fill, returning labels renumbered by first pixel.
    fn flood_oracle(img: &BinaryImage, eight: bool) -> Vec<u32> {
        fn fill(img: &BinaryImage, lab: &mut [u32], r: isize, c: isize, id: u32, eight: bool) {
            if !img.get_or_bg(r, c) {
                return;
            }
            let i = r as usize * img.width() + c as usize;
            if lab[i] != 0 {
                return;
            }
            lab[i] = id;
            for dr in -1..=1isize {
                for dc in -1..=1isize {
                    if (dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0) {
                        continue;
                    }
                    fill(img, lab, r + dr, c + dc, id, eight);
                }
            }
        }
        let mut lab = vec![0u32; img.data().len()];
        let mut next = 0;
        for r in 0..img.height() {
            for c in 0..img.width() {
                if img.get(r, c) && lab[r * img.width() + c] == 0 {
                    next += 1;
                    fill(img, &mut lab, r as isize, c as isize, next, eight);
                }
            }
        }
        lab
    }

    fn arb_binary() -> impl Strategy<Value = BinaryImage> {
        (1usize..20, 1usize..20, 0.1f64..0.7).prop_flat_map(|(w, h, p)| {
            proptest::collection::vec(proptest::bool::weighted(p), w * h)
                .prop_map(move |v| BinaryImage::from_fn(w, h, |r, c| v[r * w + c]))
        })
    }

    proptest! {
        #[test]
        fn matches_flood_fill(img in arb_binary()) {
            for (conn, eight) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
                let cs = label_components(&img, conn);
                prop_assert_eq!(cs.labels(), &flood_oracle(&img, eight)[..]);
                prop_assert_eq!(cs.areas().iter().sum::<usize>(), img.foreground_count());
            }
        }

        #[test]
        fn eight_never_exceeds_four(img in arb_binary()) {
            prop_assert!(
                label_components(&img, Connectivity::Eight).count()
                    <= label_components(&img, Connectivity::Four).count()
            );
        }

        #[test]
        fn main_has_max_area(img in arb_binary()) {
            let cs = label_components(&img, Connectivity::Eight);
            if let Some(main) = cs.main_id() {
                let max = *cs.areas().iter().max().unwrap();
                prop_assert_eq!(cs.area(main), max);
                let first_max = cs.areas().iter().position(|&a| a == max).unwrap() as u32 + 1;
                prop_assert_eq!(main, first_max);
                prop_assert_eq!(cs.secondary_ids().len(), cs.count() - 1);
            }
        }
    }
}
