//! Maximally stable extremal regions.
//!
//! The component tree is built with union-find over pixels sorted by gray
//! level (8-connected foreground). Each tree node is a distinct pixel set and
//! lives over a span of levels; stability is evaluated per level with the
//! one-sided variation `(|R_{l+Δ}| - |R_l|) / |R_l|`, where `R_{l+Δ}` is the
//! ancestor alive at level `min(l + Δ, 255)`.
//!
//! A level is stable when its variation is strictly below the next level's
//! and the run of equal variations that ends at it is preceded (walking down
//! the branch through the largest child) by a strictly larger value or by
//! the birth of the branch.

use serde::{Deserialize, Serialize};

use crate::raster::{ColorImage, GrayImage, Point, Region};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MserParams {
    pub delta: u8,
    pub min_area: usize,
    pub max_area: usize,
    pub max_variation: f64,
    pub min_diversity: f64,
}

impl MserParams {
    /// Conventional defaults with `max_area` at a quarter of the image.
    pub fn for_image(width: usize, height: usize) -> Self {
        Self {
            delta: 5,
            min_area: 30,
            max_area: (width * height) / 4,
            max_variation: 0.5,
            min_diversity: 0.2,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.delta >= 1
            && self.min_area > 0
            && self.min_area < self.max_area
            && self.max_variation > 0.0
            && (0.0..=1.0).contains(&self.min_diversity);
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidInput(format!("bad MSER parameters {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    DarkOnLight,
    LightOnDark,
}

/// A detected region before geometry is computed: sorted pixel indices
/// (`y * width + x`) and the variation at which it was found stable.
#[derive(Clone, Debug, PartialEq)]
pub struct MserSet {
    pub pixels: Vec<u32>,
    pub level: u8,
    pub variation: f64,
}

const NONE: u32 = u32::MAX;

struct ComponentTree {
    level: Vec<u8>,
    area: Vec<u32>,
    parent: Vec<u32>,
    min_pixel: Vec<u32>,
    largest_child: Vec<u32>,
    /// CSR layout of pixels by the node at which they were added.
    own_start: Vec<u32>,
    own_pixels: Vec<u32>,
    children_start: Vec<u32>,
    children: Vec<u32>,
}

fn find(uf: &mut [u32], mut x: u32) -> u32 {
    while uf[x as usize] != x {
        let p = uf[x as usize];
        uf[x as usize] = uf[p as usize];
        x = p;
    }
    x
}

impl ComponentTree {
    fn build(img: &GrayImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let n = w * h;
        let data = img.data();

        // counting sort by value
        let mut hist = [0usize; 257];
        for &v in data {
            hist[v as usize + 1] += 1;
        }
        for i in 1..257 {
            hist[i] += hist[i - 1];
        }
        let bounds = hist;
        let mut cursor = hist;
        let mut order = vec![0u32; n];
        for (i, &v) in data.iter().enumerate() {
            order[cursor[v as usize]] = i as u32;
            cursor[v as usize] += 1;
        }

        let mut uf: Vec<u32> = (0..n as u32).collect();
        let mut size = vec![1u32; n];
        let mut added = vec![false; n];
        let mut root_node = vec![NONE; n];
        let mut stamp = vec![0u16; n];
        let mut birth_node = vec![NONE; n];

        let mut level = Vec::new();
        let mut area = Vec::new();
        let mut parent: Vec<u32> = Vec::new();
        let mut touched_old: Vec<(u32, u32)> = Vec::new();

        for lv in 0..256usize {
            let (lo, hi) = (bounds[lv], bounds[lv + 1]);
            if lo == hi {
                continue;
            }
            touched_old.clear();
            for &p in &order[lo..hi] {
                added[p as usize] = true;
                let (x, y) = ((p as usize % w) as i64, (p as usize / w) as i64);
                for (dx, dy) in [
                    (-1i64, -1i64),
                    (0, -1),
                    (1, -1),
                    (-1, 0),
                    (1, 0),
                    (-1, 1),
                    (0, 1),
                    (1, 1),
                ] {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let q = (ny as usize * w + nx as usize) as u32;
                    if !added[q as usize] {
                        continue;
                    }
                    let rp = find(&mut uf, p);
                    let rq = find(&mut uf, q);
                    if rp == rq {
                        continue;
                    }
                    for r in [rp, rq] {
                        let node = root_node[r as usize];
                        if node != NONE {
                            touched_old.push((node, r));
                            root_node[r as usize] = NONE;
                        }
                    }
                    let (big, small) = if size[rp as usize] >= size[rq as usize] {
                        (rp, rq)
                    } else {
                        (rq, rp)
                    };
                    uf[small as usize] = big;
                    size[big as usize] += size[small as usize];
                }
            }
            let tag = lv as u16 + 1;
            for &p in &order[lo..hi] {
                let r = find(&mut uf, p);
                if stamp[r as usize] != tag {
                    stamp[r as usize] = tag;
                    let id = level.len() as u32;
                    level.push(lv as u8);
                    area.push(size[r as usize]);
                    parent.push(NONE);
                    root_node[r as usize] = id;
                }
                birth_node[p as usize] = root_node[r as usize];
            }
            for &(old, rep) in &touched_old {
                let r = find(&mut uf, rep);
                parent[old as usize] = root_node[r as usize];
            }
        }

        let nodes = level.len();
        let mut min_pixel = vec![u32::MAX; nodes];
        let mut own_count = vec![0u32; nodes + 1];
        for p in 0..n {
            let b = birth_node[p] as usize;
            own_count[b + 1] += 1;
            min_pixel[b] = min_pixel[b].min(p as u32);
        }
        for i in 1..=nodes {
            own_count[i] += own_count[i - 1];
        }
        let own_start = own_count.clone();
        let mut fill = own_count;
        let mut own_pixels = vec![0u32; n];
        for p in 0..n {
            let b = birth_node[p] as usize;
            own_pixels[fill[b] as usize] = p as u32;
            fill[b] += 1;
        }
        // children are created before their parents
        for i in 0..nodes {
            let p = parent[i];
            if p != NONE {
                min_pixel[p as usize] = min_pixel[p as usize].min(min_pixel[i]);
            }
        }
        let mut largest_child = vec![NONE; nodes];
        let mut child_count = vec![0u32; nodes + 1];
        for i in 0..nodes {
            let p = parent[i];
            if p == NONE {
                continue;
            }
            child_count[p as usize + 1] += 1;
            let cur = largest_child[p as usize];
            let better = cur == NONE
                || area[i] > area[cur as usize]
                || (area[i] == area[cur as usize] && min_pixel[i] < min_pixel[cur as usize]);
            if better {
                largest_child[p as usize] = i as u32;
            }
        }
        for i in 1..=nodes {
            child_count[i] += child_count[i - 1];
        }
        let children_start = child_count.clone();
        let mut fill = child_count;
        let mut children = vec![0u32; nodes.saturating_sub(1)];
        for i in 0..nodes {
            let p = parent[i];
            if p != NONE {
                children[fill[p as usize] as usize] = i as u32;
                fill[p as usize] += 1;
            }
        }

        Self {
            level,
            area,
            parent,
            min_pixel,
            largest_child,
            own_start,
            own_pixels,
            children_start,
            children,
        }
    }

    fn span_end(&self, node: u32) -> u8 {
        match self.parent[node as usize] {
            NONE => 255,
            p => self.level[p as usize] - 1,
        }
    }

    fn area_at(&self, mut node: u32, lv: u8) -> u32 {
        loop {
            let p = self.parent[node as usize];
            if p == NONE || self.level[p as usize] > lv {
                return self.area[node as usize];
            }
            node = p;
        }
    }

    /// Variation of the branch through `node` at level `lv` (within its span).
    fn variation(&self, node: u32, lv: u8, delta: u8) -> f64 {
        let a = self.area[node as usize];
        let up = self.area_at(node, lv.saturating_add(delta));
        (up - a) as f64 / a as f64
    }

    /// The branch predecessor of `(node, lv)` at level `lv - 1`.
    fn lower(&self, node: u32, lv: u8) -> Option<(u32, u8)> {
        if lv == 0 {
            return None;
        }
        if lv > self.level[node as usize] {
            return Some((node, lv - 1));
        }
        match self.largest_child[node as usize] {
            NONE => None,
            c => Some((c, lv - 1)),
        }
    }

    /// The stable level and variation of `node`, if any level of its span
    /// qualifies.
    fn stable_level(&self, node: u32, delta: u8) -> Option<(u8, f64)> {
        let start = self.level[node as usize];
        let end = self.span_end(node);
        let mut lv = start;
        loop {
            let v = self.variation(node, lv, delta);
            let upper = if lv == 255 {
                None
            } else if lv < end {
                Some(self.variation(node, lv + 1, delta))
            } else {
                let p = self.parent[node as usize];
                Some(self.variation(p, lv + 1, delta))
            };
            if upper.is_none_or(|u| v < u) && self.run_is_minimal(node, lv, v, delta) {
                return Some((lv, v));
            }
            if lv == end {
                return None;
            }
            lv += 1;
        }
    }

    fn run_is_minimal(&self, node: u32, lv: u8, v: f64, delta: u8) -> bool {
        let mut cur = (node, lv);
        loop {
            match self.lower(cur.0, cur.1) {
                None => return true,
                Some((n, l)) => {
                    let lower_v = self.variation(n, l, delta);
                    if lower_v > v {
                        return true;
                    }
                    if lower_v < v {
                        return false;
                    }
                    cur = (n, l);
                }
            }
        }
    }

    fn collect_pixels(&self, node: u32) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.area[node as usize] as usize);
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            let n = n as usize;
            out.extend_from_slice(&self.own_pixels[self.own_start[n] as usize..self.own_start[n + 1] as usize]);
            stack.extend_from_slice(
                &self.children[self.children_start[n] as usize..self.children_start[n + 1] as usize],
            );
        }
        out.sort_unstable();
        out
    }
}

/// Stable extremal regions of the `≤ level` threshold sets of `img`, as
/// sorted pixel-index sets. Light-on-dark polarity runs on the inverted image.
pub fn detect_mser_sets(img: &GrayImage, params: &MserParams, polarity: Polarity) -> Vec<MserSet> {
    let inverted;
    let img = match polarity {
        Polarity::DarkOnLight => img,
        Polarity::LightOnDark => {
            inverted = img.inverted();
            &inverted
        }
    };
    if img.width() * img.height() < params.min_area {
        return Vec::new();
    }
    let tree = ComponentTree::build(img);
    let nodes = tree.level.len();

    let mut cands: Vec<(u32, u8, f64)> = Vec::new();
    for node in 0..nodes as u32 {
        let a = tree.area[node as usize] as usize;
        if a < params.min_area || a > params.max_area {
            continue;
        }
        if let Some((lv, v)) = tree.stable_level(node, params.delta) {
            if v <= params.max_variation {
                cands.push((node, lv, v));
            }
        }
    }
    cands.sort_by(|a, b| {
        a.2.total_cmp(&b.2)
            .then(tree.area[a.0 as usize].cmp(&tree.area[b.0 as usize]))
            .then(tree.min_pixel[a.0 as usize].cmp(&tree.min_pixel[b.0 as usize]))
    });

    // Greedy diversity pruning along tree branches.
    let close = |small: u32, big: u32| {
        let (s, b) = (tree.area[small as usize] as f64, tree.area[big as usize] as f64);
        (b - s) / b < params.min_diversity
    };
    let mut accepted = vec![false; nodes];
    let mut blocked = vec![false; nodes];
    let mut out = Vec::new();
    for &(node, lv, v) in &cands {
        if blocked[node as usize] {
            continue;
        }
        let mut anc = tree.parent[node as usize];
        let mut clash = false;
        while anc != NONE && close(node, anc) {
            if accepted[anc as usize] {
                clash = true;
                break;
            }
            anc = tree.parent[anc as usize];
        }
        if clash {
            continue;
        }
        accepted[node as usize] = true;
        let mut anc = tree.parent[node as usize];
        while anc != NONE && close(node, anc) {
            blocked[anc as usize] = true;
            anc = tree.parent[anc as usize];
        }
        out.push(MserSet {
            pixels: tree.collect_pixels(node),
            level: lv,
            variation: v,
        });
    }
    out
}

/// MSERs of one channel and polarity as [`Region`]s.
pub fn detect_msers(img: &GrayImage, params: &MserParams, polarity: Polarity) -> Vec<Region> {
    let w = img.width();
    detect_mser_sets(img, params, polarity)
        .into_iter()
        .map(|s| set_to_region(&s.pixels, w))
        .collect()
}

pub fn set_to_region(pixels: &[u32], width: usize) -> Region {
    Region::from_pixels(
        pixels
            .iter()
            .map(|&i| Point::new((i as usize % width) as u32, (i as usize / width) as u32))
            .collect(),
    )
}

/// Which channel and polarity produced a candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Source {
    pub channel: Channel,
    pub polarity: Polarity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Intensity,
    Hue,
}

/// Runs detection on {intensity, hue} × {both polarities}; regions whose
/// pixel sets overlap by IoU ≥ `merge_iou` are kept once (first pass wins).
pub fn detect_candidates(img: &ColorImage, params: &MserParams, merge_iou: f64) -> Vec<(Region, Source)> {
    let gray = crate::raster::to_gray(img);
    let hue = crate::raster::to_hue(img);
    let passes = [
        (Channel::Intensity, Polarity::DarkOnLight),
        (Channel::Intensity, Polarity::LightOnDark),
        (Channel::Hue, Polarity::DarkOnLight),
        (Channel::Hue, Polarity::LightOnDark),
    ];
    let w = img.width();
    let sets: Vec<Vec<MserSet>> = passes
        .iter()
        .map(|&(ch, pol)| {
            let src = if ch == Channel::Intensity { &gray } else { &hue };
            detect_mser_sets(src, params, pol)
        })
        .collect();

    let mut kept: Vec<(Vec<u32>, Source)> = Vec::new();
    for (pass, found) in passes.iter().zip(sets) {
        for s in found {
            let dup = kept.iter().any(|(k, _)| set_iou(k, &s.pixels) >= merge_iou);
            if !dup {
                kept.push((
                    s.pixels,
                    Source {
                        channel: pass.0,
                        polarity: pass.1,
                    },
                ));
            }
        }
    }
    kept.into_iter().map(|(px, src)| (set_to_region(&px, w), src)).collect()
}

/// IoU of two sorted index sets.
pub fn set_iou(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() || b.is_empty() || a.last() < b.first() || b.last() < a.first() {
        return 0.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_image() -> GrayImage {
        let mut img = GrayImage::filled(32, 32, 255);
        for y in 10..20 {
            for x in 8..18 {
                img.put(x, y, 0);
            }
        }
        img
    }

    #[test]
    fn constant_image_has_no_regions() {
        let img = GrayImage::filled(40, 40, 128);
        let p = MserParams::for_image(40, 40);
        assert!(detect_msers(&img, &p, Polarity::DarkOnLight).is_empty());
        assert!(detect_msers(&img, &p, Polarity::LightOnDark).is_empty());
    }

    #[test]
    fn black_square_is_found_exactly() {
        let img = square_image();
        let p = MserParams {
            min_area: 30,
            max_area: 256,
            ..MserParams::for_image(32, 32)
        };
        let regs = detect_msers(&img, &p, Polarity::DarkOnLight);
        assert_eq!(regs.len(), 1);
        assert_eq!(regs[0].area(), 100);
        assert_eq!(regs[0].bbox(), crate::raster::Rect::new(8, 10, 10, 10));
        // the inverted polarity sees the white frame, which is too large
        assert!(detect_msers(&img, &p, Polarity::LightOnDark).is_empty());
    }

    #[test]
    fn returned_regions_are_extremal_and_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let data: Vec<u8> = (0..48 * 48).map(|_| rng.random_range(0..4u8) * 60).collect();
            let img = GrayImage::new(48, 48, data).unwrap();
            let p = MserParams {
                min_area: 5,
                max_area: 600,
                ..MserParams::for_image(48, 48)
            };
            for s in detect_mser_sets(&img, &p, Polarity::DarkOnLight) {
                assert!(s.pixels.len() >= p.min_area && s.pixels.len() <= p.max_area);
                let max_in = s.pixels.iter().map(|&i| img.data()[i as usize]).max().unwrap();
                assert!(max_in <= s.level);
                let set: std::collections::HashSet<u32> = s.pixels.iter().copied().collect();
                for &i in &s.pixels {
                    let (x, y) = ((i % 48) as i64, (i / 48) as i64);
                    for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= 48 || ny >= 48 {
                            continue;
                        }
                        let j = (ny * 48 + nx) as u32;
                        if !set.contains(&j) {
                            assert!(img.data()[j as usize] > s.level);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn offset_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<u8> = (0..40 * 40).map(|_| rng.random_range(0..200u8)).collect();
        let img = GrayImage::new(40, 40, data.clone()).unwrap();
        let shifted = GrayImage::new(40, 40, data.iter().map(|v| v + 30).collect()).unwrap();
        let p = MserParams {
            min_area: 4,
            max_area: 800,
            ..MserParams::for_image(40, 40)
        };
        let a: Vec<Vec<u32>> = detect_mser_sets(&img, &p, Polarity::DarkOnLight)
            .into_iter()
            .map(|s| s.pixels)
            .collect();
        let b: Vec<Vec<u32>> = detect_mser_sets(&shifted, &p, Polarity::DarkOnLight)
            .into_iter()
            .map(|s| s.pixels)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn iou_of_sets() {
        assert_eq!(set_iou(&[1, 2, 3], &[1, 2, 3]), 1.0);
        assert_eq!(set_iou(&[1, 2], &[3, 4]), 0.0);
        assert!((set_iou(&[1, 2, 3, 4], &[3, 4, 5, 6]) - 2.0 / 6.0).abs() < 1e-12);
    }
}
