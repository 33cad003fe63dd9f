//! Text-line hypotheses: bottom lines fitted through character triplets,
//! agglomerative merging of compatible lines and longest-line selection.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::classify::RegionClass;
use crate::error::{Error, Result};
use crate::raster::{Rect, Region};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineParams {
    /// Nearest neighbours considered per character when forming triplets.
    pub neighbors: usize,
    pub max_height_ratio: f64,
    /// Horizontal gap limit, in multiples of the taller region's height.
    pub max_gap: f64,
    /// Required vertical overlap, as a fraction of the shorter height.
    pub min_vertical_overlap: f64,
    /// Allowed horizontal overlap, as a fraction of the narrower width.
    pub max_horizontal_overlap: f64,
    pub max_slope: f64,
    /// Residual band, as a fraction of the line height.
    pub max_residual: f64,
    pub merge_threshold: f64,
}

impl Default for LineParams {
    fn default() -> Self {
        Self {
            neighbors: 5,
            max_height_ratio: 2.0,
            max_gap: 3.0,
            min_vertical_overlap: 0.3,
            max_horizontal_overlap: 0.3,
            max_slope: 1.0,
            max_residual: 0.25,
            merge_threshold: 0.2,
        }
    }
}

impl LineParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.neighbors >= 2
            && self.max_height_ratio >= 1.0
            && self.max_gap > 0.0
            && (0.0..=1.0).contains(&self.min_vertical_overlap)
            && self.max_horizontal_overlap >= 0.0
            && self.max_slope > 0.0
            && self.max_residual > 0.0
            && self.merge_threshold > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("bad line parameters {self:?}")))
        }
    }
}

/// `y = slope · x + intercept`, with the largest absolute vertical deviation
/// of the fitted points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BottomLine {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

impl BottomLine {
    pub fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Least-squares fit. Points sharing a single x get a horizontal line
    /// through their mean.
    pub fn fit(points: &[(f64, f64)]) -> Self {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = if sxx > 1e-12 { sxy / sxx } else { 0.0 };
        let intercept = my - slope * mx;
        let residual = points
            .iter()
            .map(|p| (p.1 - (slope * p.0 + intercept)).abs())
            .fold(0.0, f64::max);
        Self {
            slope,
            intercept,
            residual,
        }
    }
}

/// Bottom-centre anchor of a region's bounding box.
pub fn anchor(bbox: &Rect) -> (f64, f64) {
    (bbox.x as f64 + bbox.w as f64 / 2.0, bbox.bottom() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextLineHypothesis {
    /// Indices into the region list, ordered left to right.
    pub members: Vec<usize>,
    pub bottom_line: BottomLine,
    pub bbox: Rect,
    pub line_height: f64,
}

impl TextLineHypothesis {
    /// Build a hypothesis over `members` (any order, duplicates removed).
    pub fn from_members(regions: &[Region], members: impl IntoIterator<Item = usize>) -> Self {
        let mut members: Vec<usize> = members.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        assert!(!members.is_empty());
        members.sort_by_key(|&i| (regions[i].bbox().x, regions[i].bbox().y, i));
        let boxes: Vec<Rect> = members.iter().map(|&i| regions[i].bbox()).collect();
        let points: Vec<(f64, f64)> = boxes.iter().map(anchor).collect();
        let bbox = boxes.iter().skip(1).fold(boxes[0], |acc, b| acc.union(b));
        let line_height = median(boxes.iter().map(|b| b.h as f64).collect());
        Self {
            members,
            bottom_line: BottomLine::fit(&points),
            bbox,
            line_height,
        }
    }

    /// Residual relative to the line height.
    pub fn normalized_residual(&self) -> f64 {
        self.bottom_line.residual / self.line_height
    }

    fn member_set(&self) -> BTreeSet<usize> {
        self.members.iter().copied().collect()
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Pairwise compatibility of two character boxes.
pub fn compatible_pair(a: &Rect, b: &Rect, p: &LineParams) -> bool {
    let (ha, hb) = (a.h as f64, b.h as f64);
    if ha.max(hb) > p.max_height_ratio * ha.min(hb) {
        return false;
    }
    let x_overlap = a.right().min(b.right()) as f64 - a.x.max(b.x) as f64;
    if -x_overlap > p.max_gap * ha.max(hb) || stacked(a, b, p) {
        return false;
    }
    let y_overlap = a.bottom().min(b.bottom()) as f64 - a.y.max(b.y) as f64;
    y_overlap >= p.min_vertical_overlap * ha.min(hb)
}

/// Boxes sharing too many columns to be neighbours in one line.
pub fn stacked(a: &Rect, b: &Rect, p: &LineParams) -> bool {
    let x_overlap = a.right().min(b.right()) as f64 - a.x.max(b.x) as f64;
    x_overlap > p.max_horizontal_overlap * a.w.min(b.w) as f64
}

/// Line-level acceptance: slope and residual band.
pub fn acceptable_line(h: &TextLineHypothesis, p: &LineParams) -> bool {
    h.bottom_line.slope.abs() <= p.max_slope && h.bottom_line.residual <= p.max_residual * h.line_height
}

/// `k` nearest regions by centroid distance among `candidates`, ties by index.
pub fn nearest_neighbors(regions: &[Region], candidates: &[usize], i: usize, k: usize) -> Vec<usize> {
    let (cx, cy) = regions[i].centroid();
    let mut others: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| {
            let (x, y) = regions[j].centroid();
            ((x - cx).powi(2) + (y - cy).powi(2), j)
        })
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Neighbours of `i` for triplet forming. MSER yields several nested
/// regions per glyph, so candidates that cannot pair with `i`, or that stack
/// on an already chosen neighbour, are passed over; otherwise the copies of
/// one glyph would fill all `k` slots.
pub fn line_neighbors(regions: &[Region], chars: &[usize], i: usize, p: &LineParams) -> Vec<usize> {
    let bi = regions[i].bbox();
    let pool: Vec<usize> = chars
        .iter()
        .copied()
        .filter(|&j| j != i && compatible_pair(&bi, &regions[j].bbox(), p))
        .collect();
    let mut out: Vec<usize> = Vec::new();
    for j in nearest_neighbors(regions, &pool, i, pool.len()) {
        if out.len() == p.neighbors {
            break;
        }
        let bj = regions[j].bbox();
        if out.iter().all(|&o| !stacked(&regions[o].bbox(), &bj, p)) {
            out.push(j);
        }
    }
    out
}

/// Triplet hypotheses around every Character region plus one singleton per
/// MultiCharacter region. Background regions are ignored.
pub fn propose_triplets(regions: &[Region], classes: &[RegionClass], p: &LineParams) -> Vec<TextLineHypothesis> {
    assert_eq!(regions.len(), classes.len());
    let chars: Vec<usize> = (0..regions.len())
        .filter(|&i| classes[i] == RegionClass::Character)
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &i in &chars {
        let nn = line_neighbors(regions, &chars, i, p);
        for a in 0..nn.len() {
            for b in a + 1..nn.len() {
                let mut t = [i, nn[a], nn[b]];
                t.sort_unstable();
                if seen.contains(&t) {
                    continue;
                }
                seen.insert(t);
                let boxes = t.map(|k| regions[k].bbox());
                let pairs_ok = compatible_pair(&boxes[0], &boxes[1], p)
                    && compatible_pair(&boxes[0], &boxes[2], p)
                    && compatible_pair(&boxes[1], &boxes[2], p);
                if !pairs_ok {
                    continue;
                }
                let h = TextLineHypothesis::from_members(regions, t);
                if acceptable_line(&h, p) {
                    out.push(h);
                }
            }
        }
    }
    for i in 0..regions.len() {
        if classes[i] == RegionClass::MultiCharacter {
            let bb = regions[i].bbox();
            out.push(TextLineHypothesis {
                members: vec![i],
                bottom_line: BottomLine {
                    slope: 0.0,
                    intercept: bb.bottom() as f64,
                    residual: 0.0,
                },
                bbox: bb,
                line_height: bb.h as f64,
            });
        }
    }
    out
}

/// Normalized residual of the jointly refitted bottom line.
pub fn line_distance(regions: &[Region], a: &TextLineHypothesis, b: &TextLineHypothesis) -> f64 {
    let joint = TextLineHypothesis::from_members(regions, a.members.iter().chain(&b.members).copied());
    joint.normalized_residual()
}

fn mergeable(a: &TextLineHypothesis, b: &TextLineHypothesis, p: &LineParams) -> bool {
    if a.members.iter().any(|m| b.members.contains(m)) {
        return true;
    }
    let gap = a.bbox.x.max(b.bbox.x) as f64 - a.bbox.right().min(b.bbox.right()) as f64;
    gap <= p.max_gap * a.line_height.max(b.line_height)
}

#[derive(PartialEq)]
struct MergeCandidate {
    distance: f64,
    size: usize,
    lo: Vec<usize>,
    hi: Vec<usize>,
    a: usize,
    b: usize,
}

impl Eq for MergeCandidate {}

impl Ord for MergeCandidate {
    // Reversed so that BinaryHeap pops the smallest distance first; ties go
    // to the larger merged line, then to the member lists.
    fn cmp(&self, o: &Self) -> Ordering {
        o.distance
            .total_cmp(&self.distance)
            .then(self.size.cmp(&o.size))
            .then(o.lo.cmp(&self.lo))
            .then(o.hi.cmp(&self.hi))
    }
}

impl PartialOrd for MergeCandidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Greedy agglomerative clustering: repeatedly merge the closest pair of
/// lines while their joint normalized residual is below the threshold.
/// Pairs are only considered when they share a region or are horizontally
/// close.
pub fn agglomerate(regions: &[Region], hypotheses: &[TextLineHypothesis], p: &LineParams) -> Vec<TextLineHypothesis> {
    let mut unique: Vec<TextLineHypothesis> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut sorted: Vec<&TextLineHypothesis> = hypotheses.iter().collect();
    sorted.sort_by(|a, b| a.member_set().cmp(&b.member_set()));
    for h in sorted {
        if seen.insert(h.member_set()) {
            unique.push(h.clone());
        }
    }
    let mut lines: Vec<Option<TextLineHypothesis>> = unique.into_iter().map(Some).collect();
    let mut heap = BinaryHeap::new();

    let candidate = |lines: &[Option<TextLineHypothesis>], a: usize, b: usize| -> Option<MergeCandidate> {
        let (la, lb) = (lines[a].as_ref()?, lines[b].as_ref()?);
        if !mergeable(la, lb, p) {
            return None;
        }
        let (mut lo, mut hi) = (la.members.clone(), lb.members.clone());
        lo.sort_unstable();
        hi.sort_unstable();
        if hi < lo {
            std::mem::swap(&mut lo, &mut hi);
        }
        let mut joint: Vec<usize> = lo.iter().chain(&hi).copied().collect();
        joint.sort_unstable();
        joint.dedup();
        let boxes: Vec<Rect> = joint.iter().map(|&i| regions[i].bbox()).collect();
        let points: Vec<(f64, f64)> = boxes.iter().map(anchor).collect();
        let fit = BottomLine::fit(&points);
        let distance = fit.residual / median(boxes.iter().map(|b| b.h as f64).collect());
        if distance >= p.merge_threshold || fit.slope.abs() > p.max_slope {
            return None;
        }
        Some(MergeCandidate {
            distance,
            size: joint.len(),
            lo,
            hi,
            a,
            b,
        })
    };

    for a in 0..lines.len() {
        for b in a + 1..lines.len() {
            if let Some(c) = candidate(&lines, a, b) {
                heap.push(c);
            }
        }
    }
    while let Some(c) = heap.pop() {
        if lines[c.a].is_none() || lines[c.b].is_none() {
            continue;
        }
        let la = lines[c.a].take().unwrap();
        let lb = lines[c.b].take().unwrap();
        let merged = TextLineHypothesis::from_members(regions, la.members.iter().chain(&lb.members).copied());
        // An identical line may already exist; keep a single copy.
        let dup = lines.iter().flatten().any(|l| l.members == merged.members);
        if dup {
            continue;
        }
        lines.push(Some(merged));
        let new = lines.len() - 1;
        for other in 0..new {
            if let Some(c) = candidate(&lines, other, new) {
                heap.push(c);
            }
        }
    }
    let mut out: Vec<TextLineHypothesis> = lines.into_iter().flatten().collect();
    out.sort_by(|a, b| a.members.cmp(&b.members));
    out
}

fn preference(a: &TextLineHypothesis, b: &TextLineHypothesis) -> Ordering {
    b.members
        .len()
        .cmp(&a.members.len())
        .then(a.bottom_line.residual.total_cmp(&b.bottom_line.residual))
        .then((a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h).cmp(&(b.bbox.x, b.bbox.y, b.bbox.w, b.bbox.h)))
}

/// Keep the longest line of every cluster of lines that share regions.
pub fn resolve_conflicts(lines: &[TextLineHypothesis]) -> Vec<TextLineHypothesis> {
    let n = lines.len();
    let mut cluster: Vec<usize> = (0..n).collect();
    fn find(c: &mut [usize], mut i: usize) -> usize {
        while c[i] != i {
            c[i] = c[c[i]];
            i = c[i];
        }
        i
    }
    for a in 0..n {
        for b in a + 1..n {
            if lines[a].members.iter().any(|m| lines[b].members.contains(m)) {
                let (ra, rb) = (find(&mut cluster, a), find(&mut cluster, b));
                if ra != rb {
                    cluster[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut best: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut cluster, i);
        best[r] = match best[r] {
            Some(j) if preference(&lines[j], &lines[i]) != Ordering::Greater => Some(j),
            _ => Some(i),
        };
    }
    let mut out: Vec<TextLineHypothesis> = best.into_iter().flatten().map(|i| lines[i].clone()).collect();
    out.sort_by(|a, b| {
        (a.bbox.y, a.bbox.x)
            .cmp(&(b.bbox.y, b.bbox.x))
            .then(a.members.cmp(&b.members))
    });
    out
}

/// Triplets, agglomeration and conflict resolution in one call.
pub fn form_lines(regions: &[Region], classes: &[RegionClass], p: &LineParams) -> Vec<TextLineHypothesis> {
    let triplets = propose_triplets(regions, classes, p);
    let merged = agglomerate(regions, &triplets, p);
    resolve_conflicts(&merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Point;

    fn boxed(x: u32, y: u32, w: u32, h: u32) -> Region {
        let mut px = Vec::new();
        for yy in y..y + h {
            for xx in x..x + w {
                px.push(Point::new(xx, yy));
            }
        }
        Region::from_pixels(px)
    }

    #[test]
    fn three_boxes_make_one_triplet() {
        let regions: Vec<_> = [0, 15, 30].iter().map(|&x| boxed(x, 10, 10, 20)).collect();
        let classes = vec![RegionClass::Character; 3];
        let t = propose_triplets(&regions, &classes, &LineParams::default());
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].bottom_line.slope, 0.0);
        assert_eq!(t[0].bottom_line.residual, 0.0);
        assert_eq!(t[0].members, vec![0, 1, 2]);
    }

    #[test]
    fn two_regions_make_nothing() {
        let regions: Vec<_> = [0, 15].iter().map(|&x| boxed(x, 10, 10, 20)).collect();
        let classes = vec![RegionClass::Character; 2];
        assert!(propose_triplets(&regions, &classes, &LineParams::default()).is_empty());
    }

    #[test]
    fn multi_character_singleton() {
        let regions = vec![boxed(3, 4, 40, 12)];
        let t = propose_triplets(&regions, &[RegionClass::MultiCharacter], &LineParams::default());
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].bottom_line.intercept, 16.0);
        assert_eq!(t[0].line_height, 12.0);
    }

    #[test]
    fn shared_triplets_merge() {
        let regions: Vec<_> = [0, 15, 30, 45].iter().map(|&x| boxed(x, 10, 10, 20)).collect();
        let p = LineParams::default();
        let a = TextLineHypothesis::from_members(&regions, [0, 1, 2]);
        let b = TextLineHypothesis::from_members(&regions, [1, 2, 3]);
        let out = agglomerate(&regions, &[a, b], &p);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].members, vec![0, 1, 2, 3]);
    }

    #[test]
    fn parallel_lines_stay_apart() {
        let mut regions: Vec<_> = [0, 15, 30].iter().map(|&x| boxed(x, 10, 10, 20)).collect();
        regions.extend([0, 15, 30].iter().map(|&x| boxed(x, 50, 10, 20)));
        let a = TextLineHypothesis::from_members(&regions, [0, 1, 2]);
        let b = TextLineHypothesis::from_members(&regions, [3, 4, 5]);
        assert!(line_distance(&regions, &a, &b) >= 0.2);
        assert_eq!(agglomerate(&regions, &[a, b], &LineParams::default()).len(), 2);
    }

    #[test]
    fn longest_line_wins() {
        let mut regions: Vec<_> = (0..5).map(|k| boxed(k * 15, 40, 10, 20)).collect();
        regions.push(boxed(30, 0, 10, 20));
        regions.push(boxed(30, 80, 10, 20));
        let horizontal = TextLineHypothesis::from_members(&regions, 0..5);
        let vertical = TextLineHypothesis::from_members(&regions, [5, 2, 6]);
        let out = resolve_conflicts(&[vertical, horizontal.clone()]);
        assert_eq!(out, vec![horizontal]);
    }

    #[test]
    fn disjoint_lines_both_kept() {
        let regions: Vec<_> = (0..6).map(|k| boxed(k * 15, 10, 10, 20)).collect();
        let a = TextLineHypothesis::from_members(&regions, [0, 1, 2]);
        let b = TextLineHypothesis::from_members(&regions, [3, 4, 5]);
        assert_eq!(resolve_conflicts(&[a, b]).len(), 2);
    }
}
