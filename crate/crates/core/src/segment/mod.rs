//! Per-line iterative segmentation. Member regions seed a probable
//! foreground; stroke support pixels of the current foreground become hard
//! seeds, colour mixtures are refitted, and a min-cut relabels the region of
//! interest until the labeling stops changing.

pub mod gmm;
pub mod maxflow;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lines::TextLineHypothesis;
use crate::raster::{component_pixels, distance_transform, BinaryMask, ColorImage, Connectivity, Point, Rect, Region};
use crate::strokefeat::stroke_support_pixels;

pub use gmm::{fit_gmm, Gmm, GmmFit, GmmParams, Rgb};
pub use maxflow::FlowNetwork;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    DefinitiveForeground,
    ProbableForeground,
    Background,
    Ignored,
}

impl Label {
    /// Side taken in the smoothness term. Ignored pixels were foreground
    /// components and stay on that side.
    pub fn is_foreground(self) -> bool {
        self != Label::Background
    }
}

/// Labels over the whole image; everything outside `roi` is background.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriStateLabelMap {
    pub width: usize,
    pub height: usize,
    pub roi: Rect,
    pub labels: Vec<Label>,
}

impl TriStateLabelMap {
    pub fn new(width: usize, height: usize, roi: Rect) -> Self {
        Self {
            width,
            height,
            roi,
            labels: vec![Label::Background; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Label {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, l: Label) {
        self.labels[y * self.width + x] = l;
    }

    pub fn in_roi(&self, x: usize, y: usize) -> bool {
        self.roi.contains(Point::new(x as u32, y as u32))
    }

    /// Foreground side of every roi pixel, row-major within the roi.
    pub fn roi_foreground(&self) -> Vec<bool> {
        let r = self.roi;
        let mut out = Vec::with_capacity(r.area() as usize);
        for y in r.y..r.bottom() {
            for x in r.x..r.right() {
                out.push(self.get(x as usize, y as usize).is_foreground());
            }
        }
        out
    }

    pub fn count(&self, l: Label) -> usize {
        self.labels.iter().filter(|&&v| v == l).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentParams {
    pub gmm: GmmParams,
    /// Smoothness weight γ.
    pub smoothness: f64,
    pub max_iterations: usize,
    /// Bottom deviation, as a fraction of the line height, beyond which a
    /// component is ignored.
    pub ignore_deviation: f64,
    pub seed: u64,
    /// Keep the label map of every iteration in the trace.
    pub keep_label_maps: bool,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            gmm: GmmParams::default(),
            smoothness: 50.0,
            max_iterations: 10,
            ignore_deviation: 0.25,
            seed: 0,
            keep_label_maps: false,
        }
    }
}

fn rgb(img: &ColorImage, x: usize, y: usize) -> Rgb {
    img.get(x, y).map(f64::from)
}

fn dist2(a: &Rgb, b: &Rgb) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Forward half of the 8-neighbourhood; every unordered pair is visited once.
const FORWARD: [(i64, i64); 4] = [(1, 0), (-1, 1), (0, 1), (1, 1)];
const NEIGHBORS8: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// `1 / (2 · mean ‖z_m − z_n‖²)` over 8-adjacent pairs inside `roi`, or 0
/// when the roi is flat.
pub fn smoothness_beta(img: &ColorImage, roi: &Rect) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for y in roi.y as i64..roi.bottom() as i64 {
        for x in roi.x as i64..roi.right() as i64 {
            let z = rgb(img, x as usize, y as usize);
            for (dx, dy) in FORWARD {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= roi.x as i64 && ny >= roi.y as i64 && nx < roi.right() as i64 && ny < roi.bottom() as i64 {
                    sum += dist2(&z, &rgb(img, nx as usize, ny as usize));
                    pairs += 1;
                }
            }
        }
    }
    if pairs == 0 || sum == 0.0 {
        0.0
    } else {
        1.0 / (2.0 * sum / pairs as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energy {
    pub unary: f64,
    pub smoothness: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.unary + self.smoothness
    }
}

const SMALL_DIFF: usize = 1024;

/// Data and pairwise costs of one roi under fixed colour models, shared by
/// the energy and the flow network.
#[derive(Clone, Debug)]
pub struct CutTerms {
    roi: Rect,
    labels: Vec<Label>,
    fg_cost: Vec<f64>,
    bg_cost: Vec<f64>,
    /// Weighted pairs with both ends in the roi, each listed once.
    pairs: Vec<(usize, usize, f64)>,
    /// Summed weight towards neighbours outside the roi.
    to_outside: Vec<f64>,
    /// Summed weight of all neighbours.
    incident: Vec<f64>,
}

impl CutTerms {
    pub fn new(img: &ColorImage, map: &TriStateLabelMap, fg: &Gmm, bg: &Gmm, smoothness: f64, beta: f64) -> Self {
        let r = map.roi;
        let (rw, rh) = (r.w as i64, r.h as i64);
        let (w, h) = (img.width() as i64, img.height() as i64);
        let n = r.area() as usize;
        let mut t = Self {
            roi: r,
            labels: Vec::with_capacity(n),
            fg_cost: Vec::with_capacity(n),
            bg_cost: Vec::with_capacity(n),
            pairs: Vec::with_capacity(4 * n),
            to_outside: vec![0.0; n],
            incident: vec![0.0; n],
        };
        let mut costs: HashMap<[u8; 3], (f64, f64)> = HashMap::new();
        // colour differences are integral, so small ones are tabulated
        let table: Vec<f64> = (0..SMALL_DIFF).map(|d| smoothness * (-beta * d as f64).exp()).collect();
        let weight = |a: &Rgb, b: &Rgb| -> f64 {
            let d = dist2(a, b);
            if d < SMALL_DIFF as f64 {
                table[d as usize]
            } else {
                smoothness * (-beta * d).exp()
            }
        };
        for ly in 0..rh {
            for lx in 0..rw {
                let (x, y) = (lx + r.x as i64, ly + r.y as i64);
                let i = (ly * rw + lx) as usize;
                let z = rgb(img, x as usize, y as usize);
                let label = map.get(x as usize, y as usize);
                t.labels.push(label);
                let (cf, cb) = if label == Label::Ignored {
                    (0.0, 0.0)
                } else {
                    *costs
                        .entry(img.get(x as usize, y as usize))
                        .or_insert_with(|| (fg.cost(&z), bg.cost(&z)))
                };
                t.fg_cost.push(cf);
                t.bg_cost.push(cb);
                for (dx, dy) in NEIGHBORS8 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let (lnx, lny) = (lx + dx, ly + dy);
                    let outside = lnx < 0 || lny < 0 || lnx >= rw || lny >= rh;
                    if !outside && !FORWARD.contains(&(dx, dy)) {
                        continue;
                    }
                    let wgt = weight(&z, &rgb(img, nx as usize, ny as usize));
                    t.incident[i] += wgt;
                    if outside {
                        t.to_outside[i] += wgt;
                    } else {
                        let j = (lny * rw + lnx) as usize;
                        t.incident[j] += wgt;
                        t.pairs.push((i, j, wgt));
                    }
                }
            }
        }
        t
    }

    /// Energy of a binary assignment of the roi pixels (row-major within the
    /// roi). Ignored pixels carry no data term; pixels outside the roi are
    /// background.
    pub fn energy(&self, foreground: &[bool]) -> Energy {
        assert_eq!(foreground.len(), self.labels.len());
        let mut unary = 0.0;
        let mut smooth = 0.0;
        for (i, &f) in foreground.iter().enumerate() {
            if self.labels[i] != Label::Ignored {
                unary += if f { self.fg_cost[i] } else { self.bg_cost[i] };
            }
            if f {
                smooth += self.to_outside[i];
            }
        }
        for &(i, j, wgt) in &self.pairs {
            if foreground[i] != foreground[j] {
                smooth += wgt;
            }
        }
        Energy {
            unary,
            smoothness: smooth,
        }
    }

    /// Flow network over the roi pixels. Definitive foreground is tied to the
    /// source by a link larger than everything else it touches, and
    /// neighbours outside the roi act as hard background. The returned
    /// constant is the data cost of the definitive pixels, which the cut
    /// does not see.
    pub fn network(&self) -> (FlowNetwork, f64) {
        let mut net = FlowNetwork::new(self.labels.len());
        for &(i, j, wgt) in &self.pairs {
            net.add_edge(i, j, wgt, wgt);
        }
        let mut constant = 0.0;
        for (i, &label) in self.labels.iter().enumerate() {
            match label {
                Label::DefinitiveForeground => {
                    net.add_terminal(i, 1.0 + self.incident[i], self.to_outside[i]);
                    constant += self.fg_cost[i];
                }
                Label::Ignored => net.add_terminal(i, 0.0, self.to_outside[i]),
                _ => net.add_terminal(i, self.bg_cost[i], self.fg_cost[i] + self.to_outside[i]),
            }
        }
        (net, constant)
    }

    pub fn roi(&self) -> Rect {
        self.roi
    }
}

/// Energy of a binary assignment of the roi pixels (`foreground`, row-major
/// within `map.roi`) with the unary set taken from `map`: ignored pixels carry
/// no data term. Pixels outside the roi are background.
pub fn assignment_energy(
    img: &ColorImage,
    map: &TriStateLabelMap,
    foreground: &[bool],
    fg: &Gmm,
    bg: &Gmm,
    smoothness: f64,
    beta: f64,
) -> Energy {
    CutTerms::new(img, map, fg, bg, smoothness, beta).energy(foreground)
}

/// Gibbs energy `U + V` of a label map: data costs under the two colour
/// models plus `γ exp(−β‖z_m − z_n‖²)` for every 8-adjacent pair on
/// different sides.
pub fn gibbs_energy(img: &ColorImage, map: &TriStateLabelMap, fg: &Gmm, bg: &Gmm, smoothness: f64) -> Energy {
    let beta = smoothness_beta(img, &map.roi);
    assignment_energy(img, map, &map.roi_foreground(), fg, bg, smoothness, beta)
}

/// See [`CutTerms::network`].
pub fn build_network(
    img: &ColorImage,
    map: &TriStateLabelMap,
    fg: &Gmm,
    bg: &Gmm,
    smoothness: f64,
    beta: f64,
) -> (FlowNetwork, f64) {
    CutTerms::new(img, map, fg, bg, smoothness, beta).network()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    /// The region of interest is empty after clipping.
    DegenerateRoi,
    /// No foreground pixel is left to seed the foreground model.
    NoForeground,
    /// No background pixel inside the roi to fit the background model.
    NoBackground,
    /// All pixels that the cut may relabel ended on the same side.
    UniformLabels,
}

#[derive(Clone, Debug)]
pub struct IterationTrace {
    pub roi: Rect,
    pub energy_before: f64,
    pub energy_after: f64,
    pub flow: f64,
    pub fg_em: Vec<f64>,
    pub bg_em: Vec<f64>,
    pub label_map: Option<TriStateLabelMap>,
}

#[derive(Clone, Debug)]
pub struct Refinement {
    pub result: Result<Vec<Region>, Rejection>,
    pub iterations: Vec<IterationTrace>,
    pub converged: bool,
}

/// Foreground components the line cannot explain: their bottom is off the
/// bottom line, or they sit on the border of the previous `roi` entirely
/// outside the line's own bounding box.
fn is_ignored(c: &Region, line: &TextLineHypothesis, roi: Option<&Rect>, tolerance: f64) -> bool {
    let bb = c.bbox();
    let cx = bb.x as f64 + bb.w as f64 / 2.0;
    if (bb.bottom() as f64 - line.bottom_line.at(cx)).abs() > tolerance * line.line_height {
        return true;
    }
    let on_border =
        roi.is_some_and(|r| bb.x == r.x || bb.y == r.y || bb.right() == r.right() || bb.bottom() == r.bottom());
    on_border && bb.intersection(&line.bbox).is_none()
}

fn split_ignored(
    fg: &BinaryMask,
    line: &TextLineHypothesis,
    roi: Option<&Rect>,
    tolerance: f64,
) -> (Vec<Region>, Vec<Region>) {
    component_pixels(fg, Connectivity::Eight)
        .into_iter()
        .map(Region::from_pixels)
        .partition(|c| !is_ignored(c, line, roi, tolerance))
}

/// Refine one text line. `regions` is the region list that `line.members`
/// indexes into.
pub fn refine_line(
    img: &ColorImage,
    line: &TextLineHypothesis,
    regions: &[Region],
    params: &SegmentParams,
) -> Refinement {
    let (w, h) = (img.width(), img.height());
    let mut iterations = Vec::new();
    let reject = |why, iterations| Refinement {
        result: Err(why),
        iterations,
        converged: false,
    };
    if line.members.is_empty() {
        return reject(Rejection::NoForeground, iterations);
    }
    let members: Vec<&Region> = line.members.iter().map(|&i| &regions[i]).collect();
    let gamma_h = (members.iter().map(|r| r.bbox().w as f64).sum::<f64>() / members.len() as f64).round() as u32;

    let mut fg = BinaryMask::new(w, h);
    for r in &members {
        for p in r.pixels() {
            fg.set(p.x as usize, p.y as usize, true);
        }
    }
    let mut prev_roi: Option<Rect> = None;
    let mut converged = false;
    let cap = params.max_iterations.max(1);
    // Labeling and previous roi before each iteration. An iteration is a
    // pure function of this state, so a repeated state means the remaining
    // iterations replay a cycle.
    let mut history: Vec<(BinaryMask, Option<Rect>)> = Vec::new();
    for k in 0..cap {
        history.push((fg.clone(), prev_roi));
        let (kept, ignored) = split_ignored(&fg, line, prev_roi.as_ref(), params.ignore_deviation);
        if kept.is_empty() {
            return reject(Rejection::NoForeground, iterations);
        }
        let hull = kept.iter().skip(1).fold(kept[0].bbox(), |acc, c| acc.union(&c.bbox()));
        let roi = hull.expand_clipped(gamma_h, (hull.h as f64 / 3.0).round() as u32, w, h);
        if roi.is_empty() {
            return reject(Rejection::DegenerateRoi, iterations);
        }
        let mut map = TriStateLabelMap::new(w, h, roi);
        for c in &ignored {
            for p in c.pixels() {
                if roi.contains(*p) {
                    map.set(p.x as usize, p.y as usize, Label::Ignored);
                }
            }
        }
        // stroke support pixels of the kept foreground become hard seeds
        let mut local = BinaryMask::new(roi.w as usize, roi.h as usize);
        for c in &kept {
            for p in c.pixels() {
                local.set((p.x - roi.x) as usize, (p.y - roi.y) as usize, true);
                map.set(p.x as usize, p.y as usize, Label::ProbableForeground);
            }
        }
        let dmap = distance_transform(&local);
        for s in stroke_support_pixels(&local, &dmap) {
            map.set(
                (s.x + roi.x) as usize,
                (s.y + roi.y) as usize,
                Label::DefinitiveForeground,
            );
        }

        let mut fg_px = Vec::new();
        let mut bg_px = Vec::new();
        for y in roi.y as usize..roi.bottom() as usize {
            for x in roi.x as usize..roi.right() as usize {
                match map.get(x, y) {
                    Label::DefinitiveForeground => fg_px.push(rgb(img, x, y)),
                    Label::Background => bg_px.push(rgb(img, x, y)),
                    _ => {}
                }
            }
        }
        if fg_px.is_empty() {
            return reject(Rejection::NoForeground, iterations);
        }
        if bg_px.is_empty() {
            return reject(Rejection::NoBackground, iterations);
        }
        // Same random stream every iteration: an unchanged labeling then
        // reproduces itself and the loop reaches its fixpoint.
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let fg_fit = fit_gmm(&fg_px, &params.gmm, &mut rng).expect("non-empty pixel set");
        let bg_fit = fit_gmm(&bg_px, &params.gmm, &mut rng).expect("non-empty pixel set");

        let beta = smoothness_beta(img, &roi);
        let terms = CutTerms::new(img, &map, &fg_fit.gmm, &bg_fit.gmm, params.smoothness, beta);
        let before = terms.energy(&map.roi_foreground());
        let (mut net, _) = terms.network();
        let flow = net.max_flow();
        let side = net.source_side();
        let after = terms.energy(&side);

        let mut next = BinaryMask::new(w, h);
        let mut relabel = [0usize; 2];
        for (i, &s) in side.iter().enumerate() {
            let (x, y) = (roi.x as usize + i % roi.w as usize, roi.y as usize + i / roi.w as usize);
            next.set(x, y, s);
            if map.get(x, y) != Label::DefinitiveForeground {
                relabel[s as usize] += 1;
            }
        }
        iterations.push(IterationTrace {
            roi,
            energy_before: before.total(),
            energy_after: after.total(),
            flow,
            fg_em: fg_fit.trace,
            bg_em: bg_fit.trace,
            label_map: params.keep_label_maps.then(|| map.clone()),
        });
        let fixpoint = next == fg;
        fg = next;
        prev_roi = Some(roi);
        let uniform = relabel[0] == 0 || relabel[1] == 0;
        if fixpoint || uniform {
            converged = fixpoint;
            if uniform {
                return Refinement {
                    result: Err(Rejection::UniformLabels),
                    iterations,
                    converged,
                };
            }
            break;
        }
        if let Some(j) = history.iter().position(|(m, r)| *r == prev_roi && *m == fg) {
            let period = k + 1 - j;
            for i in k + 1..cap {
                iterations.push(iterations[j + (i - j) % period].clone());
            }
            (fg, prev_roi) = history.swap_remove(j + (cap - j) % period);
            break;
        }
    }
    let (kept, _) = split_ignored(&fg, line, prev_roi.as_ref(), params.ignore_deviation);
    Refinement {
        result: Ok(kept),
        iterations,
        converged,
    }
}

/// Pixels of `regions` as one mask.
pub fn union_mask(width: usize, height: usize, regions: &[Region]) -> BinaryMask {
    let pts: Vec<Point> = regions.iter().flat_map(|r| r.pixels().iter().copied()).collect();
    BinaryMask::from_points(width, height, &pts)
}
