//! Character hypotheses, chopping of wide components, the predecessor DAG
//! and its minimum-cost path under a trigram model.

use std::cmp::Ordering;

use crate::lines::median;
use crate::raster::{Point, Region};

use super::lm::{LanguageModel, BOS};

/// Components wider than this multiple of the widest glyph get chopped.
pub const CHOP_FACTOR: f64 = 1.2;

/// Split an over-wide region at projection minima. The result starts with
/// the region itself followed by every piece produced by recursive splitting.
pub fn chop(region: &Region, atlas_max_aspect: f64) -> Vec<Region> {
    let mut out = Vec::new();
    chop_into(region.clone(), atlas_max_aspect * CHOP_FACTOR, &mut out);
    out
}

fn chop_into(region: Region, limit: f64, out: &mut Vec<Region>) {
    let bb = region.bbox();
    let w = bb.w as usize;
    if w as f64 <= limit * bb.h as f64 || w < 3 {
        out.push(region);
        return;
    }
    let mut cols = vec![0usize; w];
    for p in region.pixels() {
        cols[(p.x - bb.x) as usize] += 1;
    }
    let lo = ((0.2 * w as f64).round() as usize).max(1);
    let hi = ((0.8 * w as f64).round() as usize).min(w - 1).max(lo + 1);
    let cut = (lo..hi).min_by_key(|&c| (cols[c], c)).expect("nonempty window");
    let split = bb.x + cut as u32;
    let (left, right): (Vec<Point>, Vec<Point>) = region
        .pixels()
        .iter()
        .filter(|p| p.x != split)
        .partition(|p| p.x < split);
    out.push(region);
    for half in [left, right] {
        if !half.is_empty() {
            chop_into(Region::from_pixels(half), limit, out);
        }
    }
}

/// One labelled reading of a region.
#[derive(Clone, Debug, PartialEq)]
pub struct CharHypothesis {
    pub region: Region,
    pub label: char,
    /// −ln p of the label under the glyph classifier.
    pub cost: f64,
}

impl CharHypothesis {
    pub fn start(&self) -> u32 {
        self.region.bbox().x
    }

    pub fn end(&self) -> u32 {
        self.region.bbox().right()
    }

    pub fn width(&self) -> u32 {
        self.region.bbox().w
    }
}

/// Weight of the cost for ink columns a path steps over, per median
/// hypothesis width.
pub const DEFAULT_SKIP_WEIGHT: f64 = 10.0;

/// Predecessor DAG over hypotheses with virtual start and end nodes.
#[derive(Clone, Debug)]
pub struct RecognitionGraph {
    nodes: Vec<CharHypothesis>,
    succ: Vec<Vec<usize>>,
    from_start: Vec<usize>,
    to_end: Vec<bool>,
    median_width: f64,
    skip_weight: f64,
    /// `ink[i]` = number of covered columns left of `x0 + i`.
    ink: Vec<u32>,
    x0: u32,
}

fn interval_order(a: &CharHypothesis, b: &CharHypothesis) -> Ordering {
    (a.start(), a.end(), a.label)
        .cmp(&(b.start(), b.end(), b.label))
        .then(a.cost.total_cmp(&b.cost))
}

/// Whether `v` may directly follow `u` in reading order.
pub fn is_predecessor(u: &CharHypothesis, v: &CharHypothesis, median_width: f64) -> bool {
    let (ue, vs) = (u.end() as f64, v.start() as f64);
    vs >= ue - 0.2 * u.width() as f64 && vs - ue <= 1.5 * median_width
}

pub fn build_graph(hypotheses: Vec<CharHypothesis>) -> RecognitionGraph {
    build_graph_with(hypotheses, DEFAULT_SKIP_WEIGHT)
}

pub fn build_graph_with(mut nodes: Vec<CharHypothesis>, skip_weight: f64) -> RecognitionGraph {
    nodes.sort_by(interval_order);
    let n = nodes.len();
    if n == 0 {
        return RecognitionGraph {
            nodes,
            succ: Vec::new(),
            from_start: Vec::new(),
            to_end: Vec::new(),
            median_width: 0.0,
            skip_weight,
            ink: vec![0],
            x0: 0,
        };
    }
    let median_width = median(nodes.iter().map(|h| h.width() as f64).collect());
    let mut succ = vec![Vec::new(); n];
    let mut has_pred = vec![false; n];
    for u in 0..n {
        for v in 0..n {
            if u != v && is_predecessor(&nodes[u], &nodes[v], median_width) {
                succ[u].push(v);
                has_pred[v] = true;
            }
        }
    }
    let first = nodes.iter().map(|h| h.start()).min().expect("nonempty") as f64;
    let last = nodes.iter().map(|h| h.end()).max().expect("nonempty") as f64;
    let reach = 1.5 * median_width;
    // nodes without a predecessor/successor are tied to start/end so that
    // every node lies on some start-to-end path
    let from_start = (0..n)
        .filter(|&v| nodes[v].start() as f64 <= first + reach || !has_pred[v])
        .collect();
    let to_end = (0..n)
        .map(|u| nodes[u].end() as f64 >= last - reach || succ[u].is_empty())
        .collect();
    let x0 = first as u32;
    let span = (last as u32 - x0) as usize;
    let mut covered = vec![false; span];
    for h in &nodes {
        for p in h.region.pixels() {
            covered[(p.x - x0) as usize] = true;
        }
    }
    let mut ink = vec![0u32; span + 1];
    for i in 0..span {
        ink[i + 1] = ink[i] + covered[i] as u32;
    }
    RecognitionGraph {
        nodes,
        succ,
        from_start,
        to_end,
        median_width,
        skip_weight,
        ink,
        x0,
    }
}

/// Minimum-cost reading of a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct PathResult {
    /// Node indices in reading order.
    pub nodes: Vec<usize>,
    pub text: String,
    pub cost: f64,
    /// Cost attributed to each node (entering transition, node and model
    /// terms); the exit transition is added to the last entry.
    pub step_costs: Vec<f64>,
}

impl RecognitionGraph {
    pub fn nodes(&self) -> &[CharHypothesis] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn successors(&self, u: usize) -> &[usize] {
        &self.succ[u]
    }

    pub fn start_links(&self) -> &[usize] {
        &self.from_start
    }

    pub fn links_to_end(&self, u: usize) -> bool {
        self.to_end[u]
    }

    pub fn median_width(&self) -> f64 {
        self.median_width
    }

    fn ink_between(&self, a: u32, b: u32) -> u32 {
        if b <= a {
            return 0;
        }
        let clamp = |x: u32| (x.saturating_sub(self.x0) as usize).min(self.ink.len() - 1);
        self.ink[clamp(b)] - self.ink[clamp(a)]
    }

    /// Cost of moving from `u` (or the start) to `v` (or the end): ink
    /// columns stepped over, in median widths, times the skip weight.
    pub fn transition_cost(&self, u: Option<usize>, v: Option<usize>) -> f64 {
        let a = u.map_or(self.x0, |u| self.nodes[u].end());
        let b = v.map_or(self.x0 + self.ink.len() as u32 - 1, |v| self.nodes[v].start());
        let skipped = self.ink_between(a, b);
        if skipped == 0 {
            0.0
        } else {
            self.skip_weight * skipped as f64 / self.median_width
        }
    }

    /// Cost of entering `v` after `u`, where `w` preceded `u`.
    pub fn step_cost(&self, w: Option<usize>, u: Option<usize>, v: usize, lm: &LanguageModel, lambda: f64) -> f64 {
        let label = |i: Option<usize>| i.map_or(BOS, |i| self.nodes[i].label);
        let node = &self.nodes[v];
        self.transition_cost(u, Some(v)) + node.cost + lambda * lm.cost(label(w), label(u), node.label)
    }

    /// Dynamic programming over (predecessor, node) states in topological
    /// order. Equal costs are resolved by the lexicographically smaller text.
    pub fn best_path(&self, lm: &LanguageModel, lambda: f64) -> Option<PathResult> {
        let n = self.nodes.len();
        if n == 0 {
            return None;
        }
        // state index: prev * n + node with prev == n for the start
        let idx = |prev: Option<usize>, v: usize| prev.unwrap_or(n) * n + v;
        #[derive(Clone)]
        struct State {
            cost: f64,
            text: String,
            back: Option<usize>,
        }
        let better = |c: f64, t: &str, s: &Option<State>| match s {
            None => true,
            Some(s) => c < s.cost || (c == s.cost && t < s.text.as_str()),
        };
        let mut states: Vec<Option<State>> = vec![None; (n + 1) * n];
        for &v in &self.from_start {
            let c = 0.0 + self.step_cost(None, None, v, lm, lambda);
            let t = self.nodes[v].label.to_string();
            let slot = &mut states[idx(None, v)];
            if better(c, &t, slot) {
                *slot = Some(State {
                    cost: c,
                    text: t,
                    back: None,
                });
            }
        }
        // node indices are sorted by interval start and edges strictly
        // increase it, so index order is topological
        for u in 0..n {
            for w in (0..n).map(Some).chain([None]) {
                let Some(s) = states[idx(w, u)].clone() else { continue };
                for &v in &self.succ[u] {
                    let c = s.cost + self.step_cost(w, Some(u), v, lm, lambda);
                    let mut t = s.text.clone();
                    t.push(self.nodes[v].label);
                    let slot = &mut states[idx(Some(u), v)];
                    if better(c, &t, slot) {
                        *slot = Some(State {
                            cost: c,
                            text: t,
                            back: w,
                        });
                    }
                }
            }
        }
        let mut best: Option<(f64, String, Option<usize>, usize)> = None;
        for u in 0..n {
            if !self.to_end[u] {
                continue;
            }
            for w in (0..n).map(Some).chain([None]) {
                let Some(s) = &states[idx(w, u)] else { continue };
                let c = s.cost + self.transition_cost(Some(u), None);
                let take = match &best {
                    None => true,
                    Some((bc, bt, _, _)) => c < *bc || (c == *bc && s.text < *bt),
                };
                if take {
                    best = Some((c, s.text.clone(), w, u));
                }
            }
        }
        let (cost, text, mut prev, mut cur) = best?;
        let mut path = vec![cur];
        // state (p, cur) remembers the node before p
        while let Some(p) = prev {
            let back = states[idx(Some(p), cur)].as_ref().expect("reachable state").back;
            path.push(p);
            cur = p;
            prev = back;
        }
        path.reverse();
        let mut step_costs = Vec::with_capacity(path.len());
        let mut prev: (Option<usize>, Option<usize>) = (None, None);
        for &v in &path {
            step_costs.push(self.step_cost(prev.0, prev.1, v, lm, lambda));
            prev = (prev.1, Some(v));
        }
        *step_costs.last_mut().expect("nonempty path") += self.transition_cost(prev.1, None);
        Some(PathResult {
            nodes: path,
            text,
            cost,
            step_costs,
        })
    }
}
