//! Transcription of segmented text lines.

mod atlas;
mod graph;
mod lm;

pub use atlas::{
    chamfer_distance, normalize_glyph, AtlasEntry, GlyphAtlas, GlyphTemplate, BUILTIN_FONTS, DEFAULT_TEMPERATURE,
    GLYPH_SIZE, MANIFEST_FILE,
};
pub use graph::{
    build_graph, build_graph_with, chop, is_predecessor, CharHypothesis, PathResult, RecognitionGraph, CHOP_FACTOR,
    DEFAULT_SKIP_WEIGHT,
};
pub use lm::{count_words, word_trigrams, LanguageModel, TrigramCounts, BOS, DEFAULT_ALPHA};

use serde::{Deserialize, Serialize};

use crate::lines::median;
use crate::raster::{Rect, Region};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecognizeParams {
    /// Language model weight.
    pub lambda: f64,
    /// Labels kept per glyph.
    pub top_n: usize,
    pub skip_weight: f64,
    /// Components lower than this fraction of the line's median component
    /// height are dropped before recognition.
    pub min_relative_height: f64,
    /// Gaps wider than this fraction of the median character width split words.
    pub word_gap: f64,
    /// Shorter words are discarded; lines are built from three or more
    /// glyphs, so shorter words are mostly fragments.
    pub min_word_len: usize,
}

impl Default for RecognizeParams {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            top_n: 3,
            skip_weight: DEFAULT_SKIP_WEIGHT,
            min_relative_height: 0.3,
            word_gap: 0.5,
            min_word_len: 3,
        }
    }
}

impl RecognizeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.into()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        if self.top_n == 0 {
            return bad("top_n must be at least 1");
        }
        if !(self.skip_weight >= 0.0 && self.skip_weight.is_finite()) {
            return bad("skip_weight must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.min_relative_height) {
            return bad("min_relative_height must lie in [0, 1)");
        }
        if !(self.word_gap > 0.0 && self.word_gap.is_finite()) {
            return bad("word_gap must be positive");
        }
        Ok(())
    }
}

/// A transcribed word in image coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub bbox: Rect,
    pub text: String,
    /// Mean path cost per character.
    pub cost: f64,
}

/// Chop every component and attach the top glyph labels of each piece.
pub fn line_hypotheses(components: &[Region], atlas: &GlyphAtlas, params: &RecognizeParams) -> Vec<CharHypothesis> {
    if components.is_empty() {
        return Vec::new();
    }
    let mh = median(components.iter().map(|r| r.bbox().h as f64).collect());
    let mut out = Vec::new();
    for comp in components {
        if (comp.bbox().h as f64) < params.min_relative_height * mh {
            continue;
        }
        for piece in chop(comp, atlas.max_aspect()) {
            let (mask, _) = piece.local_mask(0);
            let labels = atlas.classify_glyph(&mask, params.top_n).expect("pieces are nonempty");
            for (label, cost) in labels {
                out.push(CharHypothesis {
                    region: piece.clone(),
                    label,
                    cost,
                });
            }
        }
    }
    out
}

/// Cut a path into words at wide gaps between consecutive characters.
pub fn split_words(g: &RecognitionGraph, path: &PathResult, word_gap: f64) -> Vec<Word> {
    if path.nodes.is_empty() {
        return Vec::new();
    }
    let nodes = g.nodes();
    let mw = median(path.nodes.iter().map(|&i| nodes[i].width() as f64).collect());
    let mut words = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    let flush = |cur: &mut Vec<usize>, words: &mut Vec<Word>| {
        if cur.is_empty() {
            return;
        }
        let bbox = cur
            .iter()
            .map(|&k| nodes[path.nodes[k]].region.bbox())
            .reduce(|a, b| a.union(&b))
            .expect("nonempty word");
        let text = cur.iter().map(|&k| nodes[path.nodes[k]].label).collect();
        let cost = cur.iter().map(|&k| path.step_costs[k]).sum::<f64>() / cur.len() as f64;
        words.push(Word { bbox, text, cost });
        cur.clear();
    };
    for k in 0..path.nodes.len() {
        if let Some(&prev) = cur.last() {
            let gap = nodes[path.nodes[k]].start() as f64 - nodes[path.nodes[prev]].end() as f64;
            if gap > word_gap * mw {
                flush(&mut cur, &mut words);
            }
        }
        cur.push(k);
    }
    flush(&mut cur, &mut words);
    words
}

/// Transcribe one line from its segmented components.
pub fn recognize_line(
    components: &[Region],
    atlas: &GlyphAtlas,
    lm: &LanguageModel,
    params: &RecognizeParams,
) -> Vec<Word> {
    let hyps = line_hypotheses(components, atlas, params);
    let g = build_graph_with(hyps, params.skip_weight);
    match g.best_path(lm, params.lambda) {
        Some(path) => split_words(&g, &path, params.word_gap)
            .into_iter()
            .filter(|w| w.text.chars().count() >= params.min_word_len)
            .collect(),
        None => Vec::new(),
    }
}

/// Share of the smaller box a word may have in common with a cheaper kept
/// word, or IoU with it, before it counts as the same word.
pub const MERGE_OVERLAP: f64 = 0.5;

fn same_word(a: &Rect, b: &Rect) -> bool {
    let inter = a.intersection(b).map_or(0, |r| r.area()) as f64;
    a.iou(b) >= MERGE_OVERLAP || inter >= MERGE_OVERLAP * a.area().min(b.area()) as f64
}

/// Greedy overlap suppression: cheapest first, a word survives unless it
/// overlaps a kept word by IoU, or mostly lies inside it (or vice versa).
pub fn merge_scales(mut words: Vec<Word>) -> Vec<Word> {
    words.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then(a.bbox.cmp(&b.bbox))
            .then(a.text.cmp(&b.text))
    });
    let mut kept: Vec<Word> = Vec::new();
    for w in words {
        if !kept.iter().any(|k| same_word(&k.bbox, &w.bbox)) {
            kept.push(w);
        }
    }
    kept
}
