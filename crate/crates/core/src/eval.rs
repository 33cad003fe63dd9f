//! Localization and end-to-end scoring against word annotations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::raster::Rect;
use crate::{Error, Result};

/// Transcription that marks a "don't care" annotation.
pub const IGNORE_MARK: &str = "###";

pub const DEFAULT_IOU: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthWord {
    pub bbox: Rect,
    pub text: String,
    pub ignore: bool,
}

/// Parse lines of `x,y,w,h,"transcription"`.
pub fn parse_ground_truth(text: &str, path: &Path) -> Result<Vec<GroundTruthWord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse {
            what: "ground truth",
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let mut parts = line.splitn(5, ',');
        let mut num = || -> Result<u32> {
            let f = parts.next().ok_or_else(|| bad("expected x,y,w,h,\"text\"".into()))?;
            f.trim().parse().map_err(|e| bad(format!("{f:?}: {e}")))
        };
        let (x, y, w, h) = (num()?, num()?, num()?, num()?);
        let quoted = parts.next().ok_or_else(|| bad("missing transcription".into()))?.trim();
        let inner = quoted
            .strip_prefix('"')
            .and_then(|s| s.strip_suffix('"'))
            .ok_or_else(|| bad(format!("transcription {quoted:?} is not quoted")))?;
        let text = inner.replace("\"\"", "\"");
        let ignore = text == IGNORE_MARK;
        if text.is_empty() {
            return Err(bad("empty transcription".into()));
        }
        if w == 0 || h == 0 {
            return Err(bad("empty box".into()));
        }
        out.push(GroundTruthWord {
            bbox: Rect::new(x, y, w, h),
            text,
            ignore,
        });
    }
    Ok(out)
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthWord>> {
    parse_ground_truth(&fs::read_to_string(path)?, path)
}

pub fn format_ground_truth(words: &[GroundTruthWord]) -> String {
    let mut s = String::new();
    for w in words {
        let text = if w.ignore {
            IGNORE_MARK.to_string()
        } else {
            w.text.replace('"', "\"\"")
        };
        let r = w.bbox;
        let _ = writeln!(s, "{},{},{},{},\"{}\"", r.x, r.y, r.w, r.h, text);
    }
    s
}

/// Greedy one-to-one matching by descending IoU among pairs accepted by
/// `eligible`. Ties are broken by detection box then GT index, so the result
/// does not depend on detection order. Returns (det, gt) pairs.
fn greedy_pairs(
    dets: &[Rect],
    gts: &[GroundTruthWord],
    iou_thr: f64,
    eligible: impl Fn(usize, usize) -> bool,
) -> Vec<(usize, usize)> {
    let mut cand = Vec::new();
    for (d, db) in dets.iter().enumerate() {
        for (g, gt) in gts.iter().enumerate() {
            let iou = db.iou(&gt.bbox);
            if iou >= iou_thr && eligible(d, g) {
                cand.push((iou, d, g));
            }
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(dets[a.1].cmp(&dets[b.1])).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; dets.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut out = Vec::new();
    for (_, d, g) in cand {
        if !det_used[d] && !gt_used[g] {
            det_used[d] = true;
            gt_used[g] = true;
            out.push((d, g));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalizationCounts {
    pub matched: usize,
    /// Ground-truth words that are not ignore-flagged.
    pub gt: usize,
    /// Detections not matched to an ignore-flagged word.
    pub det: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub recall: f64,
    pub precision: f64,
    pub f: f64,
}

impl LocalizationCounts {
    pub fn add(&mut self, o: &LocalizationCounts) {
        self.matched += o.matched;
        self.gt += o.gt;
        self.det += o.det;
    }

    pub fn scores(&self) -> Scores {
        let recall = if self.gt == 0 {
            1.0
        } else {
            self.matched as f64 / self.gt as f64
        };
        let precision = if self.det == 0 {
            if self.gt == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            self.matched as f64 / self.det as f64
        };
        let f = if recall == 0.0 || precision == 0.0 {
            0.0
        } else {
            2.0 * recall * precision / (recall + precision)
        };
        Scores { recall, precision, f }
    }
}

pub fn localization_counts(dets: &[Rect], gts: &[GroundTruthWord], iou_thr: f64) -> LocalizationCounts {
    let pairs = greedy_pairs(dets, gts, iou_thr, |_, _| true);
    let matched = pairs.iter().filter(|&&(_, g)| !gts[g].ignore).count();
    let on_ignored = pairs.len() - matched;
    LocalizationCounts {
        matched,
        gt: gts.iter().filter(|g| !g.ignore).count(),
        det: dets.len() - on_ignored,
    }
}

/// Recall, precision and f-measure of one-to-one IoU matching.
pub fn match_localization(dets: &[Rect], gts: &[GroundTruthWord], iou_thr: f64) -> Scores {
    localization_counts(dets, gts, iou_thr).scores()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EndToEndCounts {
    pub correct: usize,
    pub gt: usize,
    pub det: usize,
    /// Detections overlapping no annotation at all.
    pub hallucinated: usize,
}

impl EndToEndCounts {
    pub fn add(&mut self, o: &EndToEndCounts) {
        self.correct += o.correct;
        self.gt += o.gt;
        self.det += o.det;
        self.hallucinated += o.hallucinated;
    }

    /// Fraction of counted words read exactly.
    pub fn accuracy(&self) -> f64 {
        if self.gt == 0 {
            1.0
        } else {
            self.correct as f64 / self.gt as f64
        }
    }
}

/// A detection is correct when it matches a word at `iou_thr` and its text
/// equals the transcription, case included.
pub fn match_end_to_end(dets: &[(Rect, String)], gts: &[GroundTruthWord], iou_thr: f64) -> EndToEndCounts {
    let boxes: Vec<Rect> = dets.iter().map(|d| d.0).collect();
    let correct = greedy_pairs(&boxes, gts, iou_thr, |d, g| !gts[g].ignore && dets[d].1 == gts[g].text).len();
    let hallucinated = boxes
        .iter()
        .filter(|b| gts.iter().all(|g| b.intersection(&g.bbox).is_none()))
        .count();
    EndToEndCounts {
        correct,
        gt: gts.iter().filter(|g| !g.ignore).count(),
        det: dets.len(),
        hallucinated,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub image: String,
    pub localization: LocalizationCounts,
    pub end_to_end: EndToEndCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub images: Vec<ImageReport>,
    pub localization: LocalizationCounts,
    pub scores: Scores,
    pub end_to_end: EndToEndCounts,
    pub word_accuracy: f64,
}

impl EvalReport {
    pub fn new(iou_threshold: f64, images: Vec<ImageReport>) -> Self {
        let mut loc = LocalizationCounts::default();
        let mut e2e = EndToEndCounts::default();
        for r in &images {
            loc.add(&r.localization);
            e2e.add(&r.end_to_end);
        }
        Self {
            iou_threshold,
            scores: loc.scores(),
            word_accuracy: e2e.accuracy(),
            localization: loc,
            end_to_end: e2e,
            images,
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<24} {:>5} {:>5} {:>5} {:>7} {:>7} {:>7}",
            "image", "gt", "det", "match", "correct", "halluc", "f"
        );
        for r in &self.images {
            let f = r.localization.scores().f;
            let _ = writeln!(
                s,
                "{:<24} {:>5} {:>5} {:>5} {:>7} {:>7} {:>7.3}",
                r.image,
                r.localization.gt,
                r.localization.det,
                r.localization.matched,
                r.end_to_end.correct,
                r.end_to_end.hallucinated,
                f
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "IoU threshold   {:.2}", self.iou_threshold);
        let _ = writeln!(s, "recall          {:.4}", self.scores.recall);
        let _ = writeln!(s, "precision       {:.4}", self.scores.precision);
        let _ = writeln!(s, "f-measure       {:.4}", self.scores.f);
        let _ = writeln!(
            s,
            "words correct   {} / {} ({:.4})",
            self.end_to_end.correct, self.end_to_end.gt, self.word_accuracy
        );
        let _ = writeln!(s, "hallucinated    {}", self.end_to_end.hallucinated);
        s
    }
}
