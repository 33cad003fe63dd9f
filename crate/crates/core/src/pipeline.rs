//! Multi-scale detection and recognition of one image.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{label_regions, KernelModel, RegionClass, TrainingSample};
use crate::lines::{form_lines, LineParams};
use crate::mser::{detect_candidates, MserParams};
use crate::raster::{BinaryMask, ColorImage, Rect, Region};
use crate::recognize::{merge_scales, recognize_line, GlyphAtlas, LanguageModel, RecognizeParams, Word};
use crate::segment::{refine_line, SegmentParams};
use crate::strokefeat::compute_features;
use crate::{Error, Result};

/// MSER settings with the area cap relative to the (scaled) image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MserConfig {
    pub delta: u8,
    pub min_area: usize,
    pub max_area_fraction: f64,
    pub max_variation: f64,
    pub min_diversity: f64,
    /// Candidates from different channels overlapping at least this much
    /// are kept once.
    pub merge_iou: f64,
}

impl Default for MserConfig {
    fn default() -> Self {
        let p = MserParams::for_image(4, 4);
        Self {
            delta: p.delta,
            min_area: p.min_area,
            max_area_fraction: 0.25,
            max_variation: p.max_variation,
            min_diversity: p.min_diversity,
            merge_iou: 0.9,
        }
    }
}

impl MserConfig {
    pub fn params(&self, width: usize, height: usize) -> MserParams {
        MserParams {
            delta: self.delta,
            min_area: self.min_area,
            max_area: ((width * height) as f64 * self.max_area_fraction) as usize,
            max_variation: self.max_variation,
            min_diversity: self.min_diversity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    /// Master seed; every random choice in the pipeline derives from it.
    pub seed: u64,
    /// Strictly decreasing factors in (0, 1].
    pub scales: Vec<f64>,
    /// Scales below 1 are skipped when the scaled image's short side would
    /// fall under this many pixels.
    pub min_side: usize,
    pub mser: MserConfig,
    /// Text candidates whose boxes overlap a larger kept candidate at
    /// least this much (IoU) are dropped before line formation.
    pub duplicate_iou: f64,
    pub lines: LineParams,
    pub segment: SegmentParams,
    pub recognize: RecognizeParams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            seed: 0,
            scales: vec![1.0, 0.7, 0.5, 0.35, 0.25],
            min_side: 100,
            mser: MserConfig::default(),
            duplicate_iou: 0.8,
            lines: LineParams::default(),
            segment: SegmentParams::default(),
            recognize: RecognizeParams::default(),
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::InvalidInput("scale ladder is empty".into()));
        }
        for (i, &s) in self.scales.iter().enumerate() {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::InvalidInput(format!("scale {s} outside (0, 1]")));
            }
            if i > 0 && s >= self.scales[i - 1] {
                return Err(Error::InvalidInput("scales must be strictly decreasing".into()));
            }
        }
        self.mser.params(1000, 1000).validate()?;
        if !(self.mser.merge_iou > 0.0 && self.mser.merge_iou <= 1.0) {
            return Err(Error::InvalidInput("merge_iou must lie in (0, 1]".into()));
        }
        if !(self.duplicate_iou > 0.0 && self.duplicate_iou <= 1.0) {
            return Err(Error::InvalidInput("duplicate_iou must lie in (0, 1]".into()));
        }
        self.lines.validate()?;
        self.recognize.validate()?;
        Ok(())
    }

    /// Scales that apply to an image of the given size.
    pub fn active_scales(&self, width: usize, height: usize) -> Vec<f64> {
        let side = width.min(height) as f64;
        self.scales
            .iter()
            .copied()
            .filter(|&s| s >= 1.0 || (side * s).round() >= self.min_side as f64)
            .collect()
    }
}

/// Trained artifacts, immutable once loaded.
#[derive(Clone, Debug)]
pub struct Models {
    pub classifier: KernelModel,
    pub atlas: GlyphAtlas,
    pub lm: LanguageModel,
}

/// Seed for one refinement, mixed from the master seed and its position.
pub fn line_seed(seed: u64, scale: usize, line: usize) -> u64 {
    let mut z = seed ^ ((scale as u64) << 32) ^ line as u64;
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Regions surviving classification at one scale, with their classes.
pub fn classify_candidates(
    img: &ColorImage,
    models: &Models,
    params: &PipelineParams,
) -> (Vec<Region>, Vec<RegionClass>) {
    let mp = params.mser.params(img.width(), img.height());
    let mut regions = Vec::new();
    let mut classes = Vec::new();
    for (r, _) in detect_candidates(img, &mp, params.mser.merge_iou) {
        let f = compute_features(&r);
        match models.classifier.classify(&f) {
            Ok((RegionClass::Background, _)) | Err(_) => {}
            Ok((c, _)) => {
                regions.push(r);
                classes.push(c);
            }
        }
    }
    (regions, classes)
}

/// Nested MSERs of one glyph: keep the larger region of every group whose
/// boxes overlap at least `iou`. Output keeps the input order.
pub fn suppress_duplicates(
    regions: Vec<Region>,
    classes: Vec<RegionClass>,
    iou: f64,
) -> (Vec<Region>, Vec<RegionClass>) {
    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&a, &b| {
        regions[b]
            .area()
            .cmp(&regions[a].area())
            .then(regions[a].bbox().cmp(&regions[b].bbox()))
            .then(a.cmp(&b))
    });
    let mut keep = vec![false; regions.len()];
    let mut kept_boxes: Vec<Rect> = Vec::new();
    for i in order {
        let b = regions[i].bbox();
        if kept_boxes.iter().all(|k| k.iou(&b) < iou) {
            keep[i] = true;
            kept_boxes.push(b);
        }
    }
    regions
        .into_iter()
        .zip(classes)
        .zip(keep)
        .filter_map(|(rc, k)| k.then_some(rc))
        .unzip()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaleStats {
    pub scale: f64,
    pub candidates: usize,
    pub lines: usize,
    pub accepted_lines: usize,
    pub words: usize,
}

/// Words found at one scale, in original image coordinates.
pub fn run_scale(
    img: &ColorImage,
    scale_index: usize,
    scale: f64,
    models: &Models,
    params: &PipelineParams,
) -> (Vec<Word>, ScaleStats) {
    let scaled = if scale == 1.0 { img.clone() } else { img.resize(scale) };
    let (regions, classes) = classify_candidates(&scaled, models, params);
    let (regions, classes) = suppress_duplicates(regions, classes, params.duplicate_iou);
    let lines = form_lines(&regions, &classes, &params.lines);
    let per_line: Vec<Option<Vec<Word>>> = lines
        .par_iter()
        .enumerate()
        .map(|(k, line)| {
            let seg = SegmentParams {
                seed: line_seed(params.seed, scale_index, k),
                ..params.segment
            };
            let components = refine_line(&scaled, line, &regions, &seg).result.ok()?;
            Some(recognize_line(
                &components,
                &models.atlas,
                &models.lm,
                &params.recognize,
            ))
        })
        .collect();
    let (fx, fy) = (
        img.width() as f64 / scaled.width() as f64,
        img.height() as f64 / scaled.height() as f64,
    );
    let mut words = Vec::new();
    for w in per_line.iter().flatten().flatten() {
        words.push(Word {
            bbox: scale_back(&w.bbox, fx, fy, img.width(), img.height()),
            ..w.clone()
        });
    }
    let stats = ScaleStats {
        scale,
        candidates: regions.len(),
        lines: lines.len(),
        accepted_lines: per_line.iter().filter(|l| l.is_some()).count(),
        words: words.len(),
    };
    (words, stats)
}

fn scale_back(r: &Rect, fx: f64, fy: f64, width: usize, height: usize) -> Rect {
    let x0 = (r.x as f64 * fx).floor().min(width as f64);
    let y0 = (r.y as f64 * fy).floor().min(height as f64);
    let x1 = (r.right() as f64 * fx).ceil().min(width as f64);
    let y1 = (r.bottom() as f64 * fy).ceil().min(height as f64);
    Rect::new(x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageResult {
    /// Words in reading order (top to bottom, then left to right).
    pub words: Vec<Word>,
    pub scales: Vec<ScaleStats>,
}

/// Full pipeline: every active scale independently, then overlap merging.
pub fn run_image(img: &ColorImage, models: &Models, params: &PipelineParams) -> ImageResult {
    let scales = params.active_scales(img.width(), img.height());
    let per_scale: Vec<(Vec<Word>, ScaleStats)> = scales
        .par_iter()
        .enumerate()
        .map(|(i, &s)| run_scale(img, i, s, models, params))
        .collect();
    let mut all = Vec::new();
    let mut stats = Vec::new();
    for (w, s) in per_scale {
        all.extend(w);
        stats.push(s);
    }
    let mut words = merge_scales(all);
    words.sort_by(|a, b| (a.bbox.y, a.bbox.x, &a.text).cmp(&(b.bbox.y, b.bbox.x, &b.text)));
    ImageResult { words, scales: stats }
}

/// Labelled candidate regions at every active scale. Character masks are
/// given at full resolution and resampled with each scale.
pub fn collect_training_samples(
    img: &ColorImage,
    char_masks: &[BinaryMask],
    params: &PipelineParams,
) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for s in params.active_scales(img.width(), img.height()) {
        let scaled = if s == 1.0 { img.clone() } else { img.resize(s) };
        let (w, h) = (scaled.width(), scaled.height());
        let masks: Vec<BinaryMask> = char_masks
            .iter()
            .map(|m| if s == 1.0 { m.clone() } else { m.resize_nearest(w, h) })
            .filter(|m| !m.is_empty())
            .collect();
        let mp = params.mser.params(w, h);
        let regions: Vec<Region> = detect_candidates(&scaled, &mp, params.mser.merge_iou)
            .into_iter()
            .map(|(r, _)| r)
            .collect();
        out.extend(label_regions(&regions, &masks, w, h)?);
    }
    Ok(out)
}

/// One word of the detection output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordRecord {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub text: String,
    pub cost: f64,
}

/// Per-image detection output document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image: String,
    pub words: Vec<WordRecord>,
    pub timing_ms: u64,
}

impl DetectionRecord {
    pub fn new(image: String, words: &[Word], timing_ms: u64) -> Self {
        Self {
            image,
            words: words
                .iter()
                .map(|w| WordRecord {
                    x: w.bbox.x,
                    y: w.bbox.y,
                    w: w.bbox.w,
                    h: w.bbox.h,
                    text: w.text.clone(),
                    cost: w.cost,
                })
                .collect(),
            timing_ms,
        }
    }

    pub fn boxes(&self) -> Vec<(Rect, String)> {
        self.words
            .iter()
            .map(|w| (Rect::new(w.x, w.y, w.w, w.h), w.text.clone()))
            .collect()
    }
}
