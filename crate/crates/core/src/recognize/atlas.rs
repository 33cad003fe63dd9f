//! Glyph templates and nearest-template classification by chamfer distance.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::font;
use crate::raster::{distance_to_set, BinaryMask, DistanceMap};
use crate::{Error, Result};

/// Side of the square canvas every glyph is normalized to.
pub const GLYPH_SIZE: usize = 24;

/// Sub-samples per axis when resampling into the canvas.
const RESAMPLE: usize = 4;

/// Scale the ink of `mask` to fit a 24×24 canvas, preserving aspect and
/// centring the short side. Each canvas pixel is set when at least half of
/// its footprint falls on foreground.
pub fn normalize_glyph(mask: &BinaryMask) -> Result<BinaryMask> {
    let bb = mask
        .bounding_box()
        .ok_or_else(|| Error::InvalidInput("empty glyph mask".into()))?;
    let (bw, bh) = (bb.w as f64, bb.h as f64);
    let s = GLYPH_SIZE as f64 / bw.max(bh);
    let nw = ((bw * s).round() as usize).clamp(1, GLYPH_SIZE);
    let nh = ((bh * s).round() as usize).clamp(1, GLYPH_SIZE);
    let (ox, oy) = ((GLYPH_SIZE - nw) / 2, (GLYPH_SIZE - nh) / 2);
    let (sx, sy) = (bw / nw as f64, bh / nh as f64);
    let mut out = BinaryMask::new(GLYPH_SIZE, GLYPH_SIZE);
    let half = RESAMPLE * RESAMPLE / 2;
    for v in 0..nh {
        for u in 0..nw {
            let mut hits = 0;
            for j in 0..RESAMPLE {
                let y = ((v as f64 + (j as f64 + 0.5) / RESAMPLE as f64) * sy) as usize;
                for i in 0..RESAMPLE {
                    let x = ((u as f64 + (i as f64 + 0.5) / RESAMPLE as f64) * sx) as usize;
                    let (x, y) = (x.min(bb.w as usize - 1), y.min(bb.h as usize - 1));
                    if mask.get(bb.x as usize + x, bb.y as usize + y) {
                        hits += 1;
                    }
                }
            }
            if hits >= half {
                out.set(ox + u, oy + v, true);
            }
        }
    }
    Ok(out)
}

/// A normalized mask with the data chamfer matching needs.
#[derive(Clone, Debug)]
pub struct GlyphTemplate {
    mask: BinaryMask,
    points: Vec<(usize, usize)>,
    dist: DistanceMap,
}

impl GlyphTemplate {
    pub fn new(mask: BinaryMask) -> Result<Self> {
        if mask.width() != GLYPH_SIZE || mask.height() != GLYPH_SIZE {
            return Err(Error::DimensionMismatch {
                expected: (GLYPH_SIZE, GLYPH_SIZE),
                actual: (mask.width(), mask.height()),
            });
        }
        let points = mask.points().iter().map(|p| (p.x as usize, p.y as usize)).collect();
        let dist = distance_to_set(&mask);
        Ok(Self { mask, points, dist })
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    fn mean_distance_to(&self, other: &GlyphTemplate) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let far = (2.0f64).sqrt() * GLYPH_SIZE as f64;
        let sum: f64 = self
            .points
            .iter()
            .map(|&(x, y)| {
                let d = other.dist.get(x, y);
                if d.is_finite() {
                    d
                } else {
                    far
                }
            })
            .sum();
        sum / self.points.len() as f64
    }
}

/// Mean symmetric chamfer distance. Distances into an empty template count
/// as the canvas diagonal; an empty side contributes 0.
pub fn chamfer_distance(a: &GlyphTemplate, b: &GlyphTemplate) -> f64 {
    0.5 * (a.mean_distance_to(b) + b.mean_distance_to(a))
}

#[derive(Clone, Debug)]
pub struct AtlasEntry {
    pub label: char,
    pub font: String,
    /// Width/height of the glyph before normalization.
    pub aspect: f64,
    pub template: GlyphTemplate,
}

#[derive(Clone, Debug)]
pub struct GlyphAtlas {
    entries: Vec<AtlasEntry>,
    /// Normalized prior per label.
    priors: BTreeMap<char, f64>,
    temperature: f64,
}

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

/// Built-in font variants: (font id, stroke width / cap height).
pub const BUILTIN_FONTS: [(&str, f64); 2] = [("regular", 0.12), ("bold", 0.18)];

const BUILTIN_CAP: f64 = 40.0;

#[derive(Serialize, Deserialize)]
struct Manifest {
    glyph_size: usize,
    temperature: f64,
    entries: Vec<ManifestEntry>,
    #[serde(default)]
    priors: Vec<ManifestPrior>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    label: String,
    font: String,
    aspect: f64,
}

#[derive(Serialize, Deserialize)]
struct ManifestPrior {
    label: String,
    prior: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn codepoint_name(c: char) -> String {
    format!("U+{:04X}", c as u32)
}

fn parse_codepoint(s: &str) -> Option<char> {
    let hex = s.strip_prefix("U+")?;
    char::from_u32(u32::from_str_radix(hex, 16).ok()?)
}

impl GlyphAtlas {
    /// Assemble an atlas. Missing priors default to uniform.
    pub fn new(entries: Vec<AtlasEntry>, priors: Option<BTreeMap<char, f64>>, temperature: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("atlas has no entries".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        for e in &entries {
            if e.template.points.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "empty atlas mask for {}",
                    codepoint_name(e.label)
                )));
            }
        }
        let labels: Vec<char> = {
            let mut l: Vec<char> = entries.iter().map(|e| e.label).collect();
            l.sort_unstable();
            l.dedup();
            l
        };
        let mut priors = match priors {
            Some(p) => {
                for c in &labels {
                    match p.get(c) {
                        Some(&v) if v > 0.0 && v.is_finite() => {}
                        _ => {
                            return Err(Error::InvalidInput(format!(
                                "missing or non-positive prior for {}",
                                codepoint_name(*c)
                            )))
                        }
                    }
                }
                labels.iter().map(|c| (*c, p[c])).collect::<BTreeMap<_, _>>()
            }
            None => labels.iter().map(|c| (*c, 1.0)).collect(),
        };
        let total: f64 = priors.values().sum();
        for v in priors.values_mut() {
            *v /= total;
        }
        Ok(Self {
            entries,
            priors,
            temperature,
        })
    }

    /// Render the built-in font at every variant in [`BUILTIN_FONTS`].
    pub fn builtin() -> Self {
        let mut entries = Vec::new();
        for ch in font::CHARSET.chars() {
            for (id, ratio) in BUILTIN_FONTS {
                let raster = font::render(ch, BUILTIN_CAP, BUILTIN_CAP * ratio).expect("charset glyph");
                let mask = raster.mask();
                let bb = mask.bounding_box().expect("glyph has ink");
                let norm = normalize_glyph(&mask).expect("glyph has ink");
                entries.push(AtlasEntry {
                    label: ch,
                    font: id.to_string(),
                    aspect: bb.w as f64 / bb.h as f64,
                    template: GlyphTemplate::new(norm).expect("canvas size"),
                });
            }
        }
        Self::new(entries, None, DEFAULT_TEMPERATURE).expect("built-in atlas is valid")
    }

    pub fn entries(&self) -> &[AtlasEntry] {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = char> + '_ {
        self.priors.keys().copied()
    }

    pub fn prior(&self, label: char) -> Option<f64> {
        self.priors.get(&label).copied()
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Widest glyph aspect (w/h) among the entries.
    pub fn max_aspect(&self) -> f64 {
        self.entries.iter().map(|e| e.aspect).fold(0.0, f64::max)
    }

    /// Smallest chamfer distance per label.
    pub fn label_distances(&self, query: &GlyphTemplate) -> BTreeMap<char, f64> {
        let mut best: BTreeMap<char, f64> = BTreeMap::new();
        for e in &self.entries {
            let d = chamfer_distance(query, &e.template);
            best.entry(e.label).and_modify(|b| *b = b.min(d)).or_insert(d);
        }
        best
    }

    /// Softmax costs (−ln p) for every label given per-label distances.
    pub fn costs(&self, distances: &BTreeMap<char, f64>) -> Vec<(char, f64)> {
        let scores: Vec<(char, f64)> = distances
            .iter()
            .map(|(&c, &d)| (c, -d / self.temperature + self.priors[&c].ln()))
            .collect();
        let m = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let lse = m + scores.iter().map(|s| (s.1 - m).exp()).sum::<f64>().ln();
        let mut out: Vec<(char, f64)> = scores.into_iter().map(|(c, s)| (c, (lse - s).max(0.0))).collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Top-`n` labels for a glyph mask of any size, cheapest first.
    pub fn classify_glyph(&self, mask: &BinaryMask, n: usize) -> Result<Vec<(char, f64)>> {
        let query = GlyphTemplate::new(normalize_glyph(mask)?)?;
        let mut out = self.costs(&self.label_distances(&query));
        out.truncate(n);
        Ok(out)
    }

    /// Write `U+XXXX_font.png` masks and the manifest into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for e in &self.entries {
            let file = format!("{}_{}.png", codepoint_name(e.label), e.font);
            e.template.mask.save_png(&dir.join(&file))?;
            entries.push(ManifestEntry {
                file,
                label: codepoint_name(e.label),
                font: e.font.clone(),
                aspect: e.aspect,
            });
        }
        let manifest = Manifest {
            glyph_size: GLYPH_SIZE,
            temperature: self.temperature,
            entries,
            priors: self
                .priors
                .iter()
                .map(|(&c, &p)| ManifestPrior {
                    label: codepoint_name(c),
                    prior: p,
                })
                .collect(),
        };
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&path)?)?;
        let bad = |msg: String| Error::Parse {
            what: "glyph atlas manifest",
            path: path.clone(),
            line: 0,
            msg,
        };
        if manifest.glyph_size != GLYPH_SIZE {
            return Err(bad(format!("glyph size {} is not {GLYPH_SIZE}", manifest.glyph_size)));
        }
        let mut entries = Vec::new();
        for m in &manifest.entries {
            let label = parse_codepoint(&m.label).ok_or_else(|| bad(format!("bad label {:?}", m.label)))?;
            if !(m.aspect > 0.0 && m.aspect.is_finite()) {
                return Err(bad(format!("bad aspect for {}", m.label)));
            }
            let mask = BinaryMask::load_png(&dir.join(&m.file))?;
            entries.push(AtlasEntry {
                label,
                font: m.font.clone(),
                aspect: m.aspect,
                template: GlyphTemplate::new(mask)?,
            });
        }
        let priors = if manifest.priors.is_empty() {
            None
        } else {
            let mut p = BTreeMap::new();
            for mp in &manifest.priors {
                let c = parse_codepoint(&mp.label).ok_or_else(|| bad(format!("bad prior label {:?}", mp.label)))?;
                p.insert(c, mp.prior);
            }
            Some(p)
        };
        Self::new(entries, priors, manifest.temperature)
    }
}
