//! Seeded synthetic scene-text images with word and character ground truth.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::eval::{format_ground_truth, GroundTruthWord};
use crate::font;
use crate::raster::{luma, BinaryMask, ColorImage, Rect};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusParams {
    pub width: usize,
    pub height: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub min_glyphs: usize,
    pub max_glyphs: usize,
    /// Cap height range in pixels.
    pub min_cap: f64,
    pub max_cap: f64,
    /// Stroke width as a fraction of the cap height.
    pub min_stroke: f64,
    pub max_stroke: f64,
    /// Minimum luma difference between text and background.
    pub min_contrast: u8,
    /// Upper bound of the per-image Gaussian noise sigma.
    pub max_noise: f64,
    /// Filled ellipses added as clutter.
    pub max_distractors: usize,
    pub alphabet: String,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            min_words: 2,
            max_words: 4,
            min_glyphs: 3,
            max_glyphs: 8,
            min_cap: 20.0,
            max_cap: 44.0,
            min_stroke: 0.10,
            max_stroke: 0.16,
            min_contrast: 80,
            max_noise: 5.0,
            max_distractors: 2,
            alphabet: font::UPPER_DIGITS.to_string(),
        }
    }
}

impl CorpusParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.into()));
        if self.width < 200 || self.height < 100 {
            return bad("corpus images must be at least 200x100");
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            return bad("bad word count range");
        }
        if self.min_glyphs == 0 || self.min_glyphs > self.max_glyphs {
            return bad("bad glyph count range");
        }
        if !(self.min_cap >= 8.0 && self.min_cap <= self.max_cap) {
            return bad("bad cap height range");
        }
        if !(self.min_stroke > 0.0 && self.min_stroke <= self.max_stroke && self.max_stroke < 0.5) {
            return bad("bad stroke range");
        }
        if self.min_contrast > 200 {
            return bad("contrast above 200 cannot be sampled");
        }
        if !(self.max_noise >= 0.0 && self.max_noise.is_finite()) {
            return bad("noise sigma must be finite and non-negative");
        }
        if self.alphabet.is_empty() || self.alphabet.chars().any(|c| font::strokes(c).is_none()) {
            return bad("alphabet must be nonempty and drawable by the built-in font");
        }
        Ok(())
    }
}

/// Ground-truth mask of one character, cropped to its ink.
#[derive(Clone, Debug, PartialEq)]
pub struct CharTruth {
    pub label: char,
    pub x: u32,
    pub y: u32,
    pub mask: BinaryMask,
}

impl CharTruth {
    pub fn bbox(&self) -> Rect {
        Rect::new(self.x, self.y, self.mask.width() as u32, self.mask.height() as u32)
    }

    /// The mask placed on a `width`×`height` canvas.
    pub fn full_mask(&self, width: usize, height: usize) -> BinaryMask {
        let mut m = BinaryMask::new(width, height);
        for p in self.mask.points() {
            let (x, y) = ((p.x + self.x) as usize, (p.y + self.y) as usize);
            if x < width && y < height {
                m.set(x, y, true);
            }
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct CorpusImage {
    pub image: ColorImage,
    pub words: Vec<GroundTruthWord>,
    pub chars: Vec<CharTruth>,
}

fn image_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn random_word(rng: &mut ChaCha8Rng, params: &CorpusParams) -> String {
    let alphabet: Vec<char> = params.alphabet.chars().collect();
    let n = rng.random_range(params.min_glyphs..=params.max_glyphs);
    (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
}

/// Words drawn from the same distribution as the corpus text.
pub fn sample_words(n: usize, seed: u64, params: &CorpusParams) -> Vec<String> {
    let mut rng = image_rng(seed, u64::MAX);
    (0..n).map(|_| random_word(&mut rng, params)).collect()
}

fn random_color(rng: &mut ChaCha8Rng) -> [u8; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn gray(c: [u8; 3]) -> i32 {
    luma(c[0], c[1], c[2]) as i32
}

fn contrasting(rng: &mut ChaCha8Rng, base: [u8; 3], min: u8) -> [u8; 3] {
    loop {
        let c = random_color(rng);
        if (gray(c) - gray(base)).abs() >= min as i32 {
            return c;
        }
    }
}

struct Placed {
    raster: font::GlyphRaster,
    x: i32,
    y: i32,
    label: char,
}

/// Lay out `text` with its cap line at `y`; glyph inks are separated by
/// `gap` pixels. Returns the glyphs and the total ink width.
fn layout(text: &str, cap: f64, stroke: f64, gap: i32) -> (Vec<Placed>, i32, i32) {
    let mut out = Vec::new();
    let mut cursor = 0i32;
    let mut bottom = 0i32;
    for ch in text.chars() {
        let raster = font::render(ch, cap, stroke).expect("alphabet checked");
        let ink = raster.mask().bounding_box().expect("glyph has ink");
        let x = cursor - ink.x as i32;
        let y = raster.origin.1;
        bottom = bottom.max(y + ink.bottom() as i32);
        cursor = x + ink.right() as i32 + gap;
        out.push(Placed {
            raster,
            x,
            y,
            label: ch,
        });
    }
    (out, cursor - gap, bottom)
}

fn blend(img: &mut ColorImage, x: i32, y: i32, color: [u8; 3], alpha: f32) {
    if alpha <= 0.0 || x < 0 || y < 0 || x as usize >= img.width() || y as usize >= img.height() {
        return;
    }
    let (x, y) = (x as usize, y as usize);
    let old = img.get(x, y);
    let mut out = [0u8; 3];
    for k in 0..3 {
        out[k] = (old[k] as f32 * (1.0 - alpha) + color[k] as f32 * alpha).round() as u8;
    }
    img.put(x, y, out);
}

/// Image `index` of the corpus seeded by `seed`.
pub fn generate_image(params: &CorpusParams, seed: u64, index: u64) -> CorpusImage {
    let mut rng = image_rng(seed, index);
    let (w, h) = (params.width, params.height);
    let bg = random_color(&mut rng);
    let mut image = ColorImage::filled(w, h, bg);
    let n_words = rng.random_range(params.min_words..=params.max_words);
    let band = h as f64 / n_words as f64;
    let mut words = Vec::new();
    let mut chars = Vec::new();
    let mut occupied: Vec<Rect> = Vec::new();
    for k in 0..n_words {
        let text = random_word(&mut rng, params);
        let mut cap = rng.random_range(params.min_cap..=params.max_cap).min(band * 0.6);
        let ratio = rng.random_range(params.min_stroke..=params.max_stroke);
        let color = contrasting(&mut rng, bg, params.min_contrast);
        let (glyphs, width, height) = loop {
            let stroke = (cap * ratio).max(1.5);
            let gap = ((0.15 * cap).round() as i32).max(3);
            let (g, width, height) = layout(&text, cap, stroke, gap);
            if width as usize + 40 <= w || cap <= params.min_cap * 0.5 {
                break (g, width, height);
            }
            cap *= 0.85;
        };
        let x0 = rng.random_range(20..=(w as i32 - 20 - width).max(20));
        let top = (band * k as f64) as i32 + 8;
        let room = ((band * (k + 1) as f64) as i32 - 8 - height - top).max(0);
        let y0 = top + rng.random_range(0..=room);
        let mut word_box: Option<Rect> = None;
        for g in glyphs {
            let (gx, gy) = (x0 + g.x + g.raster.origin.0, y0 + g.y);
            for yy in 0..g.raster.height {
                for xx in 0..g.raster.width {
                    blend(
                        &mut image,
                        gx + xx as i32,
                        gy + yy as i32,
                        color,
                        g.raster.coverage[yy * g.raster.width + xx],
                    );
                }
            }
            let mask = g.raster.mask();
            let ink = mask.bounding_box().expect("glyph has ink");
            let (cx, cy) = (gx + ink.x as i32, gy + ink.y as i32);
            if cx < 0 || cy < 0 || (cx as u32 + ink.w) as usize > w || (cy as u32 + ink.h) as usize > h {
                continue;
            }
            let truth = CharTruth {
                label: g.label,
                x: cx as u32,
                y: cy as u32,
                mask: mask.crop(ink),
            };
            word_box = Some(word_box.map_or(truth.bbox(), |b| b.union(&truth.bbox())));
            chars.push(truth);
        }
        if let Some(b) = word_box {
            occupied.push(b);
            words.push(GroundTruthWord {
                bbox: b,
                text,
                ignore: false,
            });
        }
    }
    let n_blobs = rng.random_range(0..=params.max_distractors);
    for _ in 0..n_blobs {
        let color = contrasting(&mut rng, bg, params.min_contrast / 2);
        for _attempt in 0..50 {
            let (rx, ry) = (rng.random_range(10.0..35.0f64), rng.random_range(10.0..35.0f64));
            let cx = rng.random_range(rx + 2.0..w as f64 - rx - 2.0);
            let cy = rng.random_range(ry + 2.0..h as f64 - ry - 2.0);
            let b = Rect::new(
                (cx - rx) as u32,
                (cy - ry) as u32,
                (2.0 * rx) as u32 + 2,
                (2.0 * ry) as u32 + 2,
            );
            let clear = b.expand_clipped(15, 15, w, h);
            if occupied.iter().any(|o| o.intersection(&clear).is_some()) {
                continue;
            }
            for y in b.y..b.bottom().min(h as u32) {
                for x in b.x..b.right().min(w as u32) {
                    let (dx, dy) = ((x as f64 + 0.5 - cx) / rx, (y as f64 + 0.5 - cy) / ry);
                    if dx * dx + dy * dy <= 1.0 {
                        image.put(x as usize, y as usize, color);
                    }
                }
            }
            occupied.push(b);
            break;
        }
    }
    let sigma = rng.random_range(0.0..=params.max_noise);
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).expect("finite sigma");
        for y in 0..h {
            for x in 0..w {
                let mut p = image.get(x, y);
                for c in p.iter_mut() {
                    *c = (*c as f64 + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8;
                }
                image.put(x, y, p);
            }
        }
    }
    CorpusImage { image, words, chars }
}

pub const CHAR_INDEX: &str = "index.tsv";

pub fn image_name(index: u64) -> String {
    format!("img_{index:04}.png")
}

/// Ground-truth file name for an image file name.
pub fn gt_name(image: &str) -> String {
    let stem = image.rsplit_once('.').map_or(image, |(s, _)| s);
    format!("gt_{stem}.txt")
}

/// Write `n` images with word ground truth, character masks and the
/// character index into `dir`.
pub fn write_corpus(dir: &Path, params: &CorpusParams, n: u64, seed: u64) -> Result<()> {
    params.validate()?;
    fs::create_dir_all(dir.join("chars"))?;
    let mut index = String::from("image\tmask\tlabel\tx\ty\n");
    for i in 0..n {
        let c = generate_image(params, seed, i);
        let name = image_name(i);
        c.image.save_png(&dir.join(&name))?;
        fs::write(dir.join(gt_name(&name)), format_ground_truth(&c.words))?;
        let stem = name.trim_end_matches(".png");
        for (k, ch) in c.chars.iter().enumerate() {
            let file = format!("chars/{stem}_{k:03}.png");
            ch.mask.save_png(&dir.join(&file))?;
            index.push_str(&format!(
                "{name}\t{file}\tU+{:04X}\t{}\t{}\n",
                ch.label as u32, ch.x, ch.y
            ));
        }
    }
    fs::write(dir.join(CHAR_INDEX), index)?;
    Ok(())
}

/// Character masks per image name, read from a corpus index.
pub fn read_char_index(dir: &Path) -> Result<BTreeMap<String, Vec<CharTruth>>> {
    let path = dir.join(CHAR_INDEX);
    let text = fs::read_to_string(&path)?;
    let mut out: BTreeMap<String, Vec<CharTruth>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse {
            what: "character index",
            path: path.clone(),
            line: i + 1,
            msg,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", f.len())));
        }
        let label = f[2]
            .strip_prefix("U+")
            .and_then(|h| u32::from_str_radix(h, 16).ok())
            .and_then(char::from_u32)
            .ok_or_else(|| bad(format!("bad label {:?}", f[2])))?;
        let x = f[3].parse().map_err(|e| bad(format!("x: {e}")))?;
        let y = f[4].parse().map_err(|e| bad(format!("y: {e}")))?;
        let mask = BinaryMask::load_png(&dir.join(f[1]))?;
        out.entry(f[0].to_string())
            .or_default()
            .push(CharTruth { label, x, y, mask });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        let p = CorpusParams::default();
        let a = generate_image(&p, 7, 3);
        let b = generate_image(&p, 7, 3);
        assert_eq!(a.image, b.image);
        assert_eq!(a.words, b.words);
        assert_ne!(generate_image(&p, 7, 4).image, a.image);
    }

    #[test]
    fn truth_is_consistent() {
        let p = CorpusParams::default();
        for i in 0..5 {
            let c = generate_image(&p, 1, i);
            assert!((p.min_words..=p.max_words).contains(&c.words.len()));
            let total: usize = c.words.iter().map(|w| w.text.chars().count()).sum();
            assert_eq!(total, c.chars.len());
            for ch in &c.chars {
                assert!(c
                    .words
                    .iter()
                    .any(|w| w.bbox.intersection(&ch.bbox()) == Some(ch.bbox())));
            }
        }
    }
}
