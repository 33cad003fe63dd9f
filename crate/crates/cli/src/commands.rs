use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use scenetext::classify::{accuracy, class_counts, grid_search, subsample, train, TrainingSample};
use scenetext::corpus::{read_char_index, sample_words, write_corpus};
use scenetext::eval::{load_ground_truth, localization_counts, match_end_to_end, EvalReport, ImageReport};
use scenetext::mser::detect_candidates;
use scenetext::pipeline::{
    classify_candidates, collect_training_samples, line_seed, run_image, suppress_duplicates, DetectionRecord,
};
use scenetext::raster::ColorImage;
use scenetext::recognize::{count_words, LanguageModel};
use scenetext::segment::{refine_line, SegmentParams};
use scenetext::strokefeat::{compute_features, region_ssps, ssp_points, RegionFeatures};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::draw;

pub const ATLAS_DIR: &str = "atlas";
pub const TRIGRAM_FILE: &str = "trigrams.tsv";

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

/// Returns false when any image failed; the others are still processed.
pub fn detect(cfg: &PipelineConfig, images: &[PathBuf], out_dir: Option<&Path>) -> Result<bool> {
    let models = cfg.load_models()?;
    if let Some(d) = out_dir {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let outcomes: Vec<Result<usize>> = images
        .par_iter()
        .map(|path| {
            let img = ColorImage::load(path)?;
            let start = Instant::now();
            let result = run_image(&img, &models, &cfg.pipeline);
            let ms = if cfg.output.no_timing {
                0
            } else {
                start.elapsed().as_millis() as u64
            };
            let record = DetectionRecord::new(file_name(path), &result.words, ms);
            let dir = out_dir.map_or_else(
                || path.parent().unwrap_or(Path::new("")).to_path_buf(),
                Path::to_path_buf,
            );
            write_json(&dir.join(format!("{}.json", stem(path))), &record)?;
            if cfg.output.overlay {
                let mut canvas = img.clone();
                for w in &result.words {
                    draw::rect_outline(&mut canvas, &w.bbox, draw::RED);
                }
                canvas.save_png(&dir.join(format!("{}_overlay.png", stem(path))))?;
            }
            log::debug!("{}: {:?}", path.display(), result.scales);
            Ok(record.words.len())
        })
        .collect();
    let mut ok = true;
    for (path, o) in images.iter().zip(outcomes) {
        match o {
            Ok(n) => log::info!("{}: {n} words", path.display()),
            Err(e) => {
                log::error!("{}: {e:#}", path.display());
                ok = false;
            }
        }
    }
    Ok(ok)
}

/// Labelled regions from every image listed in the character index.
fn gather_samples(cfg: &PipelineConfig, gt_dir: &Path) -> Result<Vec<TrainingSample>> {
    let index = read_char_index(gt_dir).with_context(|| format!("reading character index in {}", gt_dir.display()))?;
    if index.is_empty() {
        bail!("no characters listed in {}", gt_dir.display());
    }
    let entries: Vec<_> = index.into_iter().collect();
    let per_image: Vec<Vec<TrainingSample>> = entries
        .par_iter()
        .map(|(name, chars)| {
            let img = ColorImage::load(&gt_dir.join(name))?;
            let masks: Vec<_> = chars.iter().map(|c| c.full_mask(img.width(), img.height())).collect();
            Ok(collect_training_samples(&img, &masks, &cfg.pipeline)?)
        })
        .collect::<Result<_>>()?;
    let samples: Vec<TrainingSample> = per_image.into_iter().flatten().collect();
    log::info!(
        "{} labelled regions from {} images, per class {:?}",
        samples.len(),
        entries.len(),
        class_counts(&samples)
    );
    Ok(subsample(&samples, cfg.train.samples, cfg.pipeline.seed))
}

pub fn train_classifier(cfg: &PipelineConfig, gt_dir: &Path, out: &Path) -> Result<()> {
    let samples = gather_samples(cfg, gt_dir)?;
    let start = Instant::now();
    let model = train(&samples, &cfg.train.svm)?;
    log::info!(
        "trained on {} samples in {:.1} s, training accuracy {:.3}",
        samples.len(),
        start.elapsed().as_secs_f64(),
        accuracy(&model, &samples)
    );
    model.save(out).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

pub fn cv_classifier(cfg: &PipelineConfig, gt_dir: &Path, folds: usize, cs: &[f64], gammas: &[f64]) -> Result<()> {
    let samples = gather_samples(cfg, gt_dir)?;
    let grid = grid_search(&samples, cs, gammas, folds, cfg.pipeline.seed)?;
    println!("{:>10} {:>10} {:>10}", "C", "gamma", "accuracy");
    for (c, g, acc) in grid {
        println!("{c:>10} {g:>10} {acc:>10.4}");
    }
    Ok(())
}

fn read_results(dir: &Path) -> Result<BTreeMap<String, DetectionRecord>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let text = fs::read_to_string(&path)?;
        let Ok(record) = serde_json::from_str::<DetectionRecord>(&text) else {
            log::warn!("skipping {}: not a detection result", path.display());
            continue;
        };
        out.insert(scenetext::corpus::gt_name(&record.image), record);
    }
    Ok(out)
}

pub fn eval(results: &Path, gt_dir: &Path, iou: f64, json: bool, report_path: Option<&Path>) -> Result<()> {
    if !(iou > 0.0 && iou <= 1.0) {
        bail!("iou must lie in (0, 1]");
    }
    let mut records = read_results(results)?;
    let mut gt_files: Vec<PathBuf> = fs::read_dir(gt_dir)
        .with_context(|| format!("reading {}", gt_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| file_name(p).starts_with("gt_") && p.extension().is_some_and(|e| e == "txt"))
        .collect();
    gt_files.sort();
    if gt_files.is_empty() {
        bail!("no gt_*.txt files in {}", gt_dir.display());
    }
    let mut images = Vec::new();
    for gt_path in &gt_files {
        let gts = load_ground_truth(gt_path)?;
        let (image, dets) = match records.remove(&file_name(gt_path)) {
            Some(r) => (r.image.clone(), r.boxes()),
            None => {
                log::warn!("no result for {}, counting it as empty", gt_path.display());
                (file_name(gt_path), Vec::new())
            }
        };
        let rects: Vec<_> = dets.iter().map(|d| d.0).collect();
        images.push(ImageReport {
            image,
            localization: localization_counts(&rects, &gts, iou),
            end_to_end: match_end_to_end(&dets, &gts, iou),
        });
    }
    for name in records.keys() {
        log::warn!("result without ground truth ({name} not found)");
    }
    let report = EvalReport::new(iou, images);
    if let Some(p) = report_path {
        write_json(p, &report)?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

#[derive(Serialize)]
struct FeatureRow {
    index: usize,
    x: u32,
    y: u32,
    w: u32,
    h: u32,
    area: usize,
    source: scenetext::mser::Source,
    stroke_support_pixels: usize,
    features: RegionFeatures,
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<&'static str>,
}

pub fn features(cfg: &PipelineConfig, image: &Path, scale: f64, overlay: Option<&Path>) -> Result<()> {
    if !(scale > 0.0 && scale <= 1.0) {
        bail!("scale must lie in (0, 1]");
    }
    let img = ColorImage::load(image)?;
    let img = if scale == 1.0 { img } else { img.resize(scale) };
    let classifier = match &cfg.classifier {
        Some(p) => Some(scenetext::classify::KernelModel::load(p)?),
        None => None,
    };
    let mp = cfg.pipeline.mser.params(img.width(), img.height());
    let candidates = detect_candidates(&img, &mp, cfg.pipeline.mser.merge_iou);
    let mut rows = Vec::new();
    let mut canvas = img.clone();
    for (i, (r, source)) in candidates.iter().enumerate() {
        let f = compute_features(r);
        let ssps = region_ssps(r);
        let class = match &classifier {
            Some(m) => Some(m.classify(&f)?.0.name()),
            None => None,
        };
        let bb = r.bbox();
        rows.push(FeatureRow {
            index: i,
            x: bb.x,
            y: bb.y,
            w: bb.w,
            h: bb.h,
            area: r.area(),
            source: *source,
            stroke_support_pixels: ssps.len(),
            features: f,
            class,
        });
        if overlay.is_some() {
            draw::points(&mut canvas, &ssp_points(&ssps), draw::RED);
        }
    }
    if let Some(p) = overlay {
        canvas.save_png(p)?;
    }
    println!("{}", serde_json::to_string_pretty(&rows)?);
    Ok(())
}

pub fn debug_lines(cfg: &PipelineConfig, image: &Path, scale: f64, out_dir: &Path) -> Result<()> {
    if !(scale > 0.0 && scale <= 1.0) {
        bail!("scale must lie in (0, 1]");
    }
    let models = cfg.load_models()?;
    let img = ColorImage::load(image)?;
    let img = if scale == 1.0 { img } else { img.resize(scale) };
    fs::create_dir_all(out_dir)?;
    let (regions, classes) = classify_candidates(&img, &models, &cfg.pipeline);
    let (regions, classes) = suppress_duplicates(regions, classes, cfg.pipeline.duplicate_iou);
    let lines = scenetext::lines::form_lines(&regions, &classes, &cfg.pipeline.lines);
    let mut canvas = img.clone();
    for line in &lines {
        for &m in &line.members {
            draw::rect_outline(&mut canvas, &regions[m].bbox(), draw::GREEN);
        }
        draw::bottom_line(&mut canvas, &line.bottom_line, &line.bbox, draw::RED);
    }
    canvas.save_png(&out_dir.join("lines.png"))?;
    let scale_index = cfg.pipeline.scales.iter().position(|&s| s == scale).unwrap_or(0);
    for (k, line) in lines.iter().enumerate() {
        let seg = SegmentParams {
            seed: line_seed(cfg.pipeline.seed, scale_index, k),
            keep_label_maps: true,
            ..cfg.pipeline.segment
        };
        let refinement = refine_line(&img, line, &regions, &seg);
        for (i, it) in refinement.iterations.iter().enumerate() {
            if let Some(map) = &it.label_map {
                let mut c = img.clone();
                draw::label_map(&mut c, map);
                c.save_png(&out_dir.join(format!("line_{k:03}_iter_{i:02}.png")))?;
            }
        }
        match &refinement.result {
            Ok(components) => {
                let mut c = img.clone();
                for comp in components {
                    draw::tint(&mut c, comp, draw::BLUE);
                }
                c.save_png(&out_dir.join(format!("line_{k:03}_result.png")))?;
                log::info!(
                    "line {k}: {} members, {} components",
                    line.members.len(),
                    components.len()
                );
            }
            Err(r) => log::info!("line {k}: {} members, rejected ({r:?})", line.members.len()),
        }
    }
    Ok(())
}

pub fn gen_corpus(cfg: &PipelineConfig, n: u64, out: &Path) -> Result<()> {
    write_corpus(out, &cfg.corpus, n, cfg.pipeline.seed)
        .with_context(|| format!("writing corpus to {}", out.display()))?;
    log::info!("wrote {n} images to {}", out.display());
    Ok(())
}

/// The built-in atlas plus trigram counts over sampled corpus words.
pub fn gen_assets(cfg: &PipelineConfig, out: &Path, words: usize) -> Result<()> {
    let atlas = cfg.load_atlas()?;
    atlas.save(&out.join(ATLAS_DIR))?;
    let sampled = sample_words(words, cfg.pipeline.seed, &cfg.corpus);
    let counts = count_words(sampled.iter().map(String::as_str));
    fs::write(out.join(TRIGRAM_FILE), LanguageModel::format_counts(&counts))?;
    log::info!(
        "wrote {} atlas glyphs and {} trigrams to {}",
        atlas.entries().len(),
        counts.len(),
        out.display()
    );
    Ok(())
}
