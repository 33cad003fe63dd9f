mod common;

use std::sync::OnceLock;

use common::models::train_models;
use scenetext::corpus::{generate_image, CorpusParams};
use scenetext::pipeline::{run_image, run_scale, Models, PipelineParams};
use scenetext::raster::ColorImage;
use scenetext::recognize::merge_scales;

fn models() -> &'static Models {
    static M: OnceLock<Models> = OnceLock::new();
    M.get_or_init(|| train_models(8, 2000))
}

/// One clean word on a small canvas.
fn clean_word(index: u64) -> (ColorImage, String) {
    let cp = CorpusParams {
        width: 320,
        height: 240,
        min_words: 1,
        max_words: 1,
        min_glyphs: 4,
        max_glyphs: 6,
        min_cap: 28.0,
        max_cap: 36.0,
        max_noise: 0.0,
        max_distractors: 0,
        ..CorpusParams::default()
    };
    let c = generate_image(&cp, 21, index);
    (c.image, c.words[0].text.clone())
}

fn texts(img: &ColorImage, params: &PipelineParams) -> Vec<String> {
    run_image(img, models(), params)
        .words
        .into_iter()
        .map(|w| w.text)
        .collect()
}

#[test]
fn blank_images_give_no_words() {
    let p = PipelineParams::default();
    for rgb in [[0, 0, 0], [255, 255, 255], [90, 140, 30]] {
        assert!(run_image(&ColorImage::filled(320, 240, rgb), models(), &p)
            .words
            .is_empty());
    }
}

#[test]
fn clean_words_are_read_exactly() {
    let p = PipelineParams::default();
    let mut read = 0;
    for i in 0..4 {
        let (img, text) = clean_word(i);
        if texts(&img, &p) == vec![text] {
            read += 1;
        }
    }
    assert!(read >= 3, "{read} of 4");
}

#[test]
fn doubled_resolution_reads_the_same() {
    let p = PipelineParams::default();
    for i in 0..2 {
        let (img, text) = clean_word(i);
        let small = texts(&img, &p);
        assert_eq!(small, vec![text]);
        assert_eq!(texts(&img.resize(2.0), &p), small);
    }
}

#[test]
fn runs_are_deterministic() {
    let p = PipelineParams::default();
    let c = generate_image(&CorpusParams::default(), 7, 0);
    let a = run_image(&c.image, models(), &p);
    let b = run_image(&c.image, models(), &p);
    assert_eq!(a, b);
}

#[test]
fn scale_processing_order_does_not_matter() {
    let p = PipelineParams::default();
    let c = generate_image(&CorpusParams::default(), 7, 1);
    let scales = p.active_scales(c.image.width(), c.image.height());
    let mut all = Vec::new();
    for (i, &s) in scales.iter().enumerate().rev() {
        all.extend(run_scale(&c.image, i, s, models(), &p).0);
    }
    let mut words = merge_scales(all);
    words.sort_by(|a, b| (a.bbox.y, a.bbox.x, &a.text).cmp(&(b.bbox.y, b.bbox.x, &b.text)));
    assert_eq!(words, run_image(&c.image, models(), &p).words);
}
