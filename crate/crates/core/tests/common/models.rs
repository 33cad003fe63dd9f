use scenetext::classify::{subsample, train, SvmParams};
use scenetext::corpus::{generate_image, sample_words, CorpusParams};
use scenetext::pipeline::{collect_training_samples, Models, PipelineParams};
use scenetext::recognize::{count_words, GlyphAtlas, LanguageModel, DEFAULT_ALPHA};

/// Seed of the training corpus; evaluation corpora use other seeds.
pub const TRAIN_SEED: u64 = 1000;

/// Classifier trained on `images` corpus images, built-in atlas and a
/// trigram model from corpus-like words.
pub fn train_models(images: u64, samples: usize) -> Models {
    let cp = CorpusParams::default();
    let pp = PipelineParams::default();
    let mut all = Vec::new();
    for i in 0..images {
        let c = generate_image(&cp, TRAIN_SEED, i);
        let (w, h) = (c.image.width(), c.image.height());
        let masks: Vec<_> = c.chars.iter().map(|ch| ch.full_mask(w, h)).collect();
        all.extend(collect_training_samples(&c.image, &masks, &pp).unwrap());
    }
    let classifier = train(&subsample(&all, samples, TRAIN_SEED), &SvmParams::default()).unwrap();
    let atlas = GlyphAtlas::builtin();
    let words = sample_words(20_000, TRAIN_SEED, &cp);
    let lm = LanguageModel::new(
        &count_words(words.iter().map(|s| s.as_str())),
        atlas.labels(),
        DEFAULT_ALPHA,
    )
    .unwrap();
    Models { classifier, atlas, lm }
}
