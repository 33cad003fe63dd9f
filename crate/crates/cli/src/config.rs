use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use scenetext::classify::{KernelModel, SvmParams};
use scenetext::corpus::CorpusParams;
use scenetext::pipeline::{Models, PipelineParams};
use scenetext::recognize::{GlyphAtlas, LanguageModel, DEFAULT_ALPHA};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Random subset size drawn from all labelled regions.
    pub samples: usize,
    pub svm: SvmParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            samples: 20_000,
            svm: SvmParams::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Write `<stem>_overlay.png` with the word boxes next to each result.
    pub overlay: bool,
    /// Report zero instead of wall-clock time, for reproducible output.
    pub no_timing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub classifier: Option<PathBuf>,
    /// Atlas directory; the built-in stroke font when unset.
    pub atlas: Option<PathBuf>,
    /// Trigram counts file; a uniform model when unset.
    pub language_model: Option<PathBuf>,
    pub lm_alpha: f64,
    pub pipeline: PipelineParams,
    pub train: TrainConfig,
    pub output: OutputConfig,
    pub corpus: CorpusParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            classifier: None,
            atlas: None,
            language_model: None,
            lm_alpha: DEFAULT_ALPHA,
            pipeline: PipelineParams::default(),
            train: TrainConfig::default(),
            output: OutputConfig::default(),
            corpus: CorpusParams::default(),
        }
    }
}

impl PipelineConfig {
    /// Parse a TOML file. Relative paths inside it are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.classifier, &mut cfg.atlas, &mut cfg.language_model]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.train.svm.validate()?;
        self.corpus.validate()?;
        if !(self.lm_alpha > 0.0 && self.lm_alpha.is_finite()) {
            bail!("lm_alpha must be positive");
        }
        for p in [&self.classifier, &self.atlas, &self.language_model]
            .into_iter()
            .flatten()
        {
            if !p.exists() {
                bail!("{} does not exist", p.display());
            }
        }
        Ok(())
    }

    pub fn load_atlas(&self) -> Result<GlyphAtlas> {
        match &self.atlas {
            Some(dir) => GlyphAtlas::load(dir).with_context(|| format!("loading atlas {}", dir.display())),
            None => Ok(GlyphAtlas::builtin()),
        }
    }

    pub fn load_models(&self) -> Result<Models> {
        let Some(path) = &self.classifier else {
            bail!("no classifier model configured (use --classifier or `classifier` in the config)");
        };
        let classifier = KernelModel::load(path).with_context(|| format!("loading classifier {}", path.display()))?;
        let atlas = self.load_atlas()?;
        let lm = match &self.language_model {
            Some(p) => LanguageModel::load(p, atlas.labels(), self.lm_alpha)
                .with_context(|| format!("loading language model {}", p.display()))?,
            None => {
                log::warn!("no language model configured, using a uniform one");
                LanguageModel::uniform(atlas.labels())?
            }
        };
        Ok(Models { classifier, atlas, lm })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let cfg: PipelineConfig = toml::from_str("[pipeline]\nseed = 9\nscales = [1.0, 0.5]\n").unwrap();
        assert_eq!(cfg.pipeline.seed, 9);
        assert_eq!(cfg.pipeline.scales, vec![1.0, 0.5]);
        assert_eq!(cfg.pipeline.mser, PipelineParams::default().mser);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("colour = 1\n").is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "classifier = \"m.json\"\n").unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.classifier.unwrap(), dir.path().join("m.json"));
    }

    #[test]
    fn missing_paths_fail_validation() {
        let cfg = PipelineConfig {
            classifier: Some("/nonexistent/model.json".into()),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
