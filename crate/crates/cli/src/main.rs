mod commands;
mod config;
mod draw;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::PipelineConfig;

#[derive(Parser)]
#[command(name = "scenetext", version, about = "Scene text localization and recognition")]
struct Cli {
    /// TOML configuration; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct ModelArgs {
    /// Classifier model (JSON).
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Glyph atlas directory.
    #[arg(long)]
    atlas: Option<PathBuf>,
    /// Trigram counts file.
    #[arg(long)]
    lm: Option<PathBuf>,
    /// Language model weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated scale ladder, strictly decreasing in (0, 1].
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect and read words; writes `<stem>.json` per image.
    Detect {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        #[command(flatten)]
        models: ModelArgs,
        /// Output directory (default: next to each image).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also write `<stem>_overlay.png` with the word boxes.
        #[arg(long)]
        overlay: bool,
        /// Report timing_ms as 0.
        #[arg(long)]
        no_timing: bool,
    },
    /// Label MSER candidates against character masks and train the classifier.
    TrainClassifier {
        gt_dir: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Training subset size.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Cross-validated grid over C and gamma.
    CvClassifier {
        gt_dir: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
        c: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.2,1")]
        gamma: Vec<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Score detection results against ground truth.
    Eval {
        results: PathBuf,
        gt_dir: PathBuf,
        #[arg(long, default_value_t = scenetext::eval::DEFAULT_IOU)]
        iou: f64,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Dump per-region features; optionally draw stroke support pixels.
    Features {
        image: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Classify the regions with this model.
        #[arg(long)]
        classifier: Option<PathBuf>,
        /// Write an overlay with stroke support pixels in red.
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Draw bottom lines and per-iteration label maps of every line at one scale.
    DebugLines {
        image: PathBuf,
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write a synthetic corpus with word and character ground truth.
    GenCorpus {
        n: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the built-in glyph atlas and language model counts.
    GenAssets {
        #[arg(long)]
        out: PathBuf,
        /// Number of sampled words for the trigram counts.
        #[arg(long, default_value_t = 20_000)]
        words: usize,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.pipeline.seed = s;
    }
    Ok(cfg)
}

fn apply_models(cfg: &mut PipelineConfig, m: &ModelArgs) {
    if let Some(p) = &m.classifier {
        cfg.classifier = Some(p.clone());
    }
    if let Some(p) = &m.atlas {
        cfg.atlas = Some(p.clone());
    }
    if let Some(p) = &m.lm {
        cfg.language_model = Some(p.clone());
    }
    if let Some(l) = m.lambda {
        cfg.pipeline.recognize.lambda = l;
    }
    if let Some(s) = &m.scales {
        cfg.pipeline.scales = s.clone();
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Detect {
            images,
            models,
            out_dir,
            overlay,
            no_timing,
        } => {
            apply_models(&mut cfg, &models);
            cfg.output.overlay |= overlay;
            cfg.output.no_timing |= no_timing;
            cfg.validate()?;
            commands::detect(&cfg, &images, out_dir.as_deref())
        }
        Command::TrainClassifier {
            gt_dir,
            out,
            samples,
            c,
            gamma,
        } => {
            if let Some(n) = samples {
                cfg.train.samples = n;
            }
            if let Some(c) = c {
                cfg.train.svm.c = c;
            }
            if let Some(g) = gamma {
                cfg.train.svm.gamma = g;
            }
            cfg.validate()?;
            commands::train_classifier(&cfg, &gt_dir, &out).map(|_| true)
        }
        Command::CvClassifier {
            gt_dir,
            folds,
            c,
            gamma,
            samples,
        } => {
            if let Some(n) = samples {
                cfg.train.samples = n;
            }
            cfg.validate()?;
            commands::cv_classifier(&cfg, &gt_dir, folds, &c, &gamma).map(|_| true)
        }
        Command::Eval {
            results,
            gt_dir,
            iou,
            json,
            report,
        } => commands::eval(&results, &gt_dir, iou, json, report.as_deref()).map(|_| true),
        Command::Features {
            image,
            scale,
            classifier,
            overlay,
        } => {
            if classifier.is_some() {
                cfg.classifier = classifier;
            }
            cfg.validate()?;
            commands::features(&cfg, &image, scale, overlay.as_deref()).map(|_| true)
        }
        Command::DebugLines {
            image,
            models,
            scale,
            out_dir,
        } => {
            apply_models(&mut cfg, &models);
            cfg.validate()?;
            commands::debug_lines(&cfg, &image, scale, &out_dir).map(|_| true)
        }
        Command::GenCorpus { n, out } => commands::gen_corpus(&cfg, n, &out).map(|_| true),
        Command::GenAssets { out, words } => commands::gen_assets(&cfg, &out, words).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
