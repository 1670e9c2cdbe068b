use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hffd::dataset::{load_image, FACE_SIDE};
use hffd::descriptor::{extract_freq_features, FeatureParams};
use hffd::harness::{
    emit_report, enrollment_samples, extract_first_k, run_experiment, ExperimentConfig, MatcherKind, TrainedSystem,
};
use hffd::lda::{fit_lda, scatter_matrices, ClassSamples, LdaModel};
use hffd::{Error, Gallery, Result};

#[derive(Parser)]
#[command(name = "hffd", version, about = "Multi-pose face recognition with hybrid face feature descriptors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enroll the first k images of every class into a descriptor gallery.
    Extract {
        #[command(flatten)]
        opts: Options,
    },
    /// Fit an LDA model on a descriptor gallery.
    Train {
        #[arg(long)]
        gallery: PathBuf,
        #[command(flatten)]
        opts: Options,
    },
    /// Classify a single image against a gallery (and model).
    Query {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        gallery: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        opts: Options,
    },
    /// Run a first-k train/test protocol and write a report.
    Evaluate {
        #[command(flatten)]
        opts: Options,
    },
}

/// Experiment settings. Any of them may also come from `--config`, a file of
/// `key = value` lines; flags given on the command line win.
#[derive(Args, Default)]
struct Options {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    k_train: Option<String>,
    #[arg(long)]
    k_coeff: Option<String>,
    #[arg(long)]
    wavelet_levels: Option<String>,
    #[arg(long)]
    n_p: Option<String>,
    #[arg(long)]
    tau_rel: Option<String>,
    /// Absolute point tolerance, or `auto`.
    #[arg(long)]
    tau_m: Option<String>,
    /// direct | hffd_lda | lda_raw_baseline
    #[arg(long)]
    matcher: Option<String>,
    /// Retained LDA dimension, or `auto` for L-1.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    epsilon_rel: Option<String>,
    /// over_N | over_L
    #[arg(long)]
    prior: Option<String>,
    /// samples | class_means
    #[arg(long)]
    lda_reference: Option<String>,
    /// true | false: add single-slot training views (hffd_lda)
    #[arg(long)]
    single_views: Option<String>,
    #[arg(long = "out")]
    output: Option<String>,
    /// csv | jsonl
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

impl Options {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            cfg.apply_text(&text)?;
        }
        let flags = [
            ("dataset", &self.dataset),
            ("k_train", &self.k_train),
            ("k_coeff", &self.k_coeff),
            ("wavelet_levels", &self.wavelet_levels),
            ("n_p", &self.n_p),
            ("tau_rel", &self.tau_rel),
            ("tau_m", &self.tau_m),
            ("matcher", &self.matcher),
            ("m", &self.m),
            ("epsilon_rel", &self.epsilon_rel),
            ("prior", &self.prior),
            ("lda_reference", &self.lda_reference),
            ("single_views", &self.single_views),
            ("output", &self.output),
            ("format", &self.format),
            ("seed", &self.seed),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn require_output(cfg: &ExperimentConfig) -> Result<&Path> {
    cfg.output
        .as_deref()
        .ok_or_else(|| Error::Config("--out is required".into()))
}

fn extract(opts: &Options) -> Result<()> {
    let cfg = opts.resolve()?;
    cfg.validate()?;
    let out = require_output(&cfg)?;
    if cfg.dataset_root.as_os_str().is_empty() {
        return Err(Error::Config("--dataset is required".into()));
    }
    let (index, features) = extract_first_k(&cfg.dataset_root, cfg.k_train, cfg.feature_params())?;
    let samples = enrollment_samples(&cfg, &features)?;
    let n_p = samples.first().map_or(cfg.n_p, |s| s.n_p);
    let gallery = Gallery::from_samples(n_p, cfg.feature_params().feature_len(), samples)?;
    let bytes = gallery.save(out)?;
    println!(
        "gallery {}: {} classes, {} descriptors, {} bytes ({:.1} KiB per class)",
        out.display(),
        index.num_classes(),
        gallery.samples().count(),
        bytes,
        bytes as f64 / 1024.0 / index.num_classes() as f64
    );
    Ok(())
}

fn train(gallery_path: &Path, opts: &Options) -> Result<()> {
    let cfg = opts.resolve()?;
    let out = require_output(&cfg)?;
    let gallery = Gallery::load(gallery_path)?;
    let classes: Vec<ClassSamples<'_>> = gallery
        .classes
        .iter()
        .map(|c| ClassSamples {
            label: c.class_id,
            samples: c.samples.iter().map(|s| s.slots.as_slice()).collect(),
        })
        .collect();
    let scatter = scatter_matrices(&classes, cfg.prior)?;
    let model = fit_lda(&scatter, cfg.m_requested, cfg.epsilon_rel)?;
    let bytes = model.save(out)?;
    println!(
        "model {}: n = {}, m = {}, epsilon = {:e}, {} bytes",
        out.display(),
        model.input_dim(),
        model.output_dim(),
        model.epsilon,
        bytes
    );
    Ok(())
}

fn query(image: &Path, gallery_path: &Path, model_path: Option<&Path>, opts: &Options) -> Result<()> {
    let cfg = opts.resolve()?;
    let gallery = Gallery::load(gallery_path)?;
    if gallery.n_f % 4 != 0 {
        return Err(Error::Shape(format!(
            "gallery slot length {} is not four sub-bands wide",
            gallery.n_f
        )));
    }
    let model = match (model_path, cfg.matcher) {
        (Some(p), _) => Some(LdaModel::load(p)?),
        (None, MatcherKind::Direct) => None,
        (None, m) => return Err(Error::Config(format!("matcher {m} needs --model"))),
    };
    if let Some(m) = &model {
        if m.input_dim() != gallery.n_p * gallery.n_f {
            return Err(Error::Shape(format!(
                "model expects {}-dimensional descriptors, gallery holds {}x{}",
                m.input_dim(),
                gallery.n_p,
                gallery.n_f
            )));
        }
    }
    let system = TrainedSystem::from_parts(&cfg, &gallery, model)?;
    let params = FeatureParams {
        k_coeff: gallery.n_f / 4,
        wavelet_levels: cfg.wavelet_levels,
    };
    let face = load_image(image, FACE_SIDE)?;
    let probe = system.probe_descriptor(&extract_freq_features(&face, params)?)?;
    let pred = system.classify(&probe)?;
    println!("class {} score {:.6}", pred.class_id, pred.score);
    Ok(())
}

fn evaluate(opts: &Options) -> Result<()> {
    let cfg = opts.resolve()?;
    let report = run_experiment(&cfg)?;
    match &cfg.output {
        Some(path) => {
            emit_report(&report, cfg.format, path)?;
            println!(
                "{} {} k_train={}: rate {:.4} ({}/{}), wrote {}",
                report.dataset,
                cfg.matcher,
                cfg.k_train,
                report.recognition_rate,
                report.correct,
                report.total,
                path.display()
            );
        }
        None => print!("{}", report.render(cfg.format)),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Extract { opts } => extract(opts),
        Command::Train { gallery, opts } => train(gallery, opts),
        Command::Query {
            image,
            gallery,
            model,
            opts,
        } => query(image, gallery, model.as_deref(), opts),
        Command::Evaluate { opts } => evaluate(opts),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
