//! First-k train/test protocols: split, enroll, train, classify, report.

pub mod config;
pub mod report;

use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

pub use self::config::{parse_config, ExperimentConfig, MatcherKind, ReportFormat};
pub use self::report::{emit_report, strip_timing_columns, ClassTally, Confusion, EvalReport};

use crate::dataset::{scan_dataset, split_first_k, FaceImage, ImageRef};
use crate::descriptor::{enroll_features, extract_freq_features, FeatureParams, FreqFeature, Hffd};
use crate::error::{Error, Result};
use crate::gallery::Gallery;
use crate::lda::{fit_lda, scatter_matrices, ClassSamples, LdaModel};
use crate::matcher::{
    classify_direct, classify_projected, project_gallery, GalleryEntry, LdaReference, Tolerance,
    DEFAULT_TAU_M_FRACTION,
};

/// Fraction of unreadable files tolerated before an experiment aborts.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class_id: usize,
    /// Euclidean distance for LDA matchers, matched point count for the
    /// direct matcher.
    pub score: f64,
}

/// Everything needed to classify probes after training.
#[derive(Debug, Clone)]
pub struct TrainedSystem {
    pub matcher: MatcherKind,
    /// Slot count of gallery and probe descriptors (1 for the raw baseline).
    pub n_p: usize,
    pub entries: Vec<GalleryEntry>,
    pub model: Option<LdaModel>,
    pub tolerance: Tolerance,
    pub reference: LdaReference,
}

impl TrainedSystem {
    /// Builds the gallery (and the LDA model when the matcher needs one)
    /// from per-class training features in pose order.
    pub fn train(config: &ExperimentConfig, features_by_class: &[Vec<FreqFeature>]) -> Result<Self> {
        let samples = enrollment_samples(config, features_by_class)?;
        let n_p = samples.first().map(|s| s.n_p).unwrap_or(config.n_p);
        let entries: Vec<GalleryEntry> = samples.into_iter().map(GalleryEntry::new).collect();
        let model = match config.matcher {
            MatcherKind::Direct => None,
            _ => Some(train_lda(&entries, config)?),
        };
        Self::assemble(config, n_p, entries, model)
    }

    /// Rebuilds a system from a stored gallery and optional model.
    pub fn from_parts(config: &ExperimentConfig, gallery: &Gallery, model: Option<LdaModel>) -> Result<Self> {
        let entries = gallery.samples().cloned().map(GalleryEntry::new).collect();
        Self::assemble(config, gallery.n_p, entries, model)
    }

    fn assemble(
        config: &ExperimentConfig,
        n_p: usize,
        mut entries: Vec<GalleryEntry>,
        model: Option<LdaModel>,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("empty gallery"));
        }
        if let Some(model) = &model {
            project_gallery(model, &mut entries)?;
        }
        let tolerance = match config.tau_m {
            Some(t) => Tolerance::Absolute(t),
            None => Tolerance::adaptive(&entries, DEFAULT_TAU_M_FRACTION)?,
        };
        Ok(TrainedSystem {
            matcher: config.matcher,
            n_p,
            entries,
            model,
            tolerance,
            reference: config.lda_reference,
        })
    }

    /// Single-slot probe descriptor for one test image.
    pub fn probe_descriptor(&self, feature: &FreqFeature) -> Result<Hffd> {
        Hffd::single(feature, self.n_p)
    }

    pub fn classify(&self, probe: &Hffd) -> Result<Prediction> {
        match (&self.model, self.matcher) {
            (None, MatcherKind::Direct) | (Some(_), MatcherKind::Direct) => {
                let s = classify_direct(probe, &self.entries, &self.tolerance)?;
                Ok(Prediction {
                    class_id: s.class_id,
                    score: s.matched_points as f64,
                })
            }
            (Some(model), _) => {
                let q = model.project(&probe.slots)?;
                let (class_id, distance) = classify_projected(&q, &self.entries, self.reference)?;
                Ok(Prediction {
                    class_id,
                    score: distance,
                })
            }
            (None, m) => Err(Error::invalid(format!("matcher {m} needs an LDA model"))),
        }
    }

    pub fn gallery(&self) -> Result<Gallery> {
        let n_f = self.entries[0].hffd.n_f;
        Gallery::from_samples(self.n_p, n_f, self.entries.iter().map(|e| e.hffd.clone()).collect())
    }
}

/// Gallery descriptors for per-class training features.
///
/// The raw baseline stores one single-slot descriptor per image. The HFFD
/// matchers store one fused descriptor per training pose (each pose taking a
/// turn as the base); with `single_views` the `hffd_lda` gallery also holds a
/// single-slot descriptor per pose, matching what probes look like.
pub fn enrollment_samples(config: &ExperimentConfig, features_by_class: &[Vec<FreqFeature>]) -> Result<Vec<Hffd>> {
    if config.matcher == MatcherKind::LdaRawBaseline {
        return features_by_class
            .iter()
            .flatten()
            .map(|f| Hffd::single(f, 1))
            .collect();
    }
    let with_views = config.single_views && config.matcher == MatcherKind::HffdLda;
    let per_class = features_by_class
        .par_iter()
        .map(|fs| {
            let mut out = enroll_features(fs, config.n_p, config.tau_rel)?;
            if with_views {
                for f in fs {
                    out.push(Hffd::single(f, config.n_p)?);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_class.into_iter().flatten().collect())
}

fn train_lda(entries: &[GalleryEntry], config: &ExperimentConfig) -> Result<LdaModel> {
    let mut by_class: BTreeMap<usize, Vec<&[f64]>> = BTreeMap::new();
    for e in entries {
        by_class.entry(e.class_id).or_default().push(&e.hffd.slots);
    }
    let classes: Vec<ClassSamples<'_>> = by_class
        .into_iter()
        .map(|(label, samples)| ClassSamples { label, samples })
        .collect();
    let scatter = scatter_matrices(&classes, config.prior)?;
    fit_lda(&scatter, config.m_requested, config.epsilon_rel)
}

/// Loads every reference, keeping failures as messages.
fn load_all(refs: &[ImageRef]) -> Vec<std::result::Result<FaceImage, String>> {
    refs.par_iter()
        .map(|r| r.load().map_err(|e| e.to_string()))
        .collect()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<EvalReport> {
    config.validate()?;
    let index = scan_dataset(&config.dataset_root)?;
    let split = split_first_k(&index, config.k_train)?;

    let train_paths: HashSet<_> = split.train.iter().map(|r| &r.path).collect();
    if let Some(r) = split.test.iter().find(|r| train_paths.contains(&r.path)) {
        return Err(Error::Dataset(format!(
            "{} appears in both training and testing",
            r.path.display()
        )));
    }

    let train_loaded = load_all(&split.train);
    let test_loaded = load_all(&split.test);
    let failures: Vec<String> = train_loaded
        .iter()
        .chain(&test_loaded)
        .filter_map(|r| r.as_ref().err().cloned())
        .collect();
    let total_files = split.train.len() + split.test.len();
    for f in &failures {
        warn!("{f}");
    }
    if failures.len() as f64 > MAX_FAILURE_FRACTION * total_files as f64 {
        return Err(Error::Dataset(format!(
            "{} of {total_files} images failed to load (limit {:.0}%); first: {}",
            failures.len(),
            MAX_FAILURE_FRACTION * 100.0,
            failures[0]
        )));
    }

    let params = config.feature_params();
    let started = Instant::now();
    let mut features_by_class: Vec<Vec<FreqFeature>> = vec![Vec::new(); index.num_classes()];
    let train_faces: Vec<&FaceImage> = train_loaded.iter().filter_map(|r| r.as_ref().ok()).collect();
    let train_features = train_faces
        .par_iter()
        .map(|f| extract_freq_features(f, params))
        .collect::<Result<Vec<_>>>()?;
    for f in train_features {
        features_by_class[f.class_id].push(f);
    }
    if let Some(c) = features_by_class.iter().position(|fs| fs.is_empty()) {
        return Err(Error::Dataset(format!(
            "class {:?} has no loadable training images",
            index.classes[c].name
        )));
    }
    let system = TrainedSystem::train(config, &features_by_class)?;
    let train_time_s = started.elapsed().as_secs_f64();
    info!(
        "trained {} on {} classes in {train_time_s:.3}s",
        config.matcher,
        index.num_classes()
    );

    let probes: Vec<&FaceImage> = test_loaded.iter().filter_map(|r| r.as_ref().ok()).collect();
    let outcomes = probes
        .par_iter()
        .map(|face| {
            let t = Instant::now();
            let feature = extract_freq_features(face, params)?;
            let probe = system.probe_descriptor(&feature)?;
            let pred = system.classify(&probe)?;
            Ok((face.class_id, pred.class_id, t.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_class: Vec<ClassTally> = index
        .classes
        .iter()
        .map(|c| ClassTally {
            class_id: c.id,
            name: c.name.clone(),
            correct: 0,
            total: 0,
        })
        .collect();
    let mut pairs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut query_time = 0.0;
    for &(actual, predicted, secs) in &outcomes {
        per_class[actual].total += 1;
        if actual == predicted {
            per_class[actual].correct += 1;
        }
        *pairs.entry((actual, predicted)).or_default() += 1;
        query_time += secs;
    }
    let correct: usize = per_class.iter().map(|t| t.correct).sum();
    let total = outcomes.len();
    let gallery_bytes = system.gallery()?.to_bytes()?.len();
    let model_bytes = match &system.model {
        Some(m) => m.to_bytes()?.len(),
        None => 0,
    };

    Ok(EvalReport {
        dataset: index.name.clone(),
        config: config.clone(),
        recognition_rate: if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        },
        correct,
        total,
        per_class,
        confusion: pairs
            .into_iter()
            .map(|((actual, predicted), count)| Confusion {
                actual,
                predicted,
                count,
            })
            .collect(),
        train_time_s,
        mean_query_time_s: if total == 0 {
            0.0
        } else {
            query_time / total as f64
        },
        gallery_bytes,
        model_bytes,
        retained_dim: system.model.as_ref().map_or(0, |m| m.output_dim()),
        failures,
    })
}

/// Extracts the first `k` images of every class into per-class features
/// (fewer when a class is smaller).
pub fn extract_first_k(
    root: &std::path::Path,
    k: usize,
    params: FeatureParams,
) -> Result<(crate::dataset::DatasetIndex, Vec<Vec<FreqFeature>>)> {
    let index = scan_dataset(root)?;
    let features = index
        .first_k(k)
        .par_iter()
        .map(|refs| {
            refs.iter()
                .map(|r| extract_freq_features(&r.load()?, params))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((index, features))
}
