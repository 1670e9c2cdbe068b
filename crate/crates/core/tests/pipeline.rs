mod common;

use std::fs;
use std::path::Path;

use hffd::harness::{extract_first_k, run_experiment, strip_timing_columns, ExperimentConfig, MatcherKind, TrainedSystem};
use hffd::{Gallery, LdaModel};
use tempfile::tempdir;

use common::{write_constant_pair, write_synthetic_faces};

fn config(root: &Path, matcher: MatcherKind, k: usize) -> ExperimentConfig {
    ExperimentConfig {
        dataset_root: root.to_path_buf(),
        matcher,
        k_train: k,
        ..ExperimentConfig::default()
    }
}

const ALL: [MatcherKind; 3] = [MatcherKind::Direct, MatcherKind::HffdLda, MatcherKind::LdaRawBaseline];

#[test]
fn constant_pair_is_separated_by_every_matcher() {
    let dir = tempdir().unwrap();
    write_constant_pair(dir.path(), 5);
    for m in ALL {
        let r = run_experiment(&config(dir.path(), m, 3)).unwrap();
        assert_eq!(r.total, 4);
        assert_eq!(r.recognition_rate, 1.0, "{m}");
        assert_eq!(r.recount_rate(), r.recognition_rate);
    }
}

#[test]
fn training_descriptors_recognize_themselves() {
    let dir = tempdir().unwrap();
    write_synthetic_faces(dir.path(), 6, 5, 3);
    for m in ALL {
        let cfg = config(dir.path(), m, 4);
        let (_, features) = extract_first_k(dir.path(), 4, cfg.feature_params()).unwrap();
        let system = TrainedSystem::train(&cfg, &features).unwrap();
        for e in &system.entries {
            assert_eq!(system.classify(&e.hffd).unwrap().class_id, e.class_id, "{m}");
        }
    }
}

#[test]
fn report_is_consistent_and_deterministic() {
    let dir = tempdir().unwrap();
    write_synthetic_faces(dir.path(), 5, 6, 21);
    for m in ALL {
        let cfg = config(dir.path(), m, 3);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.total, 15);
        assert_eq!(a.per_class.iter().map(|t| t.total).sum::<usize>(), 15);
        assert_eq!(a.recount_rate(), a.recognition_rate);
        assert!((0.0..=1.0).contains(&a.recognition_rate));
        assert_eq!(strip_timing_columns(&a.to_csv()), strip_timing_columns(&b.to_csv()));
        assert_eq!(a.confusion, b.confusion);
        if m != MatcherKind::Direct {
            assert_eq!(a.retained_dim, 4);
            assert!(a.model_bytes > 0);
        }
    }
}

#[test]
fn oversized_training_set_is_rejected() {
    let dir = tempdir().unwrap();
    write_constant_pair(dir.path(), 8);
    assert!(run_experiment(&config(dir.path(), MatcherKind::HffdLda, 6)).is_err());
    assert!(run_experiment(&config(dir.path(), MatcherKind::Direct, 6)).is_err());
    // the raw baseline has no slot limit
    assert!(run_experiment(&config(dir.path(), MatcherKind::LdaRawBaseline, 6)).is_ok());
    // no test images left
    assert!(run_experiment(&config(dir.path(), MatcherKind::LdaRawBaseline, 8)).is_err());
}

#[test]
fn corrupt_files_within_budget_are_reported() {
    let dir = tempdir().unwrap();
    write_synthetic_faces(dir.path(), 4, 6, 5);
    fs::write(dir.path().join("s2/6.pgm"), b"P5 garbage").unwrap();
    let r = run_experiment(&config(dir.path(), MatcherKind::HffdLda, 3)).unwrap();
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.total, 11);
}

#[test]
fn too_many_corrupt_files_abort() {
    let dir = tempdir().unwrap();
    write_synthetic_faces(dir.path(), 4, 6, 5);
    for f in ["s1/5.pgm", "s2/5.pgm", "s3/6.pgm"] {
        fs::write(dir.path().join(f), b"not an image").unwrap();
    }
    let err = run_experiment(&config(dir.path(), MatcherKind::HffdLda, 3)).unwrap_err();
    assert!(err.to_string().contains("failed to load"), "{err}");
}

#[test]
fn stored_gallery_and_model_classify_like_the_trained_system() {
    let dir = tempdir().unwrap();
    write_synthetic_faces(dir.path(), 4, 5, 9);
    let cfg = config(dir.path(), MatcherKind::HffdLda, 3);
    let (_, features) = extract_first_k(dir.path(), 3, cfg.feature_params()).unwrap();
    let system = TrainedSystem::train(&cfg, &features).unwrap();
    let gallery = Gallery::from_bytes(&system.gallery().unwrap().to_bytes().unwrap()).unwrap();
    let model = LdaModel::from_bytes(&system.model.as_ref().unwrap().to_bytes().unwrap()).unwrap();
    let restored = TrainedSystem::from_parts(&cfg, &gallery, Some(model)).unwrap();
    let (_, probes) = extract_first_k(dir.path(), 5, cfg.feature_params()).unwrap();
    for f in probes.iter().flatten() {
        let a = system.classify(&system.probe_descriptor(f).unwrap()).unwrap();
        let b = restored.classify(&restored.probe_descriptor(f).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
