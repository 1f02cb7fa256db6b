use std::path::Path;

use snp_core::harness::*;
use snp_core::logistic::LogisticOptions;
use snp_core::sae::{preactivations, FeatureIndexSet};
use snp_core::select::top_k;
use snp_core::SnpError;

fn small_cfg() -> SyntheticConfig {
    SyntheticConfig {
        samples: 600,
        n_queries: 4,
        ..SyntheticConfig::default()
    }
}

fn experiment(selection: Selection, removal: Removal, interpolation: bool) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        selection,
        removal,
        interpolation,
        3,
        DataPaths::synthetic_layout(Path::new("unused")),
    );
    cfg.folds = 3;
    cfg.k = 4;
    cfg.top_n = 100;
    cfg
}

#[test]
fn runs_are_deterministic() {
    let data = generate_synthetic(&small_cfg()).unwrap().experiment_data();
    let cfg = experiment(Selection::Stylist, Removal::PerpEncoder, true);
    let a = run_on_data(&cfg, &data).unwrap();
    let b = run_on_data(&cfg, &data).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.folds.len(), 3);
    assert!(a.folds.iter().enumerate().all(|(i, f)| f.fold == i));
    assert!(a.ci95.is_some());
}

#[test]
fn identity_removal_leaves_embeddings_unchanged() {
    let synth = generate_synthetic(&small_cfg()).unwrap();
    let data = synth.experiment_data();
    let x = data.embeddings.embeddings();
    let inputs = RemovalInputs {
        sae: &data.sae,
        reference: x,
        preacts: None,
        attributes: &data.labels.attributes,
        selected: None,
    };
    let d = build_debiaser(Removal::None, false, &inputs, &LogisticOptions::default()).unwrap();
    assert_eq!(&d.apply(x, &data.sae).unwrap(), x);
    assert_eq!(d.projector_rank(), None);

    let report = run_on_data(&experiment(Selection::None, Removal::None, false), &data).unwrap();
    assert!(report.folds.iter().all(|f| f.selected.is_empty() && f.projector_rank.is_none()));
}

#[test]
fn interpolation_keeps_the_selected_features() {
    let data = generate_synthetic(&small_cfg()).unwrap().experiment_data();
    let with = run_on_data(&experiment(Selection::Stylist, Removal::PerpEncoder, true), &data).unwrap();
    let without = run_on_data(&experiment(Selection::Stylist, Removal::PerpEncoder, false), &data).unwrap();
    for (a, b) in with.folds.iter().zip(&without.folds) {
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.projector_rank, Some(1));
        assert_eq!(b.projector_rank, Some(4));
    }
}

#[test]
fn interpolated_projector_removes_the_attribute_signal() {
    let synth = generate_synthetic(&small_cfg()).unwrap();
    let data = synth.experiment_data();
    let x = data.embeddings.embeddings();
    let attrs = &data.labels.attributes;
    let z = preactivations(x, &data.sae).unwrap();
    let opts = LogisticOptions::default();
    let ranking = rank_features(Selection::Stylist, &z, x, attrs, None, &opts).unwrap().unwrap();
    let s = top_k(&ranking, 4).unwrap();
    let inputs = RemovalInputs {
        sae: &data.sae,
        reference: x,
        preacts: Some(&z),
        attributes: attrs,
        selected: Some(&s),
    };
    let d = build_debiaser(Removal::PerpEncoder, true, &inputs, &opts).unwrap();
    let y = d.apply(x, &data.sae).unwrap();
    let attr_u32: Vec<u32> = attrs.iter().map(|&a| a.into()).collect();
    let before = probe_accuracy(x, &attr_u32, 2, &opts).unwrap();
    let after = probe_accuracy(&y, &attr_u32, 2, &opts).unwrap();
    assert!(before > 0.95, "{before}");
    assert!(after < before, "{after} vs {before}");
}

#[test]
fn masked_with_interpolation_is_not_applicable() {
    let data = generate_synthetic(&small_cfg()).unwrap().experiment_data();
    let cfg = experiment(Selection::Stylist, Removal::MaskedReconstruction, true);
    assert!(!cfg.is_applicable());
    let report = run_on_data(&cfg, &data).unwrap();
    assert!(!report.applicable);
    assert!(report.folds.is_empty());
    assert_eq!(report.mean, MetricSummary::default());
    assert!(render_text(std::slice::from_ref(&report)).contains("N/A"));
    assert!(render_markdown(&[report]).contains("N/A"));
}

#[test]
fn masked_debiaser_matches_its_feature_set() {
    let data = generate_synthetic(&small_cfg()).unwrap().experiment_data();
    let report = run_on_data(&experiment(Selection::Lp, Removal::MaskedReconstruction, false), &data).unwrap();
    assert!(report.folds.iter().all(|f| f.selected.len() == 4 && f.projector_rank.is_none()));
}

type Mutation = Box<dyn Fn(&mut ExperimentConfig)>;

#[test]
fn invalid_configs_are_rejected() {
    let base = experiment(Selection::Stylist, Removal::PerpEncoder, false);
    let bad: Vec<Mutation> = vec![
        Box::new(|c| c.k = 0),
        Box::new(|c| c.folds = 0),
        Box::new(|c| c.top_n = 0),
        Box::new(|c| c.ref_fraction = 1.0),
        Box::new(|c| c.l2 = 0.0),
        Box::new(|c| {
            c.selection = Selection::ClipScore;
            c.paths.prompts = None;
        }),
        Box::new(|c| c.selection = Selection::None),
        Box::new(|c| c.removal = Removal::Cav),
        Box::new(|c| {
            c.selection = Selection::None;
            c.removal = Removal::None;
            c.interpolation = true;
        }),
    ];
    for (i, f) in bad.iter().enumerate() {
        let mut cfg = base.clone();
        f(&mut cfg);
        let Err(err) = cfg.validate() else {
            panic!("case {i} accepted")
        };
        assert!(matches!(err, SnpError::Config(_)), "case {i}: {err}");
        assert_eq!(err.exit_code(), 2);
    }
    base.validate().unwrap();
}

#[test]
fn config_json_rejects_unknown_fields_and_resolves_paths() {
    let dir = Path::new("/data/run");
    let text = r#"{"selection":"lp","removal":"perp_decoder","seed":1,
        "paths":{"embeddings":"e.snpm","labels":"l.csv","sae_bundle":"sae","queries":"q.snpm"}}"#;
    let cfg = ExperimentConfig::from_json(text, dir).unwrap();
    assert_eq!(cfg.paths.embeddings, dir.join("e.snpm"));
    assert_eq!((cfg.k, cfg.folds, cfg.top_n), (16, 5, 500));
    let extra = text.replacen("\"seed\":1", "\"seed\":1,\"oops\":true", 1);
    assert!(matches!(ExperimentConfig::from_json(&extra, dir), Err(SnpError::Config(_))));
}

#[test]
fn fold_failures_name_the_fold() {
    let mut data = generate_synthetic(&small_cfg()).unwrap().experiment_data();
    data.labels.attributes.iter_mut().for_each(|a| *a = 0);
    let err = run_on_data(&experiment(Selection::Stylist, Removal::PerpEncoder, false), &data).unwrap_err();
    assert!(matches!(err, SnpError::Fold { .. }), "{err}");
}

#[test]
fn pipeline_loads_written_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let syn = small_cfg();
    write_synthetic(&generate_synthetic(&syn).unwrap(), &syn, dir.path()).unwrap();
    let mut cfg = ExperimentConfig::load(dir.path().join(files::EXPERIMENT)).unwrap();
    cfg.folds = 2;
    let from_disk = run_pipeline(&cfg).unwrap();
    let in_memory = run_on_data(&cfg, &generate_synthetic(&syn).unwrap().experiment_data()).unwrap();
    assert_eq!(from_disk.folds, in_memory.folds);
}

#[test]
fn feature_sets_reject_out_of_range_indices() {
    assert!(FeatureIndexSet::new(vec![0, 40], 32).is_err());
}
