//! End-to-end behaviour of the extract/train/evaluate stages on small
//! synthetic corpora.

use std::fs;
use std::path::Path;

use splicefuse::boostsel::FeatureCount;
use splicefuse::dataset::{make_splits, SplitPlan};
use splicefuse::eval::Metric;
use splicefuse::pipeline::{
    cmd_evaluate, cmd_extract, quick_config, train_plans, ExperimentBundle, FeatureSet, Layout, PipelineConfig,
    FAILED_MARKER,
};
use splicefuse::synth::write_synthetic_corpus;
use splicefuse::Tool;

fn extracted(dir: &Path, per_class: usize) -> (PipelineConfig, Layout, FeatureSet) {
    let corpus = dir.join("corpus");
    write_synthetic_corpus(&corpus, per_class, per_class, 7).unwrap();
    let config = PipelineConfig {
        runs: 1,
        feature_counts: vec![FeatureCount::Top(5)],
        ..quick_config(corpus, 7)
    };
    let layout = Layout::new(dir.join("out"));
    cmd_extract(&config, &layout).unwrap();
    let features = FeatureSet::load(&layout).unwrap();
    (config, layout, features)
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn bundle_save_load_round_trip_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (config, layout, features) = extracted(dir, 15);
    let plans = make_splits(features.keys(), config.seed, 1).unwrap();
    let outcomes = train_plans(&config, &features, &plans, &layout).unwrap();
    assert!(outcomes[0].result.is_ok(), "{:?}", outcomes[0].result);

    let original = layout.bundle_dir(1, FeatureCount::Top(5));
    let bundle = ExperimentBundle::load(&original).unwrap();
    let copy = dir.join("copy");
    bundle.save(&copy).unwrap();
    // training logs are not part of the reloaded model
    let copied = dir_files(&copy);
    assert!(copied.len() >= 8);
    for (name, bytes) in &copied {
        assert_eq!(&fs::read(original.join(name)).unwrap(), bytes, "{name}");
    }

    let reloaded = ExperimentBundle::load(&copy).unwrap();
    let rows: Vec<usize> = (0..features.keys().len()).collect();
    let a = bundle.score_rows(&features, &rows).unwrap();
    let b = reloaded.score_rows(&features, &rows).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.fused.to_bits(), y.fused.to_bits());
        assert_eq!(x.verdict, y.verdict);
    }
}

#[test]
fn failing_cell_is_isolated() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (config, layout, features) = extracted(dir, 15);
    let good = make_splits(features.keys(), config.seed, 2).unwrap().pop().unwrap();
    assert_eq!(good.run_index, 2);
    // every training block authentic: the SVMs cannot be trained
    let (auth, forged): (Vec<_>, Vec<_>) = features.keys().iter().partition(|k| k.label.is_authentic());
    let bad = SplitPlan {
        run_index: 1,
        seed: 0,
        train_ids: auth.iter().map(|k| k.id.clone()).collect(),
        test_ids: forged.iter().map(|k| k.id.clone()).collect(),
    };
    let outcomes = train_plans(&config, &features, &[bad, good], &layout).unwrap();
    assert!(outcomes[0].result.is_err());
    assert!(outcomes[1].result.is_ok(), "{:?}", outcomes[1].result);

    let k = FeatureCount::Top(5);
    assert!(layout.bundle_dir(1, k).join(FAILED_MARKER).exists());
    assert!(!layout.bundle_dir(1, k).join("bundle.txt").exists());
    assert!(layout.bundle_dir(2, k).join("bundle.txt").exists());

    let summary = cmd_evaluate(&PipelineConfig { runs: 2, ..config }, &layout).unwrap();
    assert_eq!(summary.reports.len(), 1);
    assert_eq!(summary.missing.len(), 1);
    assert_eq!(summary.missing[0].0, 1);
}

#[test]
fn untrained_cells_give_all_na_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (config, layout, _) = extracted(dir, 6);
    let summary = cmd_evaluate(&config, &layout).unwrap();
    assert!(summary.reports.is_empty());
    for metric in [Metric::Sensitivity, Metric::Specificity] {
        let text = fs::read_to_string(layout.table(metric)).unwrap();
        let body: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(body.len(), config.feature_counts.len());
        for line in body {
            assert!(line.split(',').skip(1).all(|cell| cell == "NA"), "{line}");
        }
    }
}

#[test]
fn empty_corpus_gives_header_only_feature_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let corpus = dir.join("corpus");
    fs::create_dir_all(corpus.join("authentic")).unwrap();
    fs::create_dir_all(corpus.join("spliced")).unwrap();
    let layout = Layout::new(dir.join("out"));
    let summary = cmd_extract(&quick_config(corpus, 1), &layout).unwrap();
    assert_eq!((summary.blocks, summary.rejected), (0, 0));
    for tool in Tool::ALL {
        let text = fs::read_to_string(layout.feature_csv(tool)).unwrap();
        assert_eq!(text.lines().count(), 1, "{tool:?}");
    }
}

#[test]
fn extraction_is_repeatable_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (config, layout, _) = extracted(dir, 5);
    let first: Vec<Vec<u8>> = Tool::ALL
        .iter()
        .map(|&t| fs::read(layout.feature_csv(t)).unwrap())
        .collect();
    cmd_extract(&PipelineConfig { workers: 1, ..config }, &layout).unwrap();
    let second: Vec<Vec<u8>> = Tool::ALL
        .iter()
        .map(|&t| fs::read(layout.feature_csv(t)).unwrap())
        .collect();
    assert_eq!(first, second);
    assert_eq!(first[0].iter().filter(|&&b| b == b'\n').count(), 11);
}
