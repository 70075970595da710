use autolabel::corpus::{synth_corpus, VocabSpec};
use autolabel::evalx::{
    aggregate_metrics_csv, run_experiment, write_report, EmbeddingSource, ExperimentConfig, PipelineResources,
    METRICS_CSV_HEADER,
};
use autolabel::lexlabel::{LabelMethod, LabelSource};
use autolabel::models::{Architecture, Experiment};

fn corpus() -> autolabel::corpus::Dataset {
    let spec = VocabSpec::new(["happy", "great"], ["awful", "sad"], ["chair", "window"]);
    synth_corpus(20, &spec, 11).unwrap()
}

fn resources() -> PipelineResources {
    PipelineResources::bundled(EmbeddingSource::Random { dim: 16 })
}

fn quick(exp: Experiment, method: Option<LabelMethod>, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(exp, method, Architecture::Cnn, seed).unwrap();
    cfg.train.epochs = 3;
    cfg.train.max_len = 10;
    cfg
}

#[test]
fn report_contents_are_consistent() {
    let ds = corpus();
    let r = run_experiment(&quick(Experiment::E3, Some(LabelMethod::Afinn), 5), &ds, &resources()).unwrap();
    assert_eq!(r.train_size + r.test_size, 60);
    assert_eq!(r.test_size, 12);
    assert_eq!(r.confusion.total(), 12);
    assert_eq!(r.epoch_metrics.len(), 3);
    assert_eq!(r.metrics, *r.epoch_metrics.last().unwrap());
    assert_eq!(r.history.epochs.len(), 3);
    assert_eq!(r.config.dataset, "synthetic");
    assert!(r.label_distribution.contains_key("gold") && r.label_distribution.contains_key("afinn"));
    let agree = r.agreement_with_gold.unwrap();
    assert!((0.0..=100.0).contains(&agree));
    let support: u64 = r.per_class.iter().map(|c| c.support).sum();
    assert_eq!(support, 12);
}

#[test]
fn gold_run_has_no_agreement_block() {
    let r = run_experiment(&quick(Experiment::E1, None, 5), &corpus(), &resources()).unwrap();
    assert_eq!(r.config.labeller(), LabelSource::Gold);
    assert!(r.agreement_with_gold.is_none());
}

#[test]
fn metrics_rows_are_reproducible() {
    let ds = corpus();
    let cfg = quick(Experiment::E2, Some(LabelMethod::Vader), 8);
    let a = run_experiment(&cfg, &ds, &resources()).unwrap();
    let b = run_experiment(&cfg, &ds, &resources()).unwrap();
    assert_eq!(a.metrics_csv(), b.metrics_csv());
    assert!(a.metrics_csv().starts_with(METRICS_CSV_HEADER));
    assert!(a.metrics_csv_row().starts_with("synthetic,E2,vader,cnn,8,"));
}

#[test]
fn reports_are_written_and_aggregated() {
    let dir = tempfile::tempdir().unwrap();
    let ds = corpus();
    let mut dirs = Vec::new();
    for (i, exp) in [Experiment::E1, Experiment::E3].into_iter().enumerate() {
        let method = (exp != Experiment::E1).then_some(LabelMethod::TextBlob);
        let r = run_experiment(&quick(exp, method, 2), &ds, &resources()).unwrap();
        let d = dir.path().join(format!("run{i}"));
        write_report(&r, &d).unwrap();
        assert!(d.join("report.json").exists());
        dirs.push(d);
    }
    let csv = aggregate_metrics_csv(&dirs).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], METRICS_CSV_HEADER);
    assert!(lines[1].starts_with("synthetic,E1,gold,cnn,2,"));
    assert!(lines[2].starts_with("synthetic,E3,textblob,cnn,2,"));
    for line in &lines[1..] {
        let fields: Vec<_> = line.split(',').collect();
        assert_eq!(fields.len(), 9);
        for f in &fields[5..] {
            assert_eq!(f.split('.').nth(1).unwrap().len(), 6);
        }
    }
}

#[test]
fn missing_gold_labels_are_reported() {
    let mut ds = corpus();
    ds.instances[0].gold_label = None;
    let err = run_experiment(&quick(Experiment::E1, None, 1), &ds, &resources());
    assert!(matches!(err, Err(autolabel::Error::MissingLabels { .. })));
}
