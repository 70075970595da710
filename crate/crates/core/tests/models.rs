use autolabel::corpus::{synth_corpus, VocabSpec};
use autolabel::encode::{build_vocab, random_embeddings, EmbeddingMatrix, EncodedInstance, Vocab};
use autolabel::lexlabel::LabelSource;
use autolabel::models::{
    build_model, layer_output_shapes, load_checkpoint, predict, save_checkpoint, train, Architecture, Experiment,
    Model, TrainConfig,
};
use autolabel::nn::{gradient_check, DEFAULT_EPS};
use autolabel::textprep::{bundled_junk_words, preprocess_for_model, StopwordPolicy};
use autolabel::Error;

fn toy_data(n_per_class: usize, max_len: usize) -> (Vocab, Vec<EncodedInstance>) {
    let spec = VocabSpec::new(["sunny", "bright"], ["rainy", "grey"], ["tuesday", "table"]);
    let ds = synth_corpus(n_per_class, &spec, 3).unwrap();
    let policy = StopwordPolicy::bundled();
    let junk = bundled_junk_words();
    let toks: Vec<_> = ds
        .instances
        .iter()
        .map(|i| preprocess_for_model(&i.text, &policy, &junk))
        .collect();
    let vocab = build_vocab(&toks, 1).unwrap();
    let enc = ds
        .instances
        .iter()
        .zip(&toks)
        .map(|(i, t)| EncodedInstance::new(t, &vocab, max_len, i.require_label(LabelSource::Gold).unwrap()))
        .collect();
    (vocab, enc)
}

fn small_config(arch: Architecture, epochs: usize) -> TrainConfig {
    let mut cfg = TrainConfig::for_experiment(arch, Experiment::E2);
    cfg.epochs = epochs;
    cfg.max_len = 12;
    cfg.batch_size = 16;
    cfg
}

fn emb(vocab: &Vocab) -> EmbeddingMatrix {
    random_embeddings(vocab, 16, 5)
}

#[test]
fn feature_widths_and_shapes() {
    let (vocab, _) = toy_data(2, 30);
    let e = emb(&vocab);
    let widths: Vec<usize> = Architecture::ALL
        .iter()
        .map(|&a| {
            build_model(a, &e, &TrainConfig::for_experiment(a, Experiment::E1))
                .unwrap()
                .feature_dim()
        })
        .collect();
    assert_eq!(widths, [64, 128, 128]);

    let m = build_model(
        Architecture::CnnBiLstm,
        &e,
        &TrainConfig::for_experiment(Architecture::CnnBiLstm, Experiment::E1),
    )
    .unwrap();
    let shapes = layer_output_shapes(&m, 2).unwrap();
    let dims: Vec<Vec<usize>> = shapes.into_iter().map(|(_, s)| s).collect();
    assert_eq!(dims[0], [2, 30, 16]);
    assert_eq!(dims[2], [2, 26, 64]);
    assert_eq!(dims[3], [2, 128]);
    assert_eq!(dims.last().unwrap(), &[2, 3]);
}

#[test]
fn dropout_rates_follow_the_schedule() {
    let (vocab, _) = toy_data(2, 12);
    for arch in Architecture::ALL {
        for exp in Experiment::ALL {
            let cfg = TrainConfig::for_experiment(arch, exp);
            let m = build_model(arch, &emb(&vocab), &cfg).unwrap();
            assert_eq!(m.dropout_rates(), exp.dropout(arch), "{arch} {exp}");
        }
    }
}

#[test]
fn wrong_schedule_length_is_rejected() {
    let (vocab, _) = toy_data(2, 12);
    let mut cfg = small_config(Architecture::BiLstm, 1);
    cfg.dropout = vec![0.2, 0.2, 0.5];
    assert!(matches!(
        build_model(Architecture::BiLstm, &emb(&vocab), &cfg),
        Err(Error::BadDropoutScheduleLength { .. })
    ));
}

#[test]
fn zero_epochs_leaves_weights_untouched() {
    let (vocab, data) = toy_data(5, 12);
    let mut m = build_model(Architecture::Cnn, &emb(&vocab), &small_config(Architecture::Cnn, 0)).unwrap();
    let before = m.net.params().into_iter().cloned().collect::<Vec<_>>();
    let h = train(&mut m, &data).unwrap();
    assert!(h.epochs.is_empty());
    let after = m.net.params().into_iter().cloned().collect::<Vec<_>>();
    assert_eq!(before, after);
}

#[test]
fn empty_train_set_is_an_error() {
    let (vocab, _) = toy_data(2, 12);
    let mut m = build_model(Architecture::Cnn, &emb(&vocab), &small_config(Architecture::Cnn, 1)).unwrap();
    assert!(matches!(train(&mut m, &[]), Err(Error::EmptyTrainSet)));
}

fn trained(arch: Architecture, seed: u64) -> (Model, Vocab, Vec<EncodedInstance>) {
    let (vocab, data) = toy_data(10, 12);
    let mut cfg = small_config(arch, 2);
    cfg.seed = seed;
    let mut m = build_model(arch, &emb(&vocab), &cfg).unwrap();
    train(&mut m, &data).unwrap();
    (m, vocab, data)
}

#[test]
fn training_is_deterministic_per_seed() {
    for arch in Architecture::ALL {
        let (mut a, _, data) = trained(arch, 9);
        let (mut b, _, _) = trained(arch, 9);
        let (mut c, _, _) = trained(arch, 10);
        let pa = predict(&mut a, &data).unwrap();
        assert_eq!(pa, predict(&mut b, &data).unwrap());
        assert_ne!(pa.probs, predict(&mut c, &data).unwrap().probs);
    }
}

#[test]
fn predictions_do_not_depend_on_batching() {
    let (mut m, _, data) = trained(Architecture::BiLstm, 1);
    let whole = predict(&mut m, &data).unwrap();
    m.config.batch_size = 7;
    let chunked = predict(&mut m, &data).unwrap();
    assert_eq!(whole.labels, chunked.labels);
    for (p, q) in whole.probs.iter().zip(&chunked.probs) {
        for c in 0..3 {
            assert!((p[c] - q[c]).abs() < 1e-12);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let (mut m, vocab, data) = trained(Architecture::CnnBiLstm, 4);
    save_checkpoint(&m, Some(&vocab), &path).unwrap();
    let (mut back, v) = load_checkpoint(&path).unwrap();
    let v = v.unwrap();
    assert_eq!(v.len(), vocab.len());
    assert_eq!(v.get("sunny"), vocab.get("sunny"));
    assert_eq!(predict(&mut m, &data).unwrap(), predict(&mut back, &data).unwrap());
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let (m, _, _) = trained(Architecture::Cnn, 4);
    save_checkpoint(&m, None, &path).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    json["params"].as_array_mut().unwrap().pop();
    std::fs::write(&path, json.to_string()).unwrap();
    assert!(load_checkpoint(&path).is_err());
}

#[test]
fn full_models_pass_gradient_check() {
    let (vocab, data) = toy_data(2, 12);
    for arch in Architecture::ALL {
        let mut cfg = small_config(arch, 1);
        cfg.max_len = 12;
        let mut m = build_model(arch, &emb(&vocab), &cfg).unwrap();
        let batch = &data[..4];
        let (x, t) = autolabel::models::encode_batch(batch, cfg.max_len).unwrap();
        let report = gradient_check(&mut m.net, &x, &t, DEFAULT_EPS, 17).unwrap();
        assert!(report.checked() > 0);
        assert!(report.max_rel_error < 1e-4, "{arch}: {report:?}");
    }
}
