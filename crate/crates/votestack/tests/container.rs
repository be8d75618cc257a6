use votestack::container::{decode_model, encode_model, load_model, save_model};
use votestack_core::corpus::stratified_split;
use votestack_core::evalkit::Metric;
use votestack_core::models::{train_classifier, CnnConfig, RnnConfig};
use votestack_core::synthetic::{keyword_corpus, KeywordCorpusOptions};
use votestack_core::{ModelSpec, Pipeline, PreprocessOptions, TrainConfig, TrainedClassifier};

fn trained(spec: ModelSpec) -> (TrainedClassifier, Pipeline, votestack_core::LabeledBatch) {
    let corpus = keyword_corpus(&KeywordCorpusOptions {
        examples: 90,
        ..Default::default()
    });
    let pipeline = Pipeline::new(PreprocessOptions::default(), corpus.table(), 8);
    let split = stratified_split(
        &corpus.examples,
        [0.6, 0.2, 0.2],
        0,
        Some(&corpus.label_space),
    )
    .unwrap();
    let train = pipeline.encode(&split.train).unwrap();
    let validation = pipeline.encode(&split.validation).unwrap();
    let config = TrainConfig {
        epochs: 2,
        batch_size: 8,
        lr: 0.01,
        seed: 3,
        early_stop_patience: 2,
        validation_metric: Metric::WeightedF1,
    };
    let clf = train_classifier(
        &train,
        &validation,
        &spec,
        &config,
        &pipeline.table,
        &corpus.label_space,
    )
    .unwrap();
    (clf, pipeline, validation)
}

fn specs() -> Vec<ModelSpec> {
    vec![
        ModelSpec::Cnn(CnnConfig {
            filters_per_width: 4,
            ..Default::default()
        }),
        ModelSpec::Rnn(RnnConfig::lstm(4)),
        ModelSpec::Rnn(RnnConfig::bilstm(4)),
        ModelSpec::Rnn(RnnConfig::gru(4)),
    ]
}

#[test]
fn round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for spec in specs() {
        let (clf, pipeline, validation) = trained(spec);
        let path = dir.path().join("m/model.vsm");
        save_model(&path, &clf, "hash123").unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.config_hash, "hash123");
        assert_eq!(loaded.classifier, clf);
        assert_eq!(
            loaded
                .classifier
                .predict(&pipeline.table, &validation.batch)
                .unwrap(),
            clf.predict(&pipeline.table, &validation.batch).unwrap()
        );
        // encoding is a pure function of the model
        assert_eq!(
            encode_model(&loaded.classifier, "hash123"),
            encode_model(&clf, "hash123")
        );
    }
}

#[test]
fn damaged_containers_are_refused() {
    let (clf, _, _) = trained(specs().swap_remove(0));
    let bytes = encode_model(&clf, "h");
    for cut in [0, 4, 8, 12, 20, bytes.len() / 2, bytes.len() - 1] {
        assert!(decode_model(&bytes[..cut]).is_err(), "cut at {cut}");
    }
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(decode_model(&longer).is_err());
    let mut magic = bytes.clone();
    magic[0] ^= 0xff;
    assert!(decode_model(&magic)
        .unwrap_err()
        .contains("not a model file"));
    let mut version = bytes.clone();
    version[8] = version[8].wrapping_add(1);
    assert!(decode_model(&version).unwrap_err().contains("version"));
}
