use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cantm::corpus::{build_vocabulary, load_debunks, DebunkFormat, LabeledDocument, Stopwords};
use cantm::evaluation::{cross_validate, evaluate, predict_labels, PerplexityNorm};
use cantm::model::{label_set, CantmModel, Document, EmbeddingTable, EncoderKind, ModelBundle, ModelConfig};
use cantm::topics::{model_topics, TopicKind};
use cantm::training::{train, TrainConfig};

const THEMES: [(&str, &[&str]); 3] = [
    ("Vacc", &["vaccine", "injection", "dose", "trial", "immunity"]),
    ("PubAuth", &["government", "minister", "lockdown", "decree", "police"]),
    ("CommSpread", &["cases", "infections", "hospital", "outbreak", "spread"]),
];

/// Writes `n` labelled debunks as JSON lines and returns the path.
fn write_corpus(dir: &std::path::Path, n: usize) -> std::path::PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let path = dir.join("debunks.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    for i in 0..n {
        let (cat, words) = THEMES[i % 3];
        let claim: Vec<&str> = (0..6).map(|_| words[rng.random_range(0..words.len())]).collect();
        let row = serde_json::json!({
            "id": format!("doc{i}"),
            "debunk_date": format!("2020-04-{:02}", 1 + i % 28),
            "claim": format!("The {} claims about the virus", claim.join(" ")),
            "explanation": "Fact checkers rated this claim false.",
            "veracity": "False",
            "platform": ["Facebook"],
            "category": cat,
        });
        writeln!(f, "{row}").unwrap();
    }
    path
}

fn prepared(n: usize) -> (tempfile::TempDir, Vec<LabeledDocument>) {
    let dir = tempfile::tempdir().unwrap();
    let path = write_corpus(dir.path(), n);
    let records = load_debunks(&path, DebunkFormat::JsonLines).unwrap();
    (dir, records.into_iter().map(LabeledDocument::from_record).collect())
}

#[test]
fn text_to_checkpoint_roundtrip() {
    let (dir, docs) = prepared(90);
    let vocab = build_vocabulary(docs.iter().map(|d| d.text.as_str()), 2000, &Stopwords::english()).unwrap();
    assert!(vocab.get("vaccine").is_some());
    assert!(vocab.get("the").is_none());
    let classes = label_set(&docs);
    let labels: Vec<String> = classes.iter().map(|c| c.to_string()).collect();
    assert_eq!(labels, ["PubAuth", "CommSpread", "Vacc"]);
    let data: Vec<Document> = docs.iter().map(|d| Document::from_labeled(d, &vocab, &classes)).collect();

    let cfg = ModelConfig::new(EncoderKind::Bow, vocab.len(), classes.len(), 16).with_latent(8, 8, 4);
    let model = CantmModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let tc = TrainConfig {
        learning_rate: 0.01,
        max_epochs: 30,
        ..TrainConfig::default()
    };
    let (model, _) = train(model, &data, &tc).unwrap();
    let report = evaluate(&model, &data, &labels, PerplexityNorm::PerDocument).unwrap();
    assert!(report.accuracy.unwrap() > 0.9, "{report:?}");

    let bundle = ModelBundle::new(model, vocab.clone(), labels.clone()).unwrap();
    let path = dir.path().join("model.json");
    bundle.save(&path).unwrap();
    let loaded = ModelBundle::load(&path).unwrap();
    assert_eq!(
        predict_labels(&loaded.model, &data).unwrap(),
        predict_labels(&bundle.model, &data).unwrap()
    );
    let topics = model_topics(&loaded.model, &loaded.vocab, &loaded.labels, TopicKind::ClassAssociated, 10).unwrap();
    assert_eq!(topics.topics.len(), 3);
    assert!(topics.topics.iter().all(|t| t.words.len() == 10));
}

fn embedded_data(n: usize, dim: usize) -> (Vec<Document>, Vec<String>) {
    let (_dir, docs) = prepared(n);
    let vocab = build_vocabulary(docs.iter().map(|d| d.text.as_str()), 2000, &Stopwords::english()).unwrap();
    let classes = label_set(&docs);
    let mut data: Vec<Document> = docs.iter().map(|d| Document::from_labeled(d, &vocab, &classes)).collect();
    // a noisy class-dependent direction stands in for a sentence encoder
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut table = EmbeddingTable::new(dim);
    for d in &data {
        let v = (0..dim)
            .map(|j| if j == d.label.unwrap() { 1.0 } else { 0.0 } + rng.random_range(-0.2f32..0.2))
            .collect();
        table.insert(d.id.clone(), v).unwrap();
    }
    let mut buf = Vec::new();
    table.write(&mut buf).unwrap();
    EmbeddingTable::read(buf.as_slice(), "mem").unwrap().attach(&mut data).unwrap();
    (data, classes.iter().map(|c| c.to_string()).collect())
}

#[test]
fn embedding_cross_validation_reports_table_row() {
    let (data, labels) = embedded_data(60, 6);
    let vocab_size = data.iter().filter_map(|d| d.bow.max_position()).max().unwrap() + 1;
    let cfg = ModelConfig::new(EncoderKind::Embedding, vocab_size, labels.len(), 6).with_latent(4, 4, 3);
    let tc = TrainConfig {
        learning_rate: 0.01,
        max_epochs: 20,
        n_train_samples: 2,
        ..TrainConfig::default()
    };
    let factory = |seed| CantmModel::new(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(seed));
    let cv = cross_validate(&data, &labels, factory, 5, 42, &tc, PerplexityNorm::PerDocument).unwrap();
    assert_eq!(cv.folds.len(), 5);
    assert!(cv.folds.iter().all(|f| f.n_docs == 12));

    // evaluation sets partition the data
    let mut ids: Vec<&String> = cv.folds.iter().flat_map(|f| &f.doc_ids).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), data.len());

    let row = cv.table_row("CANTM");
    assert!(is_table_row(&row), "{row}");

    let again = cross_validate(&data, &labels, factory, 5, 42, &tc, PerplexityNorm::PerDocument).unwrap();
    assert_eq!(cv, again);
}

fn digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|c| c.is_ascii_digit())
}

/// `mean(std)` with both numbers in the given decimal format.
fn cell(s: &str, decimals: usize) -> bool {
    let number = |x: &str| match x.split_once('.') {
        Some((a, b)) => decimals > 0 && digits(a) && digits(b) && b.len() == decimals,
        None => decimals == 0 && digits(x),
    };
    s.strip_suffix(')')
        .and_then(|s| s.split_once('('))
        .is_some_and(|(m, sd)| number(m) && number(sd))
}

/// "CANTM & 63.34(1.43) & 55.48(6.32) & 749(63)"
fn is_table_row(row: &str) -> bool {
    let parts: Vec<&str> = row.split(" & ").collect();
    parts.len() == 4 && parts[0] == "CANTM" && cell(parts[1], 2) && cell(parts[2], 2) && cell(parts[3], 0)
}

#[test]
fn row_checker_accepts_published_layout() {
    assert!(is_table_row("CANTM & 63.34(1.43) & 55.48(6.32) & 749(63)"));
    assert!(!is_table_row("CANTM & 63.3(1.43) & 55.48(6.32) & 749(63)"));
    assert!(!is_table_row("CANTM & 63.34(1.43) & n/a & 749(63)"));
}
