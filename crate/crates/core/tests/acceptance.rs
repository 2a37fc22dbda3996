//! Acceptance criteria. Each test prints one PASS/FAIL/SKIP line.
//!
//! Dataset-backed checks read their inputs from environment variables and
//! are skipped with a notice when those are unset:
//!
//! * `CANTM_CLEANED_ANNOTATIONS`: cleaned annotation JSONL
//! * `CANTM_DEBUNKS`: the full debunk dataset (JSONL or CSV)
//! * `CANTM_LABELED` + `CANTM_EMBEDDINGS`: labelled debunks and a matching embedding file

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::time::Instant;

use chrono::{Duration, NaiveDate};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cantm::analysis::{category_totals, stacked_breakdown, weekly_trend, Dimension};
use cantm::corpus::{
    annotation_kappa, cohen_kappa, load_debunks, pairwise_agreement, Annotation, AnnotationSet, BowVector,
    Category, DebunkFormat, DebunkRecord, LabeledDocument, MediaType, Veracity,
};
use cantm::evaluation::{cross_validate, perplexity, CvSummary, PerplexityNorm};
use cantm::model::{
    gaussian_kl, label_set, CantmModel, Document, EmbeddingTable, EncoderKind, GaussianParams, LossMode,
    ModelConfig, Noise, Variant,
};
use cantm::topics::{model_topics, top_words, TopicKind};
use cantm::training::{train, EarlyStopping, TrainConfig};

fn report(id: u32, what: &str, ok: bool, detail: String) {
    println!("[{}] criterion {id}: {what} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {detail}");
}

fn skip(id: u32, what: &str, why: &str) {
    println!("[SKIP] criterion {id}: {what} ({why})");
}

fn env_path(var: &str) -> Option<PathBuf> {
    std::env::var_os(var).map(PathBuf::from).filter(|p| p.exists())
}

// ---------------------------------------------------------------- 1

/// Monte-Carlo estimate of KL(q || N(0, I)) with its standard error.
fn kl_monte_carlo(mu: &[f64], var: &[f64], n: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let mut log_ratio = 0.0;
        for (m, v) in mu.iter().zip(var) {
            let e: f64 = rng.sample(StandardNormal);
            let z = m + v.sqrt() * e;
            // log q(z) − log p(z); the 2π terms cancel
            log_ratio += -0.5 * v.ln() - 0.5 * e * e + 0.5 * z * z;
        }
        sum += log_ratio;
        sq += log_ratio * log_ratio;
    }
    let mean = sum / n as f64;
    let var = (sq / n as f64 - mean * mean) * n as f64 / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[test]
fn c1_gaussian_kl_matches_monte_carlo() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let dim = rng.random_range(1..=4);
        let mu: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let var: Vec<f64> = (0..dim).map(|_| rng.random_range(0.2..3.0)).collect();
        let params = GaussianParams {
            mu: Array1::from(mu.clone()),
            log_var: Array1::from_iter(var.iter().map(|v| v.ln())),
        };
        let (mc, se) = kl_monte_carlo(&mu, &var, 100_000, &mut rng);
        worst = worst.max((gaussian_kl(&params) - mc).abs() / se);
    }
    let exact = gaussian_kl(&GaussianParams {
        mu: Array1::from(vec![1.0]),
        log_var: Array1::from(vec![0.0]),
    });
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "Gaussian KL vs Monte-Carlo",
        worst <= 3.0 && exact == 0.5 && secs < 10.0,
        format!("max |KL − MC| = {worst:.2} SE over 50 draws, KL(1, 1) = {exact}, {secs:.1}s"),
    );
}

// ---------------------------------------------------------------- 2

fn random_model(cfg: ModelConfig, seed: u64) -> CantmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = CantmModel::new(cfg, &mut rng).unwrap();
    // non-zero biases so their gradients are exercised too
    model.for_each_param_mut(|_, name, p| {
        if name.ends_with(".bias") {
            p.iter_mut().for_each(|v| *v = rng.random_range(-0.3..0.3));
        }
    });
    model
}

fn random_docs(n: usize, v: usize, c: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut pairs: Vec<(usize, u32)> = Vec::new();
            for w in 0..v {
                if rng.random_bool(0.3) {
                    pairs.push((w, rng.random_range(1..4)));
                }
            }
            let mut d = Document::new(BowVector::from_pairs(format!("d{i}"), pairs), Some(rng.random_range(0..c)));
            if d.bow.is_empty() {
                d.bow = BowVector::from_pairs(d.id.clone(), [(i % v, 2)]);
            }
            d
        })
        .collect()
}

fn perturb(model: &mut CantmModel, index: usize, delta: f64) {
    let mut k = 0;
    model.for_each_param_mut(|_, _, p| {
        if index >= k && index < k + p.len() {
            p[index - k] += delta;
        }
        k += p.len();
    });
}

/// Largest |analytic − numeric| / max(|analytic|, |numeric|, floor).
fn max_gradient_error(model: &CantmModel, docs: &[Document], mode: LossMode, noise: &Noise) -> (f64, usize) {
    const H: f64 = 1e-5;
    const FLOOR: f64 = 1e-4;
    let (_, grads) = model.loss_and_grad(docs, mode, noise).unwrap();
    let mut analytic = Vec::new();
    grads.for_each_param(|_, _, g| analytic.extend_from_slice(g));
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = model.clone();
        perturb(&mut plus, i, H);
        let mut minus = model.clone();
        perturb(&mut minus, i, -H);
        let lp = plus.total_loss_with_noise(docs, mode, noise).unwrap().total;
        let lm = minus.total_loss_with_noise(docs, mode, noise).unwrap().total;
        let numeric = (lp - lm) / (2.0 * H);
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR));
    }
    (worst, analytic.len())
}

#[test]
fn c2_gradients_match_finite_differences() {
    let start = Instant::now();
    let cfg = ModelConfig::new(EncoderKind::Bow, 20, 3, 8).with_latent(8, 8, 8);
    let docs = random_docs(5, 20, 3, 2);
    let mut lines = Vec::new();
    let mut ok = true;
    for (label, variant, mode) in [
        ("full", Variant::Cantm, LossMode::Full),
        ("m2_only", Variant::Cantm, LossMode::M2Only),
        ("nvdm", Variant::Nvdm, LossMode::Full),
    ] {
        let model = random_model(cfg.clone().with_variant(variant), 3);
        let noise = model.draw_noise(docs.len(), &mut ChaCha8Rng::seed_from_u64(4));
        let (err, n) = max_gradient_error(&model, &docs, mode, &noise);
        ok &= err <= 1e-4;
        lines.push(format!("{label}: {err:.1e} over {n} params"));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "gradient vs central differences",
        ok && secs < 60.0,
        format!("{}, {secs:.1}s", lines.join("; ")),
    );
}

// ---------------------------------------------------------------- 3

fn dot(w: &ndarray::Array2<f64>, row: usize, x: &[f64]) -> f64 {
    (0..x.len()).map(|j| w[[row, j]] * x[j]).sum()
}

/// Plain NVDM objective written directly from the weights.
fn nvdm_oracle(model: &CantmModel, docs: &[Document], noise: &Noise) -> f64 {
    let enc = model.encoder.as_ref().unwrap();
    let v = model.config.vocab_size;
    let mut total = 0.0;
    for (d, dn) in docs.iter().zip(&noise.docs) {
        let mut x = vec![0.0; v];
        for &(w, c) in d.bow.counts() {
            x[w] = f64::from(c);
        }
        let h: Vec<f64> = (0..enc.bias.len()).map(|i| dot(&enc.weight, i, &x) + enc.bias[i]).collect();
        let mu: Vec<f64> = (0..model.m1_mu.bias.len()).map(|i| dot(&model.m1_mu.weight, i, &h) + model.m1_mu.bias[i]).collect();
        let lv: Vec<f64> = (0..model.m1_logvar.bias.len())
            .map(|i| dot(&model.m1_logvar.weight, i, &h) + model.m1_logvar.bias[i])
            .collect();
        let kl: f64 = mu.iter().zip(&lv).map(|(m, l)| 0.5 * (l.exp() + m * m - l - 1.0)).sum();
        let mut recon = 0.0;
        for eps in &dn.z {
            let z: Vec<f64> = (0..mu.len()).map(|i| mu[i] + (0.5 * lv[i]).exp() * eps[i]).collect();
            let logits: Vec<f64> = (0..v)
                .map(|w| {
                    let r = &model.m1_decoder.topic_word;
                    (0..z.len()).map(|k| z[k] * r[[k, w]]).sum::<f64>() + model.m1_decoder.bias[w]
                })
                .collect();
            let max = logits.iter().cloned().fold(f64::MIN, f64::max);
            let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            recon += d.bow.counts().iter().map(|&(w, c)| f64::from(c) * (logits[w] - lse)).sum::<f64>();
        }
        recon /= dn.z.len() as f64;
        total += kl - recon;
    }
    total / docs.len() as f64
}

#[test]
fn c3_nvdm_reduction() {
    let cfg = ModelConfig::new(EncoderKind::Bow, 20, 3, 8).with_latent(6, 5, 4);
    let mut worst: f64 = 0.0;
    let mut masked = true;
    for seed in 0..5 {
        let mut model = random_model(cfg.clone(), 10 + seed);
        model.config.variant = Variant::Nvdm;
        let docs = random_docs(6, 20, 3, 20 + seed);
        let noise = model.draw_noise(docs.len(), &mut ChaCha8Rng::seed_from_u64(seed));
        let loss = model.total_loss_with_noise(&docs, LossMode::Full, &noise).unwrap();
        masked &= [loss.cls, loss.class_recon, loss.m2_recon, loss.m2_cls, loss.m2_kl]
            .iter()
            .all(|&t| t == 0.0);
        worst = worst.max((loss.total - nvdm_oracle(&model, &docs, &noise)).abs());
    }
    report(
        3,
        "NVDM reduction",
        masked && worst <= 1e-10,
        format!("max |loss − oracle| = {worst:.1e} over 5 random models"),
    );
}

// ---------------------------------------------------------------- 4

const TOPIC_WORDS: usize = 10;

/// Each document draws 20–40 tokens from one of three disjoint 10-word topics.
fn planted_topic_corpus(n: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let topic = i % 3;
            let len = rng.random_range(20..=40);
            let mut counts = BTreeMap::new();
            for _ in 0..len {
                *counts.entry(topic * TOPIC_WORDS + rng.random_range(0..TOPIC_WORDS)).or_insert(0u32) += 1;
            }
            Document::new(BowVector::from_pairs(format!("p{i}"), counts), Some(topic))
        })
        .collect()
}

fn numbered_vocab(n: usize) -> cantm::corpus::Vocabulary {
    cantm::corpus::Vocabulary::from_tokens((0..n).map(|i| format!("w{i:02}")).collect()).unwrap()
}

#[test]
fn c4_planted_topics_recovered() {
    let start = Instant::now();
    let v = 3 * TOPIC_WORDS;
    let data = planted_topic_corpus(200, 5);
    let cfg = ModelConfig::new(EncoderKind::Bow, v, 3, 64).with_variant(Variant::Nvdm);
    let model = CantmModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let train_cfg = TrainConfig {
        seed: 7,
        ..TrainConfig::default()
    };
    let (model, history) = train(model, &data, &train_cfg).unwrap();
    let vocab = numbered_vocab(v);
    let report_topics = top_words(model.m1_decoder.topic_word.view(), &vocab, 10, TopicKind::Latent, None).unwrap();
    let purities: Vec<f64> = (0..3)
        .map(|p| {
            report_topics
                .topics
                .iter()
                .map(|t| {
                    t.words
                        .iter()
                        .filter(|w| w[1..].parse::<usize>().unwrap() / TOPIC_WORDS == p)
                        .count() as f64
                        / 10.0
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let held_out = planted_topic_corpus(60, 8);
    let perp = perplexity(&model, &held_out, PerplexityNorm::PerDocument).unwrap();
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        "planted-topic recovery",
        purities.iter().all(|&p| p >= 0.8) && perp <= 0.7 * v as f64 && secs < 300.0,
        format!(
            "purity {purities:?}, held-out perplexity {perp:.2} vs bound {:.1}, {} epochs, {secs:.1}s",
            0.7 * v as f64,
            history.stopped_epoch
        ),
    );
}

// ---------------------------------------------------------------- 5

const CLASS_WORDS: usize = 5;
const BACKGROUND: usize = 15;

/// Class c owns words 5c..5c+5; words 15..30 are shared background.
fn separable_corpus(n: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let class = i % 3;
            let mut counts = BTreeMap::new();
            for _ in 0..rng.random_range(3..=6) {
                *counts.entry(class * CLASS_WORDS + rng.random_range(0..CLASS_WORDS)).or_insert(0u32) += 1;
            }
            for _ in 0..rng.random_range(5..=10) {
                *counts.entry(3 * CLASS_WORDS + rng.random_range(0..BACKGROUND)).or_insert(0u32) += 1;
            }
            Document::new(BowVector::from_pairs(format!("s{i}"), counts), Some(class))
        })
        .collect()
}

#[test]
fn c5_classifier_sanity() {
    let start = Instant::now();
    let v = 3 * CLASS_WORDS + BACKGROUND;
    let data = separable_corpus(300, 9);
    let labels: Vec<String> = ["A", "B", "C"].map(String::from).to_vec();
    let cfg = ModelConfig::new(EncoderKind::Bow, v, 3, 16).with_latent(8, 8, 4);
    // Early stopping watches the classification loss, which saturates fast on
    // this corpus; a larger step gives the class decoder enough updates.
    let train_cfg = TrainConfig {
        learning_rate: 0.005,
        ..TrainConfig::default()
    };
    let factory = |seed| CantmModel::new(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(seed));
    let cv = cross_validate(&data, &labels, factory, 5, 13, &train_cfg, PerplexityNorm::PerDocument).unwrap();
    let acc = cv.metric("accuracy").unwrap();

    let (full, _) = train(factory(99).unwrap(), &data, &TrainConfig { seed: 99, ..train_cfg.clone() }).unwrap();
    let topics = model_topics(&full, &numbered_vocab(v), &labels, TopicKind::ClassAssociated, 5).unwrap();
    let planted_ok: Vec<bool> = topics
        .topics
        .iter()
        .enumerate()
        .map(|(c, t)| {
            t.words
                .iter()
                .all(|w| w[1..].parse::<usize>().unwrap() / CLASS_WORDS == c)
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        "classifier sanity",
        acc.mean >= 0.95 && planted_ok.iter().all(|&b| b) && secs < 600.0,
        format!(
            "5-fold accuracy {:.4} ± {:.4}, planted words in class top-5: {planted_ok:?}, {secs:.1}s",
            acc.mean, acc.std
        ),
    );
}

// ---------------------------------------------------------------- 6

fn random_annotations(rng: &mut ChaCha8Rng) -> AnnotationSet {
    let n_docs = rng.random_range(1..8);
    let n_annotators = rng.random_range(2..5);
    let cats = &Category::ALL[..rng.random_range(1..4)];
    let mut anns = Vec::new();
    for d in 0..n_docs {
        for a in 0..n_annotators {
            if rng.random_bool(0.6) {
                anns.push(Annotation {
                    doc_id: format!("d{d}"),
                    annotator_id: format!("a{a}"),
                    category: cats[rng.random_range(0..cats.len())],
                    confidence: rng.random_range(0..=9),
                });
            }
        }
    }
    AnnotationSet::new(anns).unwrap()
}

/// Agreement and symmetric kappa by enumerating ordered pairs of distinct
/// annotations on each document.
fn brute_force_agreement(set: &AnnotationSet) -> Option<(f64, f64)> {
    let anns = &set.annotations;
    let (mut n, mut agree) = (0usize, 0usize);
    let mut marginal: HashMap<Category, usize> = HashMap::new();
    for i in 0..anns.len() {
        for j in 0..anns.len() {
            if i != j && anns[i].doc_id == anns[j].doc_id {
                n += 1;
                agree += usize::from(anns[i].category == anns[j].category);
                *marginal.entry(anns[i].category).or_default() += 1;
            }
        }
    }
    if n == 0 {
        return None;
    }
    let p_o = agree as f64 / n as f64;
    let p_e: f64 = marginal.values().map(|&m| (m as f64 / n as f64).powi(2)).sum();
    let kappa = if p_e >= 1.0 { 1.0 } else { (p_o - p_e) / (1.0 - p_e) };
    Some((p_o, kappa))
}

/// Kappa for two raters from a full contingency table.
fn brute_force_kappa(pairs: &[(u8, u8)]) -> f64 {
    let n = pairs.len() as f64;
    let labels: Vec<u8> = (0..4).collect();
    let p_o = pairs.iter().filter(|(a, b)| a == b).count() as f64 / n;
    let p_e: f64 = labels
        .iter()
        .map(|l| {
            let left = pairs.iter().filter(|(a, _)| a == l).count() as f64 / n;
            let right = pairs.iter().filter(|(_, b)| b == l).count() as f64 / n;
            left * right
        })
        .sum();
    if p_e >= 1.0 {
        1.0
    } else {
        (p_o - p_e) / (1.0 - p_e)
    }
}

#[test]
fn c6_annotation_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (mut checked, mut worst) = (0, 0.0f64);
    for _ in 0..100 {
        let set = random_annotations(&mut rng);
        match brute_force_agreement(&set) {
            Some((agree, kappa)) => {
                worst = worst
                    .max((pairwise_agreement(&set).unwrap() - agree).abs())
                    .max((annotation_kappa(&set).unwrap() - kappa).abs());
                checked += 1;
            }
            None => assert!(pairwise_agreement(&set).is_err()),
        }
        let pairs: Vec<(u8, u8)> = (0..rng.random_range(1..20))
            .map(|_| (rng.random_range(0..4), rng.random_range(0..4)))
            .collect();
        worst = worst.max((cohen_kappa(&pairs).unwrap() - brute_force_kappa(&pairs)).abs());
    }
    report(
        6,
        "agreement and kappa vs brute force",
        worst <= 1e-12,
        format!("100 random sets ({checked} with pairs), max deviation {worst:.1e}"),
    );

    match env_path("CANTM_CLEANED_ANNOTATIONS") {
        Some(path) => {
            let set = AnnotationSet::load(&path).unwrap();
            let agree = pairwise_agreement(&set).unwrap();
            let kappa = annotation_kappa(&set).unwrap();
            report(
                6,
                "published cleaned annotations",
                (agree - 0.7336).abs() <= 0.005 && (kappa - 0.7040).abs() <= 0.005,
                format!("agreement {agree:.4} (want 0.7336), kappa {kappa:.4} (want 0.7040)"),
            );
        }
        None => skip(6, "published cleaned annotations", "CANTM_CLEANED_ANNOTATIONS not set"),
    }
}

// ---------------------------------------------------------------- 7

#[test]
fn c7_early_stopping() {
    let mut es = EarlyStopping::new(TrainConfig::default().patience);
    let seq = [5.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0, 4.0];
    let stop = seq.iter().enumerate().find(|(i, &l)| es.observe(i + 1, l)).map(|(i, _)| i + 1);
    report(7, "early stopping", stop == Some(6), format!("5,4,4,4,4,4 stops after epoch {stop:?}"));
}

// ---------------------------------------------------------------- 8

fn synthetic_records(n: usize, seed: u64) -> Vec<DebunkRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let platforms = ["Facebook", "Twitter", "WhatsApp", "YouTube"];
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    (0..n)
        .map(|i| DebunkRecord {
            id: format!("r{i}"),
            debunk_date: start + Duration::days(rng.random_range(0..182)),
            claim: "claim".into(),
            explanation: String::new(),
            source_link: String::new(),
            veracity: rng.random_bool(0.9).then(|| Veracity::ALL[rng.random_range(0..Veracity::ALL.len())]),
            platform: (0..rng.random_range(0..3))
                .map(|_| platforms[rng.random_range(0..platforms.len())].to_string())
                .collect(),
            language: Some("en".into()),
            media_type: rng.random_bool(0.9).then(|| MediaType::ALL[rng.random_range(0..MediaType::ALL.len())]),
            category: rng.random_bool(0.95).then(|| Category::ALL[rng.random_range(0..Category::ALL.len())]),
        })
        .collect()
}

#[test]
fn c8_analysis() {
    let records = synthetic_records(2000, 21);
    let trend = weekly_trend(
        &records,
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        NaiveDate::from_ymd_opt(2020, 6, 30).unwrap(),
    )
    .unwrap();
    let max_count = *trend.counts.iter().max().unwrap();
    let peak_ok = trend
        .counts
        .iter()
        .zip(&trend.normalized)
        .all(|(&c, &v)| (c == max_count) == (v == 100.0));
    let mut worst: f64 = 0.0;
    for (row, col) in [
        (Dimension::MediaType, Dimension::Category),
        (Dimension::Category, Dimension::Platform),
        (Dimension::Category, Dimension::Veracity),
    ] {
        let t = stacked_breakdown(&records, row, col).unwrap();
        for j in 0..t.columns.len() {
            let s: f64 = t.percentages.iter().map(|r| r[j]).sum();
            worst = worst.max((s - 100.0).abs());
        }
    }
    report(
        8,
        "trend peak and breakdown columns",
        peak_ok && worst <= 0.01,
        format!("{} weeks, peak week → 100, max column deviation from 100 = {worst:.1e}", trend.counts.len()),
    );

    match env_path("CANTM_DEBUNKS") {
        Some(path) => {
            let records = load_debunks(&path, DebunkFormat::from_path(&path)).unwrap();
            let expected = [
                (Category::PubAuth, 1672),
                (Category::CommSpread, 1527),
                (Category::PubRec, 301),
                (Category::PromActs, 1160),
                (Category::MedAdv, 1115),
                (Category::VirTrans, 330),
                (Category::Vacc, 396),
                (Category::Consp, 809),
                (Category::VirOrgn, 151),
                (Category::None, 148),
            ];
            let got: HashMap<Category, u64> = category_totals(&records).into_iter().collect();
            let ok = records.len() == 7609 && expected.iter().all(|(c, n)| got[c] == *n);
            report(8, "published category totals", ok, format!("{} records, totals {got:?}", records.len()));
        }
        None => skip(8, "published category totals", "CANTM_DEBUNKS not set"),
    }
}

// ---------------------------------------------------------------- 9

#[test]
fn c9_embedding_cross_validation_end_to_end() {
    let (Some(labeled), Some(emb)) = (env_path("CANTM_LABELED"), env_path("CANTM_EMBEDDINGS")) else {
        skip(9, "embedding cross-validation", "CANTM_LABELED / CANTM_EMBEDDINGS not set");
        return;
    };
    let records = load_debunks(&labeled, DebunkFormat::from_path(&labeled)).unwrap();
    let docs: Vec<LabeledDocument> = records.into_iter().map(LabeledDocument::from_record).collect();
    let stop = cantm::corpus::Stopwords::english();
    let vocab = cantm::corpus::build_vocabulary(docs.iter().map(|d| d.text.as_str()), 2000, &stop).unwrap();
    let classes = label_set(&docs);
    let labels: Vec<String> = classes.iter().map(|c| c.to_string()).collect();
    let mut data: Vec<Document> = docs
        .iter()
        .map(|d| Document::from_labeled(d, &vocab, &classes))
        .filter(|d| d.label.is_some())
        .collect();
    let table = EmbeddingTable::load(&emb).unwrap();
    table.attach(&mut data).unwrap();
    let cfg = ModelConfig::new(EncoderKind::Embedding, vocab.len(), classes.len(), table.dim());
    let factory = |seed| CantmModel::new(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(seed));
    let cv = cross_validate(&data, &labels, factory, 5, 0, &TrainConfig::default(), PerplexityNorm::PerDocument).unwrap();
    let row = cv.table_row("CANTM");
    println!("{}\n{row}", CvSummary::table_header());
    report(9, "embedding cross-validation", cv.folds.len() == 5, row);
}
