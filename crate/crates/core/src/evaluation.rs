//! Classification metrics, perplexity and the k-fold harness.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::split_folds;
use crate::error::{Error, Result};
use crate::model::{CantmModel, Document, Variant};
use crate::training::{train, TrainConfig};

fn check_lengths(pred: usize, gold: usize) -> Result<()> {
    if pred != gold {
        return Err(Error::InvalidArgument(format!(
            "{pred} predictions for {gold} gold labels"
        )));
    }
    if pred == 0 {
        return Err(Error::InvalidArgument("no predictions to score".into()));
    }
    Ok(())
}

pub fn accuracy<L: PartialEq>(pred: &[L], gold: &[L]) -> Result<f64> {
    check_lengths(pred.len(), gold.len())?;
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Rows are predicted classes, columns gold classes.
pub fn confusion_matrix(pred: &[usize], gold: &[usize], n_classes: usize) -> Result<Vec<Vec<u64>>> {
    check_lengths(pred.len(), gold.len())?;
    let mut m = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &g) in pred.iter().zip(gold) {
        if p >= n_classes || g >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label index {} outside the {n_classes}-class label set",
                p.max(g)
            )));
        }
        m[p][g] += 1;
    }
    Ok(m)
}

/// F1 per class; a class with no support in either vector scores 0.
pub fn per_class_f1(pred: &[usize], gold: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    let m = confusion_matrix(pred, gold, n_classes)?;
    Ok((0..n_classes)
        .map(|c| {
            let tp = m[c][c] as f64;
            let predicted: u64 = m[c].iter().sum();
            let actual: u64 = m.iter().map(|row| row[c]).sum();
            let denom = (predicted + actual) as f64;
            if denom == 0.0 {
                0.0
            } else {
                2.0 * tp / denom
            }
        })
        .collect())
}

pub fn macro_f1(pred: &[usize], gold: &[usize], n_classes: usize) -> Result<f64> {
    if n_classes == 0 {
        return Err(Error::InvalidArgument("empty label set".into()));
    }
    let f1 = per_class_f1(pred, gold, n_classes)?;
    Ok(f1.iter().sum::<f64>() / n_classes as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerplexityNorm {
    /// exp(−mean_d L_d / N_d)
    #[default]
    PerDocument,
    /// exp(−Σ L_d / Σ N_d)
    Corpus,
}

/// Perplexity from the M1 evidence bound at z = μ.
pub fn perplexity(model: &CantmModel, docs: &[Document], norm: PerplexityNorm) -> Result<f64> {
    if docs.is_empty() {
        return Err(Error::InvalidArgument("perplexity of an empty document set".into()));
    }
    let mut per_doc = 0.0;
    let (mut bound, mut tokens) = (0.0, 0.0);
    for d in docs {
        let elbo = model.document_elbo(d)?;
        let n = f64::from(d.bow.total());
        per_doc += elbo / n;
        bound += elbo;
        tokens += n;
    }
    Ok(match norm {
        PerplexityNorm::PerDocument => (-per_doc / docs.len() as f64).exp(),
        PerplexityNorm::Corpus => (-bound / tokens).exp(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub labels: Vec<String>,
    pub n_docs: usize,
    /// Unset for models without a classifier or when no document is labelled.
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub per_class_f1: BTreeMap<String, f64>,
    pub confusion: Option<Vec<Vec<u64>>>,
    pub perplexity: Option<f64>,
    pub doc_ids: Vec<String>,
}

impl EvalReport {
    pub fn write_confusion_csv<W: Write>(&self, w: W) -> Result<()> {
        let m = self
            .confusion
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("report has no confusion matrix".into()))?;
        write_confusion_csv(w, &self.labels, m)
    }
}

/// CSV with a `Pred/True` header cell; first column holds the predicted label.
pub fn write_confusion_csv<W: Write>(w: W, labels: &[String], matrix: &[Vec<u64>]) -> Result<()> {
    let to_err = |e: csv::Error| Error::InvalidArgument(format!("writing confusion matrix: {e}"));
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["Pred/True".to_string()];
    header.extend(labels.iter().cloned());
    out.write_record(&header).map_err(to_err)?;
    for (label, row) in labels.iter().zip(matrix) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(u64::to_string));
        out.write_record(&rec).map_err(to_err)?;
    }
    out.flush().map_err(|e| to_err(e.into()))
}

/// Predicted class index per document (arg-max at z = μ, lowest index on ties).
pub fn predict_labels(model: &CantmModel, docs: &[Document]) -> Result<Vec<usize>> {
    docs.iter()
        .map(|d| {
            let p = model.predict(d)?;
            Ok(p.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0)
        })
        .collect()
}

/// Score a model on `docs`. Classification metrics use the labelled
/// documents; perplexity uses those with a non-empty bag of words.
pub fn evaluate(model: &CantmModel, docs: &[Document], labels: &[String], norm: PerplexityNorm) -> Result<EvalReport> {
    if docs.is_empty() {
        return Err(Error::InvalidArgument("evaluation set is empty".into()));
    }
    if labels.len() != model.config.n_classes {
        return Err(Error::InvalidArgument(format!(
            "{} label names for a {}-class model",
            labels.len(),
            model.config.n_classes
        )));
    }
    let mut report = EvalReport {
        labels: labels.to_vec(),
        n_docs: docs.len(),
        accuracy: None,
        macro_f1: None,
        per_class_f1: BTreeMap::new(),
        confusion: None,
        perplexity: None,
        doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
    };
    let labelled: Vec<Document> = docs.iter().filter(|d| d.label.is_some()).cloned().collect();
    if model.config.variant == Variant::Cantm && !labelled.is_empty() {
        let gold: Vec<usize> = labelled.iter().filter_map(|d| d.label).collect();
        let pred = predict_labels(model, &labelled)?;
        let c = labels.len();
        report.accuracy = Some(accuracy(&pred, &gold)?);
        report.macro_f1 = Some(macro_f1(&pred, &gold, c)?);
        report.per_class_f1 = labels.iter().cloned().zip(per_class_f1(&pred, &gold, c)?).collect();
        report.confusion = Some(confusion_matrix(&pred, &gold, c)?);
    }
    let scored: Vec<Document> = docs.iter().filter(|d| !d.bow.is_empty()).cloned().collect();
    if !scored.is_empty() {
        report.perplexity = Some(perplexity(model, &scored, norm)?);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(MeanStd { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: Vec<EvalReport>,
    /// Keys: `accuracy`, `macro_f1`, `perplexity`, and `f1/<label>` per class.
    pub metrics: BTreeMap<String, MeanStd>,
    /// Fold confusion matrices summed.
    pub confusion: Option<Vec<Vec<u64>>>,
}

impl CvSummary {
    pub fn from_folds(folds: Vec<EvalReport>) -> Self {
        let mut metrics = BTreeMap::new();
        let mut put = |key: String, vals: Vec<f64>| {
            if vals.len() == folds.len() {
                if let Some(ms) = MeanStd::of(&vals) {
                    metrics.insert(key, ms);
                }
            }
        };
        put("accuracy".into(), folds.iter().filter_map(|f| f.accuracy).collect());
        put("macro_f1".into(), folds.iter().filter_map(|f| f.macro_f1).collect());
        put("perplexity".into(), folds.iter().filter_map(|f| f.perplexity).collect());
        if let Some(first) = folds.first() {
            for label in &first.labels {
                put(
                    format!("f1/{label}"),
                    folds.iter().filter_map(|f| f.per_class_f1.get(label).copied()).collect(),
                );
            }
        }
        let confusion = folds.iter().map(|f| f.confusion.clone()).try_fold(None::<Vec<Vec<u64>>>, |acc, m| {
            let m = m?;
            Some(Some(match acc {
                None => m,
                Some(mut a) => {
                    for (ra, rm) in a.iter_mut().zip(&m) {
                        ra.iter_mut().zip(rm).for_each(|(x, y)| *x += y);
                    }
                    a
                }
            }))
        });
        CvSummary {
            folds,
            metrics,
            confusion: confusion.flatten(),
        }
    }

    pub fn metric(&self, key: &str) -> Option<MeanStd> {
        self.metrics.get(key).copied()
    }

    /// One results-table row: percentages to two decimals for accuracy and
    /// F-1, perplexity rounded to an integer, spread in parentheses.
    pub fn table_row(&self, name: &str) -> String {
        let pct = |k| match self.metric(k) {
            Some(m) => format!("{:.2}({:.2})", m.mean * 100.0, m.std * 100.0),
            None => "n/a".to_string(),
        };
        let perp = match self.metric("perplexity") {
            Some(m) => format!("{:.0}({:.0})", m.mean, m.std),
            None => "n/a".to_string(),
        };
        format!("{name} & {} & {} & {perp}", pct("accuracy"), pct("macro_f1"))
    }

    pub fn table_header() -> &'static str {
        " & Acc. & F-1 & Perp."
    }
}

/// k-fold cross-validation. Fold `i` trains a fresh model from
/// `factory(seed + i)` with training seed `seed + i` and evaluates on the
/// held-out fold. Folds run concurrently; results do not depend on scheduling.
pub fn cross_validate<F>(
    data: &[Document],
    labels: &[String],
    factory: F,
    k: usize,
    seed: u64,
    config: &TrainConfig,
    norm: PerplexityNorm,
) -> Result<CvSummary>
where
    F: Fn(u64) -> Result<CantmModel> + Sync,
{
    let folds = split_folds(data.len(), k, seed)?;
    let reports = folds
        .par_iter()
        .enumerate()
        .map(|(i, held_out)| {
            let fold_seed = seed.wrapping_add(i as u64);
            let mut in_eval = vec![false; data.len()];
            held_out.iter().for_each(|&j| in_eval[j] = true);
            let train_docs: Vec<Document> = (0..data.len()).filter(|&j| !in_eval[j]).map(|j| data[j].clone()).collect();
            let eval_docs: Vec<Document> = held_out.iter().map(|&j| data[j].clone()).collect();
            let cfg = TrainConfig {
                seed: fold_seed,
                ..config.clone()
            };
            let (model, _) = train(factory(fold_seed)?, &train_docs, &cfg)?;
            evaluate(&model, &eval_docs, labels, norm)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvSummary::from_folds(reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::BowVector;
    use crate::model::{EncoderKind, ModelConfig};
    use proptest::prelude::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&["A", "A", "B", "B"], &["A", "B", "B", "A"]).unwrap(), 0.5);
        assert!(accuracy::<u8>(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn majority_predictor_scores_its_class_share() {
        // 194 of 1000 documents in the majority class.
        let mut gold = vec![0usize; 194];
        for c in 1..10 {
            gold.extend(std::iter::repeat_n(c, if c <= 5 { 90 } else { 89 }));
        }
        let counts = (0..10).map(|c| gold.iter().filter(|&&g| g == c).count()).collect::<Vec<_>>();
        assert_eq!(counts.iter().max(), Some(&194));
        assert_eq!(counts.iter().sum::<usize>(), 1000);
        let pred = vec![0usize; gold.len()];
        assert!((accuracy(&pred, &gold).unwrap() - 0.194).abs() < 1e-12);
    }

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        let f = macro_f1(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert!((f - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(macro_f1(&[0, 0], &[0, 0], 1).unwrap(), 1.0);
        // an unseen class still counts in the mean
        assert_eq!(macro_f1(&[0, 0], &[0, 0], 2).unwrap(), 0.5);
    }

    #[test]
    fn confusion_orientation() {
        let m = confusion_matrix(&[0, 1], &[1, 1], 2).unwrap();
        assert_eq!(m, vec![vec![0, 1], vec![0, 1]]);
        assert!(confusion_matrix(&[3], &[0], 2).is_err());
    }

    #[test]
    fn confusion_csv_layout() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let mut buf = Vec::new();
        write_confusion_csv(&mut buf, &labels, &[vec![2, 1], vec![0, 3]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "Pred/True,A,B\nA,2,1\nB,0,3\n");
    }

    fn uniform_model(v: usize) -> CantmModel {
        let cfg = ModelConfig::new(EncoderKind::Bow, v, 2, 3).with_latent(2, 2, 2);
        CantmModel::zeros(cfg).unwrap()
    }

    #[test]
    fn uniform_model_perplexity_is_vocab_size() {
        let model = uniform_model(7);
        let docs = vec![
            Document::new(BowVector::from_pairs("a", [(0, 3), (5, 1)]), None),
            Document::new(BowVector::from_pairs("b", [(2, 1)]), None),
        ];
        for norm in [PerplexityNorm::PerDocument, PerplexityNorm::Corpus] {
            assert!((perplexity(&model, &docs, norm).unwrap() - 7.0).abs() < 1e-9);
        }
        assert!(perplexity(&model, &[], PerplexityNorm::PerDocument).is_err());
    }

    #[test]
    fn unreachable_token_raises_perplexity() {
        let mut small = uniform_model(3);
        small.m1_decoder.bias = ndarray::array![0.3, -0.2, 0.1];
        let mut big = uniform_model(4);
        big.m1_decoder.bias = ndarray::array![0.3, -0.2, 0.1, -30.0];
        let docs = vec![Document::new(BowVector::from_pairs("a", [(0, 2), (1, 1)]), None)];
        let p_small = perplexity(&small, &docs, PerplexityNorm::PerDocument).unwrap();
        let p_big = perplexity(&big, &docs, PerplexityNorm::PerDocument).unwrap();
        assert!(p_big > p_small);
    }

    #[test]
    fn nvdm_report_has_no_classification_metrics() {
        let cfg = ModelConfig::new(EncoderKind::Bow, 4, 2, 3)
            .with_latent(2, 2, 2)
            .with_variant(Variant::Nvdm);
        let model = CantmModel::zeros(cfg).unwrap();
        let docs = vec![Document::new(BowVector::from_pairs("a", [(0, 1)]), Some(1))];
        let r = evaluate(&model, &docs, &["x".into(), "y".into()], PerplexityNorm::PerDocument).unwrap();
        assert_eq!(r.accuracy, None);
        assert!((r.perplexity.unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn summary_statistics_and_row_format() {
        assert_eq!(MeanStd::of(&[0.5, 0.5, 0.5]).unwrap().std, 0.0);
        let ms = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((ms.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let fold = |acc: f64, f1: f64, perp: f64| EvalReport {
            labels: vec!["A".into()],
            n_docs: 1,
            accuracy: Some(acc),
            macro_f1: Some(f1),
            per_class_f1: BTreeMap::from([("A".to_string(), f1)]),
            confusion: Some(vec![vec![1]]),
            perplexity: Some(perp),
            doc_ids: vec![],
        };
        let s = CvSummary::from_folds(vec![fold(0.62, 0.5, 700.0), fold(0.64, 0.6, 800.0)]);
        assert_eq!(s.table_row("CANTM"), "CANTM & 63.00(1.41) & 55.00(7.07) & 750(71)");
        assert_eq!(s.confusion, Some(vec![vec![2]]));
        assert!(s.metric("f1/A").is_some());
    }

    fn label_vectors() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (1usize..40).prop_flat_map(|n| (prop::collection::vec(0usize..4, n), prop::collection::vec(0usize..4, n)))
    }

    proptest! {
        #[test]
        fn accuracy_is_confusion_trace((pred, gold) in label_vectors()) {
            let m = confusion_matrix(&pred, &gold, 4).unwrap();
            let trace: u64 = (0..4).map(|i| m[i][i]).sum();
            let total: u64 = m.iter().flatten().sum();
            prop_assert_eq!(total as usize, pred.len());
            prop_assert!((accuracy(&pred, &gold).unwrap() - trace as f64 / total as f64).abs() < 1e-12);
        }

        #[test]
        fn macro_f1_permutation_invariant((pred, gold) in label_vectors(), perm in Just([0usize, 1, 2, 3]).prop_shuffle()) {
            let a = macro_f1(&pred, &gold, 4).unwrap();
            let p2: Vec<usize> = pred.iter().map(|&l| perm[l]).collect();
            let g2: Vec<usize> = gold.iter().map(|&l| perm[l]).collect();
            let b = macro_f1(&p2, &g2, 4).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn perplexity_order_invariant_and_positive(bias in prop::collection::vec(-2.0f64..2.0, 5), rev in any::<bool>()) {
            let mut model = uniform_model(5);
            model.m1_decoder.bias = ndarray::Array1::from(bias);
            let mut docs = vec![
                Document::new(BowVector::from_pairs("a", [(0, 3), (4, 1)]), None),
                Document::new(BowVector::from_pairs("b", [(2, 2)]), None),
                Document::new(BowVector::from_pairs("c", [(1, 1), (3, 5)]), None),
            ];
            let p = perplexity(&model, &docs, PerplexityNorm::PerDocument).unwrap();
            if rev { docs.reverse() } else { docs.rotate_left(1) }
            let q = perplexity(&model, &docs, PerplexityNorm::PerDocument).unwrap();
            prop_assert!(p > 0.0);
            prop_assert!((p - q).abs() <= 1e-12 * p);
        }
    }
}
