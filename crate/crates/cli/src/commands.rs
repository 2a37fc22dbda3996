use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use cantm::analysis::{
    category_totals, load_search_trends, stacked_breakdown, weekly_trend, BreakdownTable, Dimension,
};
use cantm::corpus::{
    annotation_kappa, build_vocabulary, filter_annotations, load_debunks, merge_labels, pairwise_agreement,
    read_raw_debunks, score_annotators, to_bow, AnnotationSet, Category, DebunkFormat, DebunkRecord,
    LabeledDocument, Stopwords, Vocabulary, DEFAULT_VOCAB_SIZE,
};
use cantm::enrich::{Enricher, MappingList, MediaRuleSet};
use cantm::evaluation::{cross_validate, evaluate, PerplexityNorm};
use cantm::model::{
    label_set, CantmModel, Document, EmbeddingTable, EncoderKind, ModelBundle, ModelConfig, Variant,
};
use cantm::topics::{model_topics, TopicKind, TopicReport};
use cantm::training::{train, TrainConfig, TrainMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{FileConfig, DEFAULT_BOW_HIDDEN, DEFAULT_FOLDS};
use crate::{plot, Cli, Command, EncoderArg, KindArg, ModeArg, ModelArgs, TextArgs, VariantArg};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] cantm::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("plotting {path}: {message}")]
    Plot { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    argv: Vec<String>,
    config: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seed: u64,
    version: &'static str,
    duration_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<Value>,
}

/// What a command produced, for the manifest.
#[derive(Default)]
struct Outcome {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    config: Value,
    stats: Option<Value>,
}

struct Ctx<'a> {
    cli: &'a Cli,
    config: FileConfig,
}

impl Ctx<'_> {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.cli.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn out(&self) -> Result<&Path> {
        self.cli
            .out
            .as_deref()
            .ok_or_else(|| CliError::Usage("this command needs --out <path>".into()))
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Ingest(_) => "ingest",
        Command::Enrich(_) => "enrich",
        Command::MergeAnnotations(_) => "merge-annotations",
        Command::Train(_) => "train",
        Command::Evaluate(_) => "evaluate",
        Command::Predict(_) => "predict",
        Command::Topics(_) => "topics",
        Command::Analyze(_) => "analyze",
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let start = Instant::now();
    let ctx = Ctx {
        cli,
        config: FileConfig::load(cli.config.as_deref())?,
    };
    let outcome = match &cli.command {
        Command::Ingest(a) => ingest(&ctx, a)?,
        Command::Enrich(a) => enrich(&ctx, a)?,
        Command::MergeAnnotations(a) => merge_annotations(&ctx, a)?,
        Command::Train(a) => train_cmd(&ctx, a)?,
        Command::Evaluate(a) => evaluate_cmd(&ctx, a)?,
        Command::Predict(a) => predict(&ctx, a)?,
        Command::Topics(a) => topics(&ctx, a)?,
        Command::Analyze(a) => analyze(&ctx, a)?,
    };
    let Some(out) = cli.out.as_deref() else {
        return Ok(());
    };
    let manifest = RunManifest {
        command: command_name(&cli.command).to_string(),
        argv: std::env::args().collect(),
        config: outcome.config,
        inputs: outcome.inputs,
        outputs: outcome.outputs,
        seed: cli.seed,
        version: env!("CARGO_PKG_VERSION"),
        duration_secs: start.elapsed().as_secs_f64(),
        stats: outcome.stats,
    };
    let path = if out.is_dir() {
        out.join("manifest.json")
    } else {
        sibling(out, "manifest.json")
    };
    write_json(&path, &manifest)
}

/// `out.ext` → `out.ext.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path)(e.into()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<usize> {
    let mut w = create(path)?;
    let mut n = 0;
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|e| io_err(path)(e.into()))?;
        writeln!(w).map_err(io_err(path))?;
        n += 1;
    }
    w.flush().map_err(io_err(path))?;
    Ok(n)
}

fn load_records(path: &Path) -> Result<Vec<DebunkRecord>> {
    Ok(load_debunks(path, DebunkFormat::from_path(path))?)
}

fn stopwords(args: &TextArgs) -> Result<Stopwords> {
    Ok(match &args.stopwords {
        Some(p) => Stopwords::load(p)?,
        None => Stopwords::english(),
    })
}

fn vocab_size(ctx: &Ctx, args: &TextArgs) -> usize {
    args.vocab_size.or(ctx.config.vocab_size).unwrap_or(DEFAULT_VOCAB_SIZE)
}

fn build_vocab(ctx: &Ctx, args: &TextArgs, docs: &[LabeledDocument]) -> Result<Vocabulary> {
    let stop = stopwords(args)?;
    Ok(build_vocabulary(docs.iter().map(|d| d.text.as_str()), vocab_size(ctx, args), &stop)?)
}

// ---------------------------------------------------------------- ingest / enrich

fn ingest(ctx: &Ctx, a: &crate::IngestArgs) -> Result<Outcome> {
    let out = ctx.out()?;
    let records = load_records(&a.input)?;
    let n = write_jsonl(out, &records)?;
    ctx.note(format!("{n} records written to {}", out.display()));
    let mut outputs = vec![out.to_path_buf()];
    let mut config = json!({});
    if let Some(vpath) = &a.vocab {
        let docs: Vec<LabeledDocument> = records.into_iter().map(LabeledDocument::from_record).collect();
        let vocab = build_vocab(ctx, &a.text, &docs)?;
        write_json(vpath, &vocab)?;
        ctx.note(format!("vocabulary of {} words written to {}", vocab.len(), vpath.display()));
        outputs.push(vpath.clone());
        config = json!({ "vocab_size": vocab_size(ctx, &a.text) });
    }
    Ok(Outcome {
        inputs: vec![a.input.clone()],
        outputs,
        config,
        stats: Some(json!({ "records": n })),
    })
}

#[derive(Deserialize)]
struct SourcePage {
    id: String,
    text: String,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| {
            cantm::Error::Parse {
                locus: format!("{}:{}", path.display(), i + 1),
                message: e.to_string(),
            }
        })?;
        out.push(row);
    }
    Ok(out)
}

fn enrich(ctx: &Ctx, a: &crate::EnrichArgs) -> Result<Outcome> {
    let out = ctx.out()?;
    let enricher = Enricher {
        veracity: match &a.veracity_map {
            Some(p) => MappingList::load(p)?,
            None => MappingList::default_veracity(),
        },
        platform: match &a.platform_map {
            Some(p) => MappingList::load(p)?,
            None => MappingList::default_platform(),
        },
        media: match &a.media_rules {
            Some(p) => MediaRuleSet::load(p)?,
            None => MediaRuleSet::default(),
        },
    };
    let pages: HashMap<String, String> = match &a.source_pages {
        Some(p) => read_jsonl::<SourcePage>(p)?.into_iter().map(|s| (s.id, s.text)).collect(),
        None => HashMap::new(),
    };
    let f = File::open(&a.input).map_err(io_err(&a.input))?;
    let raws = read_raw_debunks(f, DebunkFormat::from_path(&a.input), &a.input.display().to_string())?;
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(raws.len());
    for (locus, raw) in raws {
        let page = pages.get(&raw.id).map(String::as_str);
        let record = enricher.enrich(raw, &locus, page)?;
        if !seen.insert(record.id.clone()) {
            return Err(cantm::Error::DuplicateId(record.id).into());
        }
        records.push(record);
    }
    let unmapped = records.iter().filter(|r| r.media_type.is_none()).count();
    let n = write_jsonl(out, &records)?;
    ctx.note(format!("{n} records enriched ({unmapped} without a media type)"));
    let mut inputs = vec![a.input.clone()];
    inputs.extend(
        [&a.veracity_map, &a.platform_map, &a.media_rules, &a.source_pages]
            .into_iter()
            .flatten()
            .cloned(),
    );
    Ok(Outcome {
        inputs,
        outputs: vec![out.to_path_buf()],
        config: json!({}),
        stats: Some(json!({ "records": n, "without_media_type": unmapped })),
    })
}

// ---------------------------------------------------------------- annotations

fn agreement_stats(set: &AnnotationSet) -> Value {
    let (single, double, multiple) = set.multiplicity_counts();
    json!({
        "annotations": set.len(),
        "documents": { "single": single, "double": double, "multiple": multiple },
        "agreement": pairwise_agreement(set).ok(),
        "kappa": annotation_kappa(set).ok(),
    })
}

fn merge_annotations(ctx: &Ctx, a: &crate::MergeArgs) -> Result<Outcome> {
    let out = ctx.out()?;
    let set = AnnotationSet::load(&a.input)?;
    let mut policy = ctx.config.filter.clone();
    if let Some(t) = a.threshold {
        policy.default_threshold = t;
    }
    policy.excluded.extend(a.exclude.iter().cloned());
    policy.validate()?;

    let before = agreement_stats(&set);
    let scores = score_annotators(&set).ok();
    let filtered = filter_annotations(&set, &policy);
    let after = agreement_stats(&filtered);
    let merged = merge_labels(&filtered);
    for (label, s) in [("before filtering", &before), ("after filtering", &after)] {
        ctx.note(format!(
            "{label}: {} annotations, agreement {}, kappa {}",
            s["annotations"], s["agreement"], s["kappa"]
        ));
    }

    let mut inputs = vec![a.input.clone()];
    let written = match &a.records {
        Some(rpath) => {
            inputs.push(rpath.clone());
            let records = load_records(rpath)?;
            let total = records.len();
            let labelled: Vec<DebunkRecord> = records
                .into_iter()
                .filter_map(|mut r| {
                    let c = *merged.get(&r.id)?;
                    r.category = Some(c);
                    Some(r)
                })
                .collect();
            if labelled.len() < total {
                ctx.note(format!("{} records without a reliable label dropped", total - labelled.len()));
            }
            write_jsonl(out, &labelled)?
        }
        None => write_jsonl(
            out,
            merged.iter().map(|(id, c)| json!({ "doc_id": id, "category": c })),
        )?,
    };
    ctx.note(format!("{written} labelled documents written to {}", out.display()));
    Ok(Outcome {
        inputs,
        outputs: vec![out.to_path_buf()],
        config: serde_json::to_value(&policy).unwrap_or_default(),
        stats: Some(json!({
            "before": before,
            "after": after,
            "merged_documents": merged.len(),
            "annotator_scores": scores,
        })),
    })
}

// ---------------------------------------------------------------- modelling

fn train_config(ctx: &Ctx, m: &ModelArgs) -> Result<TrainConfig> {
    let mut tc = ctx.config.train.clone();
    tc.seed = ctx.cli.seed;
    if let Some(v) = m.max_epochs {
        tc.max_epochs = v;
    }
    if let Some(v) = m.batch_size {
        tc.batch_size = v;
    }
    if let Some(v) = m.learning_rate {
        tc.learning_rate = v;
    }
    tc.validate()?;
    Ok(tc)
}

fn encoder_kind(ctx: &Ctx, m: &ModelArgs) -> EncoderKind {
    match m.encoder {
        Some(EncoderArg::Bow) => EncoderKind::Bow,
        Some(EncoderArg::Embedding) => EncoderKind::Embedding,
        None => ctx.config.model.encoder.unwrap_or(if m.embeddings.is_some() {
            EncoderKind::Embedding
        } else {
            EncoderKind::Bow
        }),
    }
}

fn variant(ctx: &Ctx, m: &ModelArgs) -> Variant {
    match m.variant {
        Some(VariantArg::Cantm) => Variant::Cantm,
        Some(VariantArg::Nvdm) => Variant::Nvdm,
        None => ctx.config.model.variant.unwrap_or(Variant::Cantm),
    }
}

fn embeddings(path: Option<&PathBuf>, encoder: EncoderKind) -> Result<Option<EmbeddingTable>> {
    match (encoder, path) {
        (EncoderKind::Embedding, Some(p)) => Ok(Some(EmbeddingTable::load(p)?)),
        (EncoderKind::Embedding, None) => Err(CliError::Usage(
            "the embedding encoder needs --embeddings <path>".into(),
        )),
        (EncoderKind::Bow, _) => Ok(None),
    }
}

fn model_config(ctx: &Ctx, m: &ModelArgs, vocab: usize, classes: usize, table: Option<&EmbeddingTable>) -> ModelConfig {
    let s = &ctx.config.model;
    let encoder = encoder_kind(ctx, m);
    let d_h = match table {
        Some(t) => t.dim(),
        None => m.d_h.or(s.d_h).unwrap_or(DEFAULT_BOW_HIDDEN),
    };
    let mut cfg = ModelConfig::new(encoder, vocab, classes, d_h).with_variant(variant(ctx, m));
    cfg.d_z = m.d_z.or(s.d_z).unwrap_or(cfg.d_z);
    cfg.d_zs = m.d_zs.or(s.d_zs).unwrap_or(cfg.d_zs);
    cfg.d_t = m.d_t.or(s.d_t).unwrap_or(cfg.d_t);
    cfg.lambda = s.lambda;
    cfg
}

fn parse_labels(labels: &[String]) -> Result<Vec<Category>> {
    labels
        .iter()
        .map(|l| l.parse::<Category>().map_err(CliError::from))
        .collect()
}

/// Model documents; unlabelled ones are dropped when the model needs labels.
fn documents(
    ctx: &Ctx,
    docs: &[LabeledDocument],
    vocab: &Vocabulary,
    classes: &[Category],
    need_labels: bool,
    table: Option<&EmbeddingTable>,
) -> Result<Vec<Document>> {
    let mut data: Vec<Document> = docs.iter().map(|d| Document::from_labeled(d, vocab, classes)).collect();
    if need_labels {
        let before = data.len();
        data.retain(|d| d.label.is_some());
        if data.len() < before {
            ctx.note(format!("{} unlabelled records skipped", before - data.len()));
        }
    }
    if data.is_empty() {
        return Err(cantm::Error::Validation("no usable documents in the input".into()).into());
    }
    if let Some(t) = table {
        t.attach(&mut data)?;
    }
    Ok(data)
}

fn labelled_docs(path: &Path) -> Result<Vec<LabeledDocument>> {
    Ok(load_records(path)?.into_iter().map(LabeledDocument::from_record).collect())
}

fn class_set(docs: &[LabeledDocument], variant: Variant) -> Result<Vec<Category>> {
    let classes = label_set(docs);
    match (classes.is_empty(), variant) {
        (false, _) => Ok(classes),
        (true, Variant::Nvdm) => Ok(Category::ALL.to_vec()),
        (true, Variant::Cantm) => Err(cantm::Error::Validation("no labelled records in the input".into()).into()),
    }
}

fn train_cmd(ctx: &Ctx, a: &crate::TrainArgs) -> Result<Outcome> {
    let out = ctx.out()?;
    let mut tc = train_config(ctx, &a.model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cli.seed);
    let docs = labelled_docs(&a.input)?;
    let mut inputs = vec![a.input.clone()];

    let (model, vocab, labels, data) = match a.mode {
        ModeArg::M2Only => {
            let ckpt = a.m1_checkpoint.as_ref().ok_or_else(|| {
                CliError::Usage("--mode m2_only needs --m1-checkpoint <path>".into())
            })?;
            inputs.push(ckpt.clone());
            let bundle = ModelBundle::load(ckpt)?;
            if bundle.model.config.variant != Variant::Cantm {
                return Err(CliError::Usage("the M1 checkpoint must be a CANTM model".into()));
            }
            let classes = parse_labels(&bundle.labels)?;
            let table = embeddings(a.model.embeddings.as_ref(), bundle.model.config.encoder)?;
            let data = documents(ctx, &docs, &bundle.vocab, &classes, false, table.as_ref())?;
            let mut model = bundle.model;
            model.init_m2(&mut rng);
            tc.mode = TrainMode::M2Only;
            (model, bundle.vocab, bundle.labels, data)
        }
        ModeArg::Full => {
            if a.m1_checkpoint.is_some() {
                return Err(CliError::Usage("--m1-checkpoint only applies to --mode m2_only".into()));
            }
            let var = variant(ctx, &a.model);
            let encoder = encoder_kind(ctx, &a.model);
            let table = embeddings(a.model.embeddings.as_ref(), encoder)?;
            let vocab = build_vocab(ctx, &a.model.text, &docs)?;
            let classes = class_set(&docs, var)?;
            let data = documents(ctx, &docs, &vocab, &classes, var == Variant::Cantm, table.as_ref())?;
            let cfg = model_config(ctx, &a.model, vocab.len(), classes.len(), table.as_ref());
            cfg.validate()?;
            let model = CantmModel::new(cfg, &mut rng)?;
            tc.mode = TrainMode::Full;
            (model, vocab, classes.iter().map(|c| c.to_string()).collect(), data)
        }
    };
    if let Some(p) = &a.model.embeddings {
        inputs.push(p.clone());
    }
    ctx.note(format!(
        "training on {} documents, |V| = {}, {} classes, {} parameters",
        data.len(),
        vocab.len(),
        labels.len(),
        model.num_params()
    ));
    let model_cfg = model.config.clone();
    let (model, history) = train(model, &data, &tc)?;
    ctx.note(format!(
        "stopped after epoch {} ({:?}); best epoch {}",
        history.stopped_epoch, history.stop_reason, history.best_epoch
    ));
    let bundle = ModelBundle::new(model, vocab, labels)?;
    bundle.save(out)?;
    let hist_path = sibling(out, "history.json");
    write_json(&hist_path, &history)?;
    Ok(Outcome {
        inputs,
        outputs: vec![out.to_path_buf(), hist_path],
        config: json!({ "model": model_cfg, "train": tc }),
        stats: Some(json!({ "stopped_epoch": history.stopped_epoch, "best_epoch": history.best_epoch })),
    })
}

fn evaluate_cmd(ctx: &Ctx, a: &crate::EvaluateArgs) -> Result<Outcome> {
    let out = ctx.out()?;
    let norm = if a.corpus_perplexity {
        PerplexityNorm::Corpus
    } else {
        PerplexityNorm::PerDocument
    };
    let docs = labelled_docs(&a.input)?;
    let mut inputs = vec![a.input.clone()];
    let m = &a.model_args;
    if let Some(p) = &m.embeddings {
        inputs.push(p.clone());
    }
    let confusion_path = sibling(out, "confusion.csv");

    if let Some(ckpt) = &a.model {
        inputs.push(ckpt.clone());
        let bundle = ModelBundle::load(ckpt)?;
        let classes = parse_labels(&bundle.labels)?;
        let table = embeddings(m.embeddings.as_ref(), bundle.model.config.encoder)?;
        let data = documents(ctx, &docs, &bundle.vocab, &classes, false, table.as_ref())?;
        let report = evaluate(&bundle.model, &data, &bundle.labels, norm)?;
        write_json(out, &report)?;
        let mut outputs = vec![out.to_path_buf()];
        if report.confusion.is_some() {
            report.write_confusion_csv(create(&confusion_path)?)?;
            outputs.push(confusion_path);
        }
        ctx.note(format!(
            "accuracy {:?}, macro-F1 {:?}, perplexity {:?}",
            report.accuracy, report.macro_f1, report.perplexity
        ));
        return Ok(Outcome {
            inputs,
            outputs,
            config: json!({ "perplexity": norm }),
            stats: None,
        });
    }

    let folds = a.folds.or(ctx.config.folds).unwrap_or(DEFAULT_FOLDS);
    let tc = train_config(ctx, m)?;
    let var = variant(ctx, m);
    let table = embeddings(m.embeddings.as_ref(), encoder_kind(ctx, m))?;
    let vocab = build_vocab(ctx, &m.text, &docs)?;
    let classes = class_set(&docs, var)?;
    let labels: Vec<String> = classes.iter().map(|c| c.to_string()).collect();
    let data = documents(ctx, &docs, &vocab, &classes, var == Variant::Cantm, table.as_ref())?;
    let cfg = model_config(ctx, m, vocab.len(), classes.len(), table.as_ref());
    cfg.validate()?;
    ctx.note(format!("{folds}-fold cross-validation on {} documents", data.len()));
    let factory = |seed| CantmModel::new(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(seed));
    let summary = cross_validate(&data, &labels, factory, folds, ctx.cli.seed, &tc, norm)?;
    write_json(out, &summary)?;
    let mut outputs = vec![out.to_path_buf()];
    if let Some(conf) = &summary.confusion {
        cantm::evaluation::write_confusion_csv(create(&confusion_path)?, &labels, conf)?;
        outputs.push(confusion_path);
    }
    println!("{}", cantm::evaluation::CvSummary::table_header());
    println!("{}", summary.table_row(&a.name));
    Ok(Outcome {
        inputs,
        outputs,
        config: json!({ "model": cfg, "train": tc, "folds": folds, "perplexity": norm }),
        stats: None,
    })
}

#[derive(Deserialize)]
struct PredictInput {
    #[serde(alias = "id")]
    doc_id: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    claim: Option<String>,
    #[serde(default)]
    explanation: Option<String>,
}

impl PredictInput {
    fn text(&self) -> String {
        match &self.text {
            Some(t) => t.clone(),
            None => [self.claim.as_deref(), self.explanation.as_deref()]
                .into_iter()
                .flatten()
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

fn predict(ctx: &Ctx, a: &crate::PredictArgs) -> Result<Outcome> {
    let out = ctx.out()?;
    let bundle = ModelBundle::load(&a.model)?;
    if bundle.model.config.variant != Variant::Cantm {
        return Err(CliError::Usage("prediction needs a CANTM checkpoint".into()));
    }
    let table = embeddings(a.embeddings.as_ref(), bundle.model.config.encoder)?;
    let rows: Vec<PredictInput> = read_jsonl(&a.input)?;
    let mut docs: Vec<Document> = rows
        .iter()
        .map(|r| Document::new(to_bow(&r.doc_id, &r.text(), &bundle.vocab), None))
        .collect();
    if let Some(t) = &table {
        t.attach(&mut docs)?;
    }
    let mut preds = Vec::with_capacity(docs.len());
    for d in &docs {
        let p = bundle.model.predict(d)?;
        let best = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
        let distribution: serde_json::Map<String, Value> =
            bundle.labels.iter().zip(p.iter()).map(|(l, &v)| (l.clone(), json!(v))).collect();
        preds.push(json!({
            "doc_id": d.id,
            "category": bundle.labels[best],
            "distribution": distribution,
        }));
    }
    let n = write_jsonl(out, &preds)?;
    ctx.note(format!("{n} predictions written to {}", out.display()));
    let mut inputs = vec![a.model.clone(), a.input.clone()];
    inputs.extend(a.embeddings.iter().cloned());
    Ok(Outcome {
        inputs,
        outputs: vec![out.to_path_buf()],
        config: json!({}),
        stats: None,
    })
}

fn topics(ctx: &Ctx, a: &crate::TopicsArgs) -> Result<Outcome> {
    let bundle = ModelBundle::load(&a.model)?;
    let kinds: Vec<TopicKind> = match a.kind {
        KindArg::Latent => vec![TopicKind::Latent],
        KindArg::ClassAssociated => vec![TopicKind::ClassAssociated],
        KindArg::ClassificationAware => vec![TopicKind::ClassificationAware],
        KindArg::All if bundle.model.config.variant == Variant::Nvdm => vec![TopicKind::Latent],
        KindArg::All => TopicKind::ALL.to_vec(),
    };
    let reports: Vec<TopicReport> = kinds
        .into_iter()
        .map(|k| model_topics(&bundle.model, &bundle.vocab, &bundle.labels, k, a.k))
        .collect::<std::result::Result<_, _>>()?;
    for r in &reports {
        println!("# {}", r.kind.as_str());
        print!("{}", r.to_text_table());
    }
    let mut outputs = Vec::new();
    if let Some(out) = &ctx.cli.out {
        write_json(out, &reports)?;
        outputs.push(out.clone());
    }
    Ok(Outcome {
        inputs: vec![a.model.clone()],
        outputs,
        config: json!({ "k": a.k }),
        stats: None,
    })
}

// ---------------------------------------------------------------- analysis

/// Breakdowns drawn by `analyze`: (stacked values, columns, file stem).
const BREAKDOWNS: [(Dimension, Dimension, &str); 4] = [
    (Dimension::MediaType, Dimension::Category, "media_by_category"),
    (Dimension::Category, Dimension::Platform, "category_by_platform"),
    (Dimension::Category, Dimension::Veracity, "category_by_veracity"),
    (Dimension::Category, Dimension::Week, "category_by_week"),
];

fn write_breakdown(dir: &Path, stem: &str, table: &BreakdownTable) -> Result<Vec<PathBuf>> {
    let csv_path = dir.join(format!("{stem}.csv"));
    table.write_csv(create(&csv_path)?)?;
    let svg_path = dir.join(format!("{stem}.svg"));
    plot::stacked_columns(&svg_path, table)?;
    Ok(vec![csv_path, svg_path])
}

fn analyze(ctx: &Ctx, a: &crate::AnalyzeArgs) -> Result<Outcome> {
    let dir = ctx.out()?;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let records = load_records(&a.input)?;
    let first = records.iter().map(|r| r.debunk_date).min();
    let last = records.iter().map(|r| r.debunk_date).max();
    let (Some(start), Some(end)) = (a.start.or(first), a.end.or(last)) else {
        return Err(cantm::Error::Validation("no records to analyze".into()).into());
    };
    let mut inputs = vec![a.input.clone()];
    let mut outputs = Vec::new();

    let trend = weekly_trend(&records, start, end)?;
    let trend_csv = dir.join("weekly_trend.csv");
    trend.write_csv(create(&trend_csv)?)?;
    let mut lines = vec![(
        "Debunks".to_string(),
        trend.week_start.iter().copied().zip(trend.normalized.iter().copied()).collect::<Vec<_>>(),
    )];
    if let Some(p) = &a.search_trends {
        inputs.push(p.clone());
        let series: Vec<_> = load_search_trends(p)?
            .into_iter()
            .filter(|(d, _)| *d >= trend.week_start[0] && *d <= end)
            .collect();
        lines.push(("Search interest".to_string(), series));
    }
    let trend_svg = dir.join("weekly_trend.svg");
    plot::trend_lines(&trend_svg, &lines)?;
    outputs.extend([trend_csv, trend_svg]);

    for (row, col, stem) in BREAKDOWNS {
        match stacked_breakdown(&records, row, col) {
            Ok(table) => {
                table.notices().iter().for_each(|n| ctx.note(format!("{stem}: {n}")));
                outputs.extend(write_breakdown(dir, stem, &table)?);
            }
            Err(e) => ctx.note(format!("{stem}: skipped ({e})")),
        }
    }

    let totals: BTreeMap<String, u64> = category_totals(&records)
        .into_iter()
        .map(|(c, n)| (c.to_string(), n))
        .collect();
    let totals_path = dir.join("category_totals.json");
    write_json(&totals_path, &totals)?;
    outputs.push(totals_path);
    ctx.note(format!("{} records analyzed, {} files in {}", records.len(), outputs.len(), dir.display()));
    Ok(Outcome {
        inputs,
        outputs,
        config: json!({ "start": start, "end": end }),
        stats: Some(json!({ "records": records.len(), "peak_week_count": trend.counts.iter().max() })),
    })
}
