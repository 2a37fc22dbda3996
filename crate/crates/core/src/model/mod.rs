//! The classification-aware neural topic model: a document encoder feeding a
//! classifier-regularized VAE (M1) stacked under a label-conditioned VAE (M2).

mod checkpoint;
mod encoder;
mod loss;
pub(crate) mod math;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::corpus::{BowVector, Category, LabeledDocument, Vocabulary};
use crate::error::{Error, Result};
use math::{concat, dense_counts, leaky_relu, log_softmax, multinomial_loglik, softmax};

pub use checkpoint::{ModelBundle, TensorData, CHECKPOINT_FORMAT};
pub use encoder::EmbeddingTable;
pub use loss::{DocNoise, LossBreakdown, LossMode, Noise};

pub const DEFAULT_LATENT_DIM: usize = 50;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
pub const DEFAULT_TRAIN_SAMPLES: usize = 10;
pub const DEFAULT_TEST_SAMPLES: usize = 1;

/// Loss weight on the classifier: vocabulary size over number of classes.
pub fn lambda_weight(vocab_size: usize, num_class: usize) -> Result<f64> {
    if vocab_size == 0 || num_class == 0 {
        return Err(Error::InvalidArgument(
            "lambda needs vocab_size >= 1 and num_class >= 1".into(),
        ));
    }
    Ok(vocab_size as f64 / num_class as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Trainable affine map of the raw count vector.
    Bow,
    /// Frozen vectors looked up from a precomputed embedding file.
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Cantm,
    /// M1 topic model only; classifier, class decoder and M2 stay at zero.
    Nvdm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderKind,
    pub variant: Variant,
    pub vocab_size: usize,
    pub n_classes: usize,
    /// Encoder output width (also the M2 merge layer width).
    pub d_h: usize,
    pub d_z: usize,
    pub d_zs: usize,
    pub d_t: usize,
    /// Classifier weight; `None` means vocab_size / n_classes.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Monte-Carlo draws per document during training (losses are averaged over draws).
    #[serde(default = "default_train_samples")]
    pub n_train_samples: usize,
    #[serde(default = "default_test_samples")]
    pub n_test_samples: usize,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
}

fn default_train_samples() -> usize {
    DEFAULT_TRAIN_SAMPLES
}
fn default_test_samples() -> usize {
    DEFAULT_TEST_SAMPLES
}
fn default_slope() -> f64 {
    DEFAULT_LEAKY_SLOPE
}

impl ModelConfig {
    pub fn new(encoder: EncoderKind, vocab_size: usize, n_classes: usize, d_h: usize) -> Self {
        ModelConfig {
            encoder,
            variant: Variant::Cantm,
            vocab_size,
            n_classes,
            d_h,
            d_z: DEFAULT_LATENT_DIM,
            d_zs: DEFAULT_LATENT_DIM,
            d_t: DEFAULT_LATENT_DIM,
            lambda: None,
            n_train_samples: DEFAULT_TRAIN_SAMPLES,
            n_test_samples: DEFAULT_TEST_SAMPLES,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn with_latent(mut self, d_z: usize, d_zs: usize, d_t: usize) -> Self {
        self.d_z = d_z;
        self.d_zs = d_zs;
        self.d_t = d_t;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
            .unwrap_or_else(|| self.vocab_size as f64 / self.n_classes.max(1) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("n_classes", self.n_classes),
            ("d_h", self.d_h),
            ("d_z", self.d_z),
            ("d_zs", self.d_zs),
            ("d_t", self.d_t),
            ("n_train_samples", self.n_train_samples),
            ("n_test_samples", self.n_test_samples),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Validation(format!("model config: {name} must be >= 1")));
        }
        if self.lambda().partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Validation("model config: lambda must be > 0".into()));
        }
        Ok(())
    }
}

/// `weight · x + bias`, weight stored as (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Linear {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    fn random<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let mut l = Self::zeros(input, output);
        let bound = 1.0 / (input as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        l.weight.mapv_inplace(|_| dist.sample(rng));
        l
    }

    pub fn forward(&self, x: &Array1<f64>) -> Array1<f64> {
        self.weight.dot(x) + &self.bias
    }
}

/// Topic-word matrix (topics × vocabulary) plus a per-word bias; logits are `tᵀR + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDecoder {
    pub topic_word: Array2<f64>,
    pub bias: Array1<f64>,
}

impl TopicDecoder {
    pub fn zeros(topics: usize, vocab: usize) -> Self {
        TopicDecoder {
            topic_word: Array2::zeros((topics, vocab)),
            bias: Array1::zeros(vocab),
        }
    }

    fn random<R: Rng + ?Sized>(topics: usize, vocab: usize, rng: &mut R) -> Self {
        let mut d = Self::zeros(topics, vocab);
        let bound = 1.0 / (topics as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        d.topic_word.mapv_inplace(|_| dist.sample(rng));
        d
    }

    pub fn logits(&self, t: &Array1<f64>) -> Array1<f64> {
        self.topic_word.t().dot(t) + &self.bias
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Encoder,
    M1Inference,
    M1Decoder,
    Classifier,
    ClassDecoder,
    M2,
}

impl ParamGroup {
    pub fn is_m2(self) -> bool {
        self == ParamGroup::M2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub h: Array1<f64>,
}

/// Diagonal Gaussian with log-variance parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mu: Array1<f64>,
    pub log_var: Array1<f64>,
}

impl GaussianParams {
    pub fn std(&self) -> Array1<f64> {
        self.log_var.mapv(|lv| (0.5 * lv).exp())
    }

    /// z = μ + σ ⊙ ε
    pub fn reparameterize(&self, eps: &Array1<f64>) -> Array1<f64> {
        &self.mu + &(self.std() * eps)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// KL(N(μ, σ²) ‖ N(0, I)) summed over dimensions.
pub fn gaussian_kl(params: &GaussianParams) -> f64 {
    params
        .mu
        .iter()
        .zip(params.log_var.iter())
        .map(|(&m, &lv)| 0.5 * (lv.exp() + m * m - lv - 1.0))
        .sum()
}

pub fn standard_normal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| StandardNormal.sample(rng))
}

/// `n` reparameterized draws from `params`.
pub fn sample_latent<R: Rng + ?Sized>(params: &GaussianParams, n: usize, rng: &mut R) -> Vec<Array1<f64>> {
    (0..n)
        .map(|_| params.reparameterize(&standard_normal(params.dim(), rng)))
        .collect()
}

/// Model-side view of a document.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub bow: BowVector,
    /// Precomputed encoder representation, used by the embedding encoder.
    pub embedding: Option<Vec<f64>>,
    /// Class index, when known.
    pub label: Option<usize>,
}

impl Document {
    pub fn new(bow: BowVector, label: Option<usize>) -> Self {
        Document {
            id: bow.doc_id.clone(),
            bow,
            embedding: None,
            label,
        }
    }

    /// Bag of words over `vocab`; the label becomes its index in `labels`
    /// (unset when absent from it).
    pub fn from_labeled(doc: &LabeledDocument, vocab: &Vocabulary, labels: &[Category]) -> Self {
        let label = doc.label.and_then(|c| labels.iter().position(|&l| l == c));
        Document::new(doc.bow(vocab), label)
    }
}

/// Categories present among the documents, in declared order.
pub fn label_set(docs: &[LabeledDocument]) -> Vec<Category> {
    Category::ALL
        .iter()
        .copied()
        .filter(|c| docs.iter().any(|d| d.label == Some(*c)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CantmModel {
    pub config: ModelConfig,
    /// Present only for the bag-of-words encoder: d_h × |V|.
    pub encoder: Option<Linear>,
    pub m1_mu: Linear,
    pub m1_logvar: Linear,
    /// R: d_z × |V|
    pub m1_decoder: TopicDecoder,
    /// C × d_z
    pub classifier: Linear,
    /// R_ct: C × |V|
    pub class_decoder: TopicDecoder,
    /// d_h × (d_h + C), leaky-rectified
    pub m2_merge: Linear,
    pub m2_mu: Linear,
    pub m2_logvar: Linear,
    /// C × d_zs
    pub m2_classifier: Linear,
    /// d_t × (C + d_zs), leaky-rectified
    pub m2_topic: Linear,
    /// R_s: d_t × |V|
    pub m2_decoder: TopicDecoder,
}

impl CantmModel {
    /// All weights and biases zero.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        Ok(CantmModel {
            encoder: (c.encoder == EncoderKind::Bow).then(|| Linear::zeros(c.vocab_size, c.d_h)),
            m1_mu: Linear::zeros(c.d_h, c.d_z),
            m1_logvar: Linear::zeros(c.d_h, c.d_z),
            m1_decoder: TopicDecoder::zeros(c.d_z, c.vocab_size),
            classifier: Linear::zeros(c.d_z, c.n_classes),
            class_decoder: TopicDecoder::zeros(c.n_classes, c.vocab_size),
            m2_merge: Linear::zeros(c.d_h + c.n_classes, c.d_h),
            m2_mu: Linear::zeros(c.d_h, c.d_zs),
            m2_logvar: Linear::zeros(c.d_h, c.d_zs),
            m2_classifier: Linear::zeros(c.d_zs, c.n_classes),
            m2_topic: Linear::zeros(c.n_classes + c.d_zs, c.d_t),
            m2_decoder: TopicDecoder::zeros(c.d_t, c.vocab_size),
            config,
        })
    }

    /// Uniform(±1/√fan_in) weights, zero biases. In the NVDM variant the
    /// parts outside M1 stay zero.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let c = m.config.clone();
        if c.encoder == EncoderKind::Bow {
            m.encoder = Some(Linear::random(c.vocab_size, c.d_h, rng));
        }
        m.m1_mu = Linear::random(c.d_h, c.d_z, rng);
        m.m1_logvar = Linear::random(c.d_h, c.d_z, rng);
        m.m1_decoder = TopicDecoder::random(c.d_z, c.vocab_size, rng);
        if c.variant == Variant::Cantm {
            m.classifier = Linear::random(c.d_z, c.n_classes, rng);
            m.class_decoder = TopicDecoder::random(c.n_classes, c.vocab_size, rng);
            m.init_m2(rng);
        }
        Ok(m)
    }

    /// Re-draw every M2 weight, leaving M1 untouched.
    pub fn init_m2<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let c = &self.config;
        self.m2_merge = Linear::random(c.d_h + c.n_classes, c.d_h, rng);
        self.m2_mu = Linear::random(c.d_h, c.d_zs, rng);
        self.m2_logvar = Linear::random(c.d_h, c.d_zs, rng);
        self.m2_classifier = Linear::random(c.d_zs, c.n_classes, rng);
        self.m2_topic = Linear::random(c.n_classes + c.d_zs, c.d_t, rng);
        self.m2_decoder = TopicDecoder::random(c.d_t, c.vocab_size, rng);
    }

    /// Same shapes, all zeros; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_param_mut(|_, _, p| p.fill(0.0));
        z
    }

    pub(crate) fn layers(&self) -> Vec<(ParamGroup, &'static str, &Array2<f64>, &Array1<f64>)> {
        type Entry<'a> = (ParamGroup, &'static str, &'a Array2<f64>, &'a Array1<f64>);
        fn lin<'a>(g: ParamGroup, n: &'static str, l: &'a Linear) -> Entry<'a> {
            (g, n, &l.weight, &l.bias)
        }
        fn dec<'a>(g: ParamGroup, n: &'static str, d: &'a TopicDecoder) -> Entry<'a> {
            (g, n, &d.topic_word, &d.bias)
        }
        let mut v = Vec::with_capacity(12);
        if let Some(e) = &self.encoder {
            v.push((ParamGroup::Encoder, "encoder", &e.weight, &e.bias));
        }
        v.push(lin(ParamGroup::M1Inference, "m1_mu", &self.m1_mu));
        v.push(lin(ParamGroup::M1Inference, "m1_logvar", &self.m1_logvar));
        v.push(dec(ParamGroup::M1Decoder, "m1_decoder", &self.m1_decoder));
        v.push(lin(ParamGroup::Classifier, "classifier", &self.classifier));
        v.push(dec(ParamGroup::ClassDecoder, "class_decoder", &self.class_decoder));
        v.push(lin(ParamGroup::M2, "m2_merge", &self.m2_merge));
        v.push(lin(ParamGroup::M2, "m2_mu", &self.m2_mu));
        v.push(lin(ParamGroup::M2, "m2_logvar", &self.m2_logvar));
        v.push(lin(ParamGroup::M2, "m2_classifier", &self.m2_classifier));
        v.push(lin(ParamGroup::M2, "m2_topic", &self.m2_topic));
        v.push(dec(ParamGroup::M2, "m2_decoder", &self.m2_decoder));
        v
    }

    /// Visit every tensor as `(group, "layer.weight" | "layer.bias", values)`, in a fixed order.
    pub fn for_each_param(&self, mut f: impl FnMut(ParamGroup, String, &[f64])) {
        for (g, name, w, b) in self.layers() {
            f(g, format!("{name}.weight"), w.as_slice().expect("standard layout"));
            f(g, format!("{name}.bias"), b.as_slice().expect("standard layout"));
        }
    }

    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(ParamGroup, String, &mut [f64])) {
        let mut lin = |g, name: &str, w: &mut Array2<f64>, b: &mut Array1<f64>| {
            f(g, format!("{name}.weight"), w.as_slice_mut().expect("standard layout"));
            f(g, format!("{name}.bias"), b.as_slice_mut().expect("standard layout"));
        };
        if let Some(e) = &mut self.encoder {
            lin(ParamGroup::Encoder, "encoder", &mut e.weight, &mut e.bias);
        }
        lin(ParamGroup::M1Inference, "m1_mu", &mut self.m1_mu.weight, &mut self.m1_mu.bias);
        lin(ParamGroup::M1Inference, "m1_logvar", &mut self.m1_logvar.weight, &mut self.m1_logvar.bias);
        lin(ParamGroup::M1Decoder, "m1_decoder", &mut self.m1_decoder.topic_word, &mut self.m1_decoder.bias);
        lin(ParamGroup::Classifier, "classifier", &mut self.classifier.weight, &mut self.classifier.bias);
        lin(
            ParamGroup::ClassDecoder,
            "class_decoder",
            &mut self.class_decoder.topic_word,
            &mut self.class_decoder.bias,
        );
        lin(ParamGroup::M2, "m2_merge", &mut self.m2_merge.weight, &mut self.m2_merge.bias);
        lin(ParamGroup::M2, "m2_mu", &mut self.m2_mu.weight, &mut self.m2_mu.bias);
        lin(ParamGroup::M2, "m2_logvar", &mut self.m2_logvar.weight, &mut self.m2_logvar.bias);
        lin(ParamGroup::M2, "m2_classifier", &mut self.m2_classifier.weight, &mut self.m2_classifier.bias);
        lin(ParamGroup::M2, "m2_topic", &mut self.m2_topic.weight, &mut self.m2_topic.bias);
        lin(ParamGroup::M2, "m2_decoder", &mut self.m2_decoder.topic_word, &mut self.m2_decoder.bias);
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.for_each_param(|_, _, p| n += p.len());
        n
    }

    pub fn encode_document(&self, doc: &Document) -> Result<EncoderOutput> {
        let h = match self.config.encoder {
            EncoderKind::Bow => {
                let enc = self.encoder.as_ref().expect("bow encoder has weights");
                if doc.bow.max_position().is_some_and(|p| p >= self.config.vocab_size) {
                    return Err(Error::InvalidArgument(format!(
                        "document {:?} has positions beyond the vocabulary",
                        doc.id
                    )));
                }
                enc.forward(&dense_counts(&doc.bow, self.config.vocab_size))
            }
            EncoderKind::Embedding => {
                let v = doc
                    .embedding
                    .as_ref()
                    .ok_or_else(|| Error::MissingEmbedding(doc.id.clone()))?;
                if v.len() != self.config.d_h {
                    return Err(Error::InvalidArgument(format!(
                        "embedding for {:?} has dimension {}, model expects {}",
                        doc.id,
                        v.len(),
                        self.config.d_h
                    )));
                }
                Array1::from(v.clone())
            }
        };
        Ok(EncoderOutput { h })
    }

    pub fn m1_infer(&self, h: &EncoderOutput) -> GaussianParams {
        GaussianParams {
            mu: self.m1_mu.forward(&h.h),
            log_var: self.m1_logvar.forward(&h.h),
        }
    }

    fn check_bow(&self, bow: &BowVector) -> Result<()> {
        if bow.is_empty() {
            return Err(Error::EmptyDocument(bow.doc_id.clone()));
        }
        Ok(())
    }

    /// Σ_w count_w · log softmax(zR + b)_w
    pub fn m1_reconstruct_loglik(&self, z: &Array1<f64>, bow: &BowVector) -> Result<f64> {
        self.check_bow(bow)?;
        Ok(multinomial_loglik(self.m1_decoder.logits(z).view(), bow).0)
    }

    pub fn classify(&self, z: &Array1<f64>) -> Array1<f64> {
        softmax(self.classifier.forward(z).view())
    }

    /// Σ_w count_w · log softmax(ŷR_ct + b)_w
    pub fn class_decoder_loglik(&self, y_hat: &Array1<f64>, bow: &BowVector) -> Result<f64> {
        self.check_bow(bow)?;
        Ok(multinomial_loglik(self.class_decoder.logits(y_hat).view(), bow).0)
    }

    pub fn m2_merge(&self, h: &EncoderOutput, y_hat: &Array1<f64>) -> Array1<f64> {
        let slope = self.config.leaky_slope;
        self.m2_merge
            .forward(&concat(&h.h, y_hat))
            .mapv(|v| leaky_relu(v, slope))
    }

    pub fn m2_infer(&self, h: &EncoderOutput, y_hat: &Array1<f64>) -> GaussianParams {
        let m = self.m2_merge(h, y_hat);
        GaussianParams {
            mu: self.m2_mu.forward(&m),
            log_var: self.m2_logvar.forward(&m),
        }
    }

    /// Classification-aware topic t = LeakyReLU(W(ŷ ⊕ z_s) + b).
    pub fn classification_aware_topic(&self, y_hat: &Array1<f64>, z_s: &Array1<f64>) -> Array1<f64> {
        let slope = self.config.leaky_slope;
        self.m2_topic
            .forward(&concat(y_hat, z_s))
            .mapv(|v| leaky_relu(v, slope))
    }

    pub fn m2_reconstruct_loglik(&self, y_hat: &Array1<f64>, z_s: &Array1<f64>, bow: &BowVector) -> Result<f64> {
        self.check_bow(bow)?;
        let t = self.classification_aware_topic(y_hat, z_s);
        Ok(multinomial_loglik(self.m2_decoder.logits(&t).view(), bow).0)
    }

    /// Soft-target log-likelihood Σ_c ŷ_c · log softmax(FC(z_s))_c.
    pub fn m2_class_loglik(&self, z_s: &Array1<f64>, y_hat: &Array1<f64>) -> f64 {
        let log_q = log_softmax(self.m2_classifier.forward(z_s).view());
        y_hat.dot(&log_q)
    }

    /// Class distribution at test time, using z = μ.
    pub fn predict(&self, doc: &Document) -> Result<Array1<f64>> {
        let h = self.encode_document(doc)?;
        Ok(self.classify(&self.m1_infer(&h).mu))
    }

    /// M1 evidence bound with z = μ: log p(x_bow | μ) − KL(q ‖ p).
    pub fn document_elbo(&self, doc: &Document) -> Result<f64> {
        let h = self.encode_document(doc)?;
        let q = self.m1_infer(&h);
        Ok(self.m1_reconstruct_loglik(&q.mu, &doc.bow)? - gaussian_kl(&q))
    }
}
