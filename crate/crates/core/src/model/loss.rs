//! Full training objective with its hand-derived gradient.
//!
//! Per document, with S reparameterized draws (one ε for z and one for z_s per draw,
//! shared by every term that uses them):
//!
//! ```text
//! total = λ·cls − m1_recon + m1_kl − class_recon − m2_recon − m2_cls + m2_kl
//! ```
//!
//! where the sampled terms are averaged over draws and every term is averaged over
//! the batch. Documents with an empty bag of words only contribute `cls`.

use std::ops::{AddAssign, MulAssign};

use ndarray::{s, Array1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::math::{add_outer, concat, dense_counts, leaky_relu, leaky_relu_grad, log_softmax, multinomial_loglik, softmax};
use super::{gaussian_kl, standard_normal, CantmModel, Document, EncoderKind, GaussianParams, Variant};
use crate::error::{Error, Result};

/// Which objective to optimize.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Supervised training of the whole model.
    #[default]
    Full,
    /// M2 on unlabeled data with M1 fixed: only the M2 terms and the class decoder term.
    M2Only,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Cross-entropy of the classifier against the gold label.
    pub cls: f64,
    /// E_z[log p(x_bow | z)]
    pub m1_recon: f64,
    pub m1_kl: f64,
    /// E_ŷ[log p(x_bow | ŷ)]
    pub class_recon: f64,
    /// E_zs[log p(x_bow | ŷ, z_s)]
    pub m2_recon: f64,
    /// E_zs[log p(ŷ | z_s)]
    pub m2_cls: f64,
    pub m2_kl: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn finish(&mut self, lambda: f64) {
        self.total = lambda * self.cls - self.m1_recon + self.m1_kl - self.class_recon - self.m2_recon
            - self.m2_cls
            + self.m2_kl;
    }

    /// Name of the first non-finite term, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        [
            ("cls", self.cls),
            ("m1_recon", self.m1_recon),
            ("m1_kl", self.m1_kl),
            ("class_recon", self.class_recon),
            ("m2_recon", self.m2_recon),
            ("m2_cls", self.m2_cls),
            ("m2_kl", self.m2_kl),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

impl AddAssign<&LossBreakdown> for LossBreakdown {
    fn add_assign(&mut self, o: &LossBreakdown) {
        self.cls += o.cls;
        self.m1_recon += o.m1_recon;
        self.m1_kl += o.m1_kl;
        self.class_recon += o.class_recon;
        self.m2_recon += o.m2_recon;
        self.m2_cls += o.m2_cls;
        self.m2_kl += o.m2_kl;
        self.total += o.total;
    }
}

impl MulAssign<f64> for LossBreakdown {
    fn mul_assign(&mut self, k: f64) {
        self.cls *= k;
        self.m1_recon *= k;
        self.m1_kl *= k;
        self.class_recon *= k;
        self.m2_recon *= k;
        self.m2_cls *= k;
        self.m2_kl *= k;
        self.total *= k;
    }
}

/// Standard-normal draws for one document: `z[s]` for M1 and `zs[s]` for M2.
#[derive(Debug, Clone, PartialEq)]
pub struct DocNoise {
    pub z: Vec<Array1<f64>>,
    pub zs: Vec<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Noise {
    pub docs: Vec<DocNoise>,
}

impl Noise {
    /// Draw `samples` pairs of ε per document, document by document.
    pub fn draw<R: Rng + ?Sized>(n_docs: usize, samples: usize, d_z: usize, d_zs: usize, rng: &mut R) -> Self {
        let docs = (0..n_docs)
            .map(|_| {
                let mut z = Vec::with_capacity(samples);
                let mut zs = Vec::with_capacity(samples);
                for _ in 0..samples {
                    z.push(standard_normal(d_z, rng));
                    zs.push(standard_normal(d_zs, rng));
                }
                DocNoise { z, zs }
            })
            .collect();
        Noise { docs }
    }
}

#[derive(Clone, Copy)]
struct Terms {
    cls: bool,
    m1: bool,
    class_recon: bool,
    m2: bool,
}

impl Terms {
    fn for_model(model: &CantmModel, mode: LossMode) -> Result<Self> {
        match (mode, model.config.variant) {
            (LossMode::Full, Variant::Cantm) => Ok(Terms {
                cls: true,
                m1: true,
                class_recon: true,
                m2: true,
            }),
            (LossMode::Full, Variant::Nvdm) => Ok(Terms {
                cls: false,
                m1: true,
                class_recon: false,
                m2: false,
            }),
            (LossMode::M2Only, Variant::Cantm) => Ok(Terms {
                cls: false,
                m1: false,
                class_recon: true,
                m2: true,
            }),
            (LossMode::M2Only, Variant::Nvdm) => Err(Error::InvalidArgument(
                "m2_only training needs a CANTM model, not the NVDM variant".into(),
            )),
        }
    }

    fn needs_class_dist(self) -> bool {
        self.cls || self.class_recon || self.m2
    }
}

fn kl_grads(q: &GaussianParams) -> (Array1<f64>, Array1<f64>) {
    (q.mu.clone(), q.log_var.mapv(|lv| 0.5 * (lv.exp() - 1.0)))
}

impl CantmModel {
    /// Batch-mean loss with fresh noise from `rng` (`n_train_samples` draws per document).
    pub fn total_loss<R: Rng + ?Sized>(&self, batch: &[Document], mode: LossMode, rng: &mut R) -> Result<LossBreakdown> {
        let noise = self.draw_noise(batch.len(), rng);
        self.total_loss_with_noise(batch, mode, &noise)
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, n_docs: usize, rng: &mut R) -> Noise {
        let c = &self.config;
        Noise::draw(n_docs, c.n_train_samples, c.d_z, c.d_zs, rng)
    }

    pub fn total_loss_with_noise(&self, batch: &[Document], mode: LossMode, noise: &Noise) -> Result<LossBreakdown> {
        self.run(batch, mode, noise, None)
    }

    /// Loss and its gradient with respect to every parameter (returned in a
    /// model-shaped accumulator).
    pub fn loss_and_grad(&self, batch: &[Document], mode: LossMode, noise: &Noise) -> Result<(LossBreakdown, CantmModel)> {
        let mut grads = self.zeros_like();
        let loss = self.run(batch, mode, noise, Some(&mut grads))?;
        Ok((loss, grads))
    }

    fn run(&self, batch: &[Document], mode: LossMode, noise: &Noise, mut grads: Option<&mut CantmModel>) -> Result<LossBreakdown> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if noise.docs.len() < batch.len() {
            return Err(Error::InvalidArgument("noise has fewer documents than the batch".into()));
        }
        let terms = Terms::for_model(self, mode)?;
        let mut sum = LossBreakdown::default();
        for (doc, dn) in batch.iter().zip(&noise.docs) {
            let l = self.doc_loss(doc, dn, terms, grads.as_deref_mut())?;
            sum += &l;
        }
        let scale = 1.0 / batch.len() as f64;
        sum *= scale;
        sum.finish(self.config.lambda());
        if let Some(g) = grads {
            g.for_each_param_mut(|_, _, p| p.iter_mut().for_each(|v| *v *= scale));
        }
        Ok(sum)
    }

    fn doc_loss(&self, doc: &Document, dn: &DocNoise, terms: Terms, mut g: Option<&mut CantmModel>) -> Result<LossBreakdown> {
        let cfg = &self.config;
        let slope = cfg.leaky_slope;
        let lambda = cfg.lambda();
        let n_samples = dn.z.len();
        if n_samples == 0 || dn.zs.len() != n_samples {
            return Err(Error::InvalidArgument("noise must hold at least one draw per document".into()));
        }
        let inv_s = 1.0 / n_samples as f64;
        let label = if terms.cls {
            let y = doc.label.ok_or_else(|| Error::Unlabeled(doc.id.clone()))?;
            if y >= cfg.n_classes {
                return Err(Error::InvalidArgument(format!(
                    "label {y} of {:?} is outside {} classes",
                    doc.id, cfg.n_classes
                )));
            }
            Some(y)
        } else {
            None
        };
        let has_bow = !doc.bow.is_empty();
        let bow = &doc.bow;

        let h = self.encode_document(doc)?;
        let q1 = self.m1_infer(&h);
        let sigma1 = q1.std();

        let mut out = LossBreakdown::default();
        let mut d_mu1 = Array1::<f64>::zeros(cfg.d_z);
        let mut d_lv1 = Array1::<f64>::zeros(cfg.d_z);
        let mut d_h = Array1::<f64>::zeros(cfg.d_h);

        if terms.m1 && has_bow {
            out.m1_kl = gaussian_kl(&q1);
            if g.is_some() {
                let (gm, gl) = kl_grads(&q1);
                d_mu1 += &gm;
                d_lv1 += &gl;
            }
        }

        for s in 0..n_samples {
            let eps1 = &dn.z[s];
            let z = &q1.mu + &(&sigma1 * eps1);
            let mut dz = Array1::<f64>::zeros(cfg.d_z);

            if terms.m1 && has_bow {
                let (ll, gl) = multinomial_loglik(self.m1_decoder.logits(&z).view(), bow);
                out.m1_recon += ll * inv_s;
                if let Some(g) = g.as_deref_mut() {
                    let gl = gl * (-inv_s);
                    add_outer(&mut g.m1_decoder.topic_word, &z, &gl, 1.0);
                    g.m1_decoder.bias += &gl;
                    dz += &self.m1_decoder.topic_word.dot(&gl);
                }
            }

            if !terms.needs_class_dist() {
                if g.is_some() {
                    d_mu1 += &dz;
                    d_lv1 += &(&dz * eps1 * &sigma1 * 0.5);
                }
                continue;
            }

            let y_hat = softmax(self.classifier.forward(&z).view());
            let mut d_yhat = Array1::<f64>::zeros(cfg.n_classes);
            let mut d_logits = Array1::<f64>::zeros(cfg.n_classes);

            if let Some(y) = label {
                out.cls -= y_hat[y].ln() * inv_s;
                if g.is_some() {
                    let mut gy = y_hat.clone();
                    gy[y] -= 1.0;
                    d_logits.scaled_add(lambda * inv_s, &gy);
                }
            }

            if terms.class_recon && has_bow {
                let (ll, gl) = multinomial_loglik(self.class_decoder.logits(&y_hat).view(), bow);
                out.class_recon += ll * inv_s;
                if let Some(g) = g.as_deref_mut() {
                    let gl = gl * (-inv_s);
                    add_outer(&mut g.class_decoder.topic_word, &y_hat, &gl, 1.0);
                    g.class_decoder.bias += &gl;
                    d_yhat += &self.class_decoder.topic_word.dot(&gl);
                }
            }

            if terms.m2 && has_bow {
                let u = concat(&h.h, &y_hat);
                let pre_m = self.m2_merge.forward(&u);
                let m = pre_m.mapv(|v| leaky_relu(v, slope));
                let q2 = GaussianParams {
                    mu: self.m2_mu.forward(&m),
                    log_var: self.m2_logvar.forward(&m),
                };
                let sigma2 = q2.std();
                let eps2 = &dn.zs[s];
                let zs = &q2.mu + &(&sigma2 * eps2);
                out.m2_kl += gaussian_kl(&q2) * inv_s;

                let log_q = log_softmax(self.m2_classifier.forward(&zs).view());
                out.m2_cls += y_hat.dot(&log_q) * inv_s;

                let v = concat(&y_hat, &zs);
                let pre_t = self.m2_topic.forward(&v);
                let t = pre_t.mapv(|x| leaky_relu(x, slope));
                let (ll, gl) = multinomial_loglik(self.m2_decoder.logits(&t).view(), bow);
                out.m2_recon += ll * inv_s;

                if let Some(g) = g.as_deref_mut() {
                    let c = cfg.n_classes;
                    // −m2_recon
                    let gl = gl * (-inv_s);
                    add_outer(&mut g.m2_decoder.topic_word, &t, &gl, 1.0);
                    g.m2_decoder.bias += &gl;
                    let dt = self.m2_decoder.topic_word.dot(&gl);
                    let dpre_t = &dt * &pre_t.mapv(|x| leaky_relu_grad(x, slope));
                    add_outer(&mut g.m2_topic.weight, &dpre_t, &v, 1.0);
                    g.m2_topic.bias += &dpre_t;
                    let dv = self.m2_topic.weight.t().dot(&dpre_t);
                    d_yhat += &dv.slice(s![..c]);
                    let mut dzs = dv.slice(s![c..]).to_owned();

                    // −m2_cls = −Σ ŷ_c log q_c
                    let q = log_q.mapv(f64::exp);
                    let ga = (&q * y_hat.sum() - &y_hat) * inv_s;
                    add_outer(&mut g.m2_classifier.weight, &ga, &zs, 1.0);
                    g.m2_classifier.bias += &ga;
                    dzs += &self.m2_classifier.weight.t().dot(&ga);
                    d_yhat.scaled_add(-inv_s, &log_q);

                    // z_s = μ_s + σ_s ε, plus the KL term
                    let (km, kl) = kl_grads(&q2);
                    let d_mu2 = &dzs + &(km * inv_s);
                    let d_lv2 = &dzs * eps2 * &sigma2 * 0.5 + kl * inv_s;
                    add_outer(&mut g.m2_mu.weight, &d_mu2, &m, 1.0);
                    g.m2_mu.bias += &d_mu2;
                    add_outer(&mut g.m2_logvar.weight, &d_lv2, &m, 1.0);
                    g.m2_logvar.bias += &d_lv2;
                    let dm = self.m2_mu.weight.t().dot(&d_mu2) + self.m2_logvar.weight.t().dot(&d_lv2);
                    let dpre_m = &dm * &pre_m.mapv(|x| leaky_relu_grad(x, slope));
                    add_outer(&mut g.m2_merge.weight, &dpre_m, &u, 1.0);
                    g.m2_merge.bias += &dpre_m;
                    let du = self.m2_merge.weight.t().dot(&dpre_m);
                    d_h += &du.slice(s![..cfg.d_h]);
                    d_yhat += &du.slice(s![cfg.d_h..]);
                }
            }

            if let Some(g) = g.as_deref_mut() {
                // back through the softmax: J = diag(ŷ) − ŷŷᵀ
                let dot = y_hat.dot(&d_yhat);
                d_logits += &(&y_hat * &(&d_yhat - dot));
                add_outer(&mut g.classifier.weight, &d_logits, &z, 1.0);
                g.classifier.bias += &d_logits;
                dz += &self.classifier.weight.t().dot(&d_logits);
                d_mu1 += &dz;
                d_lv1 += &(&dz * eps1 * &sigma1 * 0.5);
            }
        }

        if let Some(g) = g {
            add_outer(&mut g.m1_mu.weight, &d_mu1, &h.h, 1.0);
            g.m1_mu.bias += &d_mu1;
            add_outer(&mut g.m1_logvar.weight, &d_lv1, &h.h, 1.0);
            g.m1_logvar.bias += &d_lv1;
            d_h += &self.m1_mu.weight.t().dot(&d_mu1);
            d_h += &self.m1_logvar.weight.t().dot(&d_lv1);
            if cfg.encoder == EncoderKind::Bow {
                let x = dense_counts(bow, cfg.vocab_size);
                let enc = g.encoder.as_mut().expect("bow encoder grads");
                add_outer(&mut enc.weight, &d_h, &x, 1.0);
                enc.bias += &d_h;
            }
        }

        out.finish(lambda);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::BowVector;
    use crate::model::{ModelConfig, Variant};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn doc(i: usize, pairs: &[(usize, u32)], label: Option<usize>) -> Document {
        Document::new(BowVector::from_pairs(format!("d{i}"), pairs.iter().copied()), label)
    }

    #[test]
    fn zero_model_paper_scale_values() {
        let cfg = ModelConfig::new(EncoderKind::Bow, 2000, 10, 8).with_latent(4, 4, 4);
        let m = CantmModel::zeros(cfg).unwrap();
        let d = doc(0, &[(0, 3), (17, 1), (1999, 2)], Some(4));
        let loss = m.total_loss(&[d], LossMode::Full, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_abs_diff_eq!(loss.cls, 10f64.ln(), epsilon = 1e-12);
        assert_eq!(m.config.lambda(), 200.0);
        assert_eq!(loss.m1_kl, 0.0);
        assert_eq!(loss.m2_kl, 0.0);
        let uniform = 6.0 * (1.0f64 / 2000.0).ln();
        assert_abs_diff_eq!(loss.m1_recon, uniform, epsilon = 1e-9);
        assert_abs_diff_eq!(loss.class_recon, uniform, epsilon = 1e-9);
        assert_abs_diff_eq!(loss.m2_recon, uniform, epsilon = 1e-9);
        assert_abs_diff_eq!(loss.m2_cls, (0.1f64).ln(), epsilon = 1e-12);
        let expected = 200.0 * 10f64.ln() - 3.0 * uniform - 0.1f64.ln();
        assert_abs_diff_eq!(loss.total, expected, epsilon = 1e-8);
    }

    #[test]
    fn unlabeled_document_rejected_in_full_mode() {
        let cfg = ModelConfig::new(EncoderKind::Bow, 5, 2, 3).with_latent(2, 2, 2);
        let m = CantmModel::zeros(cfg).unwrap();
        let err = m
            .total_loss(&[doc(0, &[(0, 1)], None)], LossMode::Full, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap_err();
        assert!(matches!(err, Error::Unlabeled(id) if id == "d0"));
        // m2_only accepts unlabeled data
        assert!(m
            .total_loss(&[doc(0, &[(0, 1)], None)], LossMode::M2Only, &mut ChaCha8Rng::seed_from_u64(0))
            .is_ok());
    }

    #[test]
    fn empty_bow_only_contributes_classification() {
        let cfg = ModelConfig::new(EncoderKind::Bow, 5, 2, 3).with_latent(2, 2, 2);
        let m = CantmModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let l = m
            .total_loss(&[doc(0, &[], Some(1))], LossMode::Full, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert!(l.cls > 0.0);
        assert_eq!((l.m1_recon, l.m1_kl, l.class_recon, l.m2_recon, l.m2_kl, l.m2_cls), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn nvdm_variant_drops_supervised_terms() {
        let cfg = ModelConfig::new(EncoderKind::Bow, 6, 3, 4)
            .with_latent(3, 3, 3)
            .with_variant(Variant::Nvdm);
        let m = CantmModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let l = m
            .total_loss(&[doc(0, &[(1, 2), (4, 1)], None)], LossMode::Full, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_abs_diff_eq!(l.total, -l.m1_recon + l.m1_kl, epsilon = 1e-12);
        assert_eq!((l.cls, l.class_recon, l.m2_recon), (0.0, 0.0, 0.0));
        assert!(m
            .total_loss(&[doc(0, &[(1, 2)], None)], LossMode::M2Only, &mut ChaCha8Rng::seed_from_u64(0))
            .is_err());
    }

    #[test]
    fn breakdown_total_identity_holds() {
        let cfg = ModelConfig::new(EncoderKind::Bow, 8, 3, 4).with_latent(3, 3, 3);
        let m = CantmModel::new(cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let batch = [doc(0, &[(1, 2), (4, 1)], Some(0)), doc(1, &[(7, 3)], Some(2))];
        let l = m.total_loss(&batch, LossMode::Full, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let lam = m.config.lambda();
        let expect = lam * l.cls - l.m1_recon + l.m1_kl - l.m2_recon - l.m2_cls + l.m2_kl - l.class_recon;
        assert_abs_diff_eq!(l.total, expect, epsilon = 1e-10);
        assert!(l.m1_kl >= 0.0 && l.m2_kl >= 0.0);
        assert!(l.m1_recon <= 0.0 && l.m2_recon <= 0.0 && l.class_recon <= 0.0 && l.m2_cls <= 0.0);
        assert!(l.first_non_finite().is_none());
    }
}
