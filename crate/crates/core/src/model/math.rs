use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::corpus::BowVector;

pub fn log_sum_exp(x: ArrayView1<f64>) -> f64 {
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if !max.is_finite() {
        return max;
    }
    max + x.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

pub fn log_softmax(x: ArrayView1<f64>) -> Array1<f64> {
    let lse = log_sum_exp(x);
    x.mapv(|v| v - lse)
}

pub fn softmax(x: ArrayView1<f64>) -> Array1<f64> {
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let e = x.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e / sum
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

pub fn concat(a: &Array1<f64>, b: &Array1<f64>) -> Array1<f64> {
    ndarray::concatenate(Axis(0), &[a.view(), b.view()]).expect("1-d concat")
}

/// dst += alpha * a bᵀ
pub fn add_outer(dst: &mut Array2<f64>, a: &Array1<f64>, b: &Array1<f64>, alpha: f64) {
    let col = a.view().insert_axis(Axis(1));
    let row = b.view().insert_axis(Axis(0));
    ndarray::linalg::general_mat_mul(alpha, &col, &row, 1.0, dst);
}

pub fn dense_counts(bow: &BowVector, len: usize) -> Array1<f64> {
    let mut x = Array1::zeros(len);
    for &(i, c) in bow.counts() {
        x[i] = f64::from(c);
    }
    x
}

/// Count-weighted multinomial log-likelihood Σ_w c_w log softmax(logits)_w and
/// its gradient with respect to the logits, c − N·p.
pub fn multinomial_loglik(logits: ArrayView1<f64>, bow: &BowVector) -> (f64, Array1<f64>) {
    let log_p = log_softmax(logits);
    let n = f64::from(bow.total());
    let mut grad = log_p.mapv(|lp| -n * lp.exp());
    let mut ll = 0.0;
    for &(i, c) in bow.counts() {
        let c = f64::from(c);
        ll += c * log_p[i];
        grad[i] += c;
    }
    (ll, grad)
}
