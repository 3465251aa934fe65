//! The relation classifier head: a two-layer MLP with softmax output over
//! {NULL, PRECONDITION, POSTCONDITION}, trained with cross-entropy and Adam.
//! All math in f64 so finite-difference gradient checks are meaningful.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::RelationLabel;

use super::encoder::gaussian_matrix;
use super::{ModelError, PairPrediction};

pub const NUM_CLASSES: usize = 3;

pub fn label_index(label: RelationLabel) -> usize {
    match label {
        RelationLabel::Null => 0,
        RelationLabel::Precondition => 1,
        RelationLabel::Postcondition => 2,
    }
}

pub fn index_label(index: usize) -> RelationLabel {
    match index {
        0 => RelationLabel::Null,
        1 => RelationLabel::Precondition,
        _ => RelationLabel::Postcondition,
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierHead {
    pub input_dim: usize,
    pub hidden_dim: usize,
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct HeadGrads {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

fn softmax(mut z: Array2<f64>) -> Array2<f64> {
    for mut row in z.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    z
}

impl ClassifierHead {
    pub fn new(input_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s1 = 1.0 / (input_dim as f64).sqrt();
        let s2 = 1.0 / (hidden_dim as f64).sqrt();
        ClassifierHead {
            input_dim,
            hidden_dim,
            w1: gaussian_matrix(&mut rng, input_dim, hidden_dim, s1),
            b1: Array1::zeros(hidden_dim),
            w2: gaussian_matrix(&mut rng, hidden_dim, NUM_CLASSES, s2),
            b2: Array1::zeros(NUM_CLASSES),
        }
    }

    /// Probabilities for a batch of feature rows.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z1 = x.dot(&self.w1);
        z1 += &self.b1;
        z1.mapv_inplace(f64::tanh);
        let mut z2 = z1.dot(&self.w2);
        z2 += &self.b2;
        softmax(z2)
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<PairPrediction, ModelError> {
        if x.len() != self.input_dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let batch = x.insert_axis(Axis(0));
        let probs = self.forward_batch(batch);
        Ok(PairPrediction::from_probs([
            probs[[0, 0]],
            probs[[0, 1]],
            probs[[0, 2]],
        ]))
    }

    /// Mean cross-entropy over the batch plus parameter gradients.
    pub fn loss_and_grads(
        &self,
        x: ArrayView2<f64>,
        labels: &[usize],
    ) -> Result<(f64, HeadGrads), ModelError> {
        if x.len_of(Axis(1)) != self.input_dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len_of(Axis(1)),
            });
        }
        let n = labels.len();
        assert_eq!(x.len_of(Axis(0)), n, "feature rows must match labels");
        let mut z1 = x.dot(&self.w1);
        z1 += &self.b1;
        let h = z1.mapv(f64::tanh);
        let mut z2 = h.dot(&self.w2);
        z2 += &self.b2;
        let probs = softmax(z2);

        let mut loss = 0.0;
        let mut dz2 = probs;
        for (i, label) in labels.iter().enumerate() {
            loss -= dz2[[i, *label]].max(1e-300).ln();
            dz2[[i, *label]] -= 1.0;
        }
        loss /= n as f64;
        dz2.mapv_inplace(|v| v / n as f64);

        let dw2 = h.t().dot(&dz2);
        let db2 = dz2.sum_axis(Axis(0));
        let dh = dz2.dot(&self.w2.t());
        let dz1 = &dh * &h.mapv(|v| 1.0 - v * v);
        let dw1 = x.t().dot(&dz1);
        let db1 = dz1.sum_axis(Axis(0));
        Ok((
            loss,
            HeadGrads {
                w1: dw1,
                b1: db1,
                w2: dw2,
                b2: db2,
            },
        ))
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend(self.w1.iter());
        out.extend(self.b1.iter());
        out.extend(self.w2.iter());
        out.extend(self.b2.iter());
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut it = params.iter();
        for v in self.w1.iter_mut() {
            *v = *it.next().unwrap();
        }
        for v in self.b1.iter_mut() {
            *v = *it.next().unwrap();
        }
        for v in self.w2.iter_mut() {
            *v = *it.next().unwrap();
        }
        for v in self.b2.iter_mut() {
            *v = *it.next().unwrap();
        }
    }

    pub fn flat_grads(grads: &HeadGrads) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(grads.w1.iter());
        out.extend(grads.b1.iter());
        out.extend(grads.w2.iter());
        out.extend(grads.b2.iter());
        out
    }
}

/// Classify the ordered concatenation of two segment vectors.
pub fn classify_pair(
    vec_a: ArrayView1<f64>,
    vec_b: ArrayView1<f64>,
    head: &ClassifierHead,
) -> Result<PairPrediction, ModelError> {
    if vec_a.len() + vec_b.len() != head.input_dim {
        return Err(ModelError::DimensionMismatch {
            expected: head.input_dim,
            got: vec_a.len() + vec_b.len(),
        });
    }
    let mut x = Array1::zeros(head.input_dim);
    for (i, v) in vec_a.iter().chain(vec_b.iter()).enumerate() {
        x[i] = *v;
    }
    head.forward(x.view())
}

/// Classify a single vector (the pairwise variant's CLS representation).
pub fn classify_vector(
    vec: ArrayView1<f64>,
    head: &ClassifierHead,
) -> Result<PairPrediction, ModelError> {
    head.forward(vec)
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
