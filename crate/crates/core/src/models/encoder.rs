//! The sequence-encoder contract and the bundled tiny self-attention
//! encoder.
//!
//! The encoder is a frozen feature extractor: weights are drawn once from a
//! seeded generator and never trained. Only the classifier heads learn. A
//! production adapter can wrap a large pretrained encoder behind the same
//! trait; tests and the bundled pipeline use [`TinyEncoder`].

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::text;

/// Default maximum input length L.
pub const DEFAULT_MAX_LEN: usize = 500;

/// Reserved marker tokens; never produced by `tokenize`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputToken {
    Cls,
    Sep,
    SegOpen,
    SegClose,
    Word(String),
}

/// A tokenizer output token with character offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncToken {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

/// A deterministic sequence encoder: one output vector per input token.
pub trait SequenceEncoder {
    fn encoder_id(&self) -> String;
    /// Hidden size d.
    fn hidden_size(&self) -> usize;
    /// Maximum input length L.
    fn max_input_len(&self) -> usize;
    fn tokenize(&self, text: &str) -> Vec<EncToken>;
    /// Encode a token sequence; output shape is `(input.len(), d)`.
    fn encode(&self, input: &[InputToken]) -> Array2<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TinyEncoderConfig {
    pub hidden: usize,
    pub layers: usize,
    pub feedforward: usize,
    pub vocab: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl TinyEncoderConfig {
    pub fn with_seed(seed: u64) -> Self {
        TinyEncoderConfig {
            hidden: 64,
            layers: 2,
            feedforward: 128,
            vocab: 1024,
            max_len: DEFAULT_MAX_LEN,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
struct EncoderLayer {
    wq: Array2<f64>,
    wk: Array2<f64>,
    wv: Array2<f64>,
    wo: Array2<f64>,
    ln1_gamma: Array1<f64>,
    ln1_beta: Array1<f64>,
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
    ln2_gamma: Array1<f64>,
    ln2_beta: Array1<f64>,
}

/// A small randomly-initialized self-attention encoder with a hashed
/// vocabulary. Deterministic for a fixed seed.
#[derive(Debug, Clone)]
pub struct TinyEncoder {
    pub config: TinyEncoderConfig,
    embeddings: Array2<f64>,
    layers: Vec<EncoderLayer>,
}

const MARKER_COUNT: usize = 4;

/// Standard-normal draw via Box-Muller; keeps the generator stream stable
/// across toolchain versions.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub(crate) fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| gaussian(rng) * std)
}

fn layer_norm(x: &Array2<f64>, gamma: &Array1<f64>, beta: &Array1<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let mean = row.mean().unwrap_or(0.0);
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / row.len() as f64;
        let denom = (var + 1e-5).sqrt();
        for (i, v) in row.iter_mut().enumerate() {
            *v = (*v - mean) / denom * gamma[i] + beta[i];
        }
    }
    out
}

fn softmax_rows(x: &mut Array2<f64>) {
    for mut row in x.rows_mut() {
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
}

impl TinyEncoder {
    pub fn new(seed: u64) -> Self {
        TinyEncoder::with_config(TinyEncoderConfig::with_seed(seed))
    }

    pub fn with_config(config: TinyEncoderConfig) -> Self {
        let d = config.hidden;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let embeddings = gaussian_matrix(&mut rng, config.vocab + MARKER_COUNT, d, 0.5);
        let layers = (0..config.layers)
            .map(|_| EncoderLayer {
                wq: gaussian_matrix(&mut rng, d, d, 0.15),
                wk: gaussian_matrix(&mut rng, d, d, 0.15),
                wv: gaussian_matrix(&mut rng, d, d, 0.15),
                wo: gaussian_matrix(&mut rng, d, d, 0.15),
                ln1_gamma: Array1::ones(d),
                ln1_beta: Array1::zeros(d),
                w1: gaussian_matrix(&mut rng, d, config.feedforward, 0.15),
                b1: Array1::zeros(config.feedforward),
                w2: gaussian_matrix(&mut rng, config.feedforward, d, 0.15),
                b2: Array1::zeros(d),
                ln2_gamma: Array1::ones(d),
                ln2_beta: Array1::zeros(d),
            })
            .collect();
        TinyEncoder {
            config,
            embeddings,
            layers,
        }
    }

    fn token_id(&self, token: &InputToken) -> usize {
        match token {
            InputToken::Cls => 0,
            InputToken::Sep => 1,
            InputToken::SegOpen => 2,
            InputToken::SegClose => 3,
            InputToken::Word(w) => {
                MARKER_COUNT + (text::fnv1a(&w.to_lowercase()) % self.config.vocab as u64) as usize
            }
        }
    }

    fn positional(&self, pos: usize, dim: usize) -> f64 {
        let d = self.config.hidden as f64;
        let exponent = (2 * (dim / 2)) as f64 / d;
        let angle = pos as f64 / 10000f64.powf(exponent);
        if dim % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    }
}

impl SequenceEncoder for TinyEncoder {
    fn encoder_id(&self) -> String {
        format!(
            "tiny-selfattn-v1-d{}-l{}",
            self.config.hidden, self.config.layers
        )
    }

    fn hidden_size(&self) -> usize {
        self.config.hidden
    }

    fn max_input_len(&self) -> usize {
        self.config.max_len
    }

    fn tokenize(&self, source: &str) -> Vec<EncToken> {
        text::tokenize(source)
            .into_iter()
            .map(|t| EncToken {
                text: t.text(source).to_string(),
                char_start: t.start,
                char_end: t.end,
            })
            .collect()
    }

    fn encode(&self, input: &[InputToken]) -> Array2<f64> {
        let d = self.config.hidden;
        let n = input.len();
        let mut x = Array2::zeros((n, d));
        for (i, token) in input.iter().enumerate() {
            let id = self.token_id(token);
            for j in 0..d {
                x[[i, j]] = self.embeddings[[id, j]] + self.positional(i, j);
            }
        }
        let scale = 1.0 / (d as f64).sqrt();
        for layer in &self.layers {
            let q = x.dot(&layer.wq);
            let k = x.dot(&layer.wk);
            let v = x.dot(&layer.wv);
            let mut scores = q.dot(&k.t());
            scores.mapv_inplace(|s| s * scale);
            softmax_rows(&mut scores);
            let attended = scores.dot(&v).dot(&layer.wo);
            x = layer_norm(&(&x + &attended), &layer.ln1_gamma, &layer.ln1_beta);
            let mut h = x.dot(&layer.w1);
            h += &layer.b1;
            h.mapv_inplace(f64::tanh);
            let mut ff = h.dot(&layer.w2);
            ff += &layer.b2;
            x = layer_norm(&(&x + &ff), &layer.ln2_gamma, &layer.ln2_beta);
        }
        x
    }
}

/// Mean over a set of row indices.
pub(crate) fn mean_rows(output: &Array2<f64>, rows: &[usize]) -> Array1<f64> {
    let mut sum = Array1::zeros(output.len_of(Axis(1)));
    for r in rows {
        sum += &output.row(*r);
    }
    sum / rows.len() as f64
}
