//! Stage-two window: an LSTM encoder reads the `w2` reshaped samples that
//! precede a target, its final hidden state is the latent `z_t`, and one
//! decoder LSTM step plus an affine projection maps `z_t` back to a
//! prediction of the target. The target row itself is never an input.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{sigmoid, Tensor};

pub const DEFAULT_W2: usize = 11;
pub const DEFAULT_HIDDEN: usize = 32;

/// Gate blocks are stacked in the order input, forget, cell candidate, output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    /// `4h × input`
    pub w_ih: Tensor,
    /// `4h × h`
    pub w_hh: Tensor,
    /// `1 × 4h`
    pub bias: Tensor,
}

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Tensor::zeros(4 * hidden, input),
            w_hh: Tensor::zeros(4 * hidden, hidden),
            bias: Tensor::zeros(1, 4 * hidden),
        }
    }

    /// Weights `U(−1/√h, 1/√h)`, biases zero.
    pub fn init(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(input, hidden);
        let r = 1.0 / (hidden as f64).sqrt();
        for v in p.w_ih.data_mut().iter_mut().chain(p.w_hh.data_mut()) {
            *v = rng.random_range(-r..r);
        }
        p
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn input_size(&self) -> usize {
        self.w_ih.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.w_hh.cols();
        let ok = self.w_hh.rows() == 4 * h
            && self.w_ih.rows() == 4 * h
            && self.bias.shape() == (1, 4 * h);
        if !ok {
            return Err(Error::Contract(format!(
                "inconsistent LSTM shapes: w_ih {:?}, w_hh {:?}, bias {:?}",
                self.w_ih.shape(),
                self.w_hh.shape(),
                self.bias.shape()
            )));
        }
        Ok(())
    }

    /// One cell update from `(h, c)` with input `x`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hs = self.hidden_size();
        let mut pre = self.bias.data().to_vec();
        for (r, p) in pre.iter_mut().enumerate() {
            for (w, v) in self.w_ih.row(r).iter().zip(x) {
                *p += w * v;
            }
            for (w, v) in self.w_hh.row(r).iter().zip(h) {
                *p += w * v;
            }
        }
        let mut h_new = vec![0.0; hs];
        let mut c_new = vec![0.0; hs];
        for k in 0..hs {
            let i = sigmoid(pre[k]);
            let f = sigmoid(pre[hs + k]);
            let g = pre[2 * hs + k].tanh();
            let o = sigmoid(pre[3 * hs + k]);
            c_new[k] = f * c[k] + i * g;
            h_new[k] = o * c_new[k].tanh();
        }
        (h_new, c_new)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaeModel {
    pub encoder: LstmCellParams,
    pub decoder: LstmCellParams,
    /// `n × h`
    pub projection: Tensor,
    /// `1 × n`
    pub projection_bias: Tensor,
    pub w2: usize,
}

impl LaeModel {
    pub fn init(n: usize, hidden: usize, w2: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let encoder = LstmCellParams::init(n, hidden, rng);
        let decoder = LstmCellParams::init(hidden, hidden, rng);
        let r = 1.0 / (hidden as f64).sqrt();
        let mut projection = Tensor::zeros(n, hidden);
        for v in projection.data_mut() {
            *v = rng.random_range(-r..r);
        }
        let m = Self {
            encoder,
            decoder,
            projection,
            projection_bias: Tensor::zeros(1, n),
            w2,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn zeros(n: usize, hidden: usize, w2: usize) -> Self {
        Self {
            encoder: LstmCellParams::zeros(n, hidden),
            decoder: LstmCellParams::zeros(hidden, hidden),
            projection: Tensor::zeros(n, hidden),
            projection_bias: Tensor::zeros(1, n),
            w2,
        }
    }

    pub fn feature_count(&self) -> usize {
        self.encoder.input_size()
    }

    pub fn hidden_size(&self) -> usize {
        self.encoder.hidden_size()
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        let (n, h) = (self.feature_count(), self.hidden_size());
        if self.decoder.input_size() != h || self.decoder.hidden_size() != h {
            return Err(Error::Contract(format!(
                "decoder must be {h}→{h}, got {}→{}",
                self.decoder.input_size(),
                self.decoder.hidden_size()
            )));
        }
        if self.projection.shape() != (n, h) || self.projection_bias.shape() != (1, n) {
            return Err(Error::Contract(format!(
                "projection must be {n}x{h} with a 1x{n} bias"
            )));
        }
        if self.w2 == 0 {
            return Err(Error::Contract("w2 must be at least 1".into()));
        }
        Ok(())
    }
}

/// `w2` consecutive inputs and the row right after them.
#[derive(Clone, Copy, Debug)]
pub struct PredictionWindow<'a> {
    pub target_index: usize,
    inputs: &'a [f64],
    target: &'a [f64],
    n: usize,
}

impl<'a> PredictionWindow<'a> {
    pub fn len(&self) -> usize {
        self.inputs.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input(&self, s: usize) -> &'a [f64] {
        &self.inputs[s * self.n..(s + 1) * self.n]
    }

    pub fn target(&self) -> &'a [f64] {
        self.target
    }

    pub fn feature_count(&self) -> usize {
        self.n
    }

    /// A window over explicit rows, for callers that do not hold a series.
    pub fn from_slices(inputs: &'a [f64], target: &'a [f64], target_index: usize) -> Result<Self> {
        let n = target.len();
        if n == 0 || inputs.is_empty() || inputs.len() % n != 0 {
            return Err(Error::Contract(format!(
                "{} input values do not form rows of {n}",
                inputs.len()
            )));
        }
        Ok(Self {
            target_index,
            inputs,
            target,
            n,
        })
    }
}

pub fn prediction_windows(series: &Tensor, w2: usize) -> Result<Vec<PredictionWindow<'_>>> {
    let (len, n) = series.shape();
    if w2 == 0 {
        return Err(Error::Contract("w2 must be at least 1".into()));
    }
    if len < w2 + 1 {
        return Err(Error::InsufficientLength {
            what: "stage-two window",
            needed: w2 + 1,
            got: len,
        });
    }
    let d = series.data();
    Ok((w2..len)
        .map(|t| PredictionWindow {
            target_index: t,
            inputs: &d[(t - w2) * n..t * n],
            target: &d[t * n..(t + 1) * n],
            n,
        })
        .collect())
}

/// Runs the encoder over the window from a zero state; the final hidden
/// state is the latent.
pub fn encode(window: &PredictionWindow<'_>, model: &LaeModel) -> Result<Vec<f64>> {
    if window.feature_count() != model.feature_count() {
        return Err(Error::Dimension {
            expected: model.feature_count(),
            found: window.feature_count(),
        });
    }
    let hs = model.hidden_size();
    let mut h = vec![0.0; hs];
    let mut c = vec![0.0; hs];
    for s in 0..window.len() {
        (h, c) = model.encoder.step(window.input(s), &h, &c);
    }
    Ok(h)
}

/// One decoder step from a zero state, then the output projection.
pub fn decode(z: &[f64], model: &LaeModel) -> Result<Vec<f64>> {
    let hs = model.hidden_size();
    if z.len() != hs {
        return Err(Error::Contract(format!(
            "latent has {} values, model hidden size is {hs}",
            z.len()
        )));
    }
    let zero = vec![0.0; hs];
    let (h, _) = model.decoder.step(z, &zero, &zero);
    let mut out = model.projection_bias.data().to_vec();
    for (r, o) in out.iter_mut().enumerate() {
        for (w, v) in model.projection.row(r).iter().zip(&h) {
            *o += w * v;
        }
    }
    Ok(out)
}

pub fn forward(window: &PredictionWindow<'_>, model: &LaeModel) -> Result<Vec<f64>> {
    let z = encode(window, model)?;
    decode(&z, model)
}

/// Mean absolute deviation over features.
pub fn mae(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() || predicted.is_empty() {
        return Err(Error::Contract(format!(
            "mae over {} and {} values",
            predicted.len(),
            actual.len()
        )));
    }
    let mut acc = 0.0;
    for (p, a) in predicted.iter().zip(actual) {
        acc += (p - a).abs();
    }
    Ok(acc / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_counts() {
        let s = Tensor::zeros(5, 3);
        let w = prediction_windows(&s, 2).unwrap();
        assert_eq!(w.iter().map(|w| w.target_index).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert!(matches!(
            prediction_windows(&Tensor::zeros(3, 3), 3),
            Err(Error::InsufficientLength { needed: 4, got: 3, .. })
        ));
    }

    #[test]
    fn zero_model_zero_latent() {
        let m = LaeModel::zeros(3, 4, 2);
        let s = Tensor::zeros(3, 3);
        let w = prediction_windows(&s, 2).unwrap();
        assert_eq!(encode(&w[0], &m).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn zero_decoder_returns_bias() {
        let mut m = LaeModel::zeros(2, 3, 1);
        m.projection_bias = Tensor::row_vector(&[0.25, -1.0]);
        assert_eq!(decode(&[0.3, -0.2, 0.9], &m).unwrap(), vec![0.25, -1.0]);
    }

    #[test]
    fn zero_latent_with_biases_has_closed_form() {
        // h = σ(b_o)·tanh(σ(b_i)·tanh(b_g)), forget gate irrelevant from zero state
        let mut m = LaeModel::zeros(1, 1, 1);
        m.decoder.bias = Tensor::row_vector(&[0.5, -3.0, 0.8, 1.2]);
        m.projection = Tensor::from_vec(1, 1, vec![2.0]).unwrap();
        m.projection_bias = Tensor::row_vector(&[0.1]);
        let h = sigmoid(1.2) * (sigmoid(0.5) * 0.8f64.tanh()).tanh();
        let out = decode(&[0.0], &m).unwrap();
        assert!((out[0] - (2.0 * h + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 1.5], &[0.5, 1.0]).unwrap(), 0.5);
        assert_eq!(mae(&[1.0, 1.0], &[0.0, 1.0]).unwrap(), 0.5);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn unit_window_is_one_step() {
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        let m = LaeModel::init(2, 3, 1, &mut rng).unwrap();
        let s = Tensor::from_vec(2, 2, vec![0.1, 0.9, 0.4, 0.2]).unwrap();
        let w = prediction_windows(&s, 1).unwrap();
        let (h, _) = m.encoder.step(&[0.1, 0.9], &[0.0; 3], &[0.0; 3]);
        assert_eq!(encode(&w[0], &m).unwrap(), h);
    }
}
