//! The two-stage window pipeline as one differentiable model.
//!
//! [`MultiWindowModel::batch_graph`] builds a single graph for a batch of
//! prediction targets: the stage-one reshape is computed once for every
//! reshaped row the batch touches, then the encoder/decoder runs over all
//! windows of the batch at once. Training and scoring share this path.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Graph, NodeId, Tensor};
use crate::wgat::{self, Activation, GatParams};
use crate::wlae::{self, LaeModel};

/// How the stage-one window re-represents the series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// Learned attention over the trailing `w1` rows.
    #[default]
    Adaptive,
    /// Uniform trailing mean over `w1` rows.
    Manual,
    /// The series is used as is.
    None,
}

impl WindowMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowMode::Adaptive => "adaptive",
            WindowMode::Manual => "manual",
            WindowMode::None => "none",
        }
    }
}

impl std::str::FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Self::Adaptive),
            "manual" => Ok(Self::Manual),
            "none" => Ok(Self::None),
            other => Err(Error::Config(format!("unknown window mode `{other}`"))),
        }
    }
}

/// What a prediction is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// The stage-one output `x′_t`, the quantity the model predicts.
    #[default]
    Reshaped,
    /// The normalized input row `x_t`.
    Raw,
}

impl TargetMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetMode::Reshaped => "reshaped",
            TargetMode::Raw => "raw",
        }
    }
}

impl std::str::FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reshaped" => Ok(Self::Reshaped),
            "raw" => Ok(Self::Raw),
            other => Err(Error::Config(format!("unknown target mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n: usize,
    pub w1: usize,
    pub w2: usize,
    pub hidden: usize,
    pub leaky_slope: f64,
    pub activation: Activation,
    pub mode: WindowMode,
}

impl ModelSpec {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            w1: wgat::DEFAULT_W1,
            w2: wlae::DEFAULT_W2,
            hidden: wlae::DEFAULT_HIDDEN,
            leaky_slope: wgat::DEFAULT_LEAKY_SLOPE,
            activation: Activation::Sigmoid,
            mode: WindowMode::Adaptive,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiWindowModel {
    pub gat: GatParams,
    pub lae: LaeModel,
    pub mode: WindowMode,
}

/// Parameter names in canonical order.
pub const PARAM_NAMES: [&str; 10] = [
    "gat.w",
    "gat.a",
    "encoder.w_ih",
    "encoder.w_hh",
    "encoder.bias",
    "decoder.w_ih",
    "decoder.w_hh",
    "decoder.bias",
    "projection.w",
    "projection.b",
];

/// A built batch: the graph plus the handles callers need.
pub struct BatchGraph {
    pub graph: Graph,
    /// Parameter leaves that receive gradient, keyed by canonical name.
    pub params: BTreeMap<&'static str, NodeId>,
    /// `B×n` predictions.
    pub prediction: NodeId,
    /// `B×n` comparison targets.
    pub target: NodeId,
    /// Mean over windows of the per-window MAE.
    pub loss: NodeId,
}

impl MultiWindowModel {
    /// Seeded initialization. The stage-one parameters are drawn first in
    /// every mode, so the encoder/decoder start identical across modes.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gat = GatParams::init(spec.n, spec.w1, &mut rng)?;
        gat.leaky_slope = spec.leaky_slope;
        gat.activation = spec.activation;
        let lae = LaeModel::init(spec.n, spec.hidden, spec.w2, &mut rng)?;
        Ok(Self {
            gat,
            lae,
            mode: spec.mode,
        })
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            n: self.feature_count(),
            w1: self.gat.w1,
            w2: self.lae.w2,
            hidden: self.lae.hidden_size(),
            leaky_slope: self.gat.leaky_slope,
            activation: self.gat.activation,
            mode: self.mode,
        }
    }

    pub fn feature_count(&self) -> usize {
        self.lae.feature_count()
    }

    pub fn validate(&self) -> Result<()> {
        self.gat.validate()?;
        self.lae.validate()?;
        if self.gat.feature_count() != self.lae.feature_count() {
            return Err(Error::Contract(format!(
                "stage-one has {} features, stage-two {}",
                self.gat.feature_count(),
                self.lae.feature_count()
            )));
        }
        Ok(())
    }

    /// Input rows consumed before the first reshaped row exists.
    pub fn stage_one_offset(&self) -> usize {
        match self.mode {
            WindowMode::None => 0,
            WindowMode::Adaptive | WindowMode::Manual => self.gat.w1 - 1,
        }
    }

    /// Rows at the start of a series that never receive a score.
    pub fn unscored_prefix(&self) -> usize {
        self.stage_one_offset() + self.lae.w2
    }

    /// Shortest series that yields at least one prediction.
    pub fn min_series_len(&self) -> usize {
        self.unscored_prefix() + 1
    }

    pub fn reshaped_len(&self, series_len: usize) -> usize {
        series_len.saturating_sub(self.stage_one_offset())
    }

    /// Parameters that influence the output in the current mode.
    pub fn trainable_names(&self) -> &'static [&'static str] {
        match self.mode {
            WindowMode::Adaptive => &PARAM_NAMES,
            WindowMode::Manual | WindowMode::None => &PARAM_NAMES[2..],
        }
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        Some(match name {
            "gat.w" => &self.gat.w,
            "gat.a" => &self.gat.a,
            "encoder.w_ih" => &self.lae.encoder.w_ih,
            "encoder.w_hh" => &self.lae.encoder.w_hh,
            "encoder.bias" => &self.lae.encoder.bias,
            "decoder.w_ih" => &self.lae.decoder.w_ih,
            "decoder.w_hh" => &self.lae.decoder.w_hh,
            "decoder.bias" => &self.lae.decoder.bias,
            "projection.w" => &self.lae.projection,
            "projection.b" => &self.lae.projection_bias,
            _ => return None,
        })
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        Some(match name {
            "gat.w" => &mut self.gat.w,
            "gat.a" => &mut self.gat.a,
            "encoder.w_ih" => &mut self.lae.encoder.w_ih,
            "encoder.w_hh" => &mut self.lae.encoder.w_hh,
            "encoder.bias" => &mut self.lae.encoder.bias,
            "decoder.w_ih" => &mut self.lae.decoder.w_ih,
            "decoder.w_hh" => &mut self.lae.decoder.w_hh,
            "decoder.bias" => &mut self.lae.decoder.bias,
            "projection.w" => &mut self.lae.projection,
            "projection.b" => &mut self.lae.projection_bias,
            _ => return None,
        })
    }

    /// Stage-one output for a whole series, evaluated window by window.
    pub fn reshape(&self, series: &Tensor) -> Result<Tensor> {
        match self.mode {
            WindowMode::Adaptive => wgat::reshape_series(series, &self.gat),
            WindowMode::Manual => wgat::manual_window_reshape(series, self.gat.w1),
            WindowMode::None => Ok(series.clone()),
        }
    }

    /// Builds the graph for the prediction targets `targets`, given as
    /// indices into the reshaped series (each at least `w2`).
    pub fn batch_graph(
        &self,
        series: &Tensor,
        targets: &[usize],
        target_mode: TargetMode,
        detach_target: bool,
    ) -> Result<BatchGraph> {
        let n = self.feature_count();
        if series.cols() != n {
            return Err(Error::Dimension {
                expected: n,
                found: series.cols(),
            });
        }
        if targets.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let (w1, w2, hs) = (self.gat.w1, self.lae.w2, self.lae.hidden_size());
        let offset = self.stage_one_offset();
        let reshaped_len = self.reshaped_len(series.rows());
        if let Some(&bad) = targets.iter().find(|&&k| k < w2 || k >= reshaped_len) {
            return Err(Error::Contract(format!(
                "target {bad} outside {w2}..{reshaped_len}"
            )));
        }

        // Reshaped rows the batch touches, and the input rows they read.
        let mut needed: Vec<usize> = targets.iter().flat_map(|&k| k - w2..=k).collect();
        needed.sort_unstable();
        needed.dedup();
        let span = offset + 1;
        let mut raw_rows: Vec<usize> = needed.iter().flat_map(|&k| k..k + span).collect();
        raw_rows.sort_unstable();
        raw_rows.dedup();
        let raw_pos = |r: usize| raw_rows.binary_search(&r).expect("row collected");
        let shp_pos = |k: usize| needed.binary_search(&k).expect("row collected");

        let mut g = Graph::new();
        let mut params = BTreeMap::new();
        let mut leaf = |g: &mut Graph, name: &'static str, t: &Tensor| {
            let id = g.constant(name, t.clone());
            params.insert(name, id);
            id
        };

        let mut xdata = Vec::with_capacity(raw_rows.len() * n);
        for &r in &raw_rows {
            xdata.extend_from_slice(series.row(r));
        }
        let x = g.constant("series", Tensor::from_vec(raw_rows.len(), n, xdata)?);
        let (ks, us) = (needed.len(), raw_rows.len());

        let reshaped = match self.mode {
            WindowMode::Adaptive => {
                let w = leaf(&mut g, "gat.w", &self.gat.w);
                let a = leaf(&mut g, "gat.a", &self.gat.a);
                let z = g.matmul_t(x, w)?;
                let a_self = g.gather(a, (0..n).map(Some).collect(), n, 1)?;
                let a_nb = g.gather(a, (n..2 * n).map(Some).collect(), n, 1)?;
                let s_self = g.matmul(z, a_self)?;
                let s_nb = g.matmul(z, a_nb)?;
                let mut self_idx = Vec::with_capacity(ks * w1);
                let mut nb_idx = Vec::with_capacity(ks * w1);
                for &k in &needed {
                    let t = raw_pos(k + w1 - 1);
                    for m in 0..w1 {
                        self_idx.push(Some(t));
                        nb_idx.push(Some(raw_pos(k + m)));
                    }
                }
                let e_self = g.gather(s_self, self_idx, ks, w1)?;
                let e_nb = g.gather(s_nb, nb_idx, ks, w1)?;
                let e = g.add(e_self, e_nb)?;
                let logits = g.leaky_relu(e, self.gat.leaky_slope)?;
                let alpha = g.softmax(logits)?;
                let mut band = vec![None; ks * us];
                for (i, &k) in needed.iter().enumerate() {
                    for m in 0..w1 {
                        band[i * us + raw_pos(k + m)] = Some(i * w1 + m);
                    }
                }
                let band = g.gather(alpha, band, ks, us)?;
                let mixed = g.matmul(band, z)?;
                match self.gat.activation {
                    Activation::Sigmoid => g.sigmoid(mixed)?,
                    Activation::Identity => mixed,
                }
            }
            WindowMode::Manual => {
                let mut band = Tensor::zeros(ks, us);
                for (i, &k) in needed.iter().enumerate() {
                    for m in 0..w1 {
                        band.set(i, raw_pos(k + m), 1.0 / w1 as f64);
                    }
                }
                let band = g.constant("uniform_window", band);
                g.matmul(band, x)?
            }
            WindowMode::None => {
                let rows: Vec<usize> = needed.iter().map(|&k| raw_pos(k)).collect();
                g.select_rows(x, &rows)?
            }
        };

        let b = targets.len();
        let enc_ih = leaf(&mut g, "encoder.w_ih", &self.lae.encoder.w_ih);
        let enc_hh = leaf(&mut g, "encoder.w_hh", &self.lae.encoder.w_hh);
        let enc_b = leaf(&mut g, "encoder.bias", &self.lae.encoder.bias);
        let dec_ih = leaf(&mut g, "decoder.w_ih", &self.lae.decoder.w_ih);
        let dec_hh = leaf(&mut g, "decoder.w_hh", &self.lae.decoder.w_hh);
        let dec_b = leaf(&mut g, "decoder.bias", &self.lae.decoder.bias);
        let proj_w = leaf(&mut g, "projection.w", &self.lae.projection);
        let proj_b = leaf(&mut g, "projection.b", &self.lae.projection_bias);

        let zero_state = g.constant("zero_state", Tensor::zeros(b, hs));
        let mut h = zero_state;
        let mut c = zero_state;
        for s in 0..w2 {
            let rows: Vec<usize> = targets.iter().map(|&k| shp_pos(k - w2 + s)).collect();
            let xs = g.select_rows(reshaped, &rows)?;
            (h, c) = lstm_cell(&mut g, xs, h, Some(c), enc_ih, enc_hh, enc_b, hs)?;
        }
        let (dec_h, _) = lstm_cell(&mut g, h, zero_state, None, dec_ih, dec_hh, dec_b, hs)?;
        let projected = g.matmul_t(dec_h, proj_w)?;
        let prediction = g.add(projected, proj_b)?;

        let target = match target_mode {
            TargetMode::Reshaped => {
                let rows: Vec<usize> = targets.iter().map(|&k| shp_pos(k)).collect();
                g.select_rows(reshaped, &rows)?
            }
            TargetMode::Raw => {
                let rows: Vec<usize> = targets.iter().map(|&k| raw_pos(k + offset)).collect();
                g.select_rows(x, &rows)?
            }
        };
        let target = if detach_target {
            g.stop_gradient(target)?
        } else {
            target
        };
        let diff = g.sub(prediction, target)?;
        let loss = g.mean_abs(diff)?;
        params.retain(|name, _| self.trainable_names().contains(name));
        Ok(BatchGraph {
            graph: g,
            params,
            prediction,
            target,
            loss,
        })
    }
}

/// One LSTM cell in the graph. `c = None` means a zero cell state, where the
/// forget-gate term vanishes.
#[allow(clippy::too_many_arguments)]
fn lstm_cell(
    g: &mut Graph,
    x: NodeId,
    h: NodeId,
    c: Option<NodeId>,
    w_ih: NodeId,
    w_hh: NodeId,
    bias: NodeId,
    hs: usize,
) -> Result<(NodeId, NodeId)> {
    let xi = g.matmul_t(x, w_ih)?;
    let hh = g.matmul_t(h, w_hh)?;
    let pre = g.add(xi, hh)?;
    let pre = g.add(pre, bias)?;
    let i_pre = g.slice_cols(pre, 0, hs)?;
    let i = g.sigmoid(i_pre)?;
    let g_pre = g.slice_cols(pre, 2 * hs, 3 * hs)?;
    let cand = g.tanh(g_pre)?;
    let o_pre = g.slice_cols(pre, 3 * hs, 4 * hs)?;
    let o = g.sigmoid(o_pre)?;
    let ig = g.mul(i, cand)?;
    let c_new = match c {
        Some(c) => {
            let f_pre = g.slice_cols(pre, hs, 2 * hs)?;
            let f = g.sigmoid(f_pre)?;
            let fc = g.mul(f, c)?;
            g.add(fc, ig)?
        }
        None => ig,
    };
    let tc = g.tanh(c_new)?;
    let h_new = g.mul(o, tc)?;
    Ok((h_new, c_new))
}
