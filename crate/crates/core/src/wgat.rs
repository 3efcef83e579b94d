//! Stage-one window: each timestamp is re-represented as an attention-weighted
//! combination of itself and the `w1 − 1` timestamps before it.
//!
//! The window is a fully connected graph over its `w1` rows (self included).
//! With shared transform `W` and attention vector `a = [a_self ‖ a_nb]`, the
//! coefficient of member `j` for target `i` is
//! `softmax_j(LeakyReLU(aᵀ[W x_i ‖ W x_j]))`, and the reshaped target is
//! `σ(Σ_j α_j W x_j)`. Only the updated trailing sample is kept, so the output
//! has the input's feature dimension and `w1 − 1` fewer rows.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{leaky_relu, sigmoid, softmax_into, Tensor};

pub const DEFAULT_W1: usize = 15;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Self::Sigmoid),
            "identity" => Ok(Self::Identity),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatParams {
    /// `n×n` shared transform.
    pub w: Tensor,
    /// `2n×1`; the first half scores the target, the second half the member.
    pub a: Tensor,
    pub leaky_slope: f64,
    pub activation: Activation,
    pub w1: usize,
}

impl GatParams {
    pub fn new(w: Tensor, a: Tensor, w1: usize) -> Result<Self> {
        let p = Self {
            w,
            a,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            activation: Activation::Sigmoid,
            w1,
        };
        p.validate()?;
        Ok(p)
    }

    /// `W = I + U(−r, r)` and `a ~ U(−r, r)` with `r = 1/√n`.
    pub fn init(n: usize, w1: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let r = 1.0 / (n as f64).sqrt();
        let mut w = Tensor::identity(n);
        for v in w.data_mut() {
            *v += rng.random_range(-r..r);
        }
        let a: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-r..r)).collect();
        Self::new(w, Tensor::column_vector(&a), w1)
    }

    /// Identity transform and zero attention: a uniform trailing average.
    pub fn uniform(n: usize, w1: usize, activation: Activation) -> Self {
        Self {
            w: Tensor::identity(n),
            a: Tensor::zeros(2 * n, 1),
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            activation,
            w1,
        }
    }

    pub fn feature_count(&self) -> usize {
        self.w.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.w.rows();
        if self.w.cols() != n {
            return Err(Error::Contract(format!(
                "W must be square, got {}x{}",
                self.w.rows(),
                self.w.cols()
            )));
        }
        if self.a.shape() != (2 * n, 1) {
            return Err(Error::Contract(format!(
                "a must be {}x1, got {}x{}",
                2 * n,
                self.a.rows(),
                self.a.cols()
            )));
        }
        if self.w1 == 0 {
            return Err(Error::Contract("w1 must be at least 1".into()));
        }
        Ok(())
    }
}

/// `w1` consecutive rows ending at `target_index`.
#[derive(Clone, Copy, Debug)]
pub struct WindowGroup<'a> {
    pub target_index: usize,
    rows: &'a [f64],
    n: usize,
}

impl<'a> WindowGroup<'a> {
    pub fn len(&self) -> usize {
        self.rows.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, j: usize) -> &'a [f64] {
        &self.rows[j * self.n..(j + 1) * self.n]
    }

    /// The target `x_t`, always the last row.
    pub fn target(&self) -> &'a [f64] {
        self.row(self.len() - 1)
    }

    pub fn feature_count(&self) -> usize {
        self.n
    }
}

pub fn window_groups(series: &Tensor, w1: usize) -> Result<Vec<WindowGroup<'_>>> {
    let (m, n) = series.shape();
    if w1 == 0 {
        return Err(Error::Contract("w1 must be at least 1".into()));
    }
    if m < w1 {
        return Err(Error::InsufficientLength {
            what: "stage-one window",
            needed: w1,
            got: m,
        });
    }
    Ok((w1 - 1..m)
        .map(|t| WindowGroup {
            target_index: t,
            rows: &series.data()[(t + 1 - w1) * n..(t + 1) * n],
            n,
        })
        .collect())
}

fn transform(w: &Tensor, x: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|r| {
            let mut acc = 0.0;
            for (a, b) in w.row(r).iter().zip(x) {
                acc += a * b;
            }
            acc
        })
        .collect()
}

fn check_group(group: &WindowGroup<'_>, params: &GatParams) -> Result<()> {
    if group.feature_count() != params.feature_count() {
        return Err(Error::Dimension {
            expected: params.feature_count(),
            found: group.feature_count(),
        });
    }
    Ok(())
}

fn coefficients_from_transformed(wx: &[Vec<f64>], params: &GatParams) -> Vec<f64> {
    let a = params.a.data();
    let target = wx.last().expect("non-empty window");
    let logits: Vec<f64> = wx
        .iter()
        .map(|wj| {
            let mut e = 0.0;
            for (av, v) in a.iter().zip(target.iter().chain(wj)) {
                e += av * v;
            }
            leaky_relu(e, params.leaky_slope)
        })
        .collect();
    let mut alpha = vec![0.0; logits.len()];
    softmax_into(&logits, &mut alpha);
    alpha
}

/// Attention coefficients of every window member (target last) for the
/// window's target.
pub fn attention_coefficients(group: &WindowGroup<'_>, params: &GatParams) -> Result<Vec<f64>> {
    check_group(group, params)?;
    let wx: Vec<Vec<f64>> = (0..group.len()).map(|j| transform(&params.w, group.row(j))).collect();
    Ok(coefficients_from_transformed(&wx, params))
}

pub fn reshape_target(group: &WindowGroup<'_>, params: &GatParams) -> Result<Vec<f64>> {
    check_group(group, params)?;
    let wx: Vec<Vec<f64>> = (0..group.len()).map(|j| transform(&params.w, group.row(j))).collect();
    let alpha = coefficients_from_transformed(&wx, params);
    let n = group.feature_count();
    let mut out = vec![0.0; n];
    for (aj, wj) in alpha.iter().zip(&wx) {
        for (o, v) in out.iter_mut().zip(wj) {
            *o += aj * v;
        }
    }
    Ok(out.into_iter().map(|v| params.activation.apply(v)).collect())
}

/// Row `k` of the output is the reshaped target of the window ending at
/// input row `w1 − 1 + k`. Windows are evaluated in parallel.
pub fn reshape_series(series: &Tensor, params: &GatParams) -> Result<Tensor> {
    params.validate()?;
    if series.cols() != params.feature_count() {
        return Err(Error::Dimension {
            expected: params.feature_count(),
            found: series.cols(),
        });
    }
    let groups = window_groups(series, params.w1)?;
    let rows: Vec<Vec<f64>> = groups
        .par_iter()
        .map(|g| reshape_target(g, params))
        .collect::<Result<_>>()?;
    Tensor::from_rows(&rows)
}

/// Uniform trailing mean over `w1` rows.
pub fn manual_window_reshape(series: &Tensor, w1: usize) -> Result<Tensor> {
    let groups = window_groups(series, w1)?;
    let n = series.cols();
    let mut out = Tensor::zeros(groups.len(), n);
    for (k, g) in groups.iter().enumerate() {
        let row = out.row_mut(k);
        for j in 0..g.len() {
            for (o, v) in row.iter_mut().zip(g.row(j)) {
                *o += v;
            }
        }
        for o in row.iter_mut() {
            *o /= w1 as f64;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn group_counts() {
        let s = Tensor::zeros(5, 2);
        let g = window_groups(&s, 3).unwrap();
        assert_eq!(g.iter().map(|g| g.target_index).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(window_groups(&Tensor::zeros(3, 2), 3).unwrap().len(), 1);
        assert!(matches!(
            window_groups(&Tensor::zeros(2, 2), 3),
            Err(Error::InsufficientLength { .. })
        ));
    }

    #[test]
    fn zero_attention_is_uniform() {
        let s = series(&[&[1.0, 2.0], &[3.0, -1.0], &[0.5, 0.5]]);
        let mut p = GatParams::uniform(2, 3, Activation::Sigmoid);
        p.w = Tensor::from_vec(2, 2, vec![0.3, -0.2, 1.1, 0.4]).unwrap();
        let g = window_groups(&s, 3).unwrap();
        let alpha = attention_coefficients(&g[0], &p).unwrap();
        assert_eq!(alpha, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn identical_rows_give_uniform_attention() {
        let s = series(&[&[0.2, 0.7], &[0.2, 0.7], &[0.2, 0.7], &[0.2, 0.7]]);
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let p = GatParams::init(2, 4, &mut rng).unwrap();
        let alpha = attention_coefficients(&window_groups(&s, 4).unwrap()[0], &p).unwrap();
        for a in alpha {
            assert!((a - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn reshape_target_examples() {
        let p = GatParams::uniform(2, 2, Activation::Identity);
        let s = series(&[&[0.4, 0.9], &[0.4, 0.9]]);
        let g = window_groups(&s, 2).unwrap();
        assert_eq!(reshape_target(&g[0], &p).unwrap(), vec![0.4, 0.9]);

        let s = series(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let g = window_groups(&s, 2).unwrap();
        assert_eq!(reshape_target(&g[0], &p).unwrap(), vec![0.5, 0.5]);

        let mut p = GatParams::uniform(2, 2, Activation::Sigmoid);
        p.w = Tensor::zeros(2, 2);
        assert_eq!(reshape_target(&g[0], &p).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn unit_window_applies_transform_only() {
        let s = series(&[&[1.0, -2.0], &[0.5, 3.0]]);
        let mut p = GatParams::uniform(2, 1, Activation::Sigmoid);
        p.w = Tensor::from_vec(2, 2, vec![0.5, 1.0, -1.0, 0.25]).unwrap();
        p.a = Tensor::column_vector(&[0.3, -0.1, 0.7, 0.2]);
        let out = reshape_series(&s, &p).unwrap();
        for r in 0..2 {
            let x = s.row(r);
            let expect = [sigmoid(0.5 * x[0] + x[1]), sigmoid(-x[0] + 0.25 * x[1])];
            assert_eq!(out.row(r), &expect);
        }
    }

    #[test]
    fn manual_window_examples() {
        let s = series(&[&[2.0], &[4.0], &[6.0]]);
        assert_eq!(manual_window_reshape(&s, 2).unwrap().data(), &[3.0, 5.0]);
        assert_eq!(manual_window_reshape(&s, 1).unwrap(), s);
        let c = series(&[&[1.5, -2.0][..]; 6]);
        let out = manual_window_reshape(&c, 4).unwrap();
        assert!(out.data().chunks(2).all(|r| r == [1.5, -2.0]));
    }

    #[test]
    fn dimension_mismatch() {
        let p = GatParams::uniform(3, 2, Activation::Sigmoid);
        assert!(matches!(
            reshape_series(&Tensor::zeros(4, 2), &p),
            Err(Error::Dimension { expected: 3, found: 2 })
        ));
    }
}
