//! One-hidden-layer reward heads: `out = W2 tanh(W1 x + b1) + b2`.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dist::{LikertDistribution, RewardDistribution, SIGMA_FLOOR};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::scalar::Scalar;

pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    BradleyTerry,
    MseRegression,
    MeanVariance,
    Classification,
}

impl HeadKind {
    pub fn output_width(self) -> usize {
        match self {
            HeadKind::BradleyTerry | HeadKind::MseRegression => 1,
            HeadKind::MeanVariance => 2,
            HeadKind::Classification => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::BradleyTerry => "bradley_terry",
            HeadKind::MseRegression => "mse_regression",
            HeadKind::MeanVariance => "mean_variance",
            HeadKind::Classification => "classification",
        }
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bradley_terry" => Ok(HeadKind::BradleyTerry),
            "mse_regression" => Ok(HeadKind::MseRegression),
            "mean_variance" => Ok(HeadKind::MeanVariance),
            "classification" => Ok(HeadKind::Classification),
            other => Err(Error::invalid(format!("unknown head kind {other:?}"))),
        }
    }
}

/// Nonzero entries of a feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFeatures<T> {
    dim: usize,
    entries: Vec<(usize, T)>,
}

impl<T: Scalar> SparseFeatures<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, T)] {
        &self.entries
    }
}

impl<T: Scalar> From<&FeatureVector<T>> for SparseFeatures<T> {
    fn from(x: &FeatureVector<T>) -> Self {
        Self {
            dim: x.dim(),
            entries: x.nonzeros().collect(),
        }
    }
}

/// Weight and bias buffers of a head; also used for gradients and optimizer moments.
///
/// `w1` is stored input-major (`w1[i * hidden + j]` connects input `i` to hidden unit `j`)
/// so sparse inputs touch contiguous rows; `w2` is output-major (`w2[k * hidden + j]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensors<T> {
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
}

impl<T: Scalar> Tensors<T> {
    pub fn zeros(d: usize, h: usize, o: usize) -> Self {
        Self {
            w1: vec![T::zero(); d * h],
            b1: vec![T::zero(); h],
            w2: vec![T::zero(); o * h],
            b2: vec![T::zero(); o],
        }
    }

    pub fn buffers(&self) -> [&[T]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn buffers_mut(&mut self) -> [&mut [T]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fill_zero(&mut self) {
        for buf in self.buffers_mut() {
            buf.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Flat parameter `index` across the four buffers, in `w1, b1, w2, b2` order.
    pub fn get_flat(&self, mut index: usize) -> T {
        for buf in self.buffers() {
            if index < buf.len() {
                return buf[index];
            }
            index -= buf.len();
        }
        panic!("flat index out of range")
    }

    pub fn get_flat_mut(&mut self, mut index: usize) -> &mut T {
        for buf in self.buffers_mut() {
            if index < buf.len() {
                return &mut buf[index];
            }
            index -= buf.len();
        }
        panic!("flat index out of range")
    }

    pub fn all_finite(&self) -> bool {
        self.buffers().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Hidden and output activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Activations<T> {
    pub hidden: Vec<T>,
    pub output: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParameters<T> {
    pub kind: HeadKind,
    pub d: usize,
    pub h: usize,
    pub seed: u64,
    pub tensors: Tensors<T>,
}

impl<T: Scalar> HeadParameters<T> {
    pub fn zeros(kind: HeadKind, d: usize, h: usize) -> Self {
        Self {
            kind,
            d,
            h,
            seed: 0,
            tensors: Tensors::zeros(d, h, kind.output_width()),
        }
    }

    /// Seeded uniform initialization, Glorot-scaled per layer. Mean-variance heads start
    /// with a raw spread of 1 so the absolute-value kink is away from the start point.
    pub fn init(kind: HeadKind, d: usize, h: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut head = Self::zeros(kind, d, h);
        head.seed = seed;
        let a1 = (6.0 / (d + h) as f64).sqrt();
        for w in head.tensors.w1.iter_mut() {
            *w = T::lit(rng.gen_range(-a1..a1));
        }
        let a2 = (6.0 / (h + kind.output_width()) as f64).sqrt();
        for w in head.tensors.w2.iter_mut() {
            *w = T::lit(rng.gen_range(-a2..a2));
        }
        if kind == HeadKind::MeanVariance {
            head.tensors.b2[1] = T::one();
        }
        head
    }

    pub fn o(&self) -> usize {
        self.kind.output_width()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.len()
    }

    /// Weight from input `i` to hidden unit `j`.
    pub fn w1(&self, j: usize, i: usize) -> T {
        self.tensors.w1[i * self.h + j]
    }

    pub fn set_w1(&mut self, j: usize, i: usize, value: T) {
        self.tensors.w1[i * self.h + j] = value;
    }

    /// Weight from hidden unit `j` to output `k`.
    pub fn w2(&self, k: usize, j: usize) -> T {
        self.tensors.w2[k * self.h + j]
    }

    pub fn set_w2(&mut self, k: usize, j: usize, value: T) {
        self.tensors.w2[k * self.h + j] = value;
    }

    pub fn forward_sparse(&self, x: &SparseFeatures<T>) -> Activations<T> {
        let h = self.h;
        let mut pre = self.tensors.b1.clone();
        for &(i, v) in &x.entries {
            let row = &self.tensors.w1[i * h..(i + 1) * h];
            for (a, &w) in pre.iter_mut().zip(row) {
                *a += w * v;
            }
        }
        let hidden: Vec<T> = pre.into_iter().map(|a| a.tanh()).collect();
        let output = (0..self.o())
            .map(|k| {
                let row = &self.tensors.w2[k * h..(k + 1) * h];
                self.tensors.b2[k] + row.iter().zip(&hidden).map(|(&w, &z)| w * z).sum::<T>()
            })
            .collect();
        Activations { hidden, output }
    }

    /// Raw outputs for a dense feature vector.
    pub fn forward_raw(&self, x: &FeatureVector<T>) -> Result<Vec<T>> {
        self.check_dim(x)?;
        Ok(self.forward_sparse(&SparseFeatures::from(x)).output)
    }

    fn check_dim(&self, x: &FeatureVector<T>) -> Result<()> {
        if x.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: x.dim(),
            });
        }
        Ok(())
    }

    fn require_kind(&self, allowed: &[HeadKind]) -> Result<()> {
        if !allowed.contains(&self.kind) {
            return Err(Error::invalid(format!("operation not defined for {} heads", self.kind.name())));
        }
        Ok(())
    }

    /// Accumulates the parameter gradient for upstream gradient `d_output` into `grad`.
    pub fn backward(&self, x: &SparseFeatures<T>, acts: &Activations<T>, d_output: &[T], grad: &mut Tensors<T>) {
        let h = self.h;
        let mut d_hidden = vec![T::zero(); h];
        for (k, &g) in d_output.iter().enumerate() {
            if g.is_zero() {
                continue;
            }
            grad.b2[k] += g;
            let row = &self.tensors.w2[k * h..(k + 1) * h];
            let grow = &mut grad.w2[k * h..(k + 1) * h];
            for j in 0..h {
                grow[j] += g * acts.hidden[j];
                d_hidden[j] += g * row[j];
            }
        }
        let d_pre: Vec<T> = d_hidden
            .iter()
            .zip(&acts.hidden)
            .map(|(&g, &z)| g * (T::one() - z * z))
            .collect();
        for (b, &g) in grad.b1.iter_mut().zip(&d_pre) {
            *b += g;
        }
        for &(i, v) in &x.entries {
            let grow = &mut grad.w1[i * h..(i + 1) * h];
            for (gw, &g) in grow.iter_mut().zip(&d_pre) {
                *gw += g * v;
            }
        }
    }
}

/// Scalar reward from a Bradley-Terry or regression head.
pub fn forward_scalar<T: Scalar>(head: &HeadParameters<T>, x: &FeatureVector<T>) -> Result<T> {
    head.require_kind(&[HeadKind::BradleyTerry, HeadKind::MseRegression])?;
    Ok(head.forward_raw(x)?[0])
}

/// Maps raw mean-variance outputs `(u, v)` to `(mu = u, sigma = |v| + 0.1)`.
pub fn reward_distribution_from_raw<T: Scalar>(u: T, v: T) -> RewardDistribution<T> {
    RewardDistribution {
        mu: u,
        sigma: v.abs() + T::lit(SIGMA_FLOOR),
    }
}

pub fn forward_meanvar<T: Scalar>(head: &HeadParameters<T>, x: &FeatureVector<T>) -> Result<RewardDistribution<T>> {
    head.require_kind(&[HeadKind::MeanVariance])?;
    let out = head.forward_raw(x)?;
    Ok(reward_distribution_from_raw(out[0], out[1]))
}

/// Numerically stable softmax.
pub fn softmax5<T: Scalar>(logits: &[T]) -> [T; 5] {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut probs = [T::zero(); 5];
    for (p, &l) in probs.iter_mut().zip(logits) {
        *p = (l - max).exp();
    }
    let total: T = probs.iter().copied().sum();
    probs.map(|p| p / total)
}

pub fn forward_classification<T: Scalar>(
    head: &HeadParameters<T>,
    x: &FeatureVector<T>,
) -> Result<LikertDistribution<T>> {
    head.require_kind(&[HeadKind::Classification])?;
    let out = head.forward_raw(x)?;
    Ok(LikertDistribution { probs: softmax5(&out) })
}
