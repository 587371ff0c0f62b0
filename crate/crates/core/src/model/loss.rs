//! Training losses and their gradients with respect to head outputs.

use serde::{Deserialize, Serialize};

use super::dist::{
    diff_variance, inverse_mills, label_probs, log_normal_cdf, smooth, standardized_boundaries, Cdf, CdfKind,
    DiffDistribution, FiveWay, LabelDistribution, LikertDistribution, RewardDistribution, DEFAULT_SMOOTHING,
    MIN_DIFF_VARIANCE,
};
use super::head::{reward_distribution_from_raw, softmax5, Activations, HeadKind, HeadParameters, SparseFeatures, Tensors};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::scalar::Scalar;

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Negative log-likelihood of the chosen response under a Bradley-Terry model.
pub fn bt_loss<T: Scalar>(r_chosen: T, r_rejected: T) -> T {
    softplus(r_rejected - r_chosen)
}

/// Squared error against a score in `[1, 5]` (aggregated targets may be fractional).
pub fn mse_loss<T: Scalar>(predicted: T, target: T) -> Result<T> {
    if !(target >= T::one() && target <= T::lit(5.0)) {
        return Err(Error::ScoreOutOfRange(target.as_f64().round() as i64));
    }
    let e = predicted - target;
    Ok(e * e)
}

/// Forward KL divergence `sum target * ln(target / predicted)`, with `0 ln 0 = 0`.
pub fn kl_loss<T: Scalar, D: FiveWay<T>>(target: &D, predicted: &D) -> Result<T> {
    let t = target.probs();
    let p = predicted.probs();
    let mut total = T::zero();
    for c in 0..5 {
        if p[c].is_nan() || p[c] <= T::zero() {
            return Err(Error::invalid("predicted distribution has a zero entry; smooth it first"));
        }
        if t[c] > T::zero() {
            total += t[c] * (t[c] / p[c]).ln();
        }
    }
    Ok(total.max(T::zero()))
}

/// Independent-normal NLL of `a` being preferred over `b`: `-ln Phi((mu_a - mu_b) / sqrt(sigma_a^2 + sigma_b^2))`.
pub fn meanvar_nll_loss<T: Scalar>(a: &RewardDistribution<T>, b: &RewardDistribution<T>) -> T {
    let s = (a.sigma * a.sigma + b.sigma * b.sigma).sqrt();
    -log_normal_cdf((a.mu - b.mu) / s)
}

/// Mean of a per-example loss over a batch.
pub fn batch_mean<T: Scalar>(losses: &[T]) -> T {
    losses.iter().copied().sum::<T>() / T::from_usize_lossy(losses.len().max(1))
}

/// Settings shared by the distributional losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSettings {
    pub cdf: Cdf,
    pub smoothing_eps: f64,
}

impl Default for LossSettings {
    fn default() -> Self {
        Self {
            cdf: Cdf::from(CdfKind::Logistic),
            smoothing_eps: DEFAULT_SMOOTHING,
        }
    }
}

/// What one training example asks of the head.
#[derive(Debug, Clone, PartialEq)]
pub enum Target<T> {
    /// Bradley-Terry: the first input is preferred with probability `prob_first`
    /// (1 for an observed preference, 0.5 for a tie kept as a soft target).
    Preference { prob_first: T },
    /// Regression onto a Likert score.
    Score(T),
    /// Mean-variance KL: empirical label distribution over the pair and the pair's rho.
    Labels { dist: LabelDistribution<T>, rho: T },
    /// Mean-variance NLL: the first input was preferred.
    Prefers,
    /// Classification KL: empirical Likert distribution of the single input.
    Likert(LikertDistribution<T>),
}

impl<T> Target<T> {
    pub fn head_kind(&self) -> HeadKind {
        match self {
            Target::Preference { .. } => HeadKind::BradleyTerry,
            Target::Score(_) => HeadKind::MseRegression,
            Target::Labels { .. } | Target::Prefers => HeadKind::MeanVariance,
            Target::Likert(_) => HeadKind::Classification,
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Target::Score(_) | Target::Likert(_) => 1,
            _ => 2,
        }
    }
}

/// A training example over dense features.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub inputs: Vec<FeatureVector<T>>,
    pub target: Target<T>,
}

/// Loss and its gradient with respect to each input's raw head outputs.
pub fn output_loss<T: Scalar>(settings: &LossSettings, target: &Target<T>, outputs: &[&[T]]) -> (T, Vec<Vec<T>>) {
    let two = T::lit(2.0);
    match target {
        Target::Preference { prob_first } => {
            let m = outputs[0][0] - outputs[1][0];
            let p = *prob_first;
            let loss = p * softplus(-m) + (T::one() - p) * softplus(m);
            let g = super::dist::logistic(m) - p;
            (loss, vec![vec![g], vec![-g]])
        }
        Target::Score(t) => {
            let e = outputs[0][0] - *t;
            (e * e, vec![vec![two * e]])
        }
        Target::Labels { dist, rho } => meanvar_kl_grad(settings, dist, *rho, outputs[0], outputs[1]),
        Target::Prefers => meanvar_nll_grad(outputs[0], outputs[1]),
        Target::Likert(dist) => classification_kl_grad(settings, dist, outputs[0]),
    }
}

fn sign<T: Scalar>(v: T) -> T {
    if v < T::zero() {
        -T::one()
    } else {
        T::one()
    }
}

/// dL/dp for `L = KL(target || smooth(p))`.
fn smoothed_kl_grad<T: Scalar>(eps: T, target: &[T; 5], p: &[T; 5]) -> (T, [T; 5]) {
    let denom = T::one() + T::lit(5.0) * eps;
    let mut loss = T::zero();
    let mut g = [T::zero(); 5];
    for c in 0..5 {
        let q = (p[c] + eps) / denom;
        if target[c] > T::zero() {
            loss += target[c] * (target[c] / q).ln();
            g[c] = -target[c] / (q * denom);
        }
    }
    (loss, g)
}

fn meanvar_kl_grad<T: Scalar>(
    settings: &LossSettings,
    target: &LabelDistribution<T>,
    rho: T,
    out_a: &[T],
    out_b: &[T],
) -> (T, Vec<Vec<T>>) {
    let a = reward_distribution_from_raw(out_a[0], out_a[1]);
    let b = reward_distribution_from_raw(out_b[0], out_b[1]);
    let raw_var = diff_variance(a.sigma, b.sigma, rho);
    let clamped = raw_var < T::lit(MIN_DIFF_VARIANCE);
    let sd = raw_var.max(T::lit(MIN_DIFF_VARIANCE)).sqrt();
    let diff = DiffDistribution {
        mu_d: a.mu - b.mu,
        sigma_d: sd,
        rho,
    };
    let p = label_probs(&diff, settings.cdf).probs;
    let (loss, g) = smoothed_kl_grad(T::lit(settings.smoothing_eps), &target.probs, &p);

    let z = standardized_boundaries(&diff);
    let mut d_mu = T::zero();
    let mut d_sd = T::zero();
    for k in 0..4 {
        let d_z = (g[k] - g[k + 1]) * settings.cdf.density(z[k]);
        d_mu -= d_z / sd;
        d_sd -= d_z * z[k] / sd;
    }
    let (d_sa, d_sb) = if clamped {
        (T::zero(), T::zero())
    } else {
        ((a.sigma - rho * b.sigma) / sd * d_sd, (b.sigma - rho * a.sigma) / sd * d_sd)
    };
    (
        loss,
        vec![vec![d_mu, d_sa * sign(out_a[1])], vec![-d_mu, d_sb * sign(out_b[1])]],
    )
}

fn meanvar_nll_grad<T: Scalar>(out_a: &[T], out_b: &[T]) -> (T, Vec<Vec<T>>) {
    let a = reward_distribution_from_raw(out_a[0], out_a[1]);
    let b = reward_distribution_from_raw(out_b[0], out_b[1]);
    let s2 = a.sigma * a.sigma + b.sigma * b.sigma;
    let s = s2.sqrt();
    let z = (a.mu - b.mu) / s;
    let loss = -log_normal_cdf(z);
    let d_z = -inverse_mills(z);
    let d_mu = d_z / s;
    let d_sa = -d_z * z * a.sigma / s2;
    let d_sb = -d_z * z * b.sigma / s2;
    (
        loss,
        vec![vec![d_mu, d_sa * sign(out_a[1])], vec![-d_mu, d_sb * sign(out_b[1])]],
    )
}

fn classification_kl_grad<T: Scalar>(
    settings: &LossSettings,
    target: &LikertDistribution<T>,
    logits: &[T],
) -> (T, Vec<Vec<T>>) {
    let p = softmax5(logits);
    let (loss, g) = smoothed_kl_grad(T::lit(settings.smoothing_eps), &target.probs, &p);
    let dot: T = (0..5).map(|c| g[c] * p[c]).sum();
    let d_logits = (0..5).map(|j| p[j] * (g[j] - dot)).collect();
    (loss, vec![d_logits])
}

/// Loss for one example with pre-sparsified inputs, accumulating its parameter
/// gradient into `grad` when given.
pub fn sample_loss_sparse<T: Scalar>(
    head: &HeadParameters<T>,
    settings: &LossSettings,
    inputs: &[&SparseFeatures<T>],
    target: &Target<T>,
    grad: Option<&mut Tensors<T>>,
) -> T {
    let acts: Vec<Activations<T>> = inputs.iter().map(|x| head.forward_sparse(x)).collect();
    let outs: Vec<&[T]> = acts.iter().map(|a| a.output.as_slice()).collect();
    let (loss, d_out) = output_loss(settings, target, &outs);
    if let Some(grad) = grad {
        for ((x, a), d) in inputs.iter().zip(&acts).zip(&d_out) {
            head.backward(x, a, d, grad);
        }
    }
    loss
}

/// Checks that `sample` fits `head` and returns its sparse inputs.
pub(crate) fn prepare_sample<T: Scalar>(head: &HeadParameters<T>, sample: &Sample<T>) -> Result<Vec<SparseFeatures<T>>> {
    if sample.target.head_kind() != head.kind {
        return Err(Error::invalid(format!(
            "{} head cannot train on a {} target",
            head.kind.name(),
            sample.target.head_kind().name()
        )));
    }
    if sample.inputs.len() != sample.target.arity() {
        return Err(Error::invalid("sample has the wrong number of inputs"));
    }
    sample
        .inputs
        .iter()
        .map(|x| {
            if x.dim() != head.d {
                Err(Error::DimensionMismatch {
                    expected: head.d,
                    actual: x.dim(),
                })
            } else {
                Ok(SparseFeatures::from(x))
            }
        })
        .collect()
}

/// Loss and analytic parameter gradient for one dense sample.
pub fn sample_loss_and_gradient<T: Scalar>(
    head: &HeadParameters<T>,
    settings: &LossSettings,
    sample: &Sample<T>,
) -> Result<(T, Tensors<T>)> {
    let xs = prepare_sample(head, sample)?;
    let refs: Vec<&SparseFeatures<T>> = xs.iter().collect();
    let mut grad = Tensors::zeros(head.d, head.h, head.o());
    let loss = sample_loss_sparse(head, settings, &refs, &sample.target, Some(&mut grad));
    Ok((loss, grad))
}

/// Smoothed label probabilities predicted for a pair, as used inside the KL loss.
pub fn predicted_label_distribution<T: Scalar>(
    a: &RewardDistribution<T>,
    b: &RewardDistribution<T>,
    rho: T,
    settings: &LossSettings,
) -> Result<LabelDistribution<T>> {
    let diff = super::dist::diff_distribution(a, b, rho)?;
    Ok(smooth(&label_probs(&diff, settings.cdf), T::lit(settings.smoothing_eps)))
}
