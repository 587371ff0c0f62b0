//! Reward heads, reward distributions, label-region probabilities and losses.

mod checkpoint;
mod dist;
mod gradcheck;
mod head;
mod loss;

pub use checkpoint::Checkpoint;
pub use dist::{
    cdf, diff_distribution, empirical_label_distribution, empirical_likert_distribution, expected_likert,
    inverse_mills, label_probs, log_normal_cdf, logistic, make_rho, normal_cdf, normal_pdf, smooth, Cdf, CdfKind,
    DiffDistribution, FiveWay, LabelDistribution, LikertDistribution, RewardDistribution, DEFAULT_SMOOTHING,
    MIN_DIFF_VARIANCE, REGION_BOUNDARIES, SIGMA_FLOOR,
};
pub use gradcheck::{grad_check, grad_check_against, DEFAULT_STEP};
pub use head::{
    forward_classification, forward_meanvar, forward_scalar, reward_distribution_from_raw, softmax5, Activations,
    HeadKind, HeadParameters, SparseFeatures, Tensors, DEFAULT_HIDDEN,
};
pub use loss::{
    batch_mean, bt_loss, kl_loss, meanvar_nll_loss, mse_loss, output_loss, predicted_label_distribution,
    sample_loss_and_gradient, sample_loss_sparse, LossSettings, Sample, Target,
};
