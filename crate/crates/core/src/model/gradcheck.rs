//! Central finite-difference verification of analytic head gradients.

use super::head::{HeadParameters, SparseFeatures, Tensors};
use super::loss::{prepare_sample, sample_loss_and_gradient, sample_loss_sparse, LossSettings, Sample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_STEP: f64 = 1e-4;

/// Maximum relative error `|g - g_fd| / max(1, |g| + |g_fd|)` between the analytic
/// gradient and central differences, over every parameter.
pub fn grad_check<T: Scalar>(
    head: &HeadParameters<T>,
    settings: &LossSettings,
    sample: &Sample<T>,
    step: T,
) -> Result<T> {
    let (loss, analytic) = sample_loss_and_gradient(head, settings, sample)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            step: 0,
            what: "loss in gradient check".into(),
        });
    }
    grad_check_against(head, settings, sample, &analytic, step)
}

/// Like [`grad_check`] but compares against a caller-supplied gradient.
pub fn grad_check_against<T: Scalar>(
    head: &HeadParameters<T>,
    settings: &LossSettings,
    sample: &Sample<T>,
    analytic: &Tensors<T>,
    step: T,
) -> Result<T> {
    let xs = prepare_sample(head, sample)?;
    let refs: Vec<&SparseFeatures<T>> = xs.iter().collect();
    let mut probe = head.clone();
    let mut worst = T::zero();
    for i in 0..head.num_parameters() {
        let original = probe.tensors.get_flat(i);
        *probe.tensors.get_flat_mut(i) = original + step;
        let up = sample_loss_sparse(&probe, settings, &refs, &sample.target, None);
        *probe.tensors.get_flat_mut(i) = original - step;
        let down = sample_loss_sparse(&probe, settings, &refs, &sample.target, None);
        *probe.tensors.get_flat_mut(i) = original;
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::NonFinite {
                step: i,
                what: "loss in gradient check".into(),
            });
        }
        let numeric = (up - down) / (T::lit(2.0) * step);
        let exact = analytic.get_flat(i);
        let err = (exact - numeric).abs() / T::one().max(exact.abs() + numeric.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}
