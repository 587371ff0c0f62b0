use crate::encode::EncodedPairs;
use crate::model::{
    expected_likert, reward_distribution_from_raw, softmax5, HeadKind, HeadParameters, LikertDistribution,
    RewardDistribution, SparseFeatures,
};
use crate::scalar::Scalar;

/// What a head says about a single response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseOutput<T> {
    Reward(T),
    Distribution(RewardDistribution<T>),
    Likert(LikertDistribution<T>),
}

impl<T: Scalar> ResponseOutput<T> {
    /// The quantity compared when ordering two responses: the reward, the
    /// expected reward, or the expected Likert score.
    pub fn expected(&self) -> T {
        match self {
            ResponseOutput::Reward(r) => *r,
            ResponseOutput::Distribution(d) => d.mu,
            ResponseOutput::Likert(l) => expected_likert(l),
        }
    }
}

pub fn predict_response<T: Scalar>(head: &HeadParameters<T>, x: &SparseFeatures<T>) -> ResponseOutput<T> {
    let out = head.forward_sparse(x).output;
    match head.kind {
        HeadKind::BradleyTerry | HeadKind::MseRegression => ResponseOutput::Reward(out[0]),
        HeadKind::MeanVariance => ResponseOutput::Distribution(reward_distribution_from_raw(out[0], out[1])),
        HeadKind::Classification => ResponseOutput::Likert(LikertDistribution { probs: softmax5(&out) }),
    }
}

/// Outputs for both responses of one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutput<T> {
    pub a: ResponseOutput<T>,
    pub b: ResponseOutput<T>,
}

impl<T: Scalar> PairOutput<T> {
    pub fn swapped(&self) -> Self {
        Self { a: self.b, b: self.a }
    }
}

pub fn predict_pairs<T: Scalar>(head: &HeadParameters<T>, data: &EncodedPairs<T>) -> Vec<PairOutput<T>> {
    data.features
        .iter()
        .map(|(a, b)| PairOutput {
            a: predict_response(head, a),
            b: predict_response(head, b),
        })
        .collect()
}
