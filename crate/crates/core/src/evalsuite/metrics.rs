use std::cmp::Ordering;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::predict::{predict_pairs, PairOutput, ResponseOutput};
use crate::encode::EncodedPairs;
use crate::error::{Error, Result};
use crate::model::{FiveWay, HeadParameters, LikertDistribution};
use crate::prefdata::{classify_agreement, PreferencePair};
use crate::scalar::Scalar;

/// Area under the ROC curve as the Mann-Whitney statistic, with tied scores
/// counted as half. Uses midranks, so it runs in O(n log n).
pub fn auroc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::invalid("auroc needs both positive and negative labels"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("auroc scores contain NaN"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap_or(Ordering::Equal));

    // Sum of doubled midranks of positives keeps everything integral.
    let mut rank_sum2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end, midrank*2 = start+1+end
        let mid2 = (start + 1 + end) as u128;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i]).count() as u128;
        rank_sum2 += mid2 * pos_in_group;
        start = end;
    }
    let p = positives as u128;
    // U*2 = rank_sum*2 - p(p+1)
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// Preference accuracy over every non-tie annotator label, given precomputed
/// pair outputs. Exact ties in the compared quantity score 0.5.
pub fn preference_accuracy_of<T: Scalar>(pairs: &[PreferencePair], outputs: &[PairOutput<T>]) -> Result<f64> {
    if pairs.len() != outputs.len() {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            actual: outputs.len(),
        });
    }
    let mut correct2: u64 = 0;
    let mut total: u64 = 0;
    for (pair, out) in pairs.iter().zip(outputs) {
        let model_side = match out.a.expected().partial_cmp(&out.b.expected()) {
            Some(Ordering::Greater) => 1,
            Some(Ordering::Less) => -1,
            _ => 0,
        };
        for label in pair.labels().filter(|l| !l.is_tie()) {
            total += 1;
            correct2 += if model_side == 0 {
                1
            } else if model_side == label.side() {
                2
            } else {
                0
            };
        }
    }
    if total == 0 {
        return Err(Error::invalid("no non-tie labels to score preference accuracy"));
    }
    Ok(correct2 as f64 / (2 * total) as f64)
}

pub fn preference_accuracy<T: Scalar>(head: &HeadParameters<T>, data: &EncodedPairs<T>) -> Result<f64> {
    preference_accuracy_of(&data.pairs, &predict_pairs(head, data))
}

/// How a Likert distribution's extreme mass becomes a divisiveness value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivisivenessMode {
    #[default]
    Product,
    Sum,
}

impl FromStr for DivisivenessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(Self::Product),
            "sum" => Ok(Self::Sum),
            other => Err(Error::invalid(format!("unknown divisiveness mode '{other}'"))),
        }
    }
}

/// How the two responses' divisiveness combine for a classification head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairReduction {
    #[default]
    Mean,
    Max,
}

pub fn response_divisiveness<T: Scalar>(dist: &LikertDistribution<T>, mode: DivisivenessMode) -> T {
    let p = dist.probs();
    match mode {
        DivisivenessMode::Product => p[0] * p[4],
        DivisivenessMode::Sum => p[0] + p[4],
    }
}

/// Mean response divisiveness over a prompt's responses.
pub fn prompt_divisiveness<T: Scalar>(responses: &[LikertDistribution<T>], mode: DivisivenessMode) -> Result<T> {
    if responses.is_empty() {
        return Err(Error::invalid("prompt has no responses"));
    }
    let total: T = responses.iter().map(|d| response_divisiveness(d, mode)).sum();
    Ok(total / T::from_usize_lossy(responses.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceOptions {
    pub lambda: f64,
    pub divisiveness: DivisivenessMode,
    pub reduction: PairReduction,
}

impl Default for DivergenceOptions {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            divisiveness: DivisivenessMode::Product,
            reduction: PairReduction::Mean,
        }
    }
}

impl DivergenceOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }
}

/// Divergence score of one pair; higher means more likely diverging.
pub fn divergence_score<T: Scalar>(pair: &PairOutput<T>, options: &DivergenceOptions) -> Result<T> {
    if options.lambda.is_nan() || options.lambda < 0.0 {
        return Err(Error::invalid(format!("lambda must be >= 0, got {}", options.lambda)));
    }
    match (&pair.a, &pair.b) {
        (ResponseOutput::Reward(a), ResponseOutput::Reward(b)) => Ok(-(*a - *b).abs()),
        (ResponseOutput::Distribution(a), ResponseOutput::Distribution(b)) => {
            Ok(T::lit(options.lambda) * (a.sigma + b.sigma) - (a.mu - b.mu).abs())
        }
        (ResponseOutput::Likert(a), ResponseOutput::Likert(b)) => {
            let da = response_divisiveness(a, options.divisiveness);
            let db = response_divisiveness(b, options.divisiveness);
            Ok(match options.reduction {
                PairReduction::Mean => (da + db) / T::lit(2.0),
                PairReduction::Max => da.max(db),
            })
        }
        _ => Err(Error::invalid("pair outputs come from different head kinds")),
    }
}

pub fn divergence_scores<T: Scalar>(outputs: &[PairOutput<T>], options: &DivergenceOptions) -> Result<Vec<T>> {
    outputs.iter().map(|o| divergence_score(o, options)).collect()
}

/// Diverging flags per pair, as used for the AUROC labels.
pub fn diverging_flags(pairs: &[PreferencePair]) -> Vec<bool> {
    pairs
        .iter()
        .map(|p| classify_agreement(&p.judgments).is_diverging())
        .collect()
}

pub fn diverging_id_auroc_of<T: Scalar>(
    pairs: &[PreferencePair],
    outputs: &[PairOutput<T>],
    options: &DivergenceOptions,
) -> Result<f64> {
    auroc(&divergence_scores(outputs, options)?, &diverging_flags(pairs))
}

pub fn diverging_id_auroc<T: Scalar>(
    head: &HeadParameters<T>,
    data: &EncodedPairs<T>,
    options: &DivergenceOptions,
) -> Result<f64> {
    diverging_id_auroc_of(&data.pairs, &predict_pairs(head, data), options)
}
