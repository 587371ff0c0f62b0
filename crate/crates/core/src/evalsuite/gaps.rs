use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::predict::{predict_pairs, PairOutput, ResponseOutput};
use crate::encode::EncodedPairs;
use crate::error::{Error, Result};
use crate::model::{logistic, HeadKind, HeadParameters};
use crate::prefdata::{aggregate_majority, classify_agreement, AgreementKind, PreferencePair};
use crate::scalar::Scalar;

/// Which response counts as "chosen" when measuring a reward gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapOrientation {
    /// The response the model itself rates higher; gaps are never negative.
    #[default]
    Model,
    /// The annotators' aggregate majority side; aggregate ties are excluded.
    Majority,
}

impl FromStr for GapOrientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(Self::Model),
            "majority" => Ok(Self::Majority),
            other => Err(Error::invalid(format!("unknown gap orientation '{other}'"))),
        }
    }
}

/// Reward gap between chosen and rejected: `P(chosen > rejected)` for
/// Bradley-Terry heads, the difference in (expected) reward or score otherwise.
/// `chosen` is +1 for A, -1 for B.
pub fn pair_gap<T: Scalar>(kind: HeadKind, out: &PairOutput<T>, chosen: i8) -> T {
    let diff = out.a.expected() - out.b.expected();
    let oriented = if chosen >= 0 { diff } else { -diff };
    match kind {
        HeadKind::BradleyTerry => logistic(oriented),
        _ => oriented,
    }
}

fn chosen_side<T: Scalar>(pair: &PreferencePair, out: &PairOutput<T>, orientation: GapOrientation) -> Option<i8> {
    match orientation {
        GapOrientation::Model => Some(if out.a.expected() >= out.b.expected() { 1 } else { -1 }),
        GapOrientation::Majority => match aggregate_majority(&pair.judgments).side() {
            0 => None,
            s => Some(s),
        },
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    /// Pairs in the category.
    pub count: usize,
    /// Mean gap over the pairs that have a chosen side; `None` when there are none.
    pub mean_gap: Option<f64>,
    /// Pairs left out of the mean because their aggregate label is a tie.
    pub excluded_ties: usize,
    /// Mean of `sigma_A + sigma_B` for mean-variance heads.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_sigma_sum: Option<f64>,
}

/// Row names in report order.
pub const GAP_ROWS: [&str; 6] = [
    "all",
    "high_agreement_pref",
    "high_agreement_tie",
    "diverging",
    "diverging_substantial",
    "other",
];

#[derive(Default)]
struct RowAcc {
    count: usize,
    gap_sum: f64,
    gap_n: usize,
    ties: usize,
    sigma_sum: f64,
    has_sigma: bool,
}

impl RowAcc {
    fn finish(&self) -> GapRow {
        GapRow {
            count: self.count,
            mean_gap: (self.gap_n > 0).then(|| self.gap_sum / self.gap_n as f64),
            excluded_ties: self.ties,
            mean_sigma_sum: (self.has_sigma && self.count > 0).then(|| self.sigma_sum / self.count as f64),
        }
    }
}

pub fn reward_gap_report_of<T: Scalar>(
    kind: HeadKind,
    pairs: &[PreferencePair],
    outputs: &[PairOutput<T>],
    orientation: GapOrientation,
) -> Result<BTreeMap<String, GapRow>> {
    if pairs.len() != outputs.len() {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            actual: outputs.len(),
        });
    }
    let mut acc: BTreeMap<&str, RowAcc> = GAP_ROWS.iter().map(|&n| (n, RowAcc::default())).collect();
    for (pair, out) in pairs.iter().zip(outputs) {
        let category = classify_agreement(&pair.judgments);
        let mut rows = vec!["all", category.kind.name()];
        if category.kind == AgreementKind::Diverging && category.substantial {
            rows.push("diverging_substantial");
        }
        let gap = chosen_side(pair, out, orientation).map(|c| pair_gap(kind, out, c).as_f64());
        let sigma = match (&out.a, &out.b) {
            (ResponseOutput::Distribution(a), ResponseOutput::Distribution(b)) => Some((a.sigma + b.sigma).as_f64()),
            _ => None,
        };
        for row in rows {
            let r = acc.get_mut(row).expect("known row");
            r.count += 1;
            match gap {
                Some(g) => {
                    r.gap_sum += g;
                    r.gap_n += 1;
                }
                None => r.ties += 1,
            }
            if let Some(s) = sigma {
                r.sigma_sum += s;
                r.has_sigma = true;
            }
        }
    }
    Ok(acc.into_iter().map(|(k, v)| (k.to_string(), v.finish())).collect())
}

pub fn reward_gap_report<T: Scalar>(
    head: &HeadParameters<T>,
    data: &EncodedPairs<T>,
    orientation: GapOrientation,
) -> Result<BTreeMap<String, GapRow>> {
    reward_gap_report_of(head.kind, &data.pairs, &predict_pairs(head, data), orientation)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub percent: f64,
    pub count: usize,
}

const BIN_SLACK: f64 = 1e-9;

fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Bins `values` into equal-width bins spanning `[lo, hi]`. The top edge
/// belongs to the last bin.
pub fn histogram(values: &[f64], lo: f64, hi: f64, width: f64) -> Result<Vec<HistogramBin>> {
    if width.is_nan() || width <= 0.0 || hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(Error::invalid("histogram needs a positive bin width and a non-empty range"));
    }
    let bins_f = (hi - lo) / width;
    let bins = bins_f.round();
    if (bins_f - bins).abs() > BIN_SLACK * bins.max(1.0) || bins < 1.0 {
        return Err(Error::invalid(format!(
            "bin width {width} does not divide the range [{lo}, {hi}] evenly"
        )));
    }
    let bins = bins as usize;
    let mut counts = vec![0usize; bins];
    for &v in values {
        if !v.is_finite() || v < lo - BIN_SLACK || v > hi + BIN_SLACK {
            return Err(Error::invalid(format!("value {v} outside histogram range [{lo}, {hi}]")));
        }
        let k = (((v - lo) / width + BIN_SLACK).floor().max(0.0) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = values.len();
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lower: tidy(lo + k as f64 * width),
            percent: if n == 0 { 0.0 } else { 100.0 * count as f64 / n as f64 },
            count,
        })
        .collect())
}

/// Gap values per pair (pairs without a chosen side are skipped).
pub fn gap_values<T: Scalar>(
    kind: HeadKind,
    pairs: &[PreferencePair],
    outputs: &[PairOutput<T>],
    orientation: GapOrientation,
) -> Vec<f64> {
    pairs
        .iter()
        .zip(outputs)
        .filter_map(|(p, o)| chosen_side(p, o, orientation).map(|c| pair_gap(kind, o, c).as_f64()))
        .collect()
}

/// Histogram of chosen-vs-rejected gaps. Bradley-Terry heads bin probabilities
/// over `[0.5, 1]` (over `[0, 1]` with majority orientation); other heads bin
/// reward differences from 0 (or the floor of the smallest gap) up to the
/// largest gap rounded up to a whole bin.
pub fn histogram_export_of<T: Scalar>(
    kind: HeadKind,
    pairs: &[PreferencePair],
    outputs: &[PairOutput<T>],
    bin_width: f64,
    orientation: GapOrientation,
) -> Result<Vec<HistogramBin>> {
    let values = gap_values(kind, pairs, outputs, orientation);
    let (lo, hi) = if kind == HeadKind::BradleyTerry {
        match orientation {
            GapOrientation::Model => (0.5, 1.0),
            GapOrientation::Majority => (0.0, 1.0),
        }
    } else {
        if bin_width.is_nan() || bin_width <= 0.0 {
            return Err(Error::invalid("bin width must be positive"));
        }
        let min = values.iter().copied().fold(0.0f64, f64::min);
        let max = values.iter().copied().fold(0.0f64, f64::max);
        let lo = if min >= 0.0 { 0.0 } else { (min / bin_width + BIN_SLACK).floor() * bin_width };
        let hi = ((max / bin_width - BIN_SLACK).ceil() * bin_width).max(lo + bin_width);
        (lo, hi)
    };
    histogram(&values, lo, hi, bin_width)
}

pub fn histogram_export<T: Scalar>(
    head: &HeadParameters<T>,
    data: &EncodedPairs<T>,
    bin_width: f64,
    orientation: GapOrientation,
) -> Result<Vec<HistogramBin>> {
    histogram_export_of(head.kind, &data.pairs, &predict_pairs(head, data), bin_width, orientation)
}

/// Histogram rows as `lower,percent,count` lines with a header.
pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("lower,percent,count\n");
    for b in bins {
        out.push_str(&format!("{},{},{}\n", b.lower, b.percent, b.count));
    }
    out
}
