//! Metrics, reward-gap reports, histograms and divisive-prompt ranking.

mod gaps;
mod metrics;
mod predict;
mod ranking;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use gaps::{
    gap_values, histogram, histogram_csv, histogram_export, histogram_export_of, pair_gap, reward_gap_report,
    reward_gap_report_of, GapOrientation, GapRow, HistogramBin, GAP_ROWS,
};
pub use metrics::{
    auroc, divergence_score, divergence_scores, diverging_flags, diverging_id_auroc, diverging_id_auroc_of,
    preference_accuracy, preference_accuracy_of, prompt_divisiveness, response_divisiveness, DivergenceOptions,
    DivisivenessMode, PairReduction,
};
pub use predict::{predict_pairs, predict_response, PairOutput, ResponseOutput};
pub use ranking::{
    rank_prompts, read_benchmark, write_benchmark, BenchmarkPrompt, DivisivenessRanking, RankedPrompt,
    SystemResponse, DEFAULT_TOP_FRACTION,
};

use crate::encode::EncodedPairs;
use crate::error::Result;
use crate::model::{HeadKind, HeadParameters};
use crate::scalar::Scalar;

pub const DEFAULT_BIN_WIDTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub divergence: DivergenceOptions,
    pub bin_width: f64,
    pub orientation: GapOrientation,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            divergence: DivergenceOptions::default(),
            bin_width: DEFAULT_BIN_WIDTH,
            orientation: GapOrientation::Model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: HeadKind,
    pub pairs: usize,
    pub preference_accuracy: f64,
    /// `None` when the evaluated pairs are all diverging or all not.
    pub diverging_auroc: Option<f64>,
    pub category_gaps: BTreeMap<String, GapRow>,
    pub histogram: Vec<HistogramBin>,
    pub lambda_used: f64,
    pub orientation: GapOrientation,
}

pub fn evaluate<T: Scalar>(head: &HeadParameters<T>, data: &EncodedPairs<T>, options: &EvalOptions) -> Result<EvalReport> {
    let outputs = predict_pairs(head, data);
    let flags = diverging_flags(&data.pairs);
    let both = flags.iter().any(|&f| f) && flags.iter().any(|&f| !f);
    let diverging_auroc = if both {
        Some(auroc(&divergence_scores(&outputs, &options.divergence)?, &flags)?)
    } else {
        None
    };
    Ok(EvalReport {
        kind: head.kind,
        pairs: data.len(),
        preference_accuracy: preference_accuracy_of(&data.pairs, &outputs)?,
        diverging_auroc,
        category_gaps: reward_gap_report_of(head.kind, &data.pairs, &outputs, options.orientation)?,
        histogram: histogram_export_of(head.kind, &data.pairs, &outputs, options.bin_width, options.orientation)?,
        lambda_used: options.divergence.lambda,
        orientation: options.orientation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FiveWay, LikertDistribution, RewardDistribution};
    use crate::prefdata::{AnnotatorJudgment, PreferenceLabel, PreferencePair, Source};
    use proptest::prelude::*;

    fn brute_auroc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    fn pair(id: &str, labels: &[i64]) -> PreferencePair {
        PreferencePair {
            id: id.into(),
            prompt: "p".into(),
            response_a: "a".into(),
            response_b: "b".into(),
            judgments: labels
                .iter()
                .enumerate()
                .map(|(i, &l)| AnnotatorJudgment::from_label(format!("r{i}"), PreferenceLabel::new(l).unwrap()))
                .collect(),
            source: Source::MultiPref,
        }
    }

    fn rewards(a: f64, b: f64) -> PairOutput<f64> {
        PairOutput {
            a: ResponseOutput::Reward(a),
            b: ResponseOutput::Reward(b),
        }
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8, 0.3], &[true, false, true]).unwrap(), 0.5);
        assert_eq!(auroc(&[3.0, 2.0, 1.0, 0.0], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(auroc(&[1.0; 5], &[true, false, true, false, false]).unwrap(), 0.5);
        assert!(auroc(&[1.0, 2.0], &[true, true]).is_err());
        assert!(auroc(&[1.0], &[true, false]).is_err());
    }

    proptest! {
        #[test]
        fn auroc_matches_brute_force(
            data in proptest::collection::vec((0u8..5, any::<bool>()), 2..=8)
        ) {
            let scores: Vec<f64> = data.iter().map(|&(s, _)| s as f64 / 4.0).collect();
            let labels: Vec<bool> = data.iter().map(|&(_, l)| l).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            prop_assert_eq!(auroc(&scores, &labels).unwrap(), brute_auroc(&scores, &labels));
        }

        #[test]
        fn auroc_negation_complements(
            data in proptest::collection::vec((-1e3f64..1e3, any::<bool>()), 2..40)
        ) {
            let scores: Vec<f64> = data.iter().map(|&(s, _)| s).collect();
            let labels: Vec<bool> = data.iter().map(|&(_, l)| l).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let mut sorted = scores.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let total = auroc(&scores, &labels).unwrap() + auroc(&neg, &labels).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn meanvar_score_shift_invariant(mu_a in -5f64..5.0, mu_b in -5f64..5.0, shift in -10f64..10.0,
                                         sa in 0.1f64..3.0, sb in 0.1f64..3.0, lambda in 0f64..4.0) {
            let mk = |ma: f64, mb: f64| PairOutput {
                a: ResponseOutput::Distribution(RewardDistribution { mu: ma, sigma: sa }),
                b: ResponseOutput::Distribution(RewardDistribution { mu: mb, sigma: sb }),
            };
            let opts = DivergenceOptions::with_lambda(lambda);
            let base = divergence_score(&mk(mu_a, mu_b), &opts).unwrap();
            let moved = divergence_score(&mk(mu_a + shift, mu_b + shift), &opts).unwrap();
            prop_assert!((base - moved).abs() < 1e-9);
        }
    }

    #[test]
    fn divergence_score_examples() {
        let mv = PairOutput {
            a: ResponseOutput::Distribution(RewardDistribution { mu: 0.3, sigma: 1.0 }),
            b: ResponseOutput::Distribution(RewardDistribution { mu: 0.3, sigma: 1.0 }),
        };
        assert_eq!(divergence_score(&mv, &DivergenceOptions::with_lambda(0.5)).unwrap(), 1.0);
        assert!(divergence_score(&mv, &DivergenceOptions::with_lambda(-0.1)).is_err());
        assert_eq!(divergence_score(&rewards(1.5, 1.5), &DivergenceOptions::default()).unwrap(), 0.0);
        assert_eq!(divergence_score(&rewards(1.0, 3.0), &DivergenceOptions::default()).unwrap(), -2.0);
        let uni = PairOutput {
            a: ResponseOutput::Likert(LikertDistribution::<f64>::uniform()),
            b: ResponseOutput::Likert(LikertDistribution::uniform()),
        };
        assert!((divergence_score(&uni, &DivergenceOptions::default()).unwrap() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn divisiveness_examples() {
        let point = LikertDistribution::<f64>::point_mass(3).unwrap();
        assert_eq!(response_divisiveness(&point, DivisivenessMode::Product), 0.0);
        assert_eq!(response_divisiveness(&point, DivisivenessMode::Sum), 0.0);
        let bimodal = LikertDistribution::from_probs([0.5, 0.0, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(response_divisiveness(&bimodal, DivisivenessMode::Product), 0.25);
        assert_eq!(response_divisiveness(&bimodal, DivisivenessMode::Sum), 1.0);
        let uni = LikertDistribution::<f64>::uniform();
        assert!((response_divisiveness(&uni, DivisivenessMode::Product) - 0.04).abs() < 1e-15);
        assert!((response_divisiveness(&uni, DivisivenessMode::Sum) - 0.4).abs() < 1e-15);

        assert!(prompt_divisiveness::<f64>(&[], DivisivenessMode::Product).is_err());
        assert_eq!(prompt_divisiveness(&[bimodal], DivisivenessMode::Product).unwrap(), 0.25);
        let five = vec![uni; 5];
        assert!((prompt_divisiveness(&five, DivisivenessMode::Product).unwrap() - 0.04).abs() < 1e-15);
        // mean of sum-mode values 0.8 and 0.6
        let d08 = LikertDistribution::from_probs([0.4, 0.1, 0.0, 0.1, 0.4]).unwrap();
        let d06 = LikertDistribution::from_probs([0.3, 0.2, 0.0, 0.2, 0.3]).unwrap();
        assert!((prompt_divisiveness::<f64>(&[d08, d06], DivisivenessMode::Sum).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn preference_accuracy_examples() {
        // model agrees with everyone
        let pairs = vec![pair("x", &[2, 1]), pair("y", &[-1, -2, 0])];
        let outs = vec![rewards(1.0, 0.0), rewards(0.0, 1.0)];
        assert_eq!(preference_accuracy_of(&pairs, &outs).unwrap(), 1.0);
        // split annotators
        let split = vec![pair("s", &[1, -1])];
        assert_eq!(preference_accuracy_of(&split, &[rewards(2.0, 1.0)]).unwrap(), 0.5);
        assert_eq!(preference_accuracy_of(&split, &[rewards(1.0, 2.0)]).unwrap(), 0.5);
        // exact reward tie
        assert_eq!(preference_accuracy_of(&[pair("t", &[2])], &[rewards(1.0, 1.0)]).unwrap(), 0.5);
        // only ties
        assert!(preference_accuracy_of(&[pair("z", &[0, 0])], &[rewards(1.0, 0.0)]).is_err());

        // 3 pairs x 3 labels, hand count:
        // p1 model A: labels 2,1,-1 -> 2 right; p2 model B: -2,0,1 -> 1 right of 2;
        // p3 model tie: 1,1,-2 -> 1.5 of 3. Total 4.5 / 8.
        let pairs = vec![pair("1", &[2, 1, -1]), pair("2", &[-2, 0, 1]), pair("3", &[1, 1, -2])];
        let outs = vec![rewards(0.4, 0.1), rewards(-1.0, 0.2), rewards(0.7, 0.7)];
        assert_eq!(preference_accuracy_of(&pairs, &outs).unwrap(), 4.5 / 8.0);
    }

    #[test]
    fn swapping_sides_preserves_metrics() {
        let pairs = vec![
            pair("1", &[2, 1, -1]),
            pair("2", &[-2, 0, 2]),
            pair("3", &[1, 1, 0]),
            pair("4", &[0, 0, 0]),
        ];
        let outs = vec![rewards(0.4, 0.1), rewards(-1.0, 0.2), rewards(0.7, 0.3), rewards(0.1, 0.0)];
        let sp: Vec<_> = pairs.iter().map(PreferencePair::swapped).collect();
        let so: Vec<_> = outs.iter().map(PairOutput::swapped).collect();
        assert_eq!(preference_accuracy_of(&pairs, &outs).unwrap(), preference_accuracy_of(&sp, &so).unwrap());
        let opts = DivergenceOptions::default();
        assert_eq!(
            diverging_id_auroc_of(&pairs, &outs, &opts).unwrap(),
            diverging_id_auroc_of(&sp, &so, &opts).unwrap()
        );
    }

    #[test]
    fn reward_gap_single_pair() {
        // logit(0.7) as the reward difference
        let d = (0.7f64 / 0.3).ln();
        let pairs = vec![pair("1", &[2, 2])];
        let report =
            reward_gap_report_of(HeadKind::BradleyTerry, &pairs, &[rewards(d, 0.0)], GapOrientation::Model).unwrap();
        assert!((report["high_agreement_pref"].mean_gap.unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(report["all"].count, 1);
        assert_eq!(report["diverging"].count, 0);
        assert_eq!(report["diverging"].mean_gap, None);
    }

    #[test]
    fn reward_gap_hand_average() {
        let pairs = vec![
            pair("hp1", &[2, 1]),     // high-agreement pref, majority A
            pair("hp2", &[-1, -1]),   // high-agreement pref, majority B
            pair("dv1", &[2, -2]),    // diverging substantial, aggregate tie
            pair("dv2", &[2, 1, -1]), // diverging, majority A
            pair("ht", &[0, 0, 1]),   // high-agreement tie
        ];
        let outs = vec![
            rewards(1.0, 0.5),
            rewards(0.0, 2.0),
            rewards(0.3, 0.1),
            rewards(-0.5, 0.5),
            rewards(0.0, 0.25),
        ];
        let model = reward_gap_report_of(HeadKind::MseRegression, &pairs, &outs, GapOrientation::Model).unwrap();
        assert!((model["high_agreement_pref"].mean_gap.unwrap() - (0.5 + 2.0) / 2.0).abs() < 1e-12);
        assert!((model["diverging"].mean_gap.unwrap() - (0.2 + 1.0) / 2.0).abs() < 1e-12);
        assert!((model["diverging_substantial"].mean_gap.unwrap() - 0.2).abs() < 1e-12);
        assert!((model["all"].mean_gap.unwrap() - (0.5 + 2.0 + 0.2 + 1.0 + 0.25) / 5.0).abs() < 1e-12);

        let maj = reward_gap_report_of(HeadKind::MseRegression, &pairs, &outs, GapOrientation::Majority).unwrap();
        assert!((maj["high_agreement_pref"].mean_gap.unwrap() - (0.5 + 2.0) / 2.0).abs() < 1e-12);
        assert_eq!(maj["diverging"].count, 2);
        assert_eq!(maj["diverging"].excluded_ties, 1);
        assert!((maj["diverging"].mean_gap.unwrap() - (-1.0)).abs() < 1e-12);
        let counted: usize = ["high_agreement_pref", "high_agreement_tie", "diverging", "other"]
            .iter()
            .map(|k| maj[*k].count)
            .sum();
        assert_eq!(counted, maj["all"].count);
    }

    #[test]
    fn histogram_examples() {
        let bins = histogram(&[0.72; 7], 0.5, 1.0, 0.05).unwrap();
        assert_eq!(bins.len(), 10);
        let full: Vec<_> = bins.iter().filter(|b| b.count > 0).collect();
        assert_eq!(full.len(), 1);
        assert_eq!(full[0].lower, 0.7);
        assert_eq!(full[0].percent, 100.0);

        let bins = histogram(&[0.51, 0.99], 0.5, 1.0, 0.05).unwrap();
        let full: Vec<_> = bins.iter().filter(|b| b.count > 0).map(|b| (b.lower, b.percent)).collect();
        assert_eq!(full, vec![(0.5, 50.0), (0.95, 50.0)]);

        // hand tally on a mixed fixture
        let values = [0.5, 0.55, 0.549, 0.6, 0.61, 0.75, 0.8, 0.999, 1.0, 0.7];
        let bins = histogram(&values, 0.5, 1.0, 0.05).unwrap();
        let counts: Vec<usize> = bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![2, 1, 2, 0, 1, 1, 1, 0, 0, 2]);
        let total: f64 = bins.iter().map(|b| b.percent).sum();
        assert!((total - 100.0).abs() < 0.01);

        assert!(histogram(&[0.6], 0.5, 1.0, 0.3).is_err());
        assert!(histogram(&[0.6], 0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn histogram_export_bt_range() {
        let pairs = vec![pair("1", &[2]), pair("2", &[-1]), pair("3", &[1, -1])];
        let outs = vec![rewards(3.0, 0.0), rewards(0.2, 0.0), rewards(0.0, 0.0)];
        let bins = histogram_export_of(HeadKind::BradleyTerry, &pairs, &outs, 0.05, GapOrientation::Model).unwrap();
        assert_eq!(bins.first().unwrap().lower, 0.5);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 3);
        let gap = histogram_export_of(HeadKind::MseRegression, &pairs, &outs, 0.25, GapOrientation::Model).unwrap();
        assert_eq!(gap.iter().map(|b| b.count).sum::<usize>(), 3);
        assert_eq!(gap.first().unwrap().lower, 0.0);
    }
}
