//! Majority aggregation and agreement categories over a pair's judgments.

use serde::{Deserialize, Serialize};

use super::types::{AnnotatorJudgment, PreferenceLabel};

/// Majority vote over sides (A, B, tie).
///
/// Among the sides with the most votes, the one whose values have the largest absolute sum
/// wins (the tie side always sums to zero); if that is still tied the result is a tie.
/// The returned strength is the most common strength among the winning side's votes,
/// falling back to slight on a tie.
///
/// Panics if `judgments` is empty.
pub fn aggregate_majority(judgments: &[AnnotatorJudgment]) -> PreferenceLabel {
    aggregate_labels(judgments.iter().map(|j| j.label))
}

pub(crate) fn aggregate_labels(labels: impl IntoIterator<Item = PreferenceLabel>) -> PreferenceLabel {
    // index 0: B, 1: tie, 2: A
    let mut votes = [0usize; 3];
    let mut abs_sum = [0i64; 3];
    let mut strengths = [[0usize; 2]; 3];
    let mut n = 0;
    for label in labels {
        let side = (label.side() + 1) as usize;
        votes[side] += 1;
        abs_sum[side] += label.value() as i64;
        if !label.is_tie() {
            strengths[side][label.strength() as usize - 1] += 1;
        }
        n += 1;
    }
    assert!(n > 0, "aggregate_majority requires at least one judgment");

    let top = *votes.iter().max().unwrap();
    let contenders: Vec<usize> = (0..3).filter(|&s| votes[s] == top).collect();
    let best_sum = contenders.iter().map(|&s| abs_sum[s].abs()).max().unwrap();
    let winners: Vec<usize> = contenders
        .into_iter()
        .filter(|&s| abs_sum[s].abs() == best_sum)
        .collect();
    if winners.len() != 1 || winners[0] == 1 {
        return PreferenceLabel::TIE;
    }
    let side = winners[0];
    let [slight, significant] = strengths[side];
    let strength = if significant > slight { 2 } else { 1 };
    let sign = side as i64 - 1;
    PreferenceLabel::new(sign * strength).expect("label within range")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementKind {
    HighAgreementPref,
    HighAgreementTie,
    Diverging,
    Other,
}

impl AgreementKind {
    pub const ALL: [AgreementKind; 4] = [
        AgreementKind::HighAgreementPref,
        AgreementKind::HighAgreementTie,
        AgreementKind::Diverging,
        AgreementKind::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgreementKind::HighAgreementPref => "high_agreement_pref",
            AgreementKind::HighAgreementTie => "high_agreement_tie",
            AgreementKind::Diverging => "diverging",
            AgreementKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgreementCategory {
    pub kind: AgreementKind,
    /// Both responses were significantly preferred by someone. Only set for `Diverging`.
    pub substantial: bool,
}

impl AgreementCategory {
    pub fn is_diverging(&self) -> bool {
        self.kind == AgreementKind::Diverging
    }
}

/// Categorizes a pair by annotator agreement. Precedence when several definitions
/// apply: diverging, then high-agreement tie, then high-agreement preference.
pub fn classify_agreement(judgments: &[AnnotatorJudgment]) -> AgreementCategory {
    assert!(!judgments.is_empty(), "classify_agreement requires at least one judgment");
    let labels: Vec<PreferenceLabel> = judgments.iter().map(|j| j.label).collect();
    let a_votes = labels.iter().filter(|l| l.side() > 0).count();
    let b_votes = labels.iter().filter(|l| l.side() < 0).count();
    let ties = labels.iter().filter(|l| l.is_tie()).count();
    let any_significant = labels.iter().any(|l| l.is_significant());

    if a_votes > 0 && b_votes > 0 && any_significant {
        let substantial = labels.contains(&PreferenceLabel::A_SIGNIFICANT)
            && labels.contains(&PreferenceLabel::B_SIGNIFICANT);
        return AgreementCategory {
            kind: AgreementKind::Diverging,
            substantial,
        };
    }
    let kind = if 2 * ties > labels.len() {
        AgreementKind::HighAgreementTie
    } else {
        let majority = aggregate_labels(labels.iter().copied());
        let dissent = match majority.side() {
            1 => b_votes,
            -1 => a_votes,
            _ => usize::MAX,
        };
        if dissent == 0 {
            AgreementKind::HighAgreementPref
        } else {
            AgreementKind::Other
        }
    };
    AgreementCategory {
        kind,
        substantial: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn js(values: &[i64]) -> Vec<AnnotatorJudgment> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| AnnotatorJudgment::from_label(format!("a{i}"), PreferenceLabel::new(v).unwrap()))
            .collect()
    }

    #[test]
    fn majority_examples() {
        assert_eq!(aggregate_majority(&js(&[2, 1, 0, -1])).value(), 1);
        assert_eq!(aggregate_majority(&js(&[2, 2, -1])).value(), 2);
        assert_eq!(aggregate_majority(&js(&[1, -1])).value(), 0);
        assert_eq!(aggregate_majority(&js(&[0, 0, 2])).value(), 0);
        assert_eq!(aggregate_majority(&js(&[2, 2, -1, -1])).value(), 2);
        assert_eq!(aggregate_majority(&js(&[-2, -1, -1])).value(), -1);
        // A and tie share the top count; A's values carry weight, the tie side's do not.
        assert_eq!(aggregate_majority(&js(&[2, 0])).value(), 2);
    }

    #[test]
    fn classify_examples() {
        let c = classify_agreement(&js(&[2, 2, 1, 0]));
        assert_eq!(c.kind, AgreementKind::HighAgreementPref);
        let c = classify_agreement(&js(&[0, 0, 0, 1]));
        assert_eq!(c.kind, AgreementKind::HighAgreementTie);
        let c = classify_agreement(&js(&[2, -2, 1]));
        assert_eq!(c, AgreementCategory { kind: AgreementKind::Diverging, substantial: true });
        let c = classify_agreement(&js(&[1, -1, 0]));
        assert_eq!(c.kind, AgreementKind::Other);
        let c = classify_agreement(&js(&[2, -1, 1]));
        assert_eq!(c, AgreementCategory { kind: AgreementKind::Diverging, substantial: false });
        // all-tie and single-label edge cases
        assert_eq!(classify_agreement(&js(&[0])).kind, AgreementKind::HighAgreementTie);
        assert_eq!(classify_agreement(&js(&[-1])).kind, AgreementKind::HighAgreementPref);
        // half ties is not a strict majority
        assert_eq!(classify_agreement(&js(&[0, 0, 1, 1])).kind, AgreementKind::HighAgreementPref);
    }

    fn labels_strategy() -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(-2i64..=2, 1..7)
    }

    proptest! {
        #[test]
        fn classify_is_permutation_invariant(values in labels_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = values.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(classify_agreement(&js(&values)), classify_agreement(&js(&shuffled)));
            prop_assert_eq!(aggregate_majority(&js(&values)), aggregate_majority(&js(&shuffled)));
        }

        #[test]
        fn majority_sign_follows_strict_side_majority(values in labels_strategy()) {
            let a = values.iter().filter(|&&v| v > 0).count();
            let b = values.iter().filter(|&&v| v < 0).count();
            let t = values.len() - a - b;
            let agg = aggregate_majority(&js(&values));
            if a > b && a > t { prop_assert_eq!(agg.side(), 1); }
            if b > a && b > t { prop_assert_eq!(agg.side(), -1); }
        }

        #[test]
        fn substantial_implies_diverging(values in labels_strategy()) {
            let c = classify_agreement(&js(&values));
            if c.substantial { prop_assert_eq!(c.kind, AgreementKind::Diverging); }
        }

        #[test]
        fn mirrored_judgments_mirror_majority(values in labels_strategy()) {
            let neg: Vec<i64> = values.iter().map(|v| -v).collect();
            prop_assert_eq!(aggregate_majority(&js(&values)).value(), -aggregate_majority(&js(&neg)).value());
            prop_assert_eq!(classify_agreement(&js(&values)), classify_agreement(&js(&neg)));
        }
    }
}
