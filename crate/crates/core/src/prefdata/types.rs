use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed five-way preference: `+2`/`+1` favour response A significantly/slightly,
/// `0` is a tie and negatives mirror for B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct PreferenceLabel(i8);

impl PreferenceLabel {
    pub const B_SIGNIFICANT: Self = Self(-2);
    pub const B_SLIGHT: Self = Self(-1);
    pub const TIE: Self = Self(0);
    pub const A_SLIGHT: Self = Self(1);
    pub const A_SIGNIFICANT: Self = Self(2);

    pub fn new(value: i64) -> Result<Self> {
        if (-2..=2).contains(&value) {
            Ok(Self(value as i8))
        } else {
            Err(Error::invalid(format!("preference label {value} outside [-2, 2]")))
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }

    /// `1` for A, `-1` for B, `0` for a tie.
    pub fn side(self) -> i8 {
        self.0.signum()
    }

    pub fn strength(self) -> u8 {
        self.0.unsigned_abs()
    }

    pub fn is_tie(self) -> bool {
        self.0 == 0
    }

    pub fn is_significant(self) -> bool {
        self.strength() == 2
    }

    /// The same judgment with the roles of A and B exchanged.
    pub fn flipped(self) -> Self {
        Self(-self.0)
    }

    /// Position in the class order (B-sig, B-slight, tie, A-slight, A-sig).
    pub fn class_index(self) -> usize {
        (self.0 + 2) as usize
    }
}

impl TryFrom<i64> for PreferenceLabel {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<PreferenceLabel> for i64 {
    fn from(label: PreferenceLabel) -> i64 {
        label.0 as i64
    }
}

impl fmt::Display for PreferenceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}", self.0)
    }
}

/// A Likert-5 helpfulness score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct LikertScore(u8);

impl LikertScore {
    pub fn new(value: i64) -> Result<Self> {
        if (1..=5).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(Error::ScoreOutOfRange(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Zero-based bin in a five-bin Likert distribution.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }
}

impl TryFrom<i64> for LikertScore {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<LikertScore> for i64 {
    fn from(score: LikertScore) -> i64 {
        score.0 as i64
    }
}

/// Derives a preference label from two independent Likert scores: a difference of
/// one is a slight preference, two or more is significant.
pub fn label_from_scores(score_a: i64, score_b: i64) -> Result<PreferenceLabel> {
    let a = LikertScore::new(score_a)?;
    let b = LikertScore::new(score_b)?;
    Ok(label_from_likert(a, b))
}

pub(crate) fn label_from_likert(a: LikertScore, b: LikertScore) -> PreferenceLabel {
    let d = a.value() as i8 - b.value() as i8;
    PreferenceLabel(d.signum() * d.abs().min(2))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatorJudgment {
    pub annotator_id: String,
    pub label: PreferenceLabel,
    pub raw_scores: Option<(LikertScore, LikertScore)>,
}

impl AnnotatorJudgment {
    pub fn from_label(annotator_id: impl Into<String>, label: PreferenceLabel) -> Self {
        Self {
            annotator_id: annotator_id.into(),
            label,
            raw_scores: None,
        }
    }

    pub fn from_scores(annotator_id: impl Into<String>, score_a: i64, score_b: i64) -> Result<Self> {
        let a = LikertScore::new(score_a)?;
        let b = LikertScore::new(score_b)?;
        Ok(Self {
            annotator_id: annotator_id.into(),
            label: label_from_likert(a, b),
            raw_scores: Some((a, b)),
        })
    }

    /// Score the annotator gave to one side, if raw scores were recorded.
    pub fn score(&self, side: Side) -> Option<LikertScore> {
        self.raw_scores.map(|(a, b)| match side {
            Side::A => a,
            Side::B => b,
        })
    }

    pub fn flipped(&self) -> Self {
        Self {
            annotator_id: self.annotator_id.clone(),
            label: self.label.flipped(),
            raw_scores: self.raw_scores.map(|(a, b)| (b, a)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[serde(rename = "multipref")]
    MultiPref,
    #[serde(rename = "helpsteer2")]
    HelpSteer2,
    #[default]
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub id: String,
    pub prompt: String,
    pub response_a: String,
    pub response_b: String,
    pub judgments: Vec<AnnotatorJudgment>,
    pub source: Source,
}

impl PreferencePair {
    /// Checks the structural invariants: non-empty texts and judgments, unique annotators,
    /// and labels consistent with any raw scores.
    pub fn validate(&self) -> Result<()> {
        if self.prompt.is_empty() {
            return Err(Error::invalid(format!("pair {}: empty prompt", self.id)));
        }
        if self.response_a.is_empty() || self.response_b.is_empty() {
            return Err(Error::invalid(format!("pair {}: empty response", self.id)));
        }
        if self.judgments.is_empty() {
            return Err(Error::invalid(format!("pair {}: no judgments", self.id)));
        }
        let mut seen = HashSet::new();
        for j in &self.judgments {
            if !seen.insert(j.annotator_id.as_str()) {
                return Err(Error::invalid(format!(
                    "pair {}: duplicate annotator {}",
                    self.id, j.annotator_id
                )));
            }
            if let Some((a, b)) = j.raw_scores {
                if label_from_likert(a, b) != j.label {
                    return Err(Error::invalid(format!(
                        "pair {}: label {} inconsistent with scores ({}, {})",
                        self.id,
                        j.label,
                        a.value(),
                        b.value()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> impl Iterator<Item = PreferenceLabel> + '_ {
        self.judgments.iter().map(|j| j.label)
    }

    /// True when every judgment carries Likert scores.
    pub fn has_scores(&self) -> bool {
        self.judgments.iter().all(|j| j.raw_scores.is_some())
    }

    /// The pair with responses A and B exchanged (labels and scores mirrored).
    pub fn swapped(&self) -> Self {
        Self {
            id: self.id.clone(),
            prompt: self.prompt.clone(),
            response_a: self.response_b.clone(),
            response_b: self.response_a.clone(),
            judgments: self.judgments.iter().map(AnnotatorJudgment::flipped).collect(),
            source: self.source,
        }
    }

    pub fn response(&self, side: Side) -> &str {
        match side {
            Side::A => &self.response_a,
            Side::B => &self.response_b,
        }
    }
}
