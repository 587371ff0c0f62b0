//! Reward beliefs, their difference, and the mapping from a difference distribution
//! to probabilities over the five preference classes.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::prefdata::{AnnotatorJudgment, Side};
use crate::scalar::Scalar;

/// Floor added to every predicted standard deviation.
pub const SIGMA_FLOOR: f64 = 0.1;
/// Lower clamp on the variance of a reward difference.
pub const MIN_DIFF_VARIANCE: f64 = 1e-6;
/// Class boundaries on `r_A - r_B`: tie inside (-0.5, 0.5), slight up to 1.5.
pub const REGION_BOUNDARIES: [f64; 4] = [-1.5, -0.5, 0.5, 1.5];
pub const DEFAULT_SMOOTHING: f64 = 0.05;

fn sum_tolerance<T: Scalar>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(64.0))
}

/// Normal belief over a response's reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardDistribution<T> {
    pub mu: T,
    pub sigma: T,
}

impl<T: Scalar> RewardDistribution<T> {
    pub fn new(mu: T, sigma: T) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma < T::lit(SIGMA_FLOOR) {
            return Err(Error::invalid(format!("invalid reward distribution ({mu}, {sigma})")));
        }
        Ok(Self { mu, sigma })
    }
}

/// Distribution of `r_A - r_B` for correlated normal rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffDistribution<T> {
    pub mu_d: T,
    pub sigma_d: T,
    pub rho: T,
}

/// Mean `mu_A - mu_B`, variance `sigma_A^2 + sigma_B^2 - 2 rho sigma_A sigma_B` clamped
/// below at [`MIN_DIFF_VARIANCE`].
pub fn diff_distribution<T: Scalar>(
    a: &RewardDistribution<T>,
    b: &RewardDistribution<T>,
    rho: T,
) -> Result<DiffDistribution<T>> {
    check_unit("rho", rho)?;
    let var = diff_variance(a.sigma, b.sigma, rho).max(T::lit(MIN_DIFF_VARIANCE));
    Ok(DiffDistribution {
        mu_d: a.mu - b.mu,
        sigma_d: var.sqrt(),
        rho,
    })
}

pub(crate) fn diff_variance<T: Scalar>(sa: T, sb: T, rho: T) -> T {
    sa * sa + sb * sb - T::lit(2.0) * rho * sa * sb
}

fn check_unit<T: Scalar>(name: &str, x: T) -> Result<()> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::invalid(format!("{name} = {x} outside [0, 1]")));
    }
    Ok(())
}

/// Correlation between a pair's rewards: `eta` times the fraction of tie judgments.
pub fn make_rho<T: Scalar>(judgments: &[AnnotatorJudgment], eta: T) -> Result<T> {
    if judgments.is_empty() {
        return Err(Error::invalid("make_rho needs at least one judgment"));
    }
    check_unit("eta", eta)?;
    let ties = judgments.iter().filter(|j| j.label.is_tie()).count();
    Ok(eta * T::from_usize_lossy(ties) / T::from_usize_lossy(judgments.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CdfKind {
    ExactNormal,
    #[default]
    Logistic,
    Tanh,
}

impl FromStr for CdfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_normal" => Ok(CdfKind::ExactNormal),
            "logistic" => Ok(CdfKind::Logistic),
            "tanh" => Ok(CdfKind::Tanh),
            other => Err(Error::invalid(format!("unknown cdf kind {other:?}"))),
        }
    }
}

/// A standardized CDF, optionally with an input scale for the logistic form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cdf {
    pub kind: CdfKind,
    /// Multiplies `z` before the logistic; ignored by the other kinds.
    pub logistic_scale: f64,
}

impl From<CdfKind> for Cdf {
    fn from(kind: CdfKind) -> Self {
        Cdf {
            kind,
            logistic_scale: 1.0,
        }
    }
}

impl Cdf {
    pub fn eval<T: Scalar>(&self, z: T) -> T {
        match self.kind {
            CdfKind::ExactNormal => normal_cdf(z),
            CdfKind::Logistic => logistic(z * T::lit(self.logistic_scale)),
            CdfKind::Tanh => (T::one() + z.tanh()) / T::lit(2.0),
        }
    }

    /// Derivative of [`Cdf::eval`] in `z`.
    pub fn density<T: Scalar>(&self, z: T) -> T {
        match self.kind {
            CdfKind::ExactNormal => normal_pdf(z),
            CdfKind::Logistic => {
                let s = T::lit(self.logistic_scale);
                let p = logistic(z * s);
                s * p * (T::one() - p)
            }
            CdfKind::Tanh => {
                let t = z.tanh();
                (T::one() - t * t) / T::lit(2.0)
            }
        }
    }
}

pub fn cdf<T: Scalar>(z: T, kind: CdfKind) -> T {
    Cdf::from(kind).eval(z)
}

pub fn logistic<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn normal_cdf<T: Scalar>(z: T) -> T {
    T::lit(0.5 * erfc(-z.as_f64() / std::f64::consts::SQRT_2))
}

pub fn normal_pdf<T: Scalar>(z: T) -> T {
    let z = z.as_f64();
    T::lit((-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt())
}

/// `ln Phi(z)`, accurate far into the lower tail.
pub fn log_normal_cdf<T: Scalar>(z: T) -> T {
    let z = z.as_f64();
    let v = if z > -30.0 {
        (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        // asymptotic series of the Mills ratio
        let z2 = z * z;
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    };
    T::lit(v)
}

/// `phi(z) / Phi(z)` without overflow in the lower tail.
pub fn inverse_mills<T: Scalar>(z: T) -> T {
    let zf = z.as_f64();
    let log_pdf = -0.5 * zf * zf - 0.5 * (2.0 * std::f64::consts::PI).ln();
    T::lit((log_pdf - log_normal_cdf(zf)).exp())
}

/// Five-bin probability vectors.
pub trait FiveWay<T: Scalar>: Sized {
    fn probs(&self) -> [T; 5];

    /// Wraps probabilities without re-validating them.
    fn from_probs_unchecked(probs: [T; 5]) -> Self;

    fn from_probs(probs: [T; 5]) -> Result<Self> {
        let sum: T = probs.iter().copied().sum();
        if probs.iter().any(|p| !(p.is_finite() && *p >= T::zero())) || (sum - T::one()).abs() > sum_tolerance::<T>() {
            return Err(Error::invalid(format!("not a probability vector: {probs:?}")));
        }
        Ok(Self::from_probs_unchecked(probs))
    }
}

/// Probabilities over (B-sig, B-slight, tie, A-slight, A-sig).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelDistribution<T> {
    pub probs: [T; 5],
}

/// Probabilities over Likert scores 1 to 5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikertDistribution<T> {
    pub probs: [T; 5],
}

impl<T: Scalar> FiveWay<T> for LabelDistribution<T> {
    fn probs(&self) -> [T; 5] {
        self.probs
    }
    fn from_probs_unchecked(probs: [T; 5]) -> Self {
        Self { probs }
    }
}

impl<T: Scalar> FiveWay<T> for LikertDistribution<T> {
    fn probs(&self) -> [T; 5] {
        self.probs
    }
    fn from_probs_unchecked(probs: [T; 5]) -> Self {
        Self { probs }
    }
}

impl<T: Scalar> LikertDistribution<T> {
    pub fn uniform() -> Self {
        Self {
            probs: [T::lit(0.2); 5],
        }
    }

    pub fn point_mass(score: u8) -> Result<Self> {
        if !(1..=5).contains(&score) {
            return Err(Error::ScoreOutOfRange(score as i64));
        }
        let mut probs = [T::zero(); 5];
        probs[score as usize - 1] = T::one();
        Ok(Self { probs })
    }
}

impl<T: Scalar> LabelDistribution<T> {
    /// The distribution with A and B exchanged.
    pub fn reversed(&self) -> Self {
        let mut probs = self.probs;
        probs.reverse();
        Self { probs }
    }
}

/// Probability mass of the standardized interval `[lo, hi]`, written so that the mirror
/// interval `[-hi, -lo]` evaluates with the same floating-point operations.
fn interval_mass<T: Scalar>(cdf: &Cdf, lo: T, hi: T) -> T {
    if hi <= T::zero() {
        cdf.eval(hi) - cdf.eval(lo)
    } else if lo >= T::zero() {
        cdf.eval(-lo) - cdf.eval(-hi)
    } else {
        T::one() - (cdf.eval(lo) + cdf.eval(-hi))
    }
}

/// Standardized class boundaries `(t - mu_d) / sigma_d`.
pub(crate) fn standardized_boundaries<T: Scalar>(diff: &DiffDistribution<T>) -> [T; 4] {
    REGION_BOUNDARIES.map(|t| (T::lit(t) - diff.mu_d) / diff.sigma_d)
}

/// Integrates the difference distribution over the five label regions.
pub fn label_probs<T: Scalar>(diff: &DiffDistribution<T>, cdf: impl Into<Cdf>) -> LabelDistribution<T> {
    let cdf = cdf.into();
    let z = standardized_boundaries(diff);
    LabelDistribution {
        probs: [
            cdf.eval(z[0]),
            interval_mass(&cdf, z[0], z[1]),
            interval_mass(&cdf, z[1], z[2]),
            interval_mass(&cdf, z[2], z[3]),
            cdf.eval(-z[3]),
        ],
    }
}

pub fn expected_likert<T: Scalar>(dist: &LikertDistribution<T>) -> T {
    dist.probs
        .iter()
        .enumerate()
        .map(|(i, &p)| T::from_usize_lossy(i + 1) * p)
        .sum()
}

/// Adds `eps` to every bin and renormalizes.
pub fn smooth<T: Scalar, D: FiveWay<T>>(dist: &D, eps: T) -> D {
    let denom = T::one() + T::lit(5.0) * eps;
    D::from_probs_unchecked(dist.probs().map(|p| (p + eps) / denom))
}

/// Normalized label counts over the five classes.
pub fn empirical_label_distribution<T: Scalar>(judgments: &[AnnotatorJudgment]) -> Result<LabelDistribution<T>> {
    if judgments.is_empty() {
        return Err(Error::invalid("empty judgment list"));
    }
    let mut counts = [0usize; 5];
    for j in judgments {
        counts[j.label.class_index()] += 1;
    }
    Ok(LabelDistribution {
        probs: normalize_counts(counts),
    })
}

/// Normalized counts of the Likert scores given to one side.
pub fn empirical_likert_distribution<T: Scalar>(
    judgments: &[AnnotatorJudgment],
    side: Side,
) -> Result<LikertDistribution<T>> {
    if judgments.is_empty() {
        return Err(Error::invalid("empty judgment list"));
    }
    let mut counts = [0usize; 5];
    for j in judgments {
        let score = j
            .score(side)
            .ok_or_else(|| Error::invalid(format!("judgment by {} has no Likert scores", j.annotator_id)))?;
        counts[score.index()] += 1;
    }
    Ok(LikertDistribution {
        probs: normalize_counts(counts),
    })
}

fn normalize_counts<T: Scalar>(counts: [usize; 5]) -> [T; 5] {
    let n = T::from_usize_lossy(counts.iter().sum());
    counts.map(|c| T::from_usize_lossy(c) / n)
}
