//! Inter-rater agreement: quadratic-weighted Cohen's kappa and Krippendorff's alpha.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

const LIKERT_LEVELS: usize = 5;

/// Quadratic-weighted Cohen's kappa over paired ratings on a 1-5 scale.
///
/// Returns exactly 1 when no pair disagrees.
pub fn cohen_kappa_quadratic(ratings: &[(u8, u8)]) -> Result<f64> {
    if ratings.len() < 2 {
        return Err(Error::invalid("cohen's kappa needs at least 2 rating pairs"));
    }
    let k = LIKERT_LEVELS;
    let mut observed = [[0.0f64; LIKERT_LEVELS]; LIKERT_LEVELS];
    for &(a, b) in ratings {
        for r in [a, b] {
            if !(1..=5).contains(&r) {
                return Err(Error::ScoreOutOfRange(r as i64));
            }
        }
        observed[(a - 1) as usize][(b - 1) as usize] += 1.0;
    }
    let n = ratings.len() as f64;
    let rows: Vec<f64> = (0..k).map(|i| observed[i].iter().sum()).collect();
    let cols: Vec<f64> = (0..k).map(|j| (0..k).map(|i| observed[i][j]).sum()).collect();

    let mut num = 0.0;
    let mut den = 0.0;
    let scale = ((k - 1) * (k - 1)) as f64;
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64 - j as f64).powi(2)) / scale;
            num += w * observed[i][j];
            den += w * rows[i] * cols[j] / n;
        }
    }
    if num == 0.0 {
        return Ok(1.0);
    }
    if den == 0.0 {
        return Err(Error::Degenerate("marginals in cohen's kappa".into()));
    }
    Ok(1.0 - num / den)
}

/// MASI distance between two label sets: `1 - jaccard * monotonicity`.
pub fn masi_distance<L: Ord>(a: &BTreeSet<L>, b: &BTreeSet<L>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    let jaccard = inter as f64 / union as f64;
    let monotonicity = if a == b {
        1.0
    } else if inter == a.len() || inter == b.len() {
        2.0 / 3.0
    } else if inter > 0 {
        1.0 / 3.0
    } else {
        0.0
    };
    1.0 - jaccard * monotonicity
}

/// One annotation: which annotator labelled which item with what value.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation<V> {
    pub item: String,
    pub annotator: String,
    pub value: V,
}

/// Krippendorff's alpha with an arbitrary distance.
///
/// Observed disagreement averages pairwise distances within each item (weighted by
/// `1/(m_u - 1)`); expected disagreement averages over all ordered pairs of the pooled
/// values. Items with fewer than two annotations are not pairable and are skipped.
pub fn krippendorff_alpha<V, D>(units: &[Annotation<V>], distance: D) -> Result<f64>
where
    V: Ord,
    D: Fn(&V, &V) -> f64,
{
    let mut items: BTreeMap<&str, Vec<&V>> = BTreeMap::new();
    for u in units {
        items.entry(u.item.as_str()).or_default().push(&u.value);
    }
    let pairable: Vec<&Vec<&V>> = items.values().filter(|v| v.len() >= 2).collect();
    if pairable.len() < 2 {
        return Err(Error::invalid("krippendorff's alpha needs at least 2 items with 2+ annotations"));
    }
    let mut counts: BTreeMap<&V, f64> = BTreeMap::new();
    for v in pairable.iter().flat_map(|v| v.iter().copied()) {
        *counts.entry(v).or_default() += 1.0;
    }
    let n: f64 = counts.values().sum();

    let mut observed = 0.0;
    for values in &pairable {
        let m = values.len() as f64;
        let mut within = 0.0;
        for (i, a) in values.iter().enumerate() {
            for (j, b) in values.iter().enumerate() {
                if i != j {
                    within += distance(a, b);
                }
            }
        }
        observed += within / (m - 1.0);
    }
    observed /= n;

    // Ordered pairs of distinct pooled entries, grouped by value.
    let mut expected = 0.0;
    for (a, &na) in &counts {
        for (b, &nb) in &counts {
            let pairs = if a == b { na * (na - 1.0) } else { na * nb };
            expected += pairs * distance(a, b);
        }
    }
    expected /= n * (n - 1.0);

    if expected == 0.0 {
        return Err(Error::Degenerate("annotations: no variation".into()));
    }
    Ok(1.0 - observed / expected)
}
