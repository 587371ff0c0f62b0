use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::{train, TrainHistory};
use crate::encode::EncodedPairs;
use crate::error::{Error, Result};
use crate::evalsuite::{diverging_flags, diverging_id_auroc_of, predict_pairs, DivergenceOptions};
use crate::model::{HeadKind, HeadParameters};
use crate::scalar::Scalar;

pub const DEFAULT_ETA_GRID: [f64; 3] = [0.0, 0.5, 1.0];
pub const DEFAULT_LAMBDA_GRID: [f64; 6] = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0];

fn sorted_grid(grid: &[f64], what: &str) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{what} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} grid has non-finite values")));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub best: f64,
    pub best_auroc: f64,
    /// `(lambda, dev AUROC)` in ascending lambda order.
    pub scores: Vec<(f64, f64)>,
}

/// Picks the lambda maximizing dev Diverging ID AUROC; ties go to the smaller value.
pub fn tune_lambda<T: Scalar>(head: &HeadParameters<T>, dev: &EncodedPairs<T>, grid: &[f64]) -> Result<LambdaSearch> {
    if head.kind != HeadKind::MeanVariance {
        return Err(Error::invalid(format!(
            "lambda tuning needs a mean_variance head, got {}",
            head.kind.name()
        )));
    }
    let grid = sorted_grid(grid, "lambda")?;
    if grid[0] < 0.0 {
        return Err(Error::invalid("lambda grid has negative values"));
    }
    let flags = diverging_flags(&dev.pairs);
    if !flags.iter().any(|&f| f) || flags.iter().all(|&f| f) {
        return Err(Error::Degenerate(
            "degenerate dev set: needs both diverging and non-diverging pairs".into(),
        ));
    }
    let outputs = predict_pairs(head, dev);
    let mut scores = Vec::with_capacity(grid.len());
    let mut best = (grid[0], f64::NEG_INFINITY);
    for &lambda in &grid {
        let a = diverging_id_auroc_of(&dev.pairs, &outputs, &DivergenceOptions::with_lambda(lambda))?;
        scores.push((lambda, a));
        if a > best.1 {
            best = (lambda, a);
        }
    }
    Ok(LambdaSearch {
        best: best.0,
        best_auroc: best.1,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaResult {
    pub eta: f64,
    pub lambda: f64,
    pub auroc: f64,
}

#[derive(Debug, Clone)]
pub struct EtaSearch<T> {
    pub best_eta: f64,
    pub best_lambda: f64,
    pub results: Vec<EtaResult>,
    pub head: HeadParameters<T>,
    pub history: TrainHistory,
}

/// Trains one mean-variance head per eta, tunes lambda for each on dev, and
/// keeps the eta with the highest dev Diverging ID AUROC (ties to the smaller eta).
pub fn tune_eta<T: Scalar>(
    grid: &[f64],
    train_data: &EncodedPairs<T>,
    dev: &EncodedPairs<T>,
    config: &TrainConfig,
    lambda_grid: &[f64],
) -> Result<EtaSearch<T>> {
    let grid = sorted_grid(grid, "eta")?;
    let mut best: Option<EtaSearch<T>> = None;
    let mut results = Vec::with_capacity(grid.len());
    let mut best_auroc = f64::NEG_INFINITY;
    for &eta in &grid {
        let cfg = TrainConfig { eta, ..config.clone() };
        let outcome = train(HeadKind::MeanVariance, train_data, dev, &cfg)?;
        let search = tune_lambda(&outcome.head, dev, lambda_grid)?;
        results.push(EtaResult {
            eta,
            lambda: search.best,
            auroc: search.best_auroc,
        });
        let improves = search.best_auroc > best_auroc;
        if improves {
            best_auroc = search.best_auroc;
            best = Some(EtaSearch {
                best_eta: eta,
                best_lambda: search.best,
                results: Vec::new(),
                head: outcome.head,
                history: outcome.history,
            });
        }
    }
    let mut best = best.expect("grid is non-empty");
    best.results = results;
    Ok(best)
}
