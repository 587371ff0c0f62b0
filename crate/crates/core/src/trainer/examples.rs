use super::config::{LabelMode, MeanVarLoss, TieHandling, TrainConfig};
use crate::error::{Error, Result};
use crate::model::{
    empirical_label_distribution, empirical_likert_distribution, make_rho, FiveWay, HeadKind, LabelDistribution,
    LikertDistribution, Target,
};
use crate::prefdata::{aggregate_majority, PreferenceLabel, PreferencePair, Side};
use crate::scalar::Scalar;

/// One training instance over responses of the encoded data set, addressed by
/// pair index and side.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub inputs: Vec<(usize, Side)>,
    pub target: Target<T>,
}

fn labels_for(pair: &PreferencePair, mode: LabelMode) -> Vec<PreferenceLabel> {
    match mode {
        LabelMode::Aggregated => vec![aggregate_majority(&pair.judgments)],
        LabelMode::All => pair.labels().collect(),
    }
}

fn ordered(i: usize, label: PreferenceLabel) -> Vec<(usize, Side)> {
    if label.side() < 0 {
        vec![(i, Side::B), (i, Side::A)]
    } else {
        vec![(i, Side::A), (i, Side::B)]
    }
}

fn require_scores(kind: HeadKind, pairs: &[PreferencePair]) -> Result<()> {
    if let Some(p) = pairs.iter().find(|p| !p.has_scores()) {
        return Err(Error::invalid(format!(
            "{} training needs Likert scores on every judgment; pair '{}' has labels only",
            kind.name(),
            p.id
        )));
    }
    Ok(())
}

fn mean_score(pair: &PreferencePair, side: Side) -> f64 {
    let scores: Vec<f64> = pair
        .judgments
        .iter()
        .filter_map(|j| j.score(side))
        .map(|s| s.value() as f64)
        .collect();
    scores.iter().sum::<f64>() / scores.len() as f64
}

/// Training instances for `kind` built from `pairs` per the config's label mode.
pub fn build_examples<T: Scalar>(kind: HeadKind, pairs: &[PreferencePair], config: &TrainConfig) -> Result<Vec<Example<T>>> {
    let mode = config.training_label_mode;
    let mut out = Vec::new();
    match kind {
        HeadKind::BradleyTerry => {
            for (i, pair) in pairs.iter().enumerate() {
                for label in labels_for(pair, mode) {
                    let prob_first = if !label.is_tie() {
                        T::one()
                    } else if config.bt_ties == TieHandling::Half {
                        T::lit(0.5)
                    } else {
                        continue;
                    };
                    out.push(Example {
                        inputs: ordered(i, label),
                        target: Target::Preference { prob_first },
                    });
                }
            }
        }
        HeadKind::MseRegression => {
            require_scores(kind, pairs)?;
            for (i, pair) in pairs.iter().enumerate() {
                for side in [Side::A, Side::B] {
                    match mode {
                        LabelMode::Aggregated => out.push(Example {
                            inputs: vec![(i, side)],
                            target: Target::Score(T::lit(mean_score(pair, side))),
                        }),
                        LabelMode::All => {
                            for j in &pair.judgments {
                                let s = j.score(side).expect("checked above");
                                out.push(Example {
                                    inputs: vec![(i, side)],
                                    target: Target::Score(T::lit(s.value() as f64)),
                                });
                            }
                        }
                    }
                }
            }
        }
        HeadKind::MeanVariance => match config.meanvar_loss {
            MeanVarLoss::Kl => {
                let eta = T::lit(config.eta);
                for (i, pair) in pairs.iter().enumerate() {
                    let dist = match mode {
                        LabelMode::Aggregated => {
                            let mut probs = [T::zero(); 5];
                            probs[aggregate_majority(&pair.judgments).class_index()] = T::one();
                            LabelDistribution::from_probs_unchecked(probs)
                        }
                        LabelMode::All => empirical_label_distribution(&pair.judgments)?,
                    };
                    out.push(Example {
                        inputs: vec![(i, Side::A), (i, Side::B)],
                        target: Target::Labels {
                            dist,
                            rho: make_rho(&pair.judgments, eta)?,
                        },
                    });
                }
            }
            MeanVarLoss::Nll => {
                for (i, pair) in pairs.iter().enumerate() {
                    for label in labels_for(pair, mode).into_iter().filter(|l| !l.is_tie()) {
                        out.push(Example {
                            inputs: ordered(i, label),
                            target: Target::Prefers,
                        });
                    }
                }
            }
        },
        HeadKind::Classification => {
            require_scores(kind, pairs)?;
            for (i, pair) in pairs.iter().enumerate() {
                for side in [Side::A, Side::B] {
                    let dist = match mode {
                        LabelMode::Aggregated => {
                            let rounded = (mean_score(pair, side) + 0.5).floor().clamp(1.0, 5.0) as u8;
                            LikertDistribution::point_mass(rounded)?
                        }
                        LabelMode::All => empirical_likert_distribution(&pair.judgments, side)?,
                    };
                    out.push(Example {
                        inputs: vec![(i, side)],
                        target: Target::Likert(dist),
                    });
                }
            }
        }
    }
    Ok(out)
}
