use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh64::xxh64;

use super::adam::AdamSettings;
use crate::error::{Error, Result};
use crate::model::{Cdf, CdfKind, HeadKind, LossSettings, DEFAULT_HIDDEN, DEFAULT_SMOOTHING};

/// Which labels become training instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// One instance per pair from the aggregate majority label.
    #[default]
    Aggregated,
    /// Every annotator label is its own instance.
    All,
}

impl FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aggregated" => Ok(Self::Aggregated),
            "all" => Ok(Self::All),
            other => Err(Error::invalid(format!("unknown label mode '{other}'"))),
        }
    }
}

/// Objective for mean-variance heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanVarLoss {
    /// KL from the empirical label distribution to the predicted region probabilities.
    #[default]
    Kl,
    /// Negative log-likelihood of each observed preference, responses independent.
    Nll,
}

impl FromStr for MeanVarLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl" => Ok(Self::Kl),
            "nll" => Ok(Self::Nll),
            other => Err(Error::invalid(format!("unknown mean-variance loss '{other}'"))),
        }
    }
}

/// What Bradley-Terry training does with tie labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieHandling {
    #[default]
    Drop,
    /// Keep ties as a 0.5 soft target.
    Half,
}

/// Dev metric used to pick the best checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Dev loss for mean-variance heads, preference accuracy otherwise.
    #[default]
    Auto,
    Accuracy,
    Loss,
    /// Diverging ID AUROC at `selection_lambda`.
    Auroc,
}

impl Selection {
    pub fn resolve(self, kind: HeadKind) -> Selection {
        match (self, kind) {
            (Selection::Auto, HeadKind::MeanVariance) => Selection::Loss,
            (Selection::Auto, _) => Selection::Accuracy,
            (s, _) => s,
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Selection::Loss)
    }

    pub fn name(self) -> &'static str {
        match self {
            Selection::Auto => "auto",
            Selection::Accuracy => "preference_accuracy",
            Selection::Loss => "loss",
            Selection::Auroc => "diverging_auroc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub eval_interval_epochs: f64,
    pub seed: u64,
    pub eta: f64,
    pub smoothing_eps: f64,
    pub cdf_kind: CdfKind,
    pub logistic_scale: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub training_label_mode: LabelMode,
    pub hidden: usize,
    pub meanvar_loss: MeanVarLoss,
    pub bt_ties: TieHandling,
    pub selection: Selection,
    pub selection_lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 16,
            max_epochs: 10,
            eval_interval_epochs: 0.25,
            seed: 0,
            eta: 0.0,
            smoothing_eps: DEFAULT_SMOOTHING,
            cdf_kind: CdfKind::Logistic,
            logistic_scale: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            training_label_mode: LabelMode::Aggregated,
            hidden: DEFAULT_HIDDEN,
            meanvar_loss: MeanVarLoss::Kl,
            bt_ties: TieHandling::Drop,
            selection: Selection::Auto,
            selection_lambda: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::invalid(msg.to_string())) };
        check(self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning_rate must be > 0")?;
        check(self.batch_size >= 1, "batch_size must be >= 1")?;
        check(self.eval_interval_epochs > 0.0 && self.eval_interval_epochs.is_finite(), "eval_interval_epochs must be > 0")?;
        check((0.0..=1.0).contains(&self.eta), "eta must lie in [0, 1]")?;
        check((0.0..1.0).contains(&self.smoothing_eps), "smoothing_eps must lie in [0, 1)")?;
        check(self.logistic_scale > 0.0 && self.logistic_scale.is_finite(), "logistic_scale must be > 0")?;
        check((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2), "adam decay rates must lie in [0, 1)")?;
        check(self.adam_epsilon > 0.0, "adam_epsilon must be > 0")?;
        check(self.hidden >= 1, "hidden must be >= 1")?;
        check(self.selection_lambda >= 0.0, "selection_lambda must be >= 0")?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::invalid(format!("bad training config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn loss_settings(&self) -> LossSettings {
        LossSettings {
            cdf: Cdf {
                kind: self.cdf_kind,
                logistic_scale: self.logistic_scale,
            },
            smoothing_eps: self.smoothing_eps,
        }
    }

    pub fn adam(&self) -> AdamSettings {
        AdamSettings {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
        }
    }

    /// Hex xxh64 of the config's canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", xxh64(json.as_bytes(), 0))
    }
}
