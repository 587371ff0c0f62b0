//! Head checkpoints as a single JSON object:
//! `{kind, d, h, o, seed, W1, b1, W2, b2, feature_config, train_config_hash}`,
//! with `W1` (`h x d`) and `W2` (`o x h`) as row-major nested arrays. Reals are written
//! in shortest round-trip decimal form, so save/load is lossless.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::head::{HeadKind, HeadParameters, Tensors};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Checkpoint<T> {
    pub kind: HeadKind,
    pub d: usize,
    pub h: usize,
    pub o: usize,
    pub seed: u64,
    #[serde(rename = "W1")]
    pub w1: Vec<Vec<T>>,
    pub b1: Vec<T>,
    #[serde(rename = "W2")]
    pub w2: Vec<Vec<T>>,
    pub b2: Vec<T>,
    pub feature_config: FeatureConfig,
    pub train_config_hash: String,
    /// Divergence-score lambda chosen at training time (mean-variance heads).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(head: &HeadParameters<T>, feature_config: FeatureConfig, train_config_hash: String) -> Self {
        let w1 = (0..head.h).map(|j| (0..head.d).map(|i| head.w1(j, i)).collect()).collect();
        let w2 = (0..head.o()).map(|k| (0..head.h).map(|j| head.w2(k, j)).collect()).collect();
        Self {
            kind: head.kind,
            d: head.d,
            h: head.h,
            o: head.o(),
            seed: head.seed,
            w1,
            b1: head.tensors.b1.clone(),
            w2,
            b2: head.tensors.b2.clone(),
            feature_config,
            train_config_hash,
            lambda: None,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn head(&self) -> Result<HeadParameters<T>> {
        let bad = |what: &str| Error::invalid(format!("checkpoint: {what} has the wrong shape"));
        if self.o != self.kind.output_width() {
            return Err(bad("o"));
        }
        if self.w1.len() != self.h || self.w1.iter().any(|r| r.len() != self.d) {
            return Err(bad("W1"));
        }
        if self.w2.len() != self.o || self.w2.iter().any(|r| r.len() != self.h) {
            return Err(bad("W2"));
        }
        if self.b1.len() != self.h {
            return Err(bad("b1"));
        }
        if self.b2.len() != self.o {
            return Err(bad("b2"));
        }
        let mut head = HeadParameters {
            kind: self.kind,
            d: self.d,
            h: self.h,
            seed: self.seed,
            tensors: Tensors::zeros(self.d, self.h, self.o),
        };
        for (j, row) in self.w1.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                head.set_w1(j, i, v);
            }
        }
        for (k, row) in self.w2.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                head.set_w2(k, j, v);
            }
        }
        head.tensors.b1.clone_from(&self.b1);
        head.tensors.b2.clone_from(&self.b2);
        if !head.tensors.all_finite() {
            return Err(Error::invalid("checkpoint has non-finite parameters"));
        }
        Ok(head)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("malformed checkpoint: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
