//! Hashed word and character n-grams.
//!
//! Word 1-2-grams and character 3-5-grams are extracted from the lowercased,
//! whitespace-normalized prompt and response. Each gram is hashed with 64-bit xxHash
//! under [`HASH_SEED`], prefixed by a namespace byte (`p` prompt, `r` response) and a
//! gram-kind byte, then folded into `dim` buckets with a mask. Response grams count with
//! `response_weight`, prompt grams with `prompt_weight`. The bucket counts are scaled to
//! unit L2 norm.

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh64::xxh64;

use super::{FeatureConfig, FeatureVector, Featurizer, ResponseRef};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Seed of the gram hash. Changing it changes every n-gram feature vector.
pub const HASH_SEED: u64 = 0x6469_7670_7265_6631;

pub const DEFAULT_DIM: usize = 16384;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Namespace {
    Prompt,
    Response,
}

impl Namespace {
    fn tag(self) -> u8 {
        match self {
            Namespace::Prompt => b'p',
            Namespace::Response => b'r',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramKind {
    Word(u8),
    Char(u8),
}

impl GramKind {
    fn tag(self) -> u8 {
        match self {
            GramKind::Word(n) => b'0' + n,
            GramKind::Char(n) => b'a' + n,
        }
    }
}

/// Bucket of a single gram.
pub fn gram_bucket(namespace: Namespace, kind: GramKind, gram: &str, dim: usize) -> usize {
    let mut bytes = Vec::with_capacity(gram.len() + 2);
    bytes.push(namespace.tag());
    bytes.push(kind.tag());
    bytes.extend_from_slice(gram.as_bytes());
    (xxh64(&bytes, HASH_SEED) as usize) & (dim - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub dim: usize,
    pub prompt_weight: f64,
    pub response_weight: f64,
}

impl Default for NgramConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            prompt_weight: 1.0,
            response_weight: 2.0,
        }
    }
}

impl NgramConfig {
    pub fn with_dim(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::invalid(format!("n-gram dimension {dim} is not a power of two >= 2")));
    }
    Ok(())
}

fn accumulate(counts: &mut [f64], namespace: Namespace, text: &str, weight: f64) {
    let dim = counts.len();
    let lowered = text.to_lowercase();
    let words: Vec<&str> = lowered.split_whitespace().collect();
    for w in &words {
        counts[gram_bucket(namespace, GramKind::Word(1), w, dim)] += weight;
    }
    for pair in words.windows(2) {
        let gram = format!("{} {}", pair[0], pair[1]);
        counts[gram_bucket(namespace, GramKind::Word(2), &gram, dim)] += weight;
    }
    let normalized = words.join(" ");
    let chars: Vec<(usize, char)> = normalized.char_indices().collect();
    for n in 3..=5usize {
        for start in 0..chars.len().saturating_sub(n - 1) {
            let begin = chars[start].0;
            let end = chars.get(start + n).map_or(normalized.len(), |c| c.0);
            counts[gram_bucket(namespace, GramKind::Char(n as u8), &normalized[begin..end], dim)] += weight;
        }
    }
}

fn featurize_with<T: Scalar>(config: &NgramConfig, prompt: &str, response: &str) -> FeatureVector<T> {
    let mut counts = vec![0.0f64; config.dim];
    accumulate(&mut counts, Namespace::Prompt, prompt, config.prompt_weight);
    accumulate(&mut counts, Namespace::Response, response, config.response_weight);
    let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
    let values = if norm > 0.0 {
        counts.iter().map(|&c| T::lit(c / norm)).collect()
    } else {
        vec![T::zero(); config.dim]
    };
    FeatureVector { values }
}

/// Hashed n-gram features with the default weights (response 2x, prompt 1x).
pub fn featurize_ngram<T: Scalar>(prompt: &str, response: &str, dim: usize) -> Result<FeatureVector<T>> {
    check_dim(dim)?;
    Ok(featurize_with(&NgramConfig::with_dim(dim), prompt, response))
}

#[derive(Debug, Clone)]
pub struct NgramFeaturizer {
    config: NgramConfig,
}

impl NgramFeaturizer {
    pub fn new(config: NgramConfig) -> Result<Self> {
        check_dim(config.dim)?;
        if !(config.prompt_weight >= 0.0 && config.response_weight >= 0.0) {
            return Err(Error::invalid("n-gram weights must be non-negative"));
        }
        Ok(Self { config })
    }
}

impl<T: Scalar> Featurizer<T> for NgramFeaturizer {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn featurize(&self, item: &ResponseRef<'_>) -> Result<FeatureVector<T>> {
        Ok(featurize_with(&self.config, item.prompt, item.response))
    }

    fn config(&self) -> FeatureConfig {
        FeatureConfig::Ngram(self.config.clone())
    }
}
