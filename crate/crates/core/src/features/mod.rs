//! Feature backbones: hashed n-grams, precomputed embedding files and an HTTP
//! embedding service.

mod embeddings;
mod http;
mod ngram;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use embeddings::{load_embeddings, save_embeddings, EmbeddingTable};
pub use http::{fetch_embeddings, EmbeddingClient, HttpFeaturizer};
pub use ngram::{featurize_ngram, gram_bucket, GramKind, Namespace, NgramConfig, NgramFeaturizer, HASH_SEED};

use crate::error::{Error, Result};
use crate::prefdata::{PreferencePair, Side};
use crate::scalar::Scalar;

/// A dense feature vector of fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature vector has non-finite entries"));
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![T::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Indices and values of the nonzero entries.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, &v)| (i, v))
    }
}

/// The text and identity of one response to featurize.
#[derive(Debug, Clone, Copy)]
pub struct ResponseRef<'a> {
    /// Lookup key for precomputed embeddings, see [`response_id`].
    pub id: &'a str,
    pub prompt: &'a str,
    pub response: &'a str,
}

/// Embedding-file id of one side of a pair: `"<pair id>:a"` or `"<pair id>:b"`.
pub fn response_id(pair_id: &str, side: Side) -> String {
    match side {
        Side::A => format!("{pair_id}:a"),
        Side::B => format!("{pair_id}:b"),
    }
}

/// Maps (prompt, response) inputs to feature vectors of a fixed dimension.
pub trait Featurizer<T: Scalar> {
    fn dim(&self) -> usize;

    fn featurize(&self, item: &ResponseRef<'_>) -> Result<FeatureVector<T>>;

    /// Batch form; order of outputs matches `items`.
    fn featurize_all(&self, items: &[ResponseRef<'_>]) -> Result<Vec<FeatureVector<T>>> {
        items.iter().map(|item| self.featurize(item)).collect()
    }

    /// Description persisted alongside trained heads.
    fn config(&self) -> FeatureConfig;
}

/// Featurizes both responses of every pair, returning `(a, b)` per pair.
pub fn featurize_pairs<T: Scalar, F: Featurizer<T> + ?Sized>(
    featurizer: &F,
    pairs: &[PreferencePair],
) -> Result<Vec<(FeatureVector<T>, FeatureVector<T>)>> {
    let ids: Vec<(String, String)> = pairs
        .iter()
        .map(|p| (response_id(&p.id, Side::A), response_id(&p.id, Side::B)))
        .collect();
    let mut items = Vec::with_capacity(2 * pairs.len());
    for (pair, (ida, idb)) in pairs.iter().zip(&ids) {
        items.push(ResponseRef {
            id: ida,
            prompt: &pair.prompt,
            response: &pair.response_a,
        });
        items.push(ResponseRef {
            id: idb,
            prompt: &pair.prompt,
            response: &pair.response_b,
        });
    }
    let mut vectors = featurizer.featurize_all(&items)?.into_iter();
    let mut out = Vec::with_capacity(pairs.len());
    while let (Some(a), Some(b)) = (vectors.next(), vectors.next()) {
        out.push((a, b));
    }
    Ok(out)
}

/// Serializable description of a feature backbone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FeatureConfig {
    Ngram(NgramConfig),
    File { path: PathBuf, dim: usize },
    Http { endpoint: String, dim: usize },
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        match self {
            FeatureConfig::Ngram(c) => c.dim,
            FeatureConfig::File { dim, .. } | FeatureConfig::Http { dim, .. } => *dim,
        }
    }
}

/// Any of the built-in backbones behind one type.
pub enum AnyFeaturizer<T: Scalar> {
    Ngram(NgramFeaturizer),
    File(EmbeddingTable<T>, PathBuf),
    Http(HttpFeaturizer),
}

impl<T: Scalar> AnyFeaturizer<T> {
    /// Builds the backbone described by `config`, loading embedding files as needed.
    pub fn from_config(config: &FeatureConfig) -> Result<Self> {
        Ok(match config {
            FeatureConfig::Ngram(c) => AnyFeaturizer::Ngram(NgramFeaturizer::new(c.clone())?),
            FeatureConfig::File { path, .. } => AnyFeaturizer::File(load_embeddings(path)?, path.clone()),
            FeatureConfig::Http { endpoint, dim } => {
                AnyFeaturizer::Http(HttpFeaturizer::new(EmbeddingClient::new(endpoint.clone()), Some(*dim)))
            }
        })
    }
}

impl<T: Scalar> Featurizer<T> for AnyFeaturizer<T> {
    fn dim(&self) -> usize {
        match self {
            AnyFeaturizer::Ngram(f) => Featurizer::<T>::dim(f),
            AnyFeaturizer::File(t, _) => t.dim(),
            AnyFeaturizer::Http(f) => Featurizer::<T>::dim(f),
        }
    }

    fn featurize(&self, item: &ResponseRef<'_>) -> Result<FeatureVector<T>> {
        match self {
            AnyFeaturizer::Ngram(f) => f.featurize(item),
            AnyFeaturizer::File(t, _) => t.featurize(item),
            AnyFeaturizer::Http(f) => f.featurize(item),
        }
    }

    fn featurize_all(&self, items: &[ResponseRef<'_>]) -> Result<Vec<FeatureVector<T>>> {
        match self {
            AnyFeaturizer::Ngram(f) => f.featurize_all(items),
            AnyFeaturizer::File(t, _) => t.featurize_all(items),
            AnyFeaturizer::Http(f) => f.featurize_all(items),
        }
    }

    fn config(&self) -> FeatureConfig {
        match self {
            AnyFeaturizer::Ngram(f) => Featurizer::<T>::config(f),
            AnyFeaturizer::File(t, path) => FeatureConfig::File {
                path: path.clone(),
                dim: t.dim(),
            },
            AnyFeaturizer::Http(f) => Featurizer::<T>::config(f),
        }
    }
}
