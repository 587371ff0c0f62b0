use crate::error::Result;
use crate::features::{featurize_pairs, Featurizer};
use crate::model::SparseFeatures;
use crate::prefdata::PreferencePair;
use crate::scalar::Scalar;

/// Pairs together with the sparse features of both responses, computed once.
#[derive(Debug, Clone)]
pub struct EncodedPairs<T> {
    pub pairs: Vec<PreferencePair>,
    pub features: Vec<(SparseFeatures<T>, SparseFeatures<T>)>,
}

impl<T: Scalar> EncodedPairs<T> {
    pub fn encode<F: Featurizer<T> + ?Sized>(featurizer: &F, pairs: &[PreferencePair]) -> Result<Self> {
        let features = featurize_pairs(featurizer, pairs)?
            .iter()
            .map(|(a, b)| (SparseFeatures::from(a), SparseFeatures::from(b)))
            .collect();
        Ok(Self {
            pairs: pairs.to_vec(),
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.features.first().map(|(a, _)| a.dim())
    }

    /// Same data with every pair's responses exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(PreferencePair::swapped).collect(),
            features: self.features.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
        }
    }
}
