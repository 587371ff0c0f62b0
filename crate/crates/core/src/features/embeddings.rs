//! Precomputed embeddings, one `{"id": str, "vector": [real, ...]}` object per line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureConfig, FeatureVector, Featurizer, ResponseRef};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Serialize, Deserialize)]
struct EmbeddingRecord<T> {
    id: String,
    vector: Vec<T>,
}

/// Vectors keyed by record id; every vector has the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    dim: usize,
    vectors: BTreeMap<String, FeatureVector<T>>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&FeatureVector<T>> {
        self.vectors.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FeatureVector<T>)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: FeatureVector<T>) -> Result<()> {
        if vector.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.dim(),
            });
        }
        let id = id.into();
        if self.vectors.contains_key(&id) {
            return Err(Error::invalid(format!("duplicate embedding id {id:?}")));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn read(reader: impl BufRead) -> Result<Self> {
        let mut table: Option<Self> = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<embeddings>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let wrap = |e: Error| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            };
            let record: EmbeddingRecord<T> = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: format!("malformed embedding record: {e}"),
            })?;
            let vector = FeatureVector::new(record.vector).map_err(wrap)?;
            table
                .get_or_insert_with(|| Self::new(vector.dim()))
                .insert(record.id, vector)
                .map_err(wrap)?;
        }
        table.ok_or_else(|| Error::invalid("embedding file is empty"))
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        for (id, v) in &self.vectors {
            let record = EmbeddingRecord {
                id: id.clone(),
                vector: v.values().to_vec(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn load_embeddings<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingTable<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::read(BufReader::new(file))
}

pub fn save_embeddings<T: Scalar>(table: &EmbeddingTable<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    table.write(&mut file).map_err(|e| Error::io(path, e))
}

impl<T: Scalar> Featurizer<T> for EmbeddingTable<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn featurize(&self, item: &ResponseRef<'_>) -> Result<FeatureVector<T>> {
        self.get(item.id)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("no embedding for id {:?}", item.id)))
    }

    fn config(&self) -> FeatureConfig {
        FeatureConfig::File {
            path: Default::default(),
            dim: self.dim,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_two_records() {
        let text = "{\"id\":\"x\",\"vector\":[1,2,3,4,5,6,7,8]}\n{\"id\":\"y\",\"vector\":[0,0,0,0,0,0,0,0.5]}\n";
        let t = EmbeddingTable::<f64>::read(text.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 8);
        assert_eq!(t.get("y").unwrap().values()[7], 0.5);
        assert!(t.get("z").is_none());
        // an absent id is an error, never a silently empty vector
        let item = ResponseRef { id: "z", prompt: "", response: "" };
        assert!(t.featurize(&item).is_err());
    }

    #[test]
    fn dimension_mismatch_and_duplicates() {
        let text = "{\"id\":\"x\",\"vector\":[1,2,3,4,5,6,7,8]}\n{\"id\":\"y\",\"vector\":[1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16]}\n";
        let err = EmbeddingTable::<f64>::read(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        let text = "{\"id\":\"x\",\"vector\":[1]}\n{\"id\":\"x\",\"vector\":[2]}\n";
        assert!(EmbeddingTable::<f64>::read(text.as_bytes()).is_err());
    }

    #[test]
    fn save_then_load_is_identity() {
        let mut t = EmbeddingTable::<f64>::new(3);
        t.insert("a", FeatureVector::new(vec![0.1, -2.5e-300, 1.0 / 3.0]).unwrap()).unwrap();
        t.insert("b", FeatureVector::new(vec![f64::MAX, 0.0, -0.0]).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.jsonl");
        save_embeddings(&t, &path).unwrap();
        let back: EmbeddingTable<f64> = load_embeddings(&path).unwrap();
        assert_eq!(t, back);
    }
}
