//! Client for an external embedding service.
//!
//! Request body `{"input": [<text>, ...]}`, response body
//! `{"data": [{"embedding": [<real>, ...]}, ...]}` in input order. 2xx is success;
//! 429 and 5xx are transient and retried with exponential backoff.

use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{FeatureConfig, FeatureVector, Featurizer, ResponseRef};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EmbeddingClient {
    pub endpoint: String,
    pub timeout: Duration,
    pub retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub backoff_base: Duration,
    pub batch_size: usize,
}

impl EmbeddingClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(30),
            retries: 3,
            backoff_base: Duration::from_secs(1),
            batch_size: 64,
        }
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    /// Embeds one batch of texts, one vector per text in order.
    pub fn fetch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let body = json!({ "input": texts });
        let mut last_failure = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                thread::sleep(self.backoff_base * 2u32.pow(attempt - 1));
            }
            match agent.post(&self.endpoint).send_json(&body) {
                Ok(resp) => {
                    let parsed: EmbeddingResponse = resp
                        .into_json()
                        .map_err(|e| Error::Http(format!("malformed response body: {e}")))?;
                    if parsed.data.len() != texts.len() {
                        return Err(Error::Http(format!(
                            "service returned {} vectors for {} texts",
                            parsed.data.len(),
                            texts.len()
                        )));
                    }
                    return Ok(parsed.data.into_iter().map(|d| d.embedding).collect());
                }
                Err(ureq::Error::Status(code, _)) if code == 429 || code >= 500 => {
                    last_failure = format!("status {code}");
                }
                Err(ureq::Error::Status(code, _)) => {
                    return Err(Error::Http(format!("status {code}")));
                }
                Err(ureq::Error::Transport(t)) => {
                    last_failure = format!("transport: {t}");
                }
            }
        }
        Err(Error::Http(format!(
            "retries exhausted after {} attempts, last {last_failure}",
            self.retries + 1
        )))
    }
}

/// Embeds `texts` in batches, preserving order and requiring a common dimension.
pub fn fetch_embeddings<T: Scalar>(client: &EmbeddingClient, texts: &[&str]) -> Result<Vec<FeatureVector<T>>> {
    let mut out: Vec<FeatureVector<T>> = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(client.batch_size.max(1)) {
        for raw in client.fetch(chunk)? {
            if let Some(first) = out.first() {
                if first.dim() != raw.len() {
                    return Err(Error::DimensionMismatch {
                        expected: first.dim(),
                        actual: raw.len(),
                    });
                }
            }
            out.push(FeatureVector::new(raw.into_iter().map(T::lit).collect())?);
        }
    }
    Ok(out)
}

/// Service-backed featurizer. The text sent for a response is the prompt and the
/// response separated by a blank line.
#[derive(Debug, Clone)]
pub struct HttpFeaturizer {
    client: EmbeddingClient,
    dim: Option<usize>,
}

impl HttpFeaturizer {
    pub fn new(client: EmbeddingClient, dim: Option<usize>) -> Self {
        Self { client, dim }
    }

    fn text(item: &ResponseRef<'_>) -> String {
        format!("{}\n\n{}", item.prompt, item.response)
    }

    fn check<T: Scalar>(&mut self, vectors: &[FeatureVector<T>]) -> Result<()> {
        if let Some(v) = vectors.first() {
            match self.dim {
                Some(d) if d != v.dim() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        actual: v.dim(),
                    })
                }
                _ => self.dim = Some(v.dim()),
            }
        }
        Ok(())
    }

    /// Probes the service once to learn the embedding dimension.
    pub fn resolve_dim(&mut self) -> Result<usize> {
        if let Some(d) = self.dim {
            return Ok(d);
        }
        let v: Vec<FeatureVector<f64>> = fetch_embeddings(&self.client, &["dimension probe"])?;
        self.check(&v)?;
        Ok(self.dim.unwrap_or(0))
    }
}

impl<T: Scalar> Featurizer<T> for HttpFeaturizer {
    fn dim(&self) -> usize {
        self.dim.unwrap_or(0)
    }

    fn featurize(&self, item: &ResponseRef<'_>) -> Result<FeatureVector<T>> {
        let mut out = self.featurize_all(std::slice::from_ref(item))?;
        Ok(out.remove(0))
    }

    fn featurize_all(&self, items: &[ResponseRef<'_>]) -> Result<Vec<FeatureVector<T>>> {
        let texts: Vec<String> = items.iter().map(Self::text).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vectors: Vec<FeatureVector<T>> = fetch_embeddings(&self.client, &refs)?;
        if let (Some(expected), Some(v)) = (self.dim, vectors.first()) {
            if v.dim() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual: v.dim(),
                });
            }
        }
        Ok(vectors)
    }

    fn config(&self) -> FeatureConfig {
        FeatureConfig::Http {
            endpoint: self.client.endpoint.clone(),
            dim: self.dim.unwrap_or(0),
        }
    }
}
