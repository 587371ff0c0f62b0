use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{prompt_divisiveness, response_divisiveness, DivisivenessMode};
use crate::error::{Error, Result};
use crate::features::{Featurizer, ResponseRef};
use crate::model::{softmax5, HeadKind, HeadParameters, LikertDistribution, SparseFeatures};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResponse {
    pub system: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPrompt {
    pub prompt_id: String,
    pub prompt: String,
    pub responses: Vec<SystemResponse>,
}

impl BenchmarkPrompt {
    /// Feature lookup id of one system's response.
    pub fn response_id(&self, system: &str) -> String {
        format!("{}:{}", self.prompt_id, system)
    }
}

pub fn read_benchmark(path: impl AsRef<Path>) -> Result<Vec<BenchmarkPrompt>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let prompt: BenchmarkPrompt = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if prompt.responses.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("prompt '{}' has no responses", prompt.prompt_id),
            });
        }
        out.push(prompt);
    }
    Ok(out)
}

pub fn write_benchmark(mut writer: impl Write, prompts: &[BenchmarkPrompt]) -> std::io::Result<()> {
    for p in prompts {
        let line = serde_json::to_string(p).map_err(std::io::Error::other)?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPrompt {
    pub prompt_id: String,
    pub score: f64,
    /// Divisiveness of each system's response.
    pub responses: Vec<(String, f64)>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisivenessRanking {
    pub entries: Vec<RankedPrompt>,
    pub top_fraction: f64,
    pub mode: DivisivenessMode,
}

impl DivisivenessRanking {
    pub fn flagged(&self) -> impl Iterator<Item = &RankedPrompt> {
        self.entries.iter().filter(|e| e.flagged)
    }
}

pub const DEFAULT_TOP_FRACTION: f64 = 0.05;

/// Ranks prompts by the mean divisiveness of their responses under a
/// classification head, flagging the top `top_fraction` (rounded to the nearest
/// whole prompt).
pub fn rank_prompts<T: Scalar, F: Featurizer<T> + ?Sized>(
    benchmark: &[BenchmarkPrompt],
    head: &HeadParameters<T>,
    featurizer: &F,
    top_fraction: f64,
    mode: DivisivenessMode,
) -> Result<DivisivenessRanking> {
    if benchmark.is_empty() {
        return Err(Error::invalid("benchmark is empty"));
    }
    if head.kind != HeadKind::Classification {
        return Err(Error::invalid(format!(
            "rank_prompts needs a classification head, got {}",
            head.kind.name()
        )));
    }
    if !(0.0..=1.0).contains(&top_fraction) {
        return Err(Error::invalid(format!("top fraction must lie in [0, 1], got {top_fraction}")));
    }
    let mut entries = Vec::with_capacity(benchmark.len());
    for prompt in benchmark {
        if prompt.responses.is_empty() {
            return Err(Error::invalid(format!("prompt '{}' has no responses", prompt.prompt_id)));
        }
        let ids: Vec<String> = prompt.responses.iter().map(|r| prompt.response_id(&r.system)).collect();
        let refs: Vec<ResponseRef> = prompt
            .responses
            .iter()
            .zip(&ids)
            .map(|(r, id)| ResponseRef {
                id,
                prompt: &prompt.prompt,
                response: &r.text,
            })
            .collect();
        let feats = featurizer.featurize_all(&refs)?;
        let mut dists = Vec::with_capacity(feats.len());
        for fv in &feats {
            if fv.dim() != head.d {
                return Err(Error::DimensionMismatch {
                    expected: head.d,
                    actual: fv.dim(),
                });
            }
            let out = head.forward_sparse(&SparseFeatures::from(fv)).output;
            dists.push(LikertDistribution { probs: softmax5(&out) });
        }
        let score = prompt_divisiveness(&dists, mode)?.as_f64();
        let responses = prompt
            .responses
            .iter()
            .zip(&dists)
            .map(|(r, d)| (r.system.clone(), response_divisiveness(d, mode).as_f64()))
            .collect();
        entries.push(RankedPrompt {
            prompt_id: prompt.prompt_id.clone(),
            score,
            responses,
            flagged: false,
        });
    }
    entries.sort_by(|x, y| y.score.total_cmp(&x.score).then_with(|| x.prompt_id.cmp(&y.prompt_id)));
    let flag_count = ((top_fraction * entries.len() as f64).round() as usize).min(entries.len());
    for e in entries.iter_mut().take(flag_count) {
        e.flagged = true;
    }
    Ok(DivisivenessRanking {
        entries,
        top_fraction,
        mode,
    })
}
