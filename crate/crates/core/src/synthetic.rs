//! Seeded synthetic populations with known structure, used by tests and demos.
//!
//! Every response has a latent quality and may be polarizing. Four annotators in
//! two style groups score responses on a Likert scale; the groups agree except on
//! polarizing responses, which one group loves and the other dislikes. Response
//! features expose a noisy quality estimate and the polarizing flag.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evalsuite::{BenchmarkPrompt, SystemResponse};
use crate::features::{response_id, EmbeddingTable, FeatureVector};
use crate::model::{
    empirical_label_distribution, empirical_likert_distribution, make_rho, HeadKind, HeadParameters, LabelDistribution,
    LikertDistribution, Sample, Target,
};
use crate::prefdata::{AnnotatorJudgment, PreferencePair, Side, Source};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub pairs: usize,
    /// Fraction of pairs with exactly one polarizing response.
    pub divisive_fraction: f64,
    /// Fraction of pairs where both responses are polarizing in the same way.
    pub both_polar_fraction: f64,
    /// Standard deviation of the response-specific part of quality.
    pub quality_scale: f64,
    /// Standard deviation of the quality component shared by a prompt's responses.
    pub prompt_quality_scale: f64,
    /// Score shift a style group applies to polarizing responses.
    pub style_strength: f64,
    /// Per-annotator score noise.
    pub score_noise: f64,
    /// Chance that an annotator ignores the response and gives a uniform random score.
    pub careless_rate: f64,
    /// Noise on the quality feature.
    pub feature_noise: f64,
    /// Pure-noise feature dimensions appended to each vector.
    pub noise_dims: usize,
    pub seed: u64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            pairs: 2000,
            divisive_fraction: 0.25,
            both_polar_fraction: 0.0,
            quality_scale: 0.5,
            prompt_quality_scale: 1.0,
            style_strength: 2.5,
            score_noise: 0.3,
            careless_rate: 0.05,
            feature_noise: 0.5,
            noise_dims: 40,
            seed: 0,
        }
    }
}

impl PopulationConfig {
    pub fn dim(&self) -> usize {
        2 + self.noise_dims
    }
}

/// Style group of each of the four annotators.
pub const GROUPS: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentResponse {
    pub quality: f64,
    pub polar: bool,
}

#[derive(Debug, Clone)]
pub struct Population {
    pub pairs: Vec<PreferencePair>,
    pub embeddings: EmbeddingTable<f64>,
    /// Latent truth per pair, `(a, b)`.
    pub latent: Vec<(LatentResponse, LatentResponse)>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn score(rng: &mut ChaCha8Rng, config: &PopulationConfig, r: LatentResponse, group: f64) -> i64 {
    if config.careless_rate > 0.0 && rng.gen_bool(config.careless_rate) {
        return rng.gen_range(1..=5);
    }
    let style = if r.polar { group * config.style_strength } else { 0.0 };
    let raw = 3.0 + r.quality + style + config.score_noise * normal(rng);
    raw.round().clamp(1.0, 5.0) as i64
}

fn features(rng: &mut ChaCha8Rng, config: &PopulationConfig, r: LatentResponse) -> FeatureVector<f64> {
    let mut v = Vec::with_capacity(config.dim());
    v.push(r.quality + config.feature_noise * normal(rng));
    v.push(if r.polar { 1.0 } else { 0.0 });
    for _ in 0..config.noise_dims {
        v.push(0.5 * normal(rng));
    }
    FeatureVector::new(v).expect("finite features")
}

/// Scores one response from every annotator.
pub fn annotate(rng: &mut ChaCha8Rng, config: &PopulationConfig, r: LatentResponse) -> [i64; 4] {
    GROUPS.map(|g| score(rng, config, r, g))
}

pub fn generate_population(config: &PopulationConfig) -> Result<Population> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut embeddings = EmbeddingTable::new(config.dim());
    let mut pairs = Vec::with_capacity(config.pairs);
    let mut latent = Vec::with_capacity(config.pairs);
    for i in 0..config.pairs {
        let u: f64 = rng.gen();
        let (pa, pb) = if u < config.divisive_fraction {
            if rng.gen_bool(0.5) {
                (true, false)
            } else {
                (false, true)
            }
        } else if u < config.divisive_fraction + config.both_polar_fraction {
            (true, true)
        } else {
            (false, false)
        };
        let shared = config.prompt_quality_scale * normal(&mut rng);
        let a = LatentResponse {
            quality: shared + config.quality_scale * normal(&mut rng),
            polar: pa,
        };
        let b = LatentResponse {
            quality: shared + config.quality_scale * normal(&mut rng),
            polar: pb,
        };
        let sa = annotate(&mut rng, config, a);
        let sb = annotate(&mut rng, config, b);
        let judgments = (0..4)
            .map(|k| AnnotatorJudgment::from_scores(format!("annotator-{k}"), sa[k], sb[k]))
            .collect::<Result<Vec<_>>>()?;
        let id = format!("syn-{i:05}");
        embeddings.insert(response_id(&id, Side::A), features(&mut rng, config, a))?;
        embeddings.insert(response_id(&id, Side::B), features(&mut rng, config, b))?;
        pairs.push(PreferencePair {
            prompt: format!("synthetic prompt {i}"),
            response_a: format!("synthetic response {i} a"),
            response_b: format!("synthetic response {i} b"),
            id,
            judgments,
            source: Source::HelpSteer2,
        });
        latent.push((a, b));
    }
    Ok(Population {
        pairs,
        embeddings,
        latent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub prompts: usize,
    pub systems: usize,
    pub divisive_prompts: usize,
    /// Chance that a response to a divisive prompt is polarizing.
    pub polar_rate: f64,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            prompts: 100,
            systems: 5,
            divisive_prompts: 10,
            polar_rate: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub prompts: Vec<BenchmarkPrompt>,
    pub embeddings: EmbeddingTable<f64>,
    /// Ids of the prompts whose responses were drawn to be polarizing.
    pub planted: Vec<String>,
}

/// A benchmark whose divisive prompts elicit polarizing responses, featurized
/// the same way as [`generate_population`] with `population`'s settings.
pub fn generate_benchmark(config: &BenchmarkConfig, population: &PopulationConfig) -> Result<Benchmark> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut embeddings = EmbeddingTable::new(population.dim());
    let mut order: Vec<usize> = (0..config.prompts).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let divisive: std::collections::BTreeSet<usize> = order.into_iter().take(config.divisive_prompts).collect();
    let mut prompts = Vec::with_capacity(config.prompts);
    let mut planted = Vec::new();
    for i in 0..config.prompts {
        let prompt_id = format!("bench-{i:03}");
        let is_divisive = divisive.contains(&i);
        if is_divisive {
            planted.push(prompt_id.clone());
        }
        let mut responses = Vec::with_capacity(config.systems);
        for s in 0..config.systems {
            let system = format!("system-{s}");
            let r = LatentResponse {
                quality: population.prompt_quality_scale * normal(&mut rng) + population.quality_scale * normal(&mut rng),
                polar: is_divisive && rng.gen_bool(config.polar_rate),
            };
            embeddings.insert(format!("{prompt_id}:{system}"), features(&mut rng, population, r))?;
            responses.push(SystemResponse {
                text: format!("response of {system} to prompt {i}"),
                system,
            });
        }
        prompts.push(BenchmarkPrompt {
            prompt: format!("benchmark prompt {i}"),
            prompt_id,
            responses,
        });
    }
    Ok(Benchmark {
        prompts,
        embeddings,
        planted,
    })
}

/// The five objectives a head can be trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    BradleyTerry,
    Mse,
    MeanVarKl,
    MeanVarNll,
    ClassificationKl,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::BradleyTerry,
        LossKind::Mse,
        LossKind::MeanVarKl,
        LossKind::MeanVarNll,
        LossKind::ClassificationKl,
    ];

    pub fn head_kind(self) -> HeadKind {
        match self {
            LossKind::BradleyTerry => HeadKind::BradleyTerry,
            LossKind::Mse => HeadKind::MseRegression,
            LossKind::MeanVarKl | LossKind::MeanVarNll => HeadKind::MeanVariance,
            LossKind::ClassificationKl => HeadKind::Classification,
        }
    }
}

fn dense(rng: &mut ChaCha8Rng, d: usize) -> FeatureVector<f64> {
    FeatureVector::new((0..d).map(|_| if rng.gen_bool(0.3) { 0.0 } else { normal(rng) }).collect())
        .expect("finite")
}

fn random_judgments(rng: &mut ChaCha8Rng) -> Vec<AnnotatorJudgment> {
    let n = rng.gen_range(1..=5);
    (0..n)
        .map(|k| AnnotatorJudgment::from_scores(format!("r{k}"), rng.gen_range(1..=5), rng.gen_range(1..=5)).unwrap())
        .collect()
}

/// A random head and sample for gradient checking. Fixtures sit away from the
/// non-differentiable points of `|v|` and of the diff-variance clamp.
pub fn gradcheck_fixture(loss: LossKind, rng: &mut ChaCha8Rng) -> (HeadParameters<f64>, Sample<f64>) {
    loop {
        let d = rng.gen_range(2..=6);
        let h = rng.gen_range(2..=5);
        let kind = loss.head_kind();
        let mut head = HeadParameters::init(kind, d, h, rng.gen());
        for b in head.tensors.b1.iter_mut().chain(head.tensors.b2.iter_mut()) {
            *b += 0.5 * normal(rng);
        }
        let judgments = random_judgments(rng);
        let (inputs, target) = match loss {
            LossKind::BradleyTerry => (
                vec![dense(rng, d), dense(rng, d)],
                Target::Preference {
                    prob_first: if rng.gen_bool(0.3) { 0.5 } else { 1.0 },
                },
            ),
            LossKind::Mse => (vec![dense(rng, d)], Target::Score(rng.gen_range(1..=5) as f64)),
            LossKind::MeanVarKl => {
                let dist: LabelDistribution<f64> = empirical_label_distribution(&judgments).unwrap();
                let rho = make_rho(&judgments, rng.gen_range(0.0..1.0)).unwrap();
                (vec![dense(rng, d), dense(rng, d)], Target::Labels { dist, rho })
            }
            LossKind::MeanVarNll => (vec![dense(rng, d), dense(rng, d)], Target::Prefers),
            LossKind::ClassificationKl => {
                let dist: LikertDistribution<f64> = empirical_likert_distribution(&judgments, Side::A).unwrap();
                (vec![dense(rng, d)], Target::Likert(dist))
            }
        };
        let sample = Sample { inputs, target };
        if kind == HeadKind::MeanVariance && !meanvar_well_posed(&head, &sample) {
            continue;
        }
        return (head, sample);
    }
}

fn meanvar_well_posed(head: &HeadParameters<f64>, sample: &Sample<f64>) -> bool {
    let outs: Vec<Vec<f64>> = sample.inputs.iter().map(|x| head.forward_raw(x).unwrap()).collect();
    if outs.iter().any(|o| o[1].abs() < 0.05) {
        return false;
    }
    if let Target::Labels { rho, .. } = sample.target {
        let sa = outs[0][1].abs() + 0.1;
        let sb = outs[1][1].abs() + 0.1;
        if sa * sa + sb * sb - 2.0 * rho * sa * sb < 1e-3 {
            return false;
        }
    }
    true
}
