use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use divpref::evalsuite::{
    diverging_flags, evaluate, histogram_csv, histogram_export, rank_prompts, read_benchmark, DivergenceOptions,
    DivisivenessMode, EvalOptions, GapOrientation,
};
use divpref::features::{
    load_embeddings, AnyFeaturizer, EmbeddingClient, FeatureConfig, Featurizer, HttpFeaturizer, NgramConfig,
    NgramFeaturizer,
};
use divpref::model::{CdfKind, HeadKind};
use divpref::prefdata::{
    classify_agreement, cohen_kappa_quadratic, krippendorff_alpha, load_pairs, masi_distance, read_records,
    split_dataset, write_records, AgreementKind, Annotation, FieldMap, PreferencePair, Schema,
};
use divpref::trainer::{
    train, tune_eta, tune_lambda, LabelMode, TrainConfig, TrainHistory, DEFAULT_ETA_GRID, DEFAULT_LAMBDA_GRID,
};
use divpref::{Checkpoint, Encoded};
use serde::Serialize;

use crate::output::{emit_json, write_atomic};
use crate::{CliError, CliResult, Command, EvalArgs, HistArgs, IngestArgs, RankArgs, StatsArgs, TrainArgs};

pub const EMBED_ENDPOINT: &str = "EMBED_ENDPOINT";

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Stats(a) => stats(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a),
        Command::RankDivisive(a) => rank(a),
        Command::ExportHist(a) => export_hist(a),
    }
}

fn flag<T: FromStr<Err = divpref::Error>>(name: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|e| CliError::Usage(format!("--{name}: {e}")))
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

fn write_pairs(path: &Path, pairs: &[PreferencePair]) -> CliResult<()> {
    let mut buf = Vec::new();
    write_records(&mut buf, pairs).expect("writing to memory");
    write_atomic(path, &buf)
}

#[derive(Serialize)]
struct IngestSummary {
    records: usize,
    train: Option<usize>,
    dev: Option<usize>,
    test: Option<usize>,
}

fn ingest(a: IngestArgs) -> CliResult<()> {
    let splitting = a.train.is_some() || a.dev.is_some() || a.test.is_some();
    if splitting && (a.train.is_none() || a.dev.is_none() || a.test.is_none()) {
        return Err(CliError::Usage("--train, --dev and --test must be given together".into()));
    }
    if !splitting && a.out.is_none() {
        return Err(CliError::Usage("ingest needs --out or --train/--dev/--test".into()));
    }
    let schema = a.schema.as_deref().map(|s| flag::<Schema>("schema", s)).transpose()?;
    let fields = match &a.field_map {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", p.display())))?;
            FieldMap::from_toml(&text)?
        }
        None => FieldMap::default(),
    };
    let pairs = read_records(open(&a.data)?, schema, &fields)?;
    let mut summary = IngestSummary {
        records: pairs.len(),
        train: None,
        dev: None,
        test: None,
    };
    if let Some(out) = &a.out {
        write_pairs(out, &pairs)?;
    }
    if let (Some(tr), Some(dv), Some(te)) = (&a.train, &a.dev, &a.test) {
        let split = split_dataset(&pairs, a.seed, a.test_size, a.dev_size)?;
        write_pairs(tr, &split.train)?;
        write_pairs(dv, &split.dev)?;
        write_pairs(te, &split.test)?;
        summary.train = Some(split.train.len());
        summary.dev = Some(split.dev.len());
        summary.test = Some(split.test.len());
    }
    emit_json(&summary, None)
}

#[derive(Debug, Serialize)]
pub struct StatsReport {
    pub pairs: usize,
    pub judgments: usize,
    pub min_annotators: usize,
    pub max_annotators: usize,
    pub labels: BTreeMap<i8, usize>,
    pub categories: BTreeMap<String, usize>,
    pub diverging_substantial: usize,
    /// Quadratic-weighted kappa pooled over every ordered pair of annotators that
    /// rated the same item; `None` when fewer than two such ratings exist.
    pub kappa: Option<f64>,
    /// `likert` when computed on per-response scores, `label` when on labels shifted to 1-5.
    pub kappa_basis: &'static str,
    /// Krippendorff's alpha with MASI distance over singleton label sets.
    pub alpha: Option<f64>,
}

pub fn dataset_stats(pairs: &[PreferencePair]) -> StatsReport {
    let mut labels: BTreeMap<i8, usize> = (-2..=2).map(|v| (v, 0)).collect();
    let mut categories: BTreeMap<String, usize> =
        AgreementKind::ALL.iter().map(|k| (k.name().to_string(), 0)).collect();
    let mut substantial = 0;
    for p in pairs {
        for l in p.labels() {
            *labels.entry(l.value()).or_default() += 1;
        }
        let c = classify_agreement(&p.judgments);
        *categories.entry(c.kind.name().to_string()).or_default() += 1;
        substantial += c.substantial as usize;
    }

    let likert = !pairs.is_empty() && pairs.iter().all(|p| p.has_scores());
    let mut ratings = Vec::new();
    for p in pairs {
        for (i, x) in p.judgments.iter().enumerate() {
            for (j, y) in p.judgments.iter().enumerate() {
                if i == j {
                    continue;
                }
                match (likert, x.raw_scores, y.raw_scores) {
                    (true, Some((xa, xb)), Some((ya, yb))) => {
                        ratings.push((xa.value(), ya.value()));
                        ratings.push((xb.value(), yb.value()));
                    }
                    _ => ratings.push(((x.label.value() + 3) as u8, (y.label.value() + 3) as u8)),
                }
            }
        }
    }
    let annotations: Vec<Annotation<BTreeSet<i8>>> = pairs
        .iter()
        .flat_map(|p| {
            p.judgments.iter().map(|j| Annotation {
                item: p.id.clone(),
                annotator: j.annotator_id.clone(),
                value: BTreeSet::from([j.label.value()]),
            })
        })
        .collect();

    let counts = pairs.iter().map(|p| p.judgments.len());
    StatsReport {
        pairs: pairs.len(),
        judgments: pairs.iter().map(|p| p.judgments.len()).sum(),
        min_annotators: counts.clone().min().unwrap_or(0),
        max_annotators: counts.max().unwrap_or(0),
        labels,
        categories,
        diverging_substantial: substantial,
        kappa: cohen_kappa_quadratic(&ratings).ok(),
        kappa_basis: if likert { "likert" } else { "label" },
        alpha: krippendorff_alpha(&annotations, masi_distance).ok(),
    }
}

fn stats(a: StatsArgs) -> CliResult<()> {
    let pairs = load_pairs(&a.data)?;
    emit_json(&dataset_stats(&pairs), a.out.as_deref())
}

fn endpoint_override(url: &str) -> String {
    std::env::var(EMBED_ENDPOINT).unwrap_or_else(|_| url.to_string())
}

fn http_featurizer(endpoint: &str, dim: Option<usize>) -> CliResult<AnyFeaturizer<f64>> {
    let mut f = HttpFeaturizer::new(EmbeddingClient::new(endpoint_override(endpoint)), dim);
    f.resolve_dim()?;
    Ok(AnyFeaturizer::Http(f))
}

fn featurizer_from_flags(spec: &str, dim: Option<usize>) -> CliResult<AnyFeaturizer<f64>> {
    if spec == "ngram" {
        let config = NgramConfig::with_dim(dim.unwrap_or(NgramConfig::default().dim));
        let f = NgramFeaturizer::new(config).map_err(|e| CliError::Usage(format!("--dim: {e}")))?;
        return Ok(AnyFeaturizer::Ngram(f));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let table = load_embeddings::<f64>(path)?;
        if let Some(d) = dim {
            if d != table.dim() {
                return Err(divpref::Error::DimensionMismatch {
                    expected: d,
                    actual: table.dim(),
                }
                .into());
            }
        }
        return Ok(AnyFeaturizer::File(table, PathBuf::from(path)));
    }
    if let Some(url) = spec.strip_prefix("http:") {
        return http_featurizer(url, dim);
    }
    Err(CliError::Usage(format!(
        "--features: expected ngram, file:<path> or http:<url>, got {spec:?}"
    )))
}

fn featurizer_from_config(config: &FeatureConfig) -> CliResult<AnyFeaturizer<f64>> {
    match config {
        FeatureConfig::Http { endpoint, dim } => http_featurizer(endpoint, Some(*dim)),
        other => Ok(AnyFeaturizer::from_config(other)?),
    }
}

#[derive(Serialize)]
struct TrainSummary {
    kind: HeadKind,
    out: PathBuf,
    train_pairs: usize,
    dev_pairs: usize,
    feature_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    train_config_hash: String,
    history: TrainHistory,
}

fn train_config(a: &TrainArgs) -> CliResult<TrainConfig> {
    let mut config = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(cdf) = &a.cdf {
        config.cdf_kind = flag::<CdfKind>("cdf", cdf)?;
    }
    if let Some(mode) = &a.label_mode {
        config.training_label_mode = flag::<LabelMode>("label-mode", mode)?;
    }
    if let Some(eta) = a.eta {
        config.eta = eta;
    }
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn train_cmd(a: TrainArgs) -> CliResult<()> {
    let kind = flag::<HeadKind>("kind", &a.kind)?;
    let mut config = train_config(&a)?;
    if let Some(l) = a.lambda {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(CliError::Usage(format!("--lambda must be >= 0, got {l}")));
        }
    }
    let train_pairs = load_pairs(&a.train)?;
    let dev_pairs = load_pairs(&a.dev)?;
    let featurizer = featurizer_from_flags(&a.features, a.dim)?;
    let tr = Encoded::encode(&featurizer, &train_pairs)?;
    let dv = Encoded::encode(&featurizer, &dev_pairs)?;

    let (head, history, eta, lambda) = if kind == HeadKind::MeanVariance {
        let flags = diverging_flags(&dev_pairs);
        let tunable = flags.iter().any(|&f| f) && flags.iter().any(|&f| !f);
        if !tunable && (a.eta.is_none() || a.lambda.is_none()) {
            eprintln!("divpref: warning: dev set has no diverging/non-diverging contrast; eta and lambda fall back to defaults");
        }
        if a.eta.is_none() && tunable {
            let search = tune_eta(&DEFAULT_ETA_GRID, &tr, &dv, &config, &DEFAULT_LAMBDA_GRID)?;
            config.eta = search.best_eta;
            let lambda = a.lambda.unwrap_or(search.best_lambda);
            (search.head, search.history, Some(search.best_eta), Some(lambda))
        } else {
            let outcome = train(kind, &tr, &dv, &config)?;
            let lambda = match a.lambda {
                Some(l) => l,
                None if tunable => tune_lambda(&outcome.head, &dv, &DEFAULT_LAMBDA_GRID)?.best,
                None => DivergenceOptions::default().lambda,
            };
            (outcome.head, outcome.history, Some(config.eta), Some(lambda))
        }
    } else {
        if a.eta.is_some() || a.lambda.is_some() {
            eprintln!("divpref: warning: --eta and --lambda only apply to mean_variance heads");
        }
        let outcome = train(kind, &tr, &dv, &config)?;
        (outcome.head, outcome.history, None, None)
    };

    let hash = config.hash();
    let mut ckpt = Checkpoint::new(&head, featurizer.config(), hash.clone());
    if let Some(l) = lambda {
        ckpt = ckpt.with_lambda(l);
    }
    write_atomic(&a.out, ckpt.to_json().as_bytes())?;
    emit_json(
        &TrainSummary {
            kind,
            out: a.out.clone(),
            train_pairs: tr.len(),
            dev_pairs: dv.len(),
            feature_dim: Featurizer::<f64>::dim(&featurizer),
            eta,
            lambda,
            train_config_hash: hash,
            history,
        },
        None,
    )
}

struct Loaded {
    ckpt: Checkpoint,
    head: divpref::Head,
    featurizer: AnyFeaturizer<f64>,
}

fn load_model(path: &Path) -> CliResult<Loaded> {
    let ckpt = Checkpoint::load(path)?;
    let head = ckpt.head()?;
    let featurizer = featurizer_from_config(&ckpt.feature_config)?;
    let dim = Featurizer::<f64>::dim(&featurizer);
    if dim != head.d {
        return Err(divpref::Error::DimensionMismatch {
            expected: head.d,
            actual: dim,
        }
        .into());
    }
    Ok(Loaded { ckpt, head, featurizer })
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let divisiveness = flag::<DivisivenessMode>("divisiveness", &a.divisiveness)?;
    let orientation = flag::<GapOrientation>("orientation", &a.orientation)?;
    let model = load_model(&a.model)?;
    let test = load_pairs(&a.test)?;
    let data = Encoded::encode(&model.featurizer, &test)?;
    let lambda = a.lambda.or(model.ckpt.lambda).unwrap_or(DivergenceOptions::default().lambda);
    let options = EvalOptions {
        divergence: DivergenceOptions {
            lambda,
            divisiveness,
            ..DivergenceOptions::default()
        },
        bin_width: a.bin_width,
        orientation,
    };
    let report = evaluate(&model.head, &data, &options)?;
    emit_json(&report, a.out.as_deref())
}

fn rank(a: RankArgs) -> CliResult<()> {
    let mode = flag::<DivisivenessMode>("divisiveness", &a.divisiveness)?;
    if !(0.0..=1.0).contains(&a.top_fraction) {
        return Err(CliError::Usage(format!("--top-fraction must lie in [0, 1], got {}", a.top_fraction)));
    }
    let model = load_model(&a.model)?;
    let benchmark = read_benchmark(&a.data)?;
    let ranking = rank_prompts(&benchmark, &model.head, &model.featurizer, a.top_fraction, mode)?;
    emit_json(&ranking, a.out.as_deref())
}

fn export_hist(a: HistArgs) -> CliResult<()> {
    let orientation = flag::<GapOrientation>("orientation", &a.orientation)?;
    let model = load_model(&a.model)?;
    let test = load_pairs(&a.test)?;
    let data = Encoded::encode(&model.featurizer, &test)?;
    let bins = histogram_export(&model.head, &data, a.bin_width, orientation)?;
    write_atomic(&a.out, histogram_csv(&bins).as_bytes())
}
