use divpref::evalsuite::{diverging_id_auroc, predict_pairs, preference_accuracy, DivergenceOptions, ResponseOutput};
use divpref::features::{response_id, EmbeddingTable, FeatureConfig, FeatureVector};
use divpref::model::{sample_loss_and_gradient, Checkpoint, HeadKind, HeadParameters, LossSettings};
use divpref::prefdata::{split_dataset, AnnotatorJudgment, PreferenceLabel, PreferencePair, Side, Source};
use divpref::synthetic::{generate_population, gradcheck_fixture, LossKind, Population, PopulationConfig};
use divpref::trainer::*;
use divpref::{EncodedPairs, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_population(seed: u64) -> Population {
    generate_population(&PopulationConfig {
        pairs: 300,
        noise_dims: 4,
        feature_noise: 0.1,
        careless_rate: 0.0,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn encoded(pop: &Population) -> (EncodedPairs<f64>, EncodedPairs<f64>) {
    let split = split_dataset(&pop.pairs, 0, 0, 100).unwrap();
    (
        EncodedPairs::encode(&pop.embeddings, &split.train).unwrap(),
        EncodedPairs::encode(&pop.embeddings, &split.dev).unwrap(),
    )
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-2,
        hidden: 8,
        max_epochs: 3,
        seed: 5,
        ..Default::default()
    }
}

#[test]
fn zero_epochs_returns_initial_parameters() {
    let pop = small_population(1);
    let (tr, dv) = encoded(&pop);
    for kind in [HeadKind::BradleyTerry, HeadKind::MeanVariance, HeadKind::Classification] {
        let cfg = TrainConfig { max_epochs: 0, ..quick_config() };
        let out = train(kind, &tr, &dv, &cfg).unwrap();
        assert_eq!(out.head, HeadParameters::init(kind, tr.dim().unwrap(), cfg.hidden, cfg.seed));
        assert_eq!(out.history.records.len(), 1);
        assert_eq!(out.history.best_checkpoint, 0);
    }
}

#[test]
fn training_is_deterministic() {
    let pop = small_population(2);
    let (tr, dv) = encoded(&pop);
    for kind in [HeadKind::BradleyTerry, HeadKind::MseRegression, HeadKind::MeanVariance, HeadKind::Classification] {
        let a = train(kind, &tr, &dv, &quick_config()).unwrap();
        let b = train(kind, &tr, &dv, &quick_config()).unwrap();
        assert_eq!(a.head, b.head);
        assert_eq!(a.history, b.history);
    }
}

#[test]
fn history_schedule_and_best_index() {
    let pop = small_population(3);
    let (tr, dv) = encoded(&pop);
    let cfg = TrainConfig { batch_size: 16, ..quick_config() };
    let out = train(HeadKind::BradleyTerry, &tr, &dv, &cfg).unwrap();
    let examples = build_examples::<f64>(HeadKind::BradleyTerry, &tr.pairs, &cfg).unwrap().len();
    let steps = examples.div_ceil(16);
    let interval = (0.25 * steps as f64).ceil() as usize;
    let per_epoch = (1..=steps).filter(|s| s % interval == 0 || *s == steps).count();
    let h = &out.history;
    assert_eq!(h.records.len(), 1 + cfg.max_epochs * per_epoch);
    assert!(h.records.windows(2).all(|w| w[0].step < w[1].step));
    assert_eq!(h.records.last().unwrap().step, cfg.max_epochs * steps);
    assert!((h.records.last().unwrap().epoch - cfg.max_epochs as f64).abs() < 1e-12);
    let best = h.records.iter().map(|r| r.dev_metric).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(h.best().dev_metric, best);
    assert_eq!(h.metric, Selection::Accuracy);

    let mv = train(HeadKind::MeanVariance, &tr, &dv, &quick_config()).unwrap();
    let lowest = mv.history.records.iter().map(|r| r.dev_metric).fold(f64::INFINITY, f64::min);
    assert_eq!(mv.history.metric, Selection::Loss);
    assert_eq!(mv.history.best().dev_metric, lowest);
}

fn separable_pairs(n: usize, seed: u64) -> (Vec<PreferencePair>, EmbeddingTable<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(4);
    let mut pairs = Vec::new();
    for i in 0..n {
        let id = format!("sep-{i}");
        let xa: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xb: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let label = if xa[0] > xb[0] { PreferenceLabel::A_SIGNIFICANT } else { PreferenceLabel::B_SIGNIFICANT };
        table.insert(response_id(&id, Side::A), FeatureVector::new(xa).unwrap()).unwrap();
        table.insert(response_id(&id, Side::B), FeatureVector::new(xb).unwrap()).unwrap();
        pairs.push(PreferencePair {
            id,
            prompt: "p".into(),
            response_a: "a".into(),
            response_b: "b".into(),
            judgments: (0..3).map(|k| AnnotatorJudgment::from_label(format!("r{k}"), label)).collect(),
            source: Source::MultiPref,
        });
    }
    (pairs, table)
}

#[test]
fn separable_bt_reaches_high_accuracy() {
    let (train_pairs, t1) = separable_pairs(400, 1);
    let (dev_pairs, t2) = separable_pairs(200, 2);
    let tr = EncodedPairs::encode(&t1, &train_pairs).unwrap();
    let dv = EncodedPairs::encode(&t2, &dev_pairs).unwrap();
    let out = train(HeadKind::BradleyTerry, &tr, &dv, &TrainConfig { learning_rate: 1e-2, ..Default::default() }).unwrap();
    let acc = preference_accuracy(&out.head, &dv).unwrap();
    assert!(acc >= 0.95, "dev accuracy {acc}");
}

#[test]
fn one_small_step_decreases_the_example_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let settings = LossSettings::default();
    for i in 0..50 {
        let loss_kind = LossKind::ALL[i % 5];
        let (head, sample) = gradcheck_fixture(loss_kind, &mut rng);
        let (before, grad) = sample_loss_and_gradient(&head, &settings, &sample).unwrap();
        let mut stepped = head.clone();
        let mut adam = Adam::new(
            AdamSettings {
                learning_rate: 1e-5,
                ..Default::default()
            },
            head.d,
            head.h,
            head.o(),
        );
        adam.step(&mut stepped.tensors, &grad);
        let (after, _) = sample_loss_and_gradient(&stepped, &settings, &sample).unwrap();
        assert!(after < before, "fixture {i} ({loss_kind:?}): {before} -> {after}");
    }
}

#[test]
fn step_zero_dev_metric_ignores_train_labels() {
    let pop = small_population(4);
    let (tr, dv) = encoded(&pop);
    let mut flipped = tr.clone();
    for p in flipped.pairs.iter_mut() {
        for j in p.judgments.iter_mut() {
            *j = j.flipped();
        }
    }
    for kind in [HeadKind::BradleyTerry, HeadKind::MeanVariance] {
        let a = train(kind, &tr, &dv, &quick_config()).unwrap();
        let b = train(kind, &flipped, &dv, &quick_config()).unwrap();
        assert_eq!(a.history.records[0].dev_metric, b.history.records[0].dev_metric);
        assert_ne!(a.head, b.head);
    }
}

#[test]
fn best_checkpoint_reproduces_its_metric() {
    let pop = small_population(5);
    let (tr, dv) = encoded(&pop);
    for (kind, selection) in [
        (HeadKind::BradleyTerry, Selection::Auto),
        (HeadKind::MeanVariance, Selection::Auto),
        (HeadKind::MeanVariance, Selection::Auroc),
        (HeadKind::Classification, Selection::Auto),
    ] {
        let cfg = TrainConfig { selection, ..quick_config() };
        let out = train(kind, &tr, &dv, &cfg).unwrap();
        let recorded = out.history.best().dev_metric;
        let again = DevEvaluator::new(kind, &dv, &cfg).unwrap().metric(&out.head).unwrap();
        assert!((recorded - again).abs() <= 1e-9, "{kind:?}: {recorded} vs {again}");
        let ckpt = Checkpoint::new(&out.head, FeatureConfig::File { path: "x".into(), dim: 6 }, cfg.hash());
        let restored = Checkpoint::<f64>::from_json(&ckpt.to_json()).unwrap().head().unwrap();
        let via_disk = DevEvaluator::new(kind, &dv, &cfg).unwrap().metric(&restored).unwrap();
        assert!((recorded - via_disk).abs() <= 1e-9);
    }
}

#[test]
fn label_compatibility_and_config_errors() {
    let (pairs, table) = separable_pairs(20, 3);
    let data = EncodedPairs::encode(&table, &pairs).unwrap();
    for kind in [HeadKind::MseRegression, HeadKind::Classification] {
        let err = train(kind, &data, &data, &quick_config()).unwrap_err();
        assert!(err.to_string().contains("Likert"), "{err}");
    }
    let bad = TrainConfig { learning_rate: 0.0, ..quick_config() };
    assert!(train(HeadKind::BradleyTerry, &data, &data, &bad).is_err());
    let bad = TrainConfig { batch_size: 0, ..quick_config() };
    assert!(train(HeadKind::BradleyTerry, &data, &data, &bad).is_err());
    let empty = data.subset(&[]);
    assert!(train(HeadKind::BradleyTerry, &empty, &data, &quick_config()).is_err());
}

#[test]
fn non_finite_loss_reports_the_step() {
    let pop = small_population(6);
    let split = split_dataset(&pop.pairs, 0, 0, 100).unwrap();
    let table32 = {
        let mut t = EmbeddingTable::<f32>::new(pop.embeddings.dim());
        for (id, v) in pop.embeddings.iter() {
            let vals: Vec<f32> = v.values().iter().map(|&x| x as f32).collect();
            t.insert(id, FeatureVector::new(vals).unwrap()).unwrap();
        }
        t
    };
    let tr = EncodedPairs::encode(&table32, &split.train).unwrap();
    let dv = EncodedPairs::encode(&table32, &split.dev).unwrap();
    let cfg = TrainConfig { learning_rate: 1e30, ..quick_config() };
    match train(HeadKind::MseRegression, &tr, &dv, &cfg) {
        Err(e @ Error::NonFinite { step, .. }) => {
            assert!(step >= 1);
            assert!(e.is_numerical());
        }
        other => panic!("expected a numerical failure, got {other:?}"),
    }
}

#[test]
fn config_file_round_trip() {
    let cfg = TrainConfig {
        learning_rate: 5e-5,
        eta: 0.5,
        training_label_mode: LabelMode::All,
        meanvar_loss: MeanVarLoss::Nll,
        ..Default::default()
    };
    let text = cfg.to_toml_string();
    assert!(text.contains("learning_rate"));
    assert!(text.contains("training_label_mode = \"all\""));
    assert_eq!(TrainConfig::from_toml_str(&text).unwrap(), cfg);
    let partial = TrainConfig::from_toml_str("batch_size = 4\ncdf_kind = \"exact_normal\"\n").unwrap();
    assert_eq!(partial.batch_size, 4);
    assert_eq!(partial.learning_rate, 1e-3);
    assert!(TrainConfig::from_toml_str("bogus_key = 1").is_err());
    assert!(TrainConfig::from_toml_str("eta = 1.5").is_err());
    assert_ne!(cfg.hash(), TrainConfig::default().hash());
    assert_eq!(cfg.hash(), cfg.clone().hash());
}

fn mv_population(seed: u64, both_polar: f64) -> (EncodedPairs<f64>, EncodedPairs<f64>) {
    let pop = generate_population(&PopulationConfig {
        pairs: 800,
        divisive_fraction: 0.2,
        both_polar_fraction: both_polar,
        careless_rate: 0.0,
        noise_dims: 6,
        feature_noise: 0.1,
        seed,
        ..Default::default()
    })
    .unwrap();
    let split = split_dataset(&pop.pairs, 0, 0, 300).unwrap();
    (
        EncodedPairs::encode(&pop.embeddings, &split.train).unwrap(),
        EncodedPairs::encode(&pop.embeddings, &split.dev).unwrap(),
    )
}

#[test]
fn tune_lambda_contracts() {
    let (tr, dv) = mv_population(7, 0.0);
    let head = train(HeadKind::MeanVariance, &tr, &dv, &quick_config()).unwrap().head;
    assert_eq!(tune_lambda(&head, &dv, &[0.75]).unwrap().best, 0.75);
    let zero = tune_lambda(&head, &dv, &[0.0]).unwrap();
    // lambda 0 ranks by -|mu_A - mu_B| alone
    let outs = predict_pairs(&head, &dv);
    let scores: Vec<f64> = outs
        .iter()
        .map(|o| match (o.a, o.b) {
            (ResponseOutput::Distribution(a), ResponseOutput::Distribution(b)) => -(a.mu - b.mu).abs(),
            _ => unreachable!(),
        })
        .collect();
    let flags = divpref::evalsuite::diverging_flags(&dv.pairs);
    assert_eq!(zero.best_auroc, divpref::evalsuite::auroc(&scores, &flags).unwrap());

    let bt = train(HeadKind::BradleyTerry, &tr, &dv, &quick_config()).unwrap().head;
    assert!(tune_lambda(&bt, &dv, &[1.0]).is_err());
    let calm: Vec<usize> = (0..dv.len()).filter(|&i| !flags[i]).collect();
    match tune_lambda(&head, &dv.subset(&calm), &DEFAULT_LAMBDA_GRID) {
        Err(Error::Degenerate(msg)) => assert!(msg.contains("degenerate dev set")),
        other => panic!("expected degenerate dev set, got {other:?}"),
    }
}

#[test]
fn tune_lambda_picks_grid_max_when_divergence_is_sigma() {
    // mu tracks the quality feature, sigma tracks the polarizing flag
    let (_, dv) = mv_population(8, 0.0);
    let d = dv.dim().unwrap();
    let mut head = HeadParameters::<f64>::zeros(HeadKind::MeanVariance, d, 2);
    head.set_w1(0, 0, 1.0);
    head.set_w1(1, 1, 1.0);
    head.set_w2(0, 0, 1.0);
    head.set_w2(1, 1, 0.3);
    let search = tune_lambda(&head, &dv, &DEFAULT_LAMBDA_GRID).unwrap();
    assert_eq!(search.best, 4.0, "{:?}", search.scores);
    assert!(search.scores.windows(2).all(|w| w[0].1 <= w[1].1));
    let direct = diverging_id_auroc(&head, &dv, &DivergenceOptions::with_lambda(4.0)).unwrap();
    assert_eq!(direct, search.best_auroc);
}

#[test]
fn tune_eta_contracts() {
    let (tr, dv) = mv_population(9, 0.0);
    let cfg = TrainConfig { training_label_mode: LabelMode::All, ..quick_config() };
    let single = tune_eta(&[0.5], &tr, &dv, &cfg, &DEFAULT_LAMBDA_GRID).unwrap();
    assert_eq!(single.best_eta, 0.5);
    let full = tune_eta(&DEFAULT_ETA_GRID, &tr, &dv, &cfg, &DEFAULT_LAMBDA_GRID).unwrap();
    assert!(DEFAULT_ETA_GRID.contains(&full.best_eta));
    assert_eq!(full.results.len(), 3);
    let best = full.results.iter().map(|r| r.auroc).fold(f64::NEG_INFINITY, f64::max);
    let first_best = full.results.iter().find(|r| r.auroc == best).unwrap();
    assert_eq!(first_best.eta, full.best_eta);
    assert!(tune_eta(&[], &tr, &dv, &cfg, &DEFAULT_LAMBDA_GRID).is_err());
}

#[test]
fn tune_eta_prefers_correlation_when_ties_mark_shared_style() {
    // Pairs where both responses polarize the same way draw unanimous ties.
    // Without rho the head must shrink sigma on polarizing responses to fit them.
    let (tr, dv) = mv_population(10, 0.2);
    let cfg = TrainConfig {
        training_label_mode: LabelMode::All,
        max_epochs: 10,
        ..quick_config()
    };
    let search = tune_eta(&DEFAULT_ETA_GRID, &tr, &dv, &cfg, &DEFAULT_LAMBDA_GRID).unwrap();
    assert!(search.best_eta > 0.0, "{:?}", search.results);
}
