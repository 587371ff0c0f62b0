//! Mini-batch training with periodic dev evaluation, best-checkpoint selection
//! and grid search for `eta` and `lambda`.

mod adam;
mod config;
mod examples;
mod tune;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{Adam, AdamSettings};
pub use config::{LabelMode, MeanVarLoss, Selection, TieHandling, TrainConfig};
pub use examples::{build_examples, Example};
pub use tune::{tune_eta, tune_lambda, EtaSearch, LambdaSearch, DEFAULT_ETA_GRID, DEFAULT_LAMBDA_GRID};

use crate::encode::EncodedPairs;
use crate::error::{Error, Result};
use crate::evalsuite::{diverging_id_auroc, preference_accuracy, DivergenceOptions};
use crate::features::Featurizer;
use crate::model::{sample_loss_sparse, HeadKind, HeadParameters, LossSettings, SparseFeatures, Tensors};
use crate::prefdata::{PreferencePair, Side};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    /// Epochs completed, as a fraction.
    pub epoch: f64,
    /// Mean minibatch loss since the previous record; `None` at step 0.
    pub train_loss: Option<f64>,
    pub dev_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub metric: Selection,
    pub records: Vec<EvalRecord>,
    pub best_checkpoint: usize,
}

impl TrainHistory {
    pub fn best(&self) -> &EvalRecord {
        &self.records[self.best_checkpoint]
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub head: HeadParameters<T>,
    pub history: TrainHistory,
}

fn response<T>(data: &EncodedPairs<T>, i: usize, side: Side) -> &SparseFeatures<T> {
    match side {
        Side::A => &data.features[i].0,
        Side::B => &data.features[i].1,
    }
}

/// Mean loss of `head` over `examples` drawn from `data`.
pub fn mean_loss<T: Scalar>(
    head: &HeadParameters<T>,
    settings: &LossSettings,
    data: &EncodedPairs<T>,
    examples: &[Example<T>],
) -> T {
    let mut total = T::zero();
    for ex in examples {
        let inputs: Vec<&SparseFeatures<T>> = ex.inputs.iter().map(|&(i, s)| response(data, i, s)).collect();
        total += sample_loss_sparse(head, settings, &inputs, &ex.target, None);
    }
    total / T::from_usize_lossy(examples.len())
}

/// Computes the checkpoint-selection metric on a fixed dev set.
pub struct DevEvaluator<'a, T> {
    dev: &'a EncodedPairs<T>,
    selection: Selection,
    settings: LossSettings,
    examples: Vec<Example<T>>,
    lambda: f64,
}

impl<'a, T: Scalar> DevEvaluator<'a, T> {
    pub fn new(kind: HeadKind, dev: &'a EncodedPairs<T>, config: &TrainConfig) -> Result<Self> {
        let selection = config.selection.resolve(kind);
        let examples = if selection == Selection::Loss {
            let ex = build_examples(kind, &dev.pairs, config)?;
            if ex.is_empty() {
                return Err(Error::invalid("dev set yields no loss instances"));
            }
            ex
        } else {
            Vec::new()
        };
        Ok(Self {
            dev,
            selection,
            settings: config.loss_settings(),
            examples,
            lambda: config.selection_lambda,
        })
    }

    pub fn selection(&self) -> Selection {
        self.selection
    }

    pub fn metric(&self, head: &HeadParameters<T>) -> Result<f64> {
        let value = match self.selection {
            Selection::Loss => mean_loss(head, &self.settings, self.dev, &self.examples).as_f64(),
            Selection::Accuracy | Selection::Auto => preference_accuracy(head, self.dev)?,
            Selection::Auroc => diverging_id_auroc(head, self.dev, &DivergenceOptions::with_lambda(self.lambda))?,
        };
        if !value.is_finite() {
            return Err(Error::NonFinite {
                step: 0,
                what: "dev metric".into(),
            });
        }
        Ok(value)
    }
}

fn scale<T: Scalar>(grad: &mut Tensors<T>, factor: T) {
    for buf in grad.buffers_mut() {
        for g in buf.iter_mut() {
            *g *= factor;
        }
    }
}

/// Trains a head of `kind` and returns the parameters of the best dev checkpoint.
pub fn train<T: Scalar>(
    kind: HeadKind,
    train: &EncodedPairs<T>,
    dev: &EncodedPairs<T>,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::invalid("train and dev sets must be non-empty"));
    }
    let d = train.dim().expect("non-empty");
    if let Some(dd) = dev.dim().filter(|&dd| dd != d) {
        return Err(Error::DimensionMismatch { expected: d, actual: dd });
    }
    let examples = build_examples::<T>(kind, &train.pairs, config)?;
    if examples.is_empty() {
        return Err(Error::invalid(format!("no {} training instances in the train set", kind.name())));
    }
    let evaluator = DevEvaluator::new(kind, dev, config)?;
    let selection = evaluator.selection();
    let better = |new: f64, old: f64| if selection.higher_is_better() { new > old } else { new < old };

    let mut head = HeadParameters::init(kind, d, config.hidden, config.seed);
    let settings = config.loss_settings();
    let mut adam = Adam::new(config.adam(), d, config.hidden, head.o());
    let mut grad = Tensors::zeros(d, config.hidden, head.o());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let steps_per_epoch = examples.len().div_ceil(config.batch_size);
    let interval = ((config.eval_interval_epochs * steps_per_epoch as f64).ceil() as usize).max(1);

    let first = evaluator.metric(&head)?;
    let mut records = vec![EvalRecord {
        step: 0,
        epoch: 0.0,
        train_loss: None,
        dev_metric: first,
    }];
    let mut best_head = head.clone();
    let mut best_index = 0;
    let mut step = 0usize;
    let mut running = 0.0f64;
    let mut running_n = 0usize;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            grad.fill_zero();
            let mut loss = T::zero();
            for &e in chunk {
                let ex = &examples[e];
                let inputs: Vec<&SparseFeatures<T>> = ex.inputs.iter().map(|&(i, s)| response(train, i, s)).collect();
                loss += sample_loss_sparse(&head, &settings, &inputs, &ex.target, Some(&mut grad));
            }
            let inv = T::one() / T::from_usize_lossy(chunk.len());
            loss *= inv;
            step += 1;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    step,
                    what: "training loss".into(),
                });
            }
            scale(&mut grad, inv);
            adam.step(&mut head.tensors, &grad);
            if !head.tensors.all_finite() {
                return Err(Error::NonFinite {
                    step,
                    what: "parameters".into(),
                });
            }
            running += loss.as_f64();
            running_n += 1;

            let in_epoch = b + 1;
            if in_epoch % interval == 0 || in_epoch == steps_per_epoch {
                let metric = evaluator.metric(&head).map_err(|e| match e {
                    Error::NonFinite { what, .. } => Error::NonFinite { step, what },
                    other => other,
                })?;
                records.push(EvalRecord {
                    step,
                    epoch: epoch as f64 + in_epoch as f64 / steps_per_epoch as f64,
                    train_loss: Some(running / running_n as f64),
                    dev_metric: metric,
                });
                running = 0.0;
                running_n = 0;
                if better(metric, records[best_index].dev_metric) {
                    best_index = records.len() - 1;
                    best_head = head.clone();
                }
            }
        }
    }
    Ok(TrainOutcome {
        head: best_head,
        history: TrainHistory {
            metric: selection,
            records,
            best_checkpoint: best_index,
        },
    })
}

/// Featurizes raw pairs, then trains.
pub fn train_pairs<T: Scalar, F: Featurizer<T> + ?Sized>(
    kind: HeadKind,
    train_pairs: &[PreferencePair],
    dev_pairs: &[PreferencePair],
    featurizer: &F,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    let tr = EncodedPairs::encode(featurizer, train_pairs)?;
    let dv = EncodedPairs::encode(featurizer, dev_pairs)?;
    train(kind, &tr, &dv, config)
}
