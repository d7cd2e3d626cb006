//! Mini-batch AdaDelta training with dev-set model selection.

mod adadelta;
mod vectors;

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use adadelta::{adadelta_step, apply_model_grads, AdaDeltaState};
pub use vectors::{load_word_vectors, parse_word_vectors};

use crate::brcnn::{checkpoint, mix_seed, DirectedLabel, LabelSchema, Mode, Model, ModelDims, ModelGrads, Vocab};
use crate::error::{Error, Result};
use crate::evalcli::metrics::{prf1, MetricsReport};
use crate::structreg::{CutStrategy, SdpPath};
use crate::treebank::RelationInstance;

/// Offsets added to the single user-facing seed to derive independent streams.
pub mod seeds {
    pub const INIT: u64 = 0;
    pub const SHUFFLE: u64 = 1;
    pub const DROPOUT: u64 = 2;
    pub const CUT: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const VECTORS: u64 = 5;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    pub keep_prob: f64,
    pub rho: f64,
    pub eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub alpha: f64,
    pub strategy: Option<CutStrategy>,
    pub patience: usize,
    pub dims: ModelDims,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1e-4,
            keep_prob: 0.5,
            rho: 0.95,
            eps: 1e-6,
            epochs: 50,
            batch_size: 16,
            seed: 0,
            alpha: 0.5,
            strategy: None,
            patience: 10,
            dims: ModelDims::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return bad(format!("keep probability must lie in (0, 1], got {}", self.keep_prob));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return bad("epochs, batch size and patience must all be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be a finite non-negative number, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        AdaDeltaState::new(&[], self.rho, self.eps).map(|_| ())
    }
}

/// A training or evaluation item with its path already extracted.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub sent_id: String,
    pub path: SdpPath,
    pub gold: DirectedLabel,
}

/// Extracts the (SR-)SDP for every instance. Instances whose path cannot be
/// built are returned separately with the reason.
pub fn prepare(
    schema: &LabelSchema,
    strategy: Option<&CutStrategy>,
    instances: &[RelationInstance],
) -> (Vec<Example>, Vec<(String, Error)>) {
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for inst in instances {
        let built = (|| {
            let (h1, h2) = inst.entity_heads()?;
            let path = crate::structreg::sr_sdp(&inst.sentence, strategy, h1, h2)?;
            Ok::<_, Error>(Example {
                sent_id: inst.sent_id.clone(),
                path,
                gold: schema.of_instance(inst)?,
            })
        })();
        match built {
            Ok(e) => ok.push(e),
            Err(e) => skipped.push((inst.sent_id.clone(), e)),
        }
    }
    (ok, skipped)
}

/// Word and relation vocabularies from the training sentences.
pub fn build_vocabs(train: &[RelationInstance]) -> (Vocab, Vocab) {
    let tokens = || train.iter().flat_map(|i| i.sentence.tokens.iter());
    (
        Vocab::words(tokens().map(|t| t.form.as_str())),
        Vocab::relations(tokens().map(|t| t.deprel.as_str())),
    )
}

/// Fresh model for `train` under `config`.
pub fn init_model(schema: LabelSchema, train: &[RelationInstance], config: &TrainConfig) -> Model {
    let (words, rels) = build_vocabs(train);
    Model::new(
        schema,
        words,
        rels,
        config.dims,
        config.alpha,
        config.strategy,
        config.seed.wrapping_add(seeds::INIT),
    )
}

/// One pass over `data`; returns the mean per-instance loss.
pub fn train_epoch(
    model: &mut Model,
    state: &mut AdaDeltaState,
    data: &[Example],
    config: &TrainConfig,
    epoch: usize,
) -> Result<f64> {
    train_epoch_with(model, state, data, config, epoch, |_| {})
}

/// [`train_epoch`] with a hook that sees each batch-mean gradient before the update.
pub fn train_epoch_with<F: Fn(&mut ModelGrads)>(
    model: &mut Model,
    state: &mut AdaDeltaState,
    data: &[Example],
    config: &TrainConfig,
    epoch: usize,
    adjust: F,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("no usable training instances".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed.wrapping_add(seeds::SHUFFLE), epoch as u64));
    order.shuffle(&mut rng);
    let dropout_seed = mix_seed(config.seed.wrapping_add(seeds::DROPOUT), epoch as u64);

    let mut total = 0.0;
    for batch in order.chunks(config.batch_size) {
        let m = &*model;
        // per-instance work is independent; collecting keeps instance order so
        // the reduction below is identical for any thread count
        let results: Vec<Result<(f64, ModelGrads)>> = batch
            .par_iter()
            .map(|&i| {
                let mode = Mode::Train {
                    keep: config.keep_prob,
                    seed: mix_seed(dropout_seed, i as u64),
                };
                m.loss_and_grads(&data[i].path, data[i].gold, config.lambda, mode)
            })
            .collect();
        let mut sum = ModelGrads::zeros_like(&model.params);
        for r in results {
            let (loss, g) = r?;
            total += loss;
            sum.add_assign(&g);
        }
        sum.scale(1.0 / batch.len() as f64);
        adjust(&mut sum);
        apply_model_grads(&mut model.params, &sum, state)?;
    }
    if !model.params.all_finite() {
        return Err(Error::NonFinite(format!("parameters after epoch {epoch}")));
    }
    let mean = total / data.len() as f64;
    if !mean.is_finite() {
        return Err(Error::NonFinite(format!("mean loss in epoch {epoch}")));
    }
    Ok(mean)
}

/// Decoded predictions for `data`, in order.
pub fn predict_all(model: &Model, data: &[Example]) -> Result<Vec<DirectedLabel>> {
    data.par_iter()
        .map(|e| model.predict_path(&e.path).map(|p| p.decoded))
        .collect()
}

pub fn evaluate(model: &Model, data: &[Example]) -> Result<MetricsReport> {
    let pred = predict_all(model, data)?;
    let gold: Vec<DirectedLabel> = data.iter().map(|e| e.gold).collect();
    prf1(&pred, &gold, &model.schema)
}

/// Patience-based stopping on a score that should increase.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: Option<f64>,
    pub since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            since_best: 0,
        }
    }

    /// Records a score; true if it strictly improves on the best so far.
    pub fn observe(&mut self, score: f64) -> bool {
        if self.best.is_none_or(|b| score > b) {
            self.best = Some(score);
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev_macro_f1: f64,
    pub seconds: f64,
}

pub const LOG_HEADER: &str = "epoch,mean_loss,dev_macro_f1,seconds";

pub fn log_csv(log: &[EpochRecord]) -> String {
    let mut s = format!("{LOG_HEADER}\n");
    for r in log {
        let _ = writeln!(s, "{},{},{},{:.3}", r.epoch, r.mean_loss, r.dev_macro_f1, r.seconds);
    }
    s
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub best: Model,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Trains for up to `config.epochs` epochs, scoring dev macro-F1 after each.
///
/// With `out_dir`, writes `epoch_<n>.ckpt` every epoch, `best.ckpt` whenever
/// dev F1 improves, and keeps `train_log.csv` current.
pub fn fit(
    model: Model,
    train: &[Example],
    dev: &[Example],
    config: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<FitOutcome> {
    fit_with_progress(model, train, dev, config, out_dir, |_| {})
}

/// [`fit`], calling `progress` after each epoch.
pub fn fit_with_progress<F: FnMut(&EpochRecord)>(
    mut model: Model,
    train: &[Example],
    dev: &[Example],
    config: &TrainConfig,
    out_dir: Option<&Path>,
    mut progress: F,
) -> Result<FitOutcome> {
    config.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::InvalidArgument("training and dev sets must both be non-empty".into()));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    }
    let mut state = AdaDeltaState::for_params(&model.params, config.rho, config.eps)?;
    let mut stopper = EarlyStopping::new(config.patience);
    let mut log = Vec::new();
    let mut best = (model.clone(), 0usize);
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let mean_loss = train_epoch(&mut model, &mut state, train, config, epoch)?;
        let dev_f1 = evaluate(&model, dev)?.macro_f1;
        log.push(EpochRecord {
            epoch,
            mean_loss,
            dev_macro_f1: dev_f1,
            seconds: start.elapsed().as_secs_f64(),
        });
        progress(log.last().expect("just pushed"));
        let improved = stopper.observe(dev_f1);
        if improved {
            best = (model.clone(), epoch);
        }
        if let Some(dir) = out_dir {
            checkpoint::save(&model, &dir.join(format!("epoch_{epoch}.ckpt")))?;
            if improved {
                checkpoint::save(&model, &dir.join("best.ckpt"))?;
            }
            let path = dir.join("train_log.csv");
            std::fs::write(&path, log_csv(&log)).map_err(|e| Error::from(e).in_file(&path))?;
        }
        if stopper.should_stop() {
            stopped_early = epoch < config.epochs;
            break;
        }
    }
    Ok(FitOutcome {
        best: best.0,
        best_epoch: best.1,
        best_dev_f1: stopper.best.unwrap_or(0.0),
        log,
        stopped_early,
    })
}
