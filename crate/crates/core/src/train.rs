//! Training loop for the semi-supervised regressor.
//!
//! Every step fits the full labeled set with the regression loss. When any
//! auxiliary weight is positive it also
//!
//! 1. takes the next cached unlabeled batch and its current selection
//!    (the whole batch on first use),
//! 2. seriates the mixed similarity matrix of freshly drawn labeled anchors
//!    and the selected unlabeled rows to obtain pseudo-ranks,
//! 3. adds the contrastive and ranking terms, updates the parameters, and
//! 4. re-embeds the batch so the before/after features give the variance
//!    matrix whose selection is used the next time the batch comes round.
//!
//! With all auxiliary weights at zero the loop is plain full-batch training.

use std::io::Write;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::{index::sample, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{mae, r2};
use crate::mfsm::{cross_similarities, dp_select};
use crate::model::{loss_full, similarity, AdamConfig, FeatureBatch, LossBreakdown, LossInputs, LossWeights, RegressionModel, DEFAULT_HIDDEN};
use crate::seriation::{cosine_affinity, seriate_anchored, AnchorMode, MixedBatchLayout, RankVector};

/// Epoch budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Paper,
    Fast,
}

impl Profile {
    pub fn epochs(self) -> usize {
        match self {
            Profile::Paper => 100_000,
            Profile::Fast => 20_000,
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "fast" => Ok(Profile::Fast),
            other => Err(Error::InvalidArgument(format!("unknown profile {other:?} (expected paper or fast)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub hidden: usize,
    pub adam: AdamConfig,
    pub weights: LossWeights,
    /// Unlabeled rows per auxiliary step.
    pub unlabeled_batch: usize,
    /// Labeled anchors drawn per auxiliary step.
    pub anchors: usize,
    /// Unlabeled rows kept by the selection.
    pub budget: usize,
    pub anchor_mode: AnchorMode,
    /// Validation metrics are logged every this many steps and at the end.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: Profile::Fast.epochs(),
            hidden: DEFAULT_HIDDEN,
            adam: AdamConfig::default(),
            weights: LossWeights::default(),
            unlabeled_batch: 8,
            anchors: 8,
            budget: 6,
            anchor_mode: AnchorMode::Fiedler,
            eval_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn supervised(&self) -> Self {
        Self { weights: LossWeights { sc: 0.0, uc: 0.0, ur: 0.0, ..self.weights }, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.hidden == 0 || self.eval_every == 0 {
            return Err(Error::InvalidArgument("hidden width and eval interval must be positive".into()));
        }
        if !self.weights.is_supervised() {
            if self.anchors < 3 || self.unlabeled_batch < 3 {
                return Err(Error::BatchTooSmall { got: self.anchors.min(self.unlabeled_batch), need: 3 });
            }
            if self.budget < 3 || self.budget > self.unlabeled_batch {
                return Err(Error::InvalidBudget { budget: self.budget, n: self.unlabeled_batch });
            }
        }
        Ok(())
    }
}

/// Borrowed training and validation arrays.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub labeled_x: ArrayView2<'a, f64>,
    pub labeled_y: &'a [f64],
    pub unlabeled_x: ArrayView2<'a, f64>,
    pub val_x: ArrayView2<'a, f64>,
    pub val_y: &'a [f64],
}

impl TrainData<'_> {
    fn validate(&self, cfg: &TrainConfig) -> Result<()> {
        let d = self.labeled_x.ncols();
        for (name, cols) in [("unlabeled", self.unlabeled_x.ncols()), ("validation", self.val_x.ncols())] {
            if cols != d {
                log::error!("{name} inputs have {cols} columns, labeled have {d}");
                return Err(Error::DimensionMismatch { expected: d, got: cols });
            }
        }
        if self.labeled_y.len() != self.labeled_x.nrows() {
            return Err(Error::DimensionMismatch { expected: self.labeled_x.nrows(), got: self.labeled_y.len() });
        }
        if self.val_y.len() != self.val_x.nrows() {
            return Err(Error::DimensionMismatch { expected: self.val_x.nrows(), got: self.val_y.len() });
        }
        if self.labeled_x.nrows() == 0 {
            return Err(Error::InvalidArgument("no labeled samples".into()));
        }
        if !cfg.weights.is_supervised() {
            if self.labeled_x.nrows() < cfg.anchors {
                return Err(Error::BatchTooSmall { got: self.labeled_x.nrows(), need: cfg.anchors });
            }
            if self.unlabeled_x.nrows() < cfg.unlabeled_batch {
                return Err(Error::BatchTooSmall { got: self.unlabeled_x.nrows(), need: cfg.unlabeled_batch });
            }
        }
        Ok(())
    }
}

/// One metric-log row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: usize,
    pub train_loss: f64,
    pub val_mae: f64,
    pub val_r2: f64,
}

pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[MetricRow]) -> Result<()> {
    writeln!(out, "step,train_loss,val_mae,val_r2")?;
    for r in rows {
        writeln!(out, "{},{:.17e},{:.17e},{:.17e}", r.step, r.train_loss, r.val_mae, r.val_r2)?;
    }
    Ok(())
}

/// Position of a ChaCha generator, enough to rebuild it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self { seed: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos() }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// Everything needed to continue a run bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Parameters and optimizer moments.
    pub model: RegressionModel,
    pub step: usize,
    pub rng_state: RngState,
    /// Unlabeled row indices of each cached batch.
    pub batches: Vec<Vec<usize>>,
    /// Current selection within each batch, `None` before first use.
    pub selections: Vec<Option<Vec<usize>>>,
    pub skipped_aux: usize,
    pub history: Vec<MetricRow>,
}

/// A finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: RegressionModel,
    pub history: Vec<MetricRow>,
    /// Steps whose auxiliary terms were dropped because seriation failed.
    pub skipped_aux: usize,
    pub steps: usize,
}

/// Stateful trainer; [`Trainer::run`] drives it to completion.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    data: TrainData<'a>,
    state: Checkpoint,
    rng: ChaCha8Rng,
    last_loss: LossBreakdown,
}

fn init_stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sampling_stream(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// The initial model a run with `cfg` starts from.
pub fn initial_model(cfg: &TrainConfig, d_in: usize) -> RegressionModel {
    RegressionModel::new(d_in, cfg.hidden, cfg.adam, &mut init_stream(cfg.seed))
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainConfig, data: TrainData<'a>) -> Result<Self> {
        cfg.validate()?;
        data.validate(&cfg)?;
        let model = initial_model(&cfg, data.labeled_x.ncols());
        let mut rng = sampling_stream(cfg.seed);
        let mut batches: Vec<Vec<usize>> = Vec::new();
        if !cfg.weights.is_supervised() {
            let mut order: Vec<usize> = (0..data.unlabeled_x.nrows()).collect();
            order.shuffle(&mut rng);
            // a short tail joins the previous batch so every batch has room to select from
            for chunk in order.chunks(cfg.unlabeled_batch) {
                match batches.last_mut() {
                    Some(prev) if chunk.len() < cfg.budget => prev.extend_from_slice(chunk),
                    _ => batches.push(chunk.to_vec()),
                }
            }
        }
        let selections = vec![None; batches.len()];
        let state = Checkpoint { model, step: 0, rng_state: RngState::capture(&rng), batches, selections, skipped_aux: 0, history: Vec::new() };
        Ok(Self { cfg, data, state, rng, last_loss: LossBreakdown::default() })
    }

    pub fn resume(cfg: TrainConfig, data: TrainData<'a>, checkpoint: Checkpoint) -> Result<Self> {
        cfg.validate()?;
        data.validate(&cfg)?;
        if checkpoint.model.d_in() != data.labeled_x.ncols() {
            return Err(Error::DimensionMismatch { expected: data.labeled_x.ncols(), got: checkpoint.model.d_in() });
        }
        let rng = checkpoint.rng_state.restore();
        Ok(Self { cfg, data, state: checkpoint, rng, last_loss: LossBreakdown::default() })
    }

    pub fn step(&self) -> usize {
        self.state.step
    }

    pub fn model(&self) -> &RegressionModel {
        &self.state.model
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint { rng_state: RngState::capture(&self.rng), ..self.state.clone() }
    }

    /// Pseudo-ranks of `selected` unlabeled rows against `anchor` labeled rows.
    fn pseudo_ranks(&self, anchors: &Array2<f64>, anchor_y: &[f64], selected: &Array2<f64>) -> Result<RankVector> {
        let model = &self.state.model;
        let stacked = ndarray::concatenate(Axis(0), &[anchors.view(), selected.view()]).expect("same width");
        let features = model.forward(stacked.view())?.features;
        let layout = MixedBatchLayout::new(anchors.nrows(), selected.nrows())?;
        Ok(seriate_anchored(&cosine_affinity(&similarity(&features)), layout, anchor_y, self.cfg.anchor_mode)?.mixed.ranks)
    }

    fn dump(&self, reason: &str) -> Error {
        let state = serde_json::to_string(&self.checkpoint()).unwrap_or_else(|e| format!("state unavailable: {e}"));
        Error::Diverged { epoch: self.state.step, state: Box::new(format!("{reason}; checkpoint: {state}")) }
    }

    /// One parameter update.
    pub fn train_step(&mut self) -> Result<LossBreakdown> {
        let cfg = self.cfg;
        let data = self.data;
        let aux = !cfg.weights.is_supervised();

        let mut anchors = None;
        let mut unlabeled = None;
        let mut batch_ctx = None;
        if aux {
            let picks = sample(&mut self.rng, data.labeled_x.nrows(), cfg.anchors).into_vec();
            let ax = data.labeled_x.select(Axis(0), &picks);
            let ay: Vec<f64> = picks.iter().map(|&i| data.labeled_y[i]).collect();

            let b = self.state.step % self.state.batches.len();
            let rows = self.state.batches[b].clone();
            let bx = data.unlabeled_x.select(Axis(0), &rows);
            let local: Vec<usize> = self.state.selections[b].clone().unwrap_or_else(|| (0..rows.len()).collect());
            let sx = bx.select(Axis(0), &local);
            let before = self.state.model.forward(bx.view()).map(|p| p.features);
            match self.pseudo_ranks(&ax, &ay, &sx) {
                Ok(ranks) => unlabeled = Some((sx, ranks)),
                Err(e) => {
                    log::debug!("step {}: auxiliary unlabeled terms skipped: {e}", self.state.step);
                    self.state.skipped_aux += 1;
                }
            }
            anchors = Some((ax, ay));
            batch_ctx = Some((b, bx, before));
        }

        let inputs = LossInputs {
            x: data.labeled_x,
            y: data.labeled_y,
            anchors: anchors.as_ref().map(|(x, y)| (x.view(), y.as_slice())),
            unlabeled: unlabeled.as_ref().map(|(x, r)| (x.view(), r)),
        };
        let (loss, grad) = match loss_full(&self.state.model, &inputs, &cfg.weights) {
            Ok(v) => v,
            Err(Error::ZeroNormFeature(i)) => return Err(self.dump(&format!("zero feature vector at row {i}"))),
            Err(e) => return Err(e),
        };
        if !loss.total.is_finite() {
            return Err(self.dump(&format!("non-finite loss {loss:?}")));
        }
        if let Err(Error::Diverged { .. }) = self.state.model.apply_gradient(&grad) {
            return Err(self.dump("non-finite update"));
        }

        if let Some((b, bx, Ok(before))) = batch_ctx {
            self.state.selections[b] = self.select(&before, bx.view())?;
        }
        self.state.step += 1;
        self.last_loss = loss;
        Ok(loss)
    }

    /// Selection for a batch from its features before and after the update.
    fn select(&self, before: &FeatureBatch, bx: ArrayView2<'_, f64>) -> Result<Option<Vec<usize>>> {
        let after = match self.state.model.forward(bx) {
            Ok(p) => p.features,
            Err(_) => return Ok(None),
        };
        let v = cross_similarities(before, &after)?.variance();
        let budget = self.cfg.budget.min(v.n());
        Ok(Some(dp_select(&v, budget)?.indices))
    }

    pub fn evaluate(&self) -> Result<(f64, f64)> {
        let pred = self.state.model.predict(self.data.val_x)?;
        Ok((mae(&pred, self.data.val_y)?, r2(&pred, self.data.val_y)?))
    }

    fn log_metrics(&mut self) -> Result<()> {
        let (val_mae, val_r2) = self.evaluate()?;
        self.state.history.push(MetricRow { step: self.state.step, train_loss: self.last_loss.total, val_mae, val_r2 });
        Ok(())
    }

    /// Trains until `cfg.epochs` updates have been made.
    pub fn run(mut self) -> Result<TrainOutcome> {
        while self.state.step < self.cfg.epochs {
            self.train_step()?;
            if self.state.step % self.cfg.eval_every == 0 || self.state.step == self.cfg.epochs {
                self.log_metrics()?;
            }
        }
        if self.cfg.weights.is_supervised() || self.state.skipped_aux > 0 {
            log::debug!("run finished: {} steps, {} auxiliary skips", self.state.step, self.state.skipped_aux);
        }
        Ok(TrainOutcome { steps: self.state.step, skipped_aux: self.state.skipped_aux, history: self.state.history, model: self.state.model })
    }

    /// Advances by at most `steps` updates (for checkpointed runs).
    pub fn run_for(&mut self, steps: usize) -> Result<()> {
        let stop = (self.state.step + steps).min(self.cfg.epochs);
        while self.state.step < stop {
            self.train_step()?;
            if self.state.step % self.cfg.eval_every == 0 || self.state.step == self.cfg.epochs {
                self.log_metrics()?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome { steps: self.state.step, skipped_aux: self.state.skipped_aux, history: self.state.history, model: self.state.model }
    }
}

pub fn train(cfg: TrainConfig, data: TrainData<'_>) -> Result<TrainOutcome> {
    Trainer::new(cfg, data)?.run()
}
