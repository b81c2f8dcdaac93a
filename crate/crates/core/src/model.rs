//! Two-layer regression network with a normalized feature head.
//!
//! `z = tanh(W₁x + b₁)` is the hidden representation, `z̃ = z/‖z‖` the
//! feature used for cosine similarities, and `ŷ = W₂z + b₂` the prediction.
//! Gradients are written out by hand: losses report gradients with respect
//! to predictions and similarity entries, and [`RegressionModel::backward`]
//! carries them through the normalization and the tanh layer.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::rankdiff::ranking_loss;
use crate::seriation::RankVector;

/// Hidden width used throughout the experiments.
pub const DEFAULT_HIDDEN: usize = 100;

/// Unit-norm feature rows, optionally with labels and predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch {
    features: Array2<f64>,
    labels: Option<Vec<f64>>,
    predictions: Option<Vec<f64>>,
}

impl FeatureBatch {
    /// Normalizes each row of `z` to unit L2 norm.
    pub fn from_raw(mut z: Array2<f64>) -> Result<Self> {
        for (i, mut row) in z.rows_mut().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::ZeroNormFeature(i));
            }
            row.mapv_inplace(|x| x / norm);
        }
        Ok(Self { features: z, labels: None, predictions: None })
    }

    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != self.count() {
            return Err(Error::DimensionMismatch { expected: self.count(), got: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn count(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn predictions(&self) -> Option<&[f64]> {
        self.predictions.as_deref()
    }

    /// Rows `indices`, keeping labels and predictions aligned.
    pub fn select(&self, indices: &[usize]) -> Self {
        let pick = |v: &Vec<f64>| indices.iter().map(|&i| v[i]).collect();
        Self {
            features: self.features.select(Axis(0), indices),
            labels: self.labels.as_ref().map(pick),
            predictions: self.predictions.as_ref().map(pick),
        }
    }
}

/// Cosine similarities `z̃_i · z̃_j`, computed once per unordered pair.
pub fn similarity(batch: &FeatureBatch) -> SymMatrix {
    let z = batch.features();
    SymMatrix::from_fn(batch.count(), |i, j| z.row(i).dot(&z.row(j)))
}

/// Similarities between the rows of two batches (not symmetric in general).
pub fn cross_similarity(a: &FeatureBatch, b: &FeatureBatch) -> Array2<f64> {
    a.features().dot(&b.features().t())
}

/// Network parameters; also used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// `hidden × d_in`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

impl Params {
    pub fn zeros(d_in: usize, hidden: usize) -> Self {
        Self { w1: Array2::zeros((hidden, d_in)), b1: Array1::zeros(hidden), w2: Array1::zeros(hidden), b2: 0.0 }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.d_in(), self.hidden())
    }

    pub fn d_in(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    /// Uniform on `±1/√fan_in` for every layer.
    pub fn init<R: Rng + ?Sized>(d_in: usize, hidden: usize, rng: &mut R) -> Self {
        let a1 = 1.0 / (d_in as f64).sqrt();
        let a2 = 1.0 / (hidden as f64).sqrt();
        let mut draw = |a: f64| rng.random_range(-a..=a);
        let w1 = Array2::from_shape_simple_fn((hidden, d_in), || draw(a1));
        let b1 = Array1::from_shape_simple_fn(hidden, || draw(a1));
        let w2 = Array1::from_shape_simple_fn(hidden, || draw(a2));
        let b2 = draw(a2);
        Self { w1, b1, w2, b2 }
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, c: f64, other: &Params) {
        self.w1.scaled_add(c, &other.w1);
        self.b1.scaled_add(c, &other.b1);
        self.w2.scaled_add(c, &other.w2);
        self.b2 += c * other.b2;
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(&self.b1).chain(&self.w2).all(|v| v.is_finite()) && self.b2.is_finite()
    }

    /// Flattened view in the order `w1, b1, w2, b2`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).copied().chain([self.b2]).collect()
    }

    fn check_shape(&self, other: &Params) -> Result<()> {
        if self.w1.dim() != other.w1.dim() {
            return Err(Error::DimensionMismatch { expected: self.w1.len(), got: other.w1.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Params,
    pub second: Params,
}

impl Adam {
    pub fn new(config: AdamConfig, shape: &Params) -> Self {
        Self { config, step: 0, first: shape.zeros_like(), second: shape.zeros_like() }
    }

    pub fn update(&mut self, params: &mut Params, grad: &Params) -> Result<()> {
        params.check_shape(grad)?;
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let apply = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        ndarray::Zip::from(&mut params.w1)
            .and(&grad.w1)
            .and(&mut self.first.w1)
            .and(&mut self.second.w1)
            .for_each(|p, &g, m, v| apply(p, g, m, v));
        ndarray::Zip::from(&mut params.b1)
            .and(&grad.b1)
            .and(&mut self.first.b1)
            .and(&mut self.second.b1)
            .for_each(|p, &g, m, v| apply(p, g, m, v));
        ndarray::Zip::from(&mut params.w2)
            .and(&grad.w2)
            .and(&mut self.first.w2)
            .and(&mut self.second.w2)
            .for_each(|p, &g, m, v| apply(p, g, m, v));
        apply(&mut params.b2, grad.b2, &mut self.first.b2, &mut self.second.b2);
        Ok(())
    }
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    input: Array2<f64>,
    hidden: Array2<f64>,
    norms: Array1<f64>,
    pub features: FeatureBatch,
    pub predictions: Vec<f64>,
}

impl ForwardPass {
    pub fn hidden(&self) -> &Array2<f64> {
        &self.hidden
    }
}

/// Parameters plus optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub params: Params,
    pub optimizer: Adam,
}

impl RegressionModel {
    pub fn new<R: Rng + ?Sized>(d_in: usize, hidden: usize, adam: AdamConfig, rng: &mut R) -> Self {
        let params = Params::init(d_in, hidden, rng);
        Self::from_params(params, adam)
    }

    pub fn from_params(params: Params, adam: AdamConfig) -> Self {
        let optimizer = Adam::new(adam, &params);
        Self { params, optimizer }
    }

    pub fn d_in(&self) -> usize {
        self.params.d_in()
    }

    pub fn hidden(&self) -> usize {
        self.params.hidden()
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.d_in() {
            return Err(Error::DimensionMismatch { expected: self.d_in(), got: x.ncols() });
        }
        Ok(())
    }

    fn hidden_layer(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = x.dot(&self.params.w1.t());
        z += &self.params.b1;
        z.mapv_inplace(f64::tanh);
        z
    }

    fn head(&self, z: &Array2<f64>) -> Vec<f64> {
        let mut y = z.dot(&self.params.w2);
        y += self.params.b2;
        y.to_vec()
    }

    /// Predictions only; never fails on a zero hidden vector.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.head(&self.hidden_layer(x)))
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<ForwardPass> {
        self.check_input(x)?;
        let hidden = self.hidden_layer(x);
        let predictions = self.head(&hidden);
        let norms = hidden.map_axis(Axis(1), |r| r.dot(&r).sqrt());
        let mut features = FeatureBatch::from_raw(hidden.clone())?;
        features.predictions = Some(predictions.clone());
        Ok(ForwardPass { input: x.to_owned(), hidden, norms, features, predictions })
    }

    /// Parameter gradient given `∂L/∂ŷ` and optionally `∂L/∂z̃`.
    pub fn backward(&self, pass: &ForwardPass, d_pred: &[f64], d_features: Option<&Array2<f64>>) -> Result<Params> {
        let n = pass.predictions.len();
        if d_pred.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: d_pred.len() });
        }
        let d_pred = Array1::from(d_pred.to_vec());
        let z = &pass.hidden;
        let w2 = &self.params.w2;

        // ∂L/∂z from the head
        let mut dz = Array2::from_shape_fn(z.dim(), |(i, k)| d_pred[i] * w2[k]);
        if let Some(df) = d_features {
            if df.dim() != z.dim() {
                return Err(Error::DimensionMismatch { expected: z.len(), got: df.len() });
            }
            let zt = pass.features.features();
            // (I − z̃z̃ᵀ) g / ‖z‖ per row
            for i in 0..n {
                let g = df.row(i);
                let proj = zt.row(i).dot(&g);
                let inv = 1.0 / pass.norms[i];
                for k in 0..z.ncols() {
                    dz[[i, k]] += (g[k] - zt[[i, k]] * proj) * inv;
                }
            }
        }
        let da = &dz * &z.mapv(|v| 1.0 - v * v);
        Ok(Params {
            w1: da.t().dot(&pass.input),
            b1: da.sum_axis(Axis(0)),
            w2: z.t().dot(&d_pred),
            b2: d_pred.sum(),
        })
    }

    /// One optimizer step; fails with [`Error::Diverged`] on a non-finite
    /// gradient or result.
    pub fn apply_gradient(&mut self, grad: &Params) -> Result<()> {
        if !grad.is_finite() {
            return Err(Error::Diverged { epoch: self.optimizer.step as usize, state: Box::new("non-finite gradient".into()) });
        }
        self.optimizer.update(&mut self.params, grad)?;
        if !self.params.is_finite() {
            return Err(Error::Diverged { epoch: self.optimizer.step as usize, state: Box::new("non-finite parameters".into()) });
        }
        Ok(())
    }
}

/// `∂L/∂z̃` for a loss with gradient `g` on the entries of `similarity(z̃)`.
pub fn similarity_feature_grad(features: &FeatureBatch, g: &Array2<f64>) -> Array2<f64> {
    let sym = g + &g.t();
    sym.dot(features.features())
}

/// A loss value and its gradient with respect to the loss input.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<G> {
    pub loss: f64,
    pub grad: G,
}

/// Mean squared error and `∂/∂ŷ = (2/N)(ŷ − y)`.
pub fn loss_sr(pred: &[f64], labels: &[f64]) -> Result<LossGrad<Vec<f64>>> {
    if pred.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: pred.len() });
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(labels).map(|(p, y)| (y - p) * (y - p)).sum::<f64>() / n;
    let grad = pred.iter().zip(labels).map(|(p, y)| 2.0 / n * (p - y)).collect();
    Ok(LossGrad { loss, grad })
}

const MIN_RANKING_BATCH: usize = 3;

fn check_ranking_batch(n: usize) -> Result<()> {
    if n < MIN_RANKING_BATCH {
        return Err(Error::BatchTooSmall { got: n, need: MIN_RANKING_BATCH });
    }
    Ok(())
}

/// Target ranks for anchor `i`, anchor excluded: closer keys rank higher.
///
/// Equally distant keys are ordered as `scores` currently orders them (then
/// by index), so ties in the target never produce a gradient.
fn distance_targets(keys: &[f64], i: usize, scores: &[f64]) -> RankVector {
    let dist: Vec<f64> = others(keys.len(), i).map(|j| -(keys[j] - keys[i]).abs()).collect();
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(scores[a].total_cmp(&scores[b])));
    let mut ranks = vec![0; dist.len()];
    for (pos, &k) in order.iter().enumerate() {
        ranks[k] = pos;
    }
    RankVector::new(ranks).expect("positions form a permutation")
}

fn others(n: usize, i: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |&j| j != i)
}

/// Sum over anchors of the ranking loss between similarity row `i` and
/// the distance ranking of `keys` around `keys[i]`.
fn contrastive(s: &SymMatrix, keys: &[f64], step: f64) -> Result<LossGrad<Array2<f64>>> {
    let n = s.n();
    if keys.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: keys.len() });
    }
    check_ranking_batch(n)?;
    let mut loss = 0.0;
    let mut grad = Array2::zeros((n, n));
    for i in 0..n {
        let row: Vec<f64> = others(n, i).map(|j| s.get(i, j)).collect();
        let r = ranking_loss(&row, &distance_targets(keys, i, &row), step)?;
        loss += r.loss;
        for (j, g) in others(n, i).zip(r.grad) {
            grad[[i, j]] = g;
        }
    }
    Ok(LossGrad { loss, grad })
}

/// Supervised contrastive loss on labeled similarities, averaged over anchors.
pub fn loss_sc(s: &SymMatrix, labels: &[f64], step: f64) -> Result<LossGrad<Array2<f64>>> {
    let LossGrad { loss, mut grad } = contrastive(s, labels, step)?;
    let n = s.n() as f64;
    grad /= n;
    Ok(LossGrad { loss: loss / n, grad })
}

/// Unlabeled contrastive loss against pseudo-ranks, summed over anchors.
pub fn loss_uc(s: &SymMatrix, ranks: &RankVector, step: f64) -> Result<LossGrad<Array2<f64>>> {
    contrastive(s, &ranks.to_f64(), step)
}

/// Unlabeled prediction ranking loss, summed over anchors.
///
/// Row `i` scores each `j ≠ i` by `−|ŷ_j − ŷ_i|`; the gradient reaches
/// both predictions through `sign(ŷ_j − ŷ_i)` with `sign(0) = 0`.
pub fn loss_ur(pred: &[f64], ranks: &RankVector, step: f64) -> Result<LossGrad<Vec<f64>>> {
    let n = pred.len();
    if ranks.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: ranks.len() });
    }
    check_ranking_batch(n)?;
    let keys = ranks.to_f64();
    let sign = |x: f64| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 };
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let w: Vec<f64> = others(n, i).map(|j| -(pred[j] - pred[i]).abs()).collect();
        let r = ranking_loss(&w, &distance_targets(&keys, i, &w), step)?;
        loss += r.loss;
        for (j, g) in others(n, i).zip(r.grad) {
            let s = sign(pred[j] - pred[i]);
            grad[j] -= g * s;
            grad[i] += g * s;
        }
    }
    Ok(LossGrad { loss, grad })
}

/// Balancing weights of the auxiliary losses and the blackbox step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub sc: f64,
    pub uc: f64,
    pub ur: f64,
    pub step: f64,
}

impl LossWeights {
    pub const SUPERVISED: LossWeights = LossWeights { sc: 0.0, uc: 0.0, ur: 0.0, step: crate::rankdiff::DEFAULT_STEP };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sc", self.sc), ("uc", self.uc), ("ur", self.ur)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("loss weight {name} must be finite and non-negative, got {v}")));
            }
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidStep(self.step));
        }
        Ok(())
    }

    pub fn is_supervised(&self) -> bool {
        self.sc == 0.0 && self.uc == 0.0 && self.ur == 0.0
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { sc: 1e-3, uc: 1e-3, ur: 1e-4, step: crate::rankdiff::DEFAULT_STEP }
    }
}

/// Inputs of one combined-loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    /// Supervised regression batch.
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [f64],
    /// Labeled anchors for the supervised contrastive term.
    pub anchors: Option<(ArrayView2<'a, f64>, &'a [f64])>,
    /// Unlabeled rows with their pseudo-ranks.
    pub unlabeled: Option<(ArrayView2<'a, f64>, &'a RankVector)>,
}

/// Value of each term; unused terms are 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub sr: f64,
    pub sc: f64,
    pub uc: f64,
    pub ur: f64,
}

/// `L_SR + λ_SC·L_SC + λ_UC·L_UC + λ_UR·L_UR` and its parameter gradient.
///
/// Terms with zero weight or missing inputs are skipped entirely.
pub fn loss_full(model: &RegressionModel, inputs: &LossInputs<'_>, weights: &LossWeights) -> Result<(LossBreakdown, Params)> {
    weights.validate()?;
    let pass = model.forward(inputs.x)?;
    let sr = loss_sr(&pass.predictions, inputs.y)?;
    let mut grad = model.backward(&pass, &sr.grad, None)?;
    let mut out = LossBreakdown { sr: sr.loss, ..Default::default() };

    if let (Some((ax, ay)), true) = (inputs.anchors, weights.sc > 0.0) {
        let p = model.forward(ax)?;
        let sc = loss_sc(&similarity(&p.features), ay, weights.step)?;
        let d_feat = similarity_feature_grad(&p.features, &(sc.grad * weights.sc));
        grad.add_scaled(1.0, &model.backward(&p, &vec![0.0; ay.len()], Some(&d_feat))?);
        out.sc = sc.loss;
    }

    if let (Some((ux, ranks)), true) = (inputs.unlabeled, weights.uc > 0.0 || weights.ur > 0.0) {
        let p = model.forward(ux)?;
        let mut d_pred = vec![0.0; ranks.len()];
        let mut d_feat = None;
        if weights.uc > 0.0 {
            let uc = loss_uc(&similarity(&p.features), ranks, weights.step)?;
            d_feat = Some(similarity_feature_grad(&p.features, &(uc.grad * weights.uc)));
            out.uc = uc.loss;
        }
        if weights.ur > 0.0 {
            let ur = loss_ur(&p.predictions, ranks, weights.step)?;
            d_pred.iter_mut().zip(&ur.grad).for_each(|(d, g)| *d = weights.ur * g);
            out.ur = ur.loss;
        }
        grad.add_scaled(1.0, &model.backward(&p, &d_pred, d_feat.as_ref())?);
    }

    out.total = out.sr + weights.sc * out.sc + weights.uc * out.uc + weights.ur * out.ur;
    Ok((out, grad))
}
