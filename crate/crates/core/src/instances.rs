//! Random mixed batches with known latent labels.
//!
//! Similarities are `exp(−(y_i − y_j)² / (2·width²))`, so every row decays
//! monotonically with label distance and the label order is the correct
//! seriation. The Laplace kernel `exp(−|Δy|)` is avoided: it makes every
//! unlabeled row outside the labeled range score identically.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::seriation::MixedBatchLayout;

/// A labeled-first similarity matrix and the labels that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedInstance {
    pub similarity: SymMatrix,
    pub layout: MixedBatchLayout,
    /// Latent labels for all `m + n` rows.
    pub labels: Vec<f64>,
}

impl MixedInstance {
    pub fn labeled_labels(&self) -> &[f64] {
        &self.labels[..self.layout.labeled()]
    }

    pub fn unlabeled_labels(&self) -> &[f64] {
        &self.labels[self.layout.labeled()..]
    }
}

/// `exp(−(y_i − y_j)² / (2·width²))` for all pairs.
pub fn label_similarity(labels: &[f64], width: f64) -> SymMatrix {
    SymMatrix::from_fn(labels.len(), |i, j| {
        let d = (labels[i] - labels[j]) / width;
        (-0.5 * d * d).exp()
    })
}

/// Labels on a random grid with consecutive gaps in `[min_gap, 1]`, assigned
/// to rows in random order.
pub fn random_mixed_instance<R: Rng + ?Sized>(
    rng: &mut R,
    labeled: usize,
    unlabeled: usize,
    min_gap: f64,
    width: f64,
) -> Result<MixedInstance> {
    if !(min_gap > 0.0 && min_gap <= 1.0) || !(width > 0.0) {
        return Err(Error::InvalidArgument(format!("need 0 < min_gap ≤ 1 and width > 0, got {min_gap}, {width}")));
    }
    let layout = MixedBatchLayout::new(labeled, unlabeled)?;
    let mut labels = Vec::with_capacity(layout.total());
    let mut y = 0.0;
    for _ in 0..layout.total() {
        labels.push(y);
        y += rng.random_range(min_gap..=1.0);
    }
    labels.shuffle(rng);
    Ok(MixedInstance { similarity: label_similarity(&labels, width), layout, labels })
}

/// Like [`random_mixed_instance`] but two unlabeled rows get labels only
/// `tie_gap` apart, so their relative order is fragile.
pub fn near_tie_instance<R: Rng + ?Sized>(
    rng: &mut R,
    labeled: usize,
    unlabeled: usize,
    tie_gap: f64,
    width: f64,
) -> Result<MixedInstance> {
    if unlabeled < 2 {
        return Err(Error::InvalidLayout("a near tie needs two unlabeled rows".into()));
    }
    let mut inst = random_mixed_instance(rng, labeled, unlabeled, 0.3, width)?;
    let (a, b) = (labeled, labeled + 1);
    inst.labels[b] = inst.labels[a] + tie_gap;
    inst.similarity = label_similarity(&inst.labels, width);
    Ok(inst)
}
