//! The ranking operator `rk` and a blackbox-differentiated rank loss.
//!
//! `rk` is piecewise constant, so its true gradient is zero almost
//! everywhere. Following the blackbox-solver scheme, the backward pass
//! re-solves the ranking at an input nudged against the incoming rank
//! gradient and returns the scaled difference of the two solutions, i.e. the
//! gradient of a piecewise-linear interpolation whose resolution is set by
//! the step `λ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seriation::RankVector;

/// Default blackbox step.
pub const DEFAULT_STEP: f64 = 2.0;

/// Ascending ranks with ties broken by index:
/// `rank_i = #{j : w_j < w_i} + #{j < i : w_j == w_i}`.
pub fn rk(w: &[f64]) -> RankVector {
    let mut order: Vec<usize> = (0..w.len()).collect();
    // stable, so equal scores keep index order
    order.sort_by(|&a, &b| w[a].partial_cmp(&w[b]).expect("rk requires finite scores"));
    let mut ranks = vec![0; w.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos;
    }
    RankVector::from_permutation(ranks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankLossResult {
    pub loss: f64,
    /// Gradient with respect to the scores `w`.
    pub grad: Vec<f64>,
}

/// Mean squared rank difference between `rk(w)` and `target`, with a
/// blackbox gradient.
///
/// With `g = (2/n)(rk(w) − target)` the gradient on the rank vector,
/// ascending ranks are the minimizer of `⟨−w, π⟩` over permutations, so the
/// perturbed solve is `rk(w − λg)` and the score gradient is
/// `(rk(w) − rk(w − λg)) / λ`.
pub fn ranking_loss(w: &[f64], target: &RankVector, step: f64) -> Result<RankLossResult> {
    if !(step > 0.0) {
        return Err(Error::InvalidStep(step));
    }
    let n = w.len();
    if target.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: target.len() });
    }
    if n == 0 {
        return Ok(RankLossResult { loss: 0.0, grad: Vec::new() });
    }
    let ranks = rk(w);
    let diff: Vec<f64> = ranks
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&a, &b)| a as f64 - b as f64)
        .collect();
    let nf = n as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / nf;
    if loss == 0.0 {
        return Ok(RankLossResult { loss, grad: vec![0.0; n] });
    }
    let perturbed: Vec<f64> = w.iter().zip(&diff).map(|(wi, d)| wi - step * (2.0 / nf) * d).collect();
    let perturbed_ranks = rk(&perturbed);
    let grad = ranks
        .as_slice()
        .iter()
        .zip(perturbed_ranks.as_slice())
        .map(|(&a, &b)| (a as f64 - b as f64) / step)
        .collect();
    Ok(RankLossResult { loss, grad })
}
