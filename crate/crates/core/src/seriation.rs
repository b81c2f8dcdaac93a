//! Ordinal ranking recovery from similarity matrices.
//!
//! [`seriate`] ranks the entries of the Laplacian's Fiedler vector, which
//! minimizes the relaxed objective `Σ S_ij (r_i − r_j)²` under `rᵀ1 = 0`,
//! `rᵀr = 1`. [`seriate_mixed`] handles batches whose first `m` rows are
//! labeled: the labeled scores `r` are held fixed and the unlabeled scores
//! minimize the same quadratic form, which has the closed form
//! `r' = −L'⁻¹ L_mᵀ r` with `L'` the unlabeled block and `L_m` the
//! labeled×unlabeled block of the mixed Laplacian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, fiedler, laplacian, norm2, pearson, SymMatrix};
use crate::rankdiff::rk;

/// A permutation of `0..n`; rank 0 belongs to the smallest score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct RankVector(Vec<usize>);

impl RankVector {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        let n = ranks.len();
        let mut seen = vec![false; n];
        for &r in &ranks {
            if r >= n || std::mem::replace(&mut seen[r], true) {
                return Err(Error::InvalidArgument(format!("{ranks:?} is not a permutation of 0..{n}")));
            }
        }
        Ok(Self(ranks))
    }

    /// Caller guarantees `ranks` is a permutation.
    pub(crate) fn from_permutation(ranks: Vec<usize>) -> Self {
        debug_assert!(Self::new(ranks.clone()).is_ok());
        Self(ranks)
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&r| r as f64).collect()
    }

    /// `n − 1 − r` for every rank.
    pub fn reversed(&self) -> Self {
        let n = self.0.len();
        Self(self.0.iter().map(|&r| n - 1 - r).collect())
    }

    /// Equal to `other` or to its reversal.
    pub fn matches_up_to_reversal(&self, other: &RankVector) -> bool {
        self == other || *self == other.reversed()
    }
}

impl TryFrom<Vec<usize>> for RankVector {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RankVector> for Vec<usize> {
    fn from(r: RankVector) -> Self {
        r.0
    }
}

/// Partition of a mixed batch: rows `0..labeled` are labeled, the remaining
/// `unlabeled` rows are not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixedBatchLayout {
    labeled: usize,
    unlabeled: usize,
}

impl MixedBatchLayout {
    pub fn new(labeled: usize, unlabeled: usize) -> Result<Self> {
        if labeled == 0 || unlabeled == 0 {
            return Err(Error::InvalidLayout(format!(
                "need at least one labeled and one unlabeled sample, got m={labeled}, n={unlabeled}"
            )));
        }
        Ok(Self { labeled, unlabeled })
    }

    /// Layout for a matrix of dimension `total` whose first `labeled` rows are labeled.
    pub fn for_matrix(total: usize, labeled: usize) -> Result<Self> {
        if labeled >= total {
            return Err(Error::InvalidLayout(format!("labeled count {labeled} must be below dimension {total}")));
        }
        Self::new(labeled, total - labeled)
    }

    pub fn labeled(&self) -> usize {
        self.labeled
    }

    pub fn unlabeled(&self) -> usize {
        self.unlabeled
    }

    pub fn total(&self) -> usize {
        self.labeled + self.unlabeled
    }

    fn check(&self, s: &SymMatrix) -> Result<()> {
        if s.n() != self.total() {
            return Err(Error::DimensionMismatch { expected: self.total(), got: s.n() });
        }
        Ok(())
    }
}

/// `Σ_{i,j} S_ij (R_i − R_j)²`.
pub fn seriation_objective(s: &SymMatrix, ranks: &RankVector) -> Result<f64> {
    if s.n() != ranks.len() {
        return Err(Error::DimensionMismatch { expected: s.n(), got: ranks.len() });
    }
    let r = ranks.to_f64();
    let n = s.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = r[i] - r[j];
            total += s.get(i, j) * d * d;
        }
    }
    Ok(total)
}

/// Spectral seriation: ranks of the Fiedler vector of `laplacian(s)`.
///
/// The global orientation is arbitrary; only pairwise rank distances are
/// meaningful downstream.
pub fn seriate(s: &SymMatrix) -> Result<RankVector> {
    if s.n() == 1 {
        return Ok(RankVector::identity(1));
    }
    let v = fiedler(&laplacian(s), None)?;
    Ok(rk(&v))
}

/// Maps cosine similarities in `[-1, 1]` to affinities `(1 + s) / 2` in `[0, 1]`.
///
/// The Laplacian of the result is `(L + nI − 11ᵀ) / 2`, which agrees with
/// `L / 2 + n / 2` on vectors orthogonal to `1`, so [`seriate`] returns the
/// same ranking while the Laplacian becomes positive semidefinite.
pub fn cosine_affinity(s: &SymMatrix) -> SymMatrix {
    SymMatrix::from_fn(s.n(), |i, j| 0.5 * (1.0 + s.get(i, j)))
}

/// How the labeled scores `r` are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorMode {
    /// Fiedler vector of the labeled block, oriented to correlate positively with the labels.
    #[default]
    Fiedler,
    /// Centered, unit-norm ranks of the labels themselves.
    LabelRanks,
}

impl std::str::FromStr for AnchorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fiedler" => Ok(Self::Fiedler),
            "label-ranks" | "label_ranks" => Ok(Self::LabelRanks),
            other => Err(Error::InvalidArgument(format!("unknown anchor mode {other:?}"))),
        }
    }
}

/// Labeled-side scores `r` for [`seriate_mixed`].
pub fn anchor_vector(s: &SymMatrix, layout: MixedBatchLayout, labels: &[f64], mode: AnchorMode) -> Result<Vec<f64>> {
    layout.check(s)?;
    let m = layout.labeled();
    if labels.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: labels.len() });
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(Error::ZeroVarianceLabels);
    }
    match mode {
        AnchorMode::Fiedler => {
            if m < 2 {
                return Err(Error::DegenerateFiedler { gap: 0.0 });
            }
            let block = s.principal_block(0..m);
            let mut r = fiedler(&laplacian(&block), None)?;
            if pearson(&r, labels) < 0.0 {
                r.iter_mut().for_each(|x| *x = -*x);
            }
            Ok(r)
        }
        AnchorMode::LabelRanks => {
            let ranks = rk(labels).to_f64();
            let mean = ranks.iter().sum::<f64>() / m as f64;
            let centered: Vec<f64> = ranks.iter().map(|x| x - mean).collect();
            let norm = norm2(&centered);
            Ok(centered.into_iter().map(|x| x / norm).collect())
        }
    }
}

/// Output of [`seriate_mixed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedSeriation {
    /// Ranks of the unlabeled items.
    pub ranks: RankVector,
    /// Relaxed unlabeled scores `r'`.
    pub scores: Vec<f64>,
}

/// Smallest admissible eigenvalue of the (ridged) unlabeled block.
pub const SINGULAR_BLOCK_TOL: f64 = 1e-10;

/// Closed-form unlabeled scores with the labeled scores `r` held fixed.
pub fn seriate_mixed(s: &SymMatrix, layout: MixedBatchLayout, r: &[f64]) -> Result<MixedSeriation> {
    seriate_mixed_ridged(s, layout, r, 0.0)
}

/// [`seriate_mixed`] with `ridge·I` added to the unlabeled block.
pub fn seriate_mixed_ridged(s: &SymMatrix, layout: MixedBatchLayout, r: &[f64], ridge: f64) -> Result<MixedSeriation> {
    layout.check(s)?;
    let (m, n) = (layout.labeled(), layout.unlabeled());
    if r.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: r.len() });
    }
    let l = laplacian(s);
    let unlabeled = l.principal_block(m..m + n).shifted(ridge);
    let cross = l.block(0..m, m..m + n);
    // rhs = −L_mᵀ r
    let rhs: Vec<f64> = (0..n).map(|k| -(0..m).map(|i| cross[[i, k]] * r[i]).sum::<f64>()).collect();

    let eig = eig_sym(&unlabeled)?;
    if eig.values[0] <= SINGULAR_BLOCK_TOL {
        return Err(Error::SingularUnlabeledBlock { min_eigenvalue: eig.values[0] });
    }
    let mut scores = vec![0.0; n];
    for (i, &lambda) in eig.values.iter().enumerate() {
        let alpha = eig.vectors.column(i);
        let coeff = alpha.iter().zip(&rhs).map(|(a, b)| a * b).sum::<f64>() / lambda;
        for (sk, ak) in scores.iter_mut().zip(alpha.iter()) {
            *sk += coeff * ak;
        }
    }
    Ok(MixedSeriation { ranks: rk(&scores), scores })
}

/// Ridge used when the unlabeled block is singular: `1e-8 · trace(L') / n`.
pub fn repair_ridge(s: &SymMatrix, layout: MixedBatchLayout) -> Result<f64> {
    layout.check(s)?;
    let m = layout.labeled();
    let l = laplacian(s);
    let block = l.principal_block(m..layout.total());
    Ok(1e-8 * block.trace() / layout.unlabeled() as f64)
}

/// Result of [`seriate_anchored`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredSeriation {
    pub anchor: Vec<f64>,
    pub mixed: MixedSeriation,
    /// Ridge added after a singular-block failure, if any.
    pub ridge: Option<f64>,
}

/// Anchor vector plus mixed seriation, retrying once with [`repair_ridge`]
/// when the unlabeled block is singular.
pub fn seriate_anchored(
    s: &SymMatrix,
    layout: MixedBatchLayout,
    labels: &[f64],
    mode: AnchorMode,
) -> Result<AnchoredSeriation> {
    let anchor = anchor_vector(s, layout, labels, mode)?;
    match seriate_mixed(s, layout, &anchor) {
        Ok(mixed) => Ok(AnchoredSeriation { anchor, mixed, ridge: None }),
        Err(Error::SingularUnlabeledBlock { min_eigenvalue }) => {
            let ridge = repair_ridge(s, layout)?;
            log::warn!("unlabeled block singular (λ₁ = {min_eigenvalue:e}); retrying with ridge {ridge:e}");
            let mixed = seriate_mixed_ridged(s, layout, &anchor, ridge)?;
            Ok(AnchoredSeriation { anchor, mixed, ridge: Some(ridge) })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use itertools::Itertools;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn affinity_keeps_the_spectral_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut compared = 0;
        for _ in 0..50 {
            let n = rng.random_range(3..9);
            let upper = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
            let s = SymMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { upper[[i.min(j), i.max(j)]] });
            let a = cosine_affinity(&s);
            assert!(eig_sym(&laplacian(&a)).unwrap().values[0] > -1e-12);
            let Ok(raw) = eig_sym(&laplacian(&s)) else { continue };
            // on the raw matrix the minimizer over r ⊥ 1 is the lowest eigenvector orthogonal to 1
            let ones = vec![1.0 / (n as f64).sqrt(); n];
            let best = (0..n)
                .map(|k| raw.vectors.column(k).to_vec())
                .find(|v| v.iter().zip(&ones).map(|(x, o)| x * o).sum::<f64>().abs() < 1e-6)
                .unwrap();
            if let Ok(r) = seriate(&a) {
                let expected = rk(&best);
                assert!(r.matches_up_to_reversal(&expected), "{r:?} vs {expected:?}");
                compared += 1;
            }
        }
        assert!(compared > 30);
    }

    fn label_similarity(y: &[f64]) -> SymMatrix {
        SymMatrix::from_fn(y.len(), |i, j| (-(y[i] - y[j]).abs()).exp())
    }

    fn brute_force_minimum(s: &SymMatrix) -> f64 {
        (0..s.n())
            .permutations(s.n())
            .map(|p| seriation_objective(s, &RankVector::new(p).unwrap()).unwrap())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn rank_vector_validation() {
        assert!(RankVector::new(vec![2, 0, 1]).is_ok());
        assert!(RankVector::new(vec![0, 0, 1]).is_err());
        assert!(RankVector::new(vec![0, 3, 1]).is_err());
        let r: std::result::Result<RankVector, _> = serde_json::from_str("[1,1]");
        assert!(r.is_err());
    }

    #[test]
    fn layout_validation() {
        assert!(MixedBatchLayout::new(0, 3).is_err());
        assert!(MixedBatchLayout::new(3, 0).is_err());
        assert_eq!(MixedBatchLayout::for_matrix(7, 3).unwrap().unlabeled(), 4);
        assert!(MixedBatchLayout::for_matrix(3, 3).is_err());
    }

    #[test]
    fn objective_examples() {
        let r = RankVector::new(vec![2, 0, 1]).unwrap();
        assert_eq!(seriation_objective(&SymMatrix::identity(3), &r).unwrap(), 0.0);
        let s = SymMatrix::new(array![[1.0, 0.9], [0.9, 1.0]]).unwrap();
        assert_abs_diff_eq!(seriation_objective(&s, &RankVector::identity(2)).unwrap(), 1.8, epsilon = 1e-15);
    }

    #[test]
    fn identity_ranking_minimizes_monotone_objective() {
        let y = [0.0, 1.0, 2.5, 3.0, 4.2];
        let s = label_similarity(&y);
        let best = brute_force_minimum(&s);
        assert_abs_diff_eq!(seriation_objective(&s, &RankVector::identity(5)).unwrap(), best, epsilon = 1e-12);
    }

    #[test]
    fn two_items_either_orientation() {
        let s = SymMatrix::new(array![[1.0, 0.3], [0.3, 1.0]]).unwrap();
        assert!(seriate(&s).unwrap().matches_up_to_reversal(&RankVector::identity(2)));
    }

    #[test]
    fn recovers_label_order() {
        let y = [1.0, 5.0, 2.0, 9.0, 3.0];
        let got = seriate(&label_similarity(&y)).unwrap();
        assert!(got.matches_up_to_reversal(&rk(&y)), "{got:?}");
    }

    #[test]
    fn matches_exhaustive_minimizer_for_eight_items() {
        let y = [0.3, 2.9, 1.1, 4.0, 0.0, 5.2, 3.3, 1.8];
        let s = label_similarity(&y);
        let got = seriate(&s).unwrap();
        let best = brute_force_minimum(&s);
        assert_abs_diff_eq!(seriation_objective(&s, &got).unwrap(), best, epsilon = 1e-9);
    }

    #[test]
    fn scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let y: Vec<f64> = (0..7).map(|_| rng.random_range(0.0..10.0)).collect();
            let s = label_similarity(&y);
            let c = rng.random_range(0.01..100.0);
            assert_eq!(seriate(&s).unwrap(), seriate(&s.scaled(c)).unwrap());
        }
    }

    #[test]
    fn reversal_preserves_rank_distances() {
        let r = RankVector::new(vec![3, 0, 4, 1, 2]).unwrap();
        let rev = r.reversed();
        for i in 0..5 {
            for j in 0..5 {
                let a = (r.as_slice()[i] as i64 - r.as_slice()[j] as i64).abs();
                let b = (rev.as_slice()[i] as i64 - rev.as_slice()[j] as i64).abs();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn label_rank_anchor() {
        let s = SymMatrix::identity(4);
        let layout = MixedBatchLayout::new(3, 1).unwrap();
        let r = anchor_vector(&s, layout, &[10.0, 20.0, 30.0], AnchorMode::LabelRanks).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(r[0], -h, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[2], h, epsilon = 1e-15);
    }

    #[test]
    fn fiedler_anchor_follows_labels() {
        let y = [0.5, 3.0, 1.2, 2.2, 9.0, 7.0];
        let s = label_similarity(&y);
        let layout = MixedBatchLayout::new(4, 2).unwrap();
        let r = anchor_vector(&s, layout, &y[..4], AnchorMode::Fiedler).unwrap();
        assert_eq!(rk(&r), rk(&y[..4]));
    }

    #[test]
    fn constant_labels_rejected() {
        let layout = MixedBatchLayout::new(3, 1).unwrap();
        let s = SymMatrix::from_fn(4, |_, _| 0.5);
        for mode in [AnchorMode::Fiedler, AnchorMode::LabelRanks] {
            assert!(matches!(anchor_vector(&s, layout, &[5.0, 5.0, 5.0], mode), Err(Error::ZeroVarianceLabels)));
        }
    }

    #[test]
    fn single_unlabeled_item() {
        let s = SymMatrix::from_fn(4, |i, j| if i == j { 1.0 } else { 0.4 });
        let layout = MixedBatchLayout::new(3, 1).unwrap();
        let out = seriate_mixed(&s, layout, &[0.3, -0.1, 0.9]).unwrap();
        assert_eq!(out.ranks, RankVector::identity(1));
    }

    #[test]
    fn mixed_recovers_unlabeled_order() {
        let y = [2.0, 6.0, 10.0, 1.0, 7.5, 4.0, 11.0];
        let s = label_similarity(&y);
        let layout = MixedBatchLayout::new(3, 4).unwrap();
        let r = anchor_vector(&s, layout, &y[..3], AnchorMode::LabelRanks).unwrap();
        let out = seriate_mixed(&s, layout, &r).unwrap();
        assert_eq!(out.ranks, rk(&y[3..]));
    }

    #[test]
    fn negated_anchor_negates_scores() {
        let y = [2.0, 6.0, 10.0, 1.0, 7.5, 4.0];
        let s = label_similarity(&y);
        let layout = MixedBatchLayout::new(3, 3).unwrap();
        let r = [-0.6, 0.1, 0.5];
        let neg: Vec<f64> = r.iter().map(|x| -x).collect();
        let a = seriate_mixed(&s, layout, &r).unwrap();
        let b = seriate_mixed(&s, layout, &neg).unwrap();
        for (x, y) in a.scores.iter().zip(&b.scores) {
            assert_eq!(*x, -*y);
        }
        assert_eq!(a.ranks.reversed(), b.ranks);
    }

    #[test]
    fn singular_block_and_ridge_repair() {
        // unlabeled items see nothing: L' = 0
        let s = SymMatrix::from_fn(4, |i, j| if i < 2 && j < 2 { 0.8 } else if i == j { 1.0 } else { 0.0 });
        let layout = MixedBatchLayout::new(2, 2).unwrap();
        assert!(matches!(seriate_mixed(&s, layout, &[1.0, -1.0]), Err(Error::SingularUnlabeledBlock { .. })));
        // a zero-trace block cannot be repaired either
        assert!(seriate_anchored(&s, layout, &[1.0, 2.0], AnchorMode::LabelRanks).is_err());

        // weakly coupled block: singular without ridge, solvable with it
        let s = SymMatrix::from_fn(4, |i, j| match (i, j) {
            (a, b) if a == b => 1.0,
            (0, 1) => 0.8,
            (2, 3) => 0.5,
            _ => 0.0,
        });
        let layout = MixedBatchLayout::new(2, 2).unwrap();
        let out = seriate_anchored(&s, layout, &[1.0, 2.0], AnchorMode::LabelRanks).unwrap();
        assert!(out.ridge.is_some());
    }

    #[test]
    fn layout_dimension_checked() {
        let s = SymMatrix::identity(5);
        let layout = MixedBatchLayout::new(2, 2).unwrap();
        assert!(matches!(seriate_mixed(&s, layout, &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
