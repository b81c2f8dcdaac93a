//! How much noise a mixed similarity matrix tolerates before the anchored
//! seriation ranking can change.
//!
//! [`similarity_bound`] evaluates the tolerance on `‖ΔS‖∞` together with the
//! spectral quantities it is built from; [`feature_bound`] converts it into
//! a tolerance on a single unlabeled feature vector. [`check_robustness`]
//! tests the claim empirically, and [`eigen_perturbation_first_order`] gives
//! the first-order eigenvalue and eigenvector shifts the bound rests on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, inf_norm, laplacian, min_singular, EigenDecomposition, SymMatrix};
use crate::seriation::{seriate_mixed, MixedBatchLayout};

/// Spectral inputs of the bound for one choice of eigen-system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTerms {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `min_{i≠j, k} |α_ik − α_jk|`; infinite when there is a single eigenvector.
    pub min_gap: f64,
    pub sim_bound: f64,
}

/// Tolerances and their intermediates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationBound {
    /// Budget on `‖ΔS‖∞` for the whole mixed matrix.
    pub sim_bound: f64,
    /// Budget on `‖Δz̃'‖₂` for one unlabeled feature.
    pub feat_bound: f64,
    /// Smallest singular value of the labeled×unlabeled Laplacian block.
    pub cross_sigma_min: f64,
    pub cross_inf_norm: f64,
    /// Eigen-system of the unlabeled Laplacian block; this reading is the
    /// one `sim_bound` uses.
    pub unlabeled: SpectralTerms,
    /// Same formula with the eigen-system of the cross block itself,
    /// available when that block is square. A non-symmetric block is
    /// symmetrized first.
    pub cross: Option<SpectralTerms>,
    pub cross_symmetrized: bool,
    /// Set when `min_gap` is zero and the bound collapses to 0.
    pub zero_gap: bool,
    pub labeled: usize,
    pub unlabeled_count: usize,
}

fn min_coordinate_gap(eig: &EigenDecomposition) -> f64 {
    let v = &eig.vectors;
    let (rows, cols) = v.dim();
    let mut gap = f64::INFINITY;
    for i in 0..cols {
        for j in (i + 1)..cols {
            for k in 0..rows {
                gap = gap.min((v[[k, i]] - v[[k, j]]).abs());
            }
        }
    }
    gap
}

fn spectral_terms(eig: &EigenDecomposition, sigma: f64, cross_inf: f64, n: usize) -> SpectralTerms {
    let lambda_min = eig.values[0];
    let lambda_max = eig.values[eig.values.len() - 1];
    let min_gap = min_coordinate_gap(eig);
    let first = sigma / 2.0;
    let denom = 8.0 * std::f64::consts::SQRT_2 * lambda_max * n as f64 * cross_inf;
    let second = if min_gap.is_infinite() || denom == 0.0 {
        f64::INFINITY
    } else {
        lambda_min * lambda_min * sigma * min_gap / denom
    };
    SpectralTerms { lambda_min, lambda_max, min_gap, sim_bound: first.min(second).max(0.0) }
}

/// Tolerance on `‖ΔS‖∞` below which the anchored ranking cannot change.
///
/// `min(σ(L_m)/2, λ₁²·σ(L_m)·gap / (8√2·λ_n·n·‖L_m‖∞))` with `λ`, `α` the
/// eigen-system of the unlabeled Laplacian block `L'` and `L_m` the
/// labeled×unlabeled block.
pub fn similarity_bound(s: &SymMatrix, layout: MixedBatchLayout) -> Result<PerturbationBound> {
    if s.n() != layout.total() {
        return Err(Error::DimensionMismatch { expected: layout.total(), got: s.n() });
    }
    let (m, n) = (layout.labeled(), layout.unlabeled());
    let l = laplacian(s);
    let cross = l.block(0..m, m..m + n);
    let sigma = min_singular(cross.view());
    let cross_inf = inf_norm(cross.view());

    let unlabeled = spectral_terms(&eig_sym(&l.principal_block(m..m + n))?, sigma, cross_inf, n);

    let mut cross_symmetrized = false;
    let cross_terms = if m == n {
        let asym = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (cross[[i, j]] - cross[[j, i]]).abs()).fold(0.0, f64::max);
        cross_symmetrized = asym > 0.0;
        let sym = SymMatrix::from_fn(n, |i, j| 0.5 * (cross[[i, j]] + cross[[j, i]]));
        Some(spectral_terms(&eig_sym(&sym)?, sigma, cross_inf, n))
    } else {
        None
    };

    let sim_bound = unlabeled.sim_bound;
    Ok(PerturbationBound {
        sim_bound,
        feat_bound: sim_bound / (m + n - 1) as f64,
        cross_sigma_min: sigma,
        cross_inf_norm: cross_inf,
        zero_gap: unlabeled.min_gap == 0.0,
        unlabeled,
        cross: cross_terms,
        cross_symmetrized,
        labeled: m,
        unlabeled_count: n,
    })
}

/// Tolerance on one unlabeled feature: `sim_bound / (m + n − 1)`.
pub fn feature_bound(s: &SymMatrix, layout: MixedBatchLayout) -> Result<f64> {
    Ok(similarity_bound(s, layout)?.feat_bound)
}

/// First-order shifts of every eigenpair of `l` under `delta`.
#[derive(Debug, Clone)]
pub struct FirstOrderShift {
    pub values: Vec<f64>,
    /// Column `i` is the predicted change of eigenvector `i`.
    pub vectors: ndarray::Array2<f64>,
    /// Unperturbed eigen-system the shifts refer to.
    pub base: EigenDecomposition,
}

/// Smallest eigenvalue gap accepted by [`eigen_perturbation_first_order`].
pub const SIMPLE_SPECTRUM_GAP: f64 = 1e-8;

/// `Δλ_i = α_iᵀ ΔL α_i` and `Δα_i = Σ_{j≠i} (α_jᵀ ΔL α_i)/(λ_i − λ_j) α_j`.
pub fn eigen_perturbation_first_order(l: &SymMatrix, delta: &SymMatrix) -> Result<FirstOrderShift> {
    if l.n() != delta.n() {
        return Err(Error::DimensionMismatch { expected: l.n(), got: delta.n() });
    }
    let eig = eig_sym(l)?;
    let n = l.n();
    let min_gap = eig.values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if min_gap <= SIMPLE_SPECTRUM_GAP {
        return Err(Error::DegenerateSpectrum(min_gap));
    }
    // coupling[j][i] = α_jᵀ ΔL α_i
    let coupling = eig.vectors.t().dot(&delta.view().dot(&eig.vectors));
    let values = (0..n).map(|i| coupling[[i, i]]).collect();
    let mut vectors = ndarray::Array2::zeros((n, n));
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let c = coupling[[j, i]] / (eig.values[i] - eig.values[j]);
            for k in 0..n {
                vectors[[k, i]] += c * eig.vectors[[k, j]];
            }
        }
    }
    Ok(FirstOrderShift { values, vectors, base: eig })
}

/// Outcome of [`check_robustness`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub trials: usize,
    pub unchanged: usize,
    /// Largest `|rank_perturbed − rank_clean|` over all trials and items.
    pub max_displacement: usize,
    pub scale: f64,
    /// `‖ΔS‖∞` used in every trial.
    pub perturbation_norm: f64,
    pub bound: PerturbationBound,
}

impl RobustnessReport {
    pub fn all_unchanged(&self) -> bool {
        self.unchanged == self.trials
    }
}

/// Symmetric matrix with entries uniform in `[−1, 1]`, rescaled so its
/// maximum absolute row sum is `norm`.
pub fn random_symmetric_perturbation<R: Rng + ?Sized>(rng: &mut R, n: usize, norm: f64) -> SymMatrix {
    let raw = SymMatrix::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
    let current = inf_norm(raw.view());
    if current == 0.0 || norm == 0.0 {
        return SymMatrix::zeros(n);
    }
    raw.scaled(norm / current)
}

/// Perturbs `s` by `trials` random symmetric matrices with
/// `‖ΔS‖∞ = scale · sim_bound` and compares the anchored ranking of the
/// unlabeled rows against the clean one, holding `anchor` fixed.
pub fn check_robustness(
    s: &SymMatrix,
    layout: MixedBatchLayout,
    anchor: &[f64],
    trials: usize,
    scale: f64,
    seed: u64,
) -> Result<RobustnessReport> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("scale must be finite and non-negative, got {scale}")));
    }
    let bound = similarity_bound(s, layout)?;
    let clean = seriate_mixed(s, layout, anchor)?.ranks;
    let norm = scale * bound.sim_bound;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unchanged = 0;
    let mut max_displacement = 0;
    for _ in 0..trials {
        let delta = random_symmetric_perturbation(&mut rng, s.n(), norm);
        let noisy = seriate_mixed(&s.plus(&delta)?, layout, anchor)?.ranks;
        let shift = clean.as_slice().iter().zip(noisy.as_slice()).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0);
        if shift == 0 {
            unchanged += 1;
        }
        max_displacement = max_displacement.max(shift);
    }
    Ok(RobustnessReport { trials, unchanged, max_displacement, scale, perturbation_norm: norm, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{near_tie_instance, random_mixed_instance};
    use crate::seriation::{anchor_vector, AnchorMode};
    use ndarray::Array2;

    fn hand_instance() -> SymMatrix {
        let y: [f64; 6] = [0.0, 1.3, 2.1, 0.6, 1.7, 3.0];
        SymMatrix::from_fn(6, |i, j| (-(y[i] - y[j]).abs()).exp())
    }

    #[test]
    fn no_cross_similarity_gives_zero_bound() {
        let mut s = Array2::<f64>::eye(4);
        s[[0, 1]] = 0.5;
        s[[1, 0]] = 0.5;
        s[[2, 3]] = 0.7;
        s[[3, 2]] = 0.7;
        let b = similarity_bound(&SymMatrix::new(s).unwrap(), MixedBatchLayout::new(2, 2).unwrap()).unwrap();
        assert_eq!(b.cross_sigma_min, 0.0);
        assert_eq!(b.sim_bound, 0.0);
        assert_eq!(b.feat_bound, 0.0);
    }

    /// Scalar re-derivation of the bound for a 3+3 instance.
    #[test]
    fn matches_scalar_recomputation() {
        let s = hand_instance();
        let layout = MixedBatchLayout::new(3, 3).unwrap();
        let b = similarity_bound(&s, layout).unwrap();

        // Laplacian entries by hand
        let deg = |i: usize| (0..6).filter(|&j| j != i).map(|j| s.get(i, j)).sum::<f64>();
        let lap = |i: usize, j: usize| if i == j { deg(i) } else { -s.get(i, j) };
        let mut cross_inf = 0.0_f64;
        for i in 0..3 {
            cross_inf = cross_inf.max((3..6).map(|k| lap(i, k).abs()).sum());
        }
        // σ_min of a 3×3 block: smallest eigenvalue of BᵀB by Jacobi on a fresh matrix
        let gram = SymMatrix::from_fn(3, |a, c| (0..3).map(|i| lap(i, 3 + a) * lap(i, 3 + c)).sum());
        let sigma = eig_sym(&gram).unwrap().values[0].sqrt();
        let block = SymMatrix::from_fn(3, |a, c| lap(3 + a, 3 + c));
        let eig = eig_sym(&block).unwrap();
        let mut gap = f64::INFINITY;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    for k in 0..3 {
                        gap = gap.min((eig.vectors[[k, i]] - eig.vectors[[k, j]]).abs());
                    }
                }
            }
        }
        let (l1, ln) = (eig.values[0], eig.values[2]);
        let second = l1 * l1 * sigma * gap / (8.0 * 2f64.sqrt() * ln * 3.0 * cross_inf);
        let expected = (sigma / 2.0).min(second);

        assert!((b.cross_sigma_min - sigma).abs() < 1e-12);
        assert!((b.cross_inf_norm - cross_inf).abs() < 1e-12);
        assert!((b.unlabeled.min_gap - gap).abs() < 1e-12);
        assert!((b.sim_bound - expected).abs() <= 1e-12 * expected);
        assert!((b.feat_bound * 5.0 - b.sim_bound).abs() <= 1e-15 * b.sim_bound);
        assert!(b.cross.is_some());
        assert!(!b.zero_gap);
    }

    #[test]
    fn bound_is_homogeneous() {
        let s = hand_instance();
        let layout = MixedBatchLayout::new(3, 3).unwrap();
        let b = similarity_bound(&s, layout).unwrap();
        for c in [0.5, 3.0] {
            let bc = similarity_bound(&s.scaled(c), layout).unwrap();
            assert!((bc.sim_bound - c * b.sim_bound).abs() <= 1e-10 * b.sim_bound);
            assert!((bc.unlabeled.min_gap - b.unlabeled.min_gap).abs() < 1e-10);
        }
    }

    #[test]
    fn feature_bound_divisor() {
        let s = SymMatrix::new(ndarray::array![[1.0, 0.4], [0.4, 1.0]]).unwrap();
        let layout = MixedBatchLayout::new(1, 1).unwrap();
        let b = similarity_bound(&s, layout).unwrap();
        assert!(b.unlabeled.min_gap.is_infinite());
        assert!((b.sim_bound - 0.2).abs() < 1e-15);
        assert_eq!(feature_bound(&s, layout).unwrap(), b.sim_bound);
    }

    #[test]
    fn rectangular_cross_block_has_no_alternate_reading() {
        let s = hand_instance();
        let b = similarity_bound(&s, MixedBatchLayout::new(2, 4).unwrap()).unwrap();
        assert!(b.cross.is_none());
        assert_eq!(b.feat_bound, b.sim_bound / 5.0);
    }

    fn random_laplacian(seed: u64, n: usize) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        laplacian(&SymMatrix::from_fn(n, |_, _| rng.random::<f64>()))
    }

    #[test]
    fn zero_perturbation_predicts_nothing() {
        let l = random_laplacian(1, 6);
        let p = eigen_perturbation_first_order(&l, &SymMatrix::zeros(6)).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert!(p.vectors.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_shift_moves_eigenvalues_only() {
        let l = random_laplacian(2, 6);
        let p = eigen_perturbation_first_order(&l, &SymMatrix::identity(6).scaled(1e-3)).unwrap();
        assert!(p.values.iter().all(|&v| (v - 1e-3).abs() < 1e-15));
        assert!(p.vectors.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn repeated_eigenvalues_rejected() {
        let l = laplacian(&SymMatrix::from_fn(4, |_, _| 1.0));
        assert!(matches!(
            eigen_perturbation_first_order(&l, &SymMatrix::zeros(4)),
            Err(Error::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn first_order_error_is_quadratic() {
        let l = random_laplacian(3, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let direction = random_symmetric_perturbation(&mut rng, 6, 1.0);
        let exact_err = |eps: f64| {
            let d = direction.scaled(eps);
            let p = eigen_perturbation_first_order(&l, &d).unwrap();
            let e = eig_sym(&l.plus(&d).unwrap()).unwrap();
            (0..6).map(|i| (e.values[i] - p.base.values[i] - p.values[i]).abs()).fold(0.0, f64::max)
        };
        let ratio = exact_err(1e-3) / exact_err(5e-4);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn within_bound_rankings_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for seed in 0..10 {
            let inst = random_mixed_instance(&mut rng, 4, 5, 0.3, 2.0).unwrap();
            let r = anchor_vector(&inst.similarity, inst.layout, inst.labeled_labels(), AnchorMode::LabelRanks).unwrap();
            let rep = check_robustness(&inst.similarity, inst.layout, &r, 20, 1.0, seed).unwrap();
            assert!(rep.all_unchanged(), "{rep:?}");
            let zero = check_robustness(&inst.similarity, inst.layout, &r, 5, 0.0, seed).unwrap();
            assert_eq!(zero.unchanged, 5);
            assert_eq!(zero.perturbation_norm, 0.0);
        }
    }

    #[test]
    fn large_perturbations_break_near_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let broken = (0..5)
            .filter(|&seed| {
                let inst = near_tie_instance(&mut rng, 4, 5, 1e-6, 2.0).unwrap();
                let r = anchor_vector(&inst.similarity, inst.layout, inst.labeled_labels(), AnchorMode::LabelRanks).unwrap();
                !check_robustness(&inst.similarity, inst.layout, &r, 50, 50.0, seed).unwrap().all_unchanged()
            })
            .count();
        assert!(broken > 0);
    }

    #[test]
    fn perturbation_has_requested_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random_symmetric_perturbation(&mut rng, 7, 0.3);
        assert!((inf_norm(d.view()) - 0.3).abs() < 1e-12);
        assert!(check_robustness(&hand_instance(), MixedBatchLayout::new(3, 3).unwrap(), &[1.0, 0.0, -1.0], 1, -1.0, 0).is_err());
    }
}
