//! Memory-based feature selection.
//!
//! Two forward passes of the same batch, straddling one parameter update,
//! give two feature groups and hence four cross-similarity matrices. Entries
//! whose similarity moves little across those observations belong to
//! features that are stable under training noise. [`dp_select`] picks `B'`
//! features with small total pairwise variance using a prefix dynamic
//! program; [`brute_select`] is the exhaustive reference.

use std::borrow::Borrow;

use itertools::Itertools;
use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::check_finite;
use crate::model::FeatureBatch;

/// Entrywise population variance of a set of similarity observations.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceMatrix {
    data: Array2<f64>,
}

impl VarianceMatrix {
    /// Validates a user-supplied matrix: square, finite, non-negative, symmetric.
    pub fn from_array(data: Array2<f64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        check_finite(data.view())?;
        if let Some(((row, col), v)) = data.indexed_iter().find(|(_, v)| **v < 0.0) {
            return Err(Error::InvalidArgument(format!("negative variance {v} at ({row}, {col})")));
        }
        let scale = data.iter().fold(1.0_f64, |m, v| m.max(*v));
        for i in 0..rows {
            for j in (i + 1)..rows {
                let diff = (data[[i, j]] - data[[j, i]]).abs();
                if diff > crate::linalg::SYMMETRY_TOL * scale {
                    return Err(Error::SymmetryViolation { i, j, diff });
                }
            }
        }
        Ok(Self { data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[[i, j]]
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }
}

/// Population variance of each entry across `obs`.
///
/// Deviations are taken from the first observation before averaging, so
/// identical observations give exactly zero.
pub fn variance_matrix<M: Borrow<Array2<f64>>>(obs: &[M]) -> Result<VarianceMatrix> {
    if obs.len() < 2 {
        return Err(Error::InsufficientObservations(obs.len()));
    }
    let first = obs[0].borrow();
    let (rows, cols) = first.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    for o in obs {
        let o = o.borrow();
        if o.dim() != first.dim() {
            return Err(Error::DimensionMismatch { expected: rows, got: o.nrows().max(o.ncols()) });
        }
        check_finite(o.view())?;
    }
    let k = obs.len() as f64;
    let mut sum = Array2::<f64>::zeros((rows, cols));
    let mut sum_sq = Array2::<f64>::zeros((rows, cols));
    for o in &obs[1..] {
        let d = o.borrow() - first;
        sum += &d;
        sum_sq += &(&d * &d);
    }
    let data = ndarray::Zip::from(&sum).and(&sum_sq).map_collect(|&s, &sq| {
        let mean = s / k;
        (sq / k - mean * mean).max(0.0)
    });
    Ok(VarianceMatrix { data })
}

/// `S¹¹, S¹², S²¹, S²²` for two feature groups of the same samples.
#[derive(Debug, Clone)]
pub struct CrossSimilarities {
    pub s11: Array2<f64>,
    pub s12: Array2<f64>,
    pub s21: Array2<f64>,
    pub s22: Array2<f64>,
}

impl CrossSimilarities {
    pub fn all(&self) -> [&Array2<f64>; 4] {
        [&self.s11, &self.s12, &self.s21, &self.s22]
    }

    pub fn variance(&self) -> VarianceMatrix {
        variance_matrix(&self.all()).expect("four equally sized finite observations")
    }
}

/// Cosine similarities between every pair of groups.
pub fn cross_similarities(z1: &FeatureBatch, z2: &FeatureBatch) -> Result<CrossSimilarities> {
    if z1.count() != z2.count() {
        return Err(Error::DimensionMismatch { expected: z1.count(), got: z2.count() });
    }
    if z1.dim() != z2.dim() {
        return Err(Error::DimensionMismatch { expected: z1.dim(), got: z2.dim() });
    }
    let (a, b) = (z1.features(), z2.features());
    let s12 = a.dot(&b.t());
    Ok(CrossSimilarities { s11: a.dot(&a.t()), s21: s12.t().to_owned(), s12, s22: b.dot(&b.t()) })
}

/// Selected feature indices (ascending) and their total pairwise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub indices: Vec<usize>,
    pub cost: f64,
}

/// `Σ_{a<b} V[idx_b][idx_a]` for ascending `indices`.
pub fn subset_cost(v: &VarianceMatrix, indices: &[usize]) -> f64 {
    let mut cost = 0.0;
    for (b, &j) in indices.iter().enumerate() {
        for &i in &indices[..b] {
            cost += v.get(j, i);
        }
    }
    cost
}

fn check_budget(v: &VarianceMatrix, budget: usize) -> Result<()> {
    if budget == 0 || budget > v.n() {
        return Err(Error::InvalidBudget { budget, n: v.n() });
    }
    Ok(())
}

/// Prefix dynamic program over indices in ascending order.
///
/// State `(p, b)` holds the cheapest known `b`-subset of the first `p`
/// indices. It either inherits `(p−1, b)` (skip index `p−1`) or extends some
/// `(q, b−1)` with `q < p` by index `p−1`, paying its variance against the
/// members of that subset. Only strict improvements replace a state, so ties
/// keep the earliest indices. Subsets of size ≤ 1 cost nothing.
///
/// This is a heuristic: each state remembers one subset, so the result is not
/// invariant under relabeling the items and can miss the exact optimum.
pub fn dp_select(v: &VarianceMatrix, budget: usize) -> Result<SelectionResult> {
    check_budget(v, budget)?;
    let n = v.n();
    let mut cost = vec![vec![f64::INFINITY; budget + 1]; n + 1];
    let mut chosen: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); budget + 1]; n + 1];
    for row in cost.iter_mut() {
        row[0] = 0.0;
    }
    for p in 1..=n {
        let item = p - 1;
        for b in 1..=budget.min(p) {
            let mut best = cost[p - 1][b];
            let mut best_set = chosen[p - 1][b].clone();
            for q in 0..p {
                let base = cost[q][b - 1];
                if base.is_infinite() {
                    continue;
                }
                let candidate = base + chosen[q][b - 1].iter().map(|&j| v.get(item, j)).sum::<f64>();
                if candidate < best {
                    best = candidate;
                    best_set = chosen[q][b - 1].clone();
                    best_set.push(item);
                }
            }
            cost[p][b] = best;
            chosen[p][b] = best_set;
        }
    }
    let indices = std::mem::take(&mut chosen[n][budget]);
    Ok(SelectionResult { cost: subset_cost(v, &indices), indices })
}

/// Largest number of subsets [`brute_select`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 5_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exact minimizer of the pairwise-variance cost; ties go to the
/// lexicographically smallest index set.
pub fn brute_select(v: &VarianceMatrix, budget: usize) -> Result<SelectionResult> {
    check_budget(v, budget)?;
    let count = binomial(v.n(), budget);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(count));
    }
    let mut best = SelectionResult { indices: Vec::new(), cost: f64::INFINITY };
    for combo in (0..v.n()).combinations(budget) {
        let c = subset_cost(v, &combo);
        if c < best.cost {
            best = SelectionResult { indices: combo, cost: c };
        }
    }
    Ok(best)
}

/// Synthetic check of [`dp_select`]: noisy replicas of random features where
/// each sample has its own noise level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyConfig {
    pub seed: u64,
    pub samples: usize,
    pub dim: usize,
    pub groups: usize,
    pub budget: usize,
    /// Noise std of the quietest sample.
    pub sigma_base: f64,
    /// Increment between consecutive noise levels; sample `i` gets
    /// `sigma_base + sigma_step·π(i)` for a random permutation `π`.
    pub sigma_step: f64,
    /// Distribution of the clean base vectors.
    pub base: BaseDistribution,
    /// Multiplier on the base vectors; sets the signal-to-noise ratio
    /// against the noise ladder.
    pub base_scale: f64,
    /// Also run [`brute_select`] for comparison.
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseDistribution {
    /// Entries uniform on `[0, 1)`.
    Uniform,
    /// Entries standard normal.
    Normal,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self { seed: 0, samples: 25, dim: 256, groups: 10, budget: 10, sigma_base: 0.05, sigma_step: 0.02, base: BaseDistribution::Normal, base_scale: 0.1, exact: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyOutcome {
    pub seed: u64,
    /// Indices of the `budget` least noisy samples.
    pub ground_truth: Vec<usize>,
    pub selected: Vec<usize>,
    pub accuracy: f64,
    pub dp_cost: f64,
    pub exact: Option<SelectionResult>,
    pub exact_accuracy: Option<f64>,
}

fn overlap_fraction(a: &[usize], b: &[usize]) -> f64 {
    a.iter().filter(|i| b.contains(i)).count() as f64 / b.len() as f64
}

/// Runs the toy experiment with the configured noise ladder.
pub fn toy_experiment(cfg: &ToyConfig) -> Result<ToyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base = draw_base(cfg, &mut rng);
    let mut order: Vec<usize> = (0..cfg.samples).collect();
    order.shuffle(&mut rng);
    let sigma: Vec<f64> = order.iter().map(|&p| cfg.sigma_base + cfg.sigma_step * p as f64).collect();
    run_toy(cfg, base, &sigma, &order, &mut rng)
}

/// Runs the toy experiment with explicit per-sample noise levels instead of
/// the ladder. Ground truth is the `budget` smallest levels, ties to the
/// lower index.
pub fn toy_experiment_with_noise(cfg: &ToyConfig, sigma: &[f64]) -> Result<ToyOutcome> {
    if sigma.len() != cfg.samples {
        return Err(Error::DimensionMismatch { expected: cfg.samples, got: sigma.len() });
    }
    if let Some(s) = sigma.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(Error::InvalidArgument(format!("noise level {s} must be finite and non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base = draw_base(cfg, &mut rng);
    let mut by_noise: Vec<usize> = (0..cfg.samples).collect();
    by_noise.sort_by(|&a, &b| sigma[a].total_cmp(&sigma[b]).then(a.cmp(&b)));
    let mut order = vec![0; cfg.samples];
    for (pos, &i) in by_noise.iter().enumerate() {
        order[i] = pos;
    }
    run_toy(cfg, base, sigma, &order, &mut rng)
}

fn draw_base(cfg: &ToyConfig, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let base = match cfg.base {
        BaseDistribution::Uniform => Array2::from_shape_simple_fn((cfg.samples, cfg.dim), || rng.random::<f64>()),
        BaseDistribution::Normal => Array2::from_shape_simple_fn((cfg.samples, cfg.dim), || StandardNormal.sample(&mut *rng)),
    };
    base * cfg.base_scale
}

/// `order[i]` is sample `i`'s position when sorted by noise.
fn run_toy(cfg: &ToyConfig, base: Array2<f64>, sigma: &[f64], order: &[usize], rng: &mut ChaCha8Rng) -> Result<ToyOutcome> {
    if cfg.groups < 2 {
        return Err(Error::InsufficientObservations(cfg.groups));
    }
    if cfg.budget == 0 || cfg.budget > cfg.samples {
        return Err(Error::InvalidBudget { budget: cfg.budget, n: cfg.samples });
    }
    let mut views = Vec::with_capacity(cfg.groups);
    for _ in 0..cfg.groups {
        let mut z = base.clone();
        for (mut row, &s) in z.rows_mut().into_iter().zip(sigma) {
            row.mapv_inplace(|x| {
                let e: f64 = StandardNormal.sample(&mut *rng);
                x + s * e
            });
        }
        views.push(FeatureBatch::from_raw(z)?);
    }
    let mut obs = Vec::with_capacity(cfg.groups * cfg.groups);
    for a in &views {
        for b in &views {
            obs.push(a.features().dot(&b.features().t()));
        }
    }
    let v = variance_matrix(&obs)?;

    let ground_truth: Vec<usize> = (0..cfg.samples).filter(|&i| order[i] < cfg.budget).collect();
    let dp = dp_select(&v, cfg.budget)?;
    let accuracy = overlap_fraction(&dp.indices, &ground_truth);
    let exact = if cfg.exact { Some(brute_select(&v, cfg.budget)?) } else { None };
    let exact_accuracy = exact.as_ref().map(|e| overlap_fraction(&e.indices, &ground_truth));
    Ok(ToyOutcome {
        seed: cfg.seed,
        ground_truth,
        selected: dp.indices,
        accuracy,
        dp_cost: dp.cost,
        exact,
        exact_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_v(n: usize, seed: u64) -> VarianceMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random();
                a[[i, j]] = x;
                a[[j, i]] = x;
            }
        }
        VarianceMatrix::from_array(a).unwrap()
    }

    fn batch(n: usize, d: usize, seed: u64) -> FeatureBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureBatch::from_raw(Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(&mut rng))).unwrap()
    }

    /// Off-diagonal 1 everywhere except 0.1 inside `triple`.
    fn triple_instance(n: usize, triple: [usize; 3]) -> VarianceMatrix {
        let a = Array2::from_shape_fn((n, n), |(i, j)| {
            if i != j && triple.contains(&i) && triple.contains(&j) { 0.1 } else { 1.0 }
        });
        VarianceMatrix::from_array(a).unwrap()
    }

    #[test]
    fn identical_observations_have_zero_variance() {
        let s = array![[1.0, 0.3, -0.2], [0.3, 1.0, 0.7], [-0.2, 0.7, 1.0]];
        let v = variance_matrix(&[s.clone(), s.clone(), s.clone(), s]).unwrap();
        assert!(v.view().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn population_variance_of_a_cell() {
        let obs: Vec<Array2<f64>> = [0.0, 0.0, 1.0, 1.0].iter().map(|&x| array![[x]]).collect();
        let v = variance_matrix(&obs).unwrap();
        assert!((v.get(0, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn too_few_observations() {
        let s = array![[1.0]];
        assert!(matches!(variance_matrix(&[s]), Err(Error::InsufficientObservations(1))));
        assert!(matches!(variance_matrix::<Array2<f64>>(&[]), Err(Error::InsufficientObservations(0))));
    }

    #[test]
    fn mismatched_observations_rejected() {
        let a = Array2::<f64>::zeros((2, 2));
        let b = Array2::<f64>::zeros((3, 3));
        assert!(matches!(variance_matrix(&[a, b]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cross_similarities_of_equal_groups_coincide() {
        let z = batch(6, 5, 1);
        let c = cross_similarities(&z, &z).unwrap();
        for m in c.all() {
            assert_eq!(m, &c.s11);
        }
        assert!(c.variance().view().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn orthonormal_features_give_identity() {
        let z = FeatureBatch::from_raw(Array2::<f64>::eye(4)).unwrap();
        let c = cross_similarities(&z, &z).unwrap();
        assert_eq!(c.s11, Array2::<f64>::eye(4));
    }

    #[test]
    fn zero_norm_feature_rejected() {
        let mut raw = Array2::<f64>::ones((3, 2));
        raw.row_mut(1).fill(0.0);
        assert!(matches!(FeatureBatch::from_raw(raw), Err(Error::ZeroNormFeature(1))));
    }

    #[test]
    fn cross_similarities_shape_checks() {
        assert!(matches!(cross_similarities(&batch(3, 4, 0), &batch(4, 4, 0)), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(cross_similarities(&batch(3, 4, 0), &batch(3, 5, 0)), Err(Error::DimensionMismatch { .. })));
    }

    proptest! {
        #[test]
        fn cross_blocks_are_transposes(seed in any::<u64>(), n in 2usize..8, d in 2usize..6) {
            let c = cross_similarities(&batch(n, d, seed), &batch(n, d, seed ^ 0x9e37)).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((c.s21[[i, j]] - c.s12[[j, i]]).abs() <= 1e-12);
                    prop_assert!(c.s11[[i, j]].abs() <= 1.0 + 1e-12);
                }
            }
            let v = c.variance();
            for i in 0..n {
                for j in 0..n {
                    prop_assert!(v.get(i, j) >= 0.0);
                    prop_assert!((v.get(i, j) - v.get(j, i)).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn dp_never_beats_exhaustive(seed in any::<u64>(), n in 2usize..10, frac in 0.0f64..1.0) {
            let budget = 1 + ((n - 1) as f64 * frac) as usize;
            let v = random_v(n, seed);
            let dp = dp_select(&v, budget).unwrap();
            let bf = brute_select(&v, budget).unwrap();
            prop_assert!(dp.cost >= bf.cost - 1e-12);
            prop_assert_eq!(dp.indices.len(), budget);
            prop_assert!(dp.indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!((dp.cost - subset_cost(&v, &dp.indices)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_variance_picks_leading_indices() {
        let v = VarianceMatrix::from_array(Array2::zeros((6, 6))).unwrap();
        for budget in 1..=6 {
            let expected: Vec<usize> = (0..budget).collect();
            let dp = dp_select(&v, budget).unwrap();
            assert_eq!(dp.indices, expected);
            assert_eq!(dp.cost, 0.0);
            assert_eq!(brute_select(&v, budget).unwrap().indices, expected);
        }
    }

    #[test]
    fn single_budget_selects_first_index() {
        let v = random_v(7, 3);
        let dp = dp_select(&v, 1).unwrap();
        assert_eq!(dp.indices, vec![0]);
        assert_eq!(dp.cost, 0.0);
    }

    #[test]
    fn dp_recovers_unique_cheapest_triple() {
        let v = triple_instance(5, [0, 2, 3]);
        let bf = brute_select(&v, 3).unwrap();
        assert_eq!(bf.indices, vec![0, 2, 3]);
        assert_eq!(dp_select(&v, 3).unwrap(), bf);
    }

    #[test]
    fn dp_depends_on_index_order() {
        // The same structure relabeled so the cheap triple avoids index 0.
        let anchored = triple_instance(5, [0, 2, 3]);
        let relabeled = triple_instance(5, [1, 2, 3]);
        let a = dp_select(&anchored, 3).unwrap();
        let b = dp_select(&relabeled, 3).unwrap();
        assert!((a.cost - 0.3).abs() < 1e-12);
        assert!(b.cost > a.cost + 0.5);
        assert!((brute_select(&relabeled, 3).unwrap().cost - 0.3).abs() < 1e-12);
    }

    #[test]
    fn brute_full_budget_and_errors() {
        let v = random_v(6, 9);
        assert_eq!(brute_select(&v, 6).unwrap().indices, (0..6).collect::<Vec<_>>());
        assert!(matches!(brute_select(&v, 0), Err(Error::InvalidBudget { budget: 0, n: 6 })));
        assert!(matches!(dp_select(&v, 7), Err(Error::InvalidBudget { budget: 7, n: 6 })));
        let big = VarianceMatrix::from_array(Array2::zeros((40, 40))).unwrap();
        assert!(matches!(brute_select(&big, 20), Err(Error::TooLarge(_))));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(25, 10), 3_268_760);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(5, 5), 1);
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }

    #[test]
    fn variance_matrix_validation() {
        assert!(matches!(VarianceMatrix::from_array(array![[0.0, -1.0], [-1.0, 0.0]]), Err(Error::InvalidArgument(_))));
        assert!(matches!(VarianceMatrix::from_array(array![[0.0, 1.0], [2.0, 0.0]]), Err(Error::SymmetryViolation { .. })));
        assert!(matches!(VarianceMatrix::from_array(Array2::zeros((2, 3))), Err(Error::NotSquare { .. })));
    }

    fn small_toy(seed: u64) -> ToyConfig {
        ToyConfig { seed, dim: 64, groups: 4, ..ToyConfig::default() }
    }

    #[test]
    fn noiseless_samples_are_found() {
        let cfg = ToyConfig { exact: true, ..small_toy(11) };
        // quiet samples include index 0, which the DP always keeps
        let sigma: Vec<f64> = (0..25).map(|i| if i % 5 < 2 { 0.0 } else { 1.0 }).collect();
        let out = toy_experiment_with_noise(&cfg, &sigma).unwrap();
        assert_eq!(out.ground_truth, vec![0, 1, 5, 6, 10, 11, 15, 16, 20, 21]);
        assert_eq!(out.accuracy, 1.0);
        assert_eq!(out.exact_accuracy, Some(1.0));
    }

    #[test]
    fn equal_noise_is_uninformative() {
        let mut total = 0.0;
        for seed in 0..200 {
            let cfg = ToyConfig { sigma_step: 0.0, ..small_toy(seed) };
            total += toy_experiment(&cfg).unwrap().accuracy;
        }
        let mean = total / 200.0;
        assert!((mean - 0.4).abs() <= 0.1, "mean accuracy {mean}");
    }

    #[test]
    fn separated_noise_beats_equal_noise() {
        let mean = |step: f64| {
            (0..20).map(|seed| toy_experiment(&ToyConfig { sigma_step: step, seed, ..ToyConfig::default() }).unwrap().accuracy).sum::<f64>() / 20.0
        };
        let flat = mean(0.0);
        let spaced = mean(0.01);
        assert!(spaced > flat + 0.2, "flat {flat}, spaced {spaced}");
    }

    #[test]
    fn toy_is_deterministic() {
        let a = toy_experiment(&small_toy(5)).unwrap();
        let b = toy_experiment(&small_toy(5)).unwrap();
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.dp_cost.to_bits(), b.dp_cost.to_bits());
        assert_eq!(a.ground_truth.len(), 10);
    }

    #[test]
    fn toy_argument_checks() {
        assert!(matches!(toy_experiment(&ToyConfig { groups: 1, ..small_toy(0) }), Err(Error::InsufficientObservations(1))));
        assert!(matches!(toy_experiment(&ToyConfig { budget: 26, ..small_toy(0) }), Err(Error::InvalidBudget { .. })));
        assert!(toy_experiment_with_noise(&small_toy(0), &[0.1; 3]).is_err());
    }
}
