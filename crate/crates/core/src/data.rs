//! Synthetic operator-learning data.
//!
//! Each sample draws a log-coefficient `b` from a Gaussian process on a
//! uniform grid over `[0, 1]`, solves `−(e^b u')' = f` with `u(0) = u(1) = 0`,
//! and records `b` at the grid points as the input and `u(z*)` as the label.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::io::{format_csv, parse_csv};
use crate::linalg::{cholesky, SymMatrix};

/// Gaussian-process prior for the log-coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpConfig {
    /// Grid points on `[0, 1]`, boundaries included.
    pub grid: usize,
    pub length_scale: f64,
    pub variance: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self { grid: 101, length_scale: 0.1, variance: 1.0 }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 3 {
            return Err(Error::InvalidArgument(format!("grid must have at least 3 points, got {}", self.grid)));
        }
        if !(self.length_scale > 0.0) || !(self.variance > 0.0) {
            return Err(Error::InvalidArgument("length scale and variance must be positive".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        grid_points(self.grid)
    }
}

pub fn grid_points(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

const INITIAL_JITTER: f64 = 1e-10;
const MAX_JITTER: f64 = 1e-4;

/// Cholesky factor of the RBF kernel on the grid, reused across draws.
#[derive(Debug, Clone)]
pub struct GpSampler {
    config: GpConfig,
    factor: Array2<f64>,
    jitter: f64,
}

impl GpSampler {
    /// Factors `K + jitter·I`, raising the jitter tenfold from `1e-10·σ²`
    /// until the factorization succeeds.
    pub fn new(config: GpConfig) -> Result<Self> {
        config.validate()?;
        let z = config.points();
        let l2 = config.length_scale * config.length_scale;
        let kernel = SymMatrix::from_fn(config.grid, |i, j| {
            let d = z[i] - z[j];
            config.variance * (-d * d / (2.0 * l2)).exp()
        });
        let mut jitter = INITIAL_JITTER * config.variance;
        loop {
            if let Some(factor) = cholesky(&kernel.shifted(jitter)) {
                if jitter > INITIAL_JITTER * config.variance {
                    log::debug!("GP kernel factored with jitter {jitter:e}");
                }
                return Ok(Self { config, factor, jitter });
            }
            jitter *= 10.0;
            if jitter > MAX_JITTER * config.variance {
                return Err(Error::KernelNotPD(jitter / 10.0));
            }
        }
    }

    pub fn config(&self) -> &GpConfig {
        &self.config
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let e: Array1<f64> = (0..self.config.grid).map(|_| StandardNormal.sample(rng)).collect();
        self.factor.dot(&e).to_vec()
    }
}

/// One draw of the GP with a fresh sampler.
pub fn sample_gp(config: GpConfig, seed: u64) -> Result<Vec<f64>> {
    Ok(GpSampler::new(config)?.sample(&mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Default constant forcing.
pub const DEFAULT_FORCING: f64 = 10.0;

fn half_point_coefficients(b: &[f64]) -> Vec<f64> {
    b.windows(2).map(|w| (0.5 * (w[0] + w[1])).exp()).collect()
}

/// Interior rows of the conservative finite-difference system as
/// `(lower, diagonal, upper)` with `h²` folded in.
fn system(b: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = b.len();
    let h = 1.0 / (n - 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let a = half_point_coefficients(b);
    let m = n - 2;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for k in 0..m {
        // interior node i = k + 1 uses a[i−1] (left half point) and a[i] (right)
        diag[k] = (a[k] + a[k + 1]) * inv_h2;
        lower[k] = -a[k] * inv_h2;
        upper[k] = -a[k + 1] * inv_h2;
    }
    (lower, diag, upper)
}

/// Solves `−(e^b u')' = f` on the grid of `b` with homogeneous Dirichlet
/// conditions. The returned vector includes both boundary zeros.
pub fn solve_spde(b: &[f64], forcing: f64) -> Result<Vec<f64>> {
    if b.len() < 3 {
        return Err(Error::InvalidArgument(format!("grid must have at least 3 points, got {}", b.len())));
    }
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    let (lower, diag, upper) = system(b);
    let m = diag.len();
    // Thomas algorithm; pivots stay positive for positive coefficients
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    for k in 0..m {
        let pivot = diag[k] - if k > 0 { lower[k] * c[k - 1] } else { 0.0 };
        assert!(pivot > 0.0, "tridiagonal pivot {pivot} at row {k}");
        c[k] = upper[k] / pivot;
        d[k] = (forcing - if k > 0 { lower[k] * d[k - 1] } else { 0.0 }) / pivot;
    }
    let mut u = vec![0.0; b.len()];
    for k in (0..m).rev() {
        u[k + 1] = d[k] - if k + 1 < m { c[k] * u[k + 2] } else { 0.0 };
    }
    Ok(u)
}

/// Largest residual of the discrete system relative to
/// `max|A|·max|u| + |f|`.
pub fn relative_residual(b: &[f64], u: &[f64], forcing: f64) -> f64 {
    let (lower, diag, upper) = system(b);
    let m = diag.len();
    let umax = u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let amax = diag.iter().chain(&lower).chain(&upper).fold(0.0_f64, |a, v| a.max(v.abs()));
    let worst = (0..m)
        .map(|k| (lower[k] * u[k] + diag[k] * u[k + 1] + upper[k] * u[k + 2] - forcing).abs())
        .fold(0.0, f64::max);
    worst / (amax * umax + forcing.abs())
}

/// Linear interpolation of grid values at `z ∈ [0, 1]`.
pub fn interpolate(u: &[f64], z: f64) -> f64 {
    let t = z.clamp(0.0, 1.0) * (u.len() - 1) as f64;
    let i = (t.floor() as usize).min(u.len() - 2);
    let frac = t - i as f64;
    u[i] * (1.0 - frac) + u[i + 1] * frac
}

/// Provenance of a generated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub seed: u64,
    pub samples: usize,
    pub gp: GpConfig,
    pub forcing: f64,
    pub label_point: f64,
}

/// Inputs (one GP draw per row) and scalar labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    pub inputs: Array2<f64>,
    pub labels: Vec<f64>,
    pub meta: DatasetMeta,
}

impl RegressionDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn rows(&self, indices: &[usize]) -> (Array2<f64>, Vec<f64>) {
        (self.inputs.select(ndarray::Axis(0), indices), indices.iter().map(|&i| self.labels[i]).collect())
    }
}

/// Generation parameters for [`make_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub samples: usize,
    pub seed: u64,
    pub gp: GpConfig,
    pub forcing: f64,
    pub label_point: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self { samples: 11_100, seed: 0, gp: GpConfig::default(), forcing: DEFAULT_FORCING, label_point: 0.5 }
    }
}

/// Sample `i` uses ChaCha stream `i` of the dataset seed, so results do not
/// depend on thread count or generation order.
pub fn make_dataset(cfg: &DatasetConfig) -> Result<RegressionDataset> {
    if cfg.samples == 0 {
        return Err(Error::InvalidArgument("dataset needs at least one sample".into()));
    }
    if !(0.0..=1.0).contains(&cfg.label_point) {
        return Err(Error::InvalidArgument(format!("label point {} outside [0, 1]", cfg.label_point)));
    }
    let sampler = GpSampler::new(cfg.gp)?;
    let rows: Vec<(Vec<f64>, f64)> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let b = sampler.sample(&mut rng);
            let u = solve_spde(&b, cfg.forcing)?;
            Ok((b, interpolate(&u, cfg.label_point)))
        })
        .collect::<Result<_>>()?;
    let grid = cfg.gp.grid;
    let mut inputs = Array2::zeros((cfg.samples, grid));
    let mut labels = Vec::with_capacity(cfg.samples);
    for (i, (b, y)) in rows.into_iter().enumerate() {
        inputs.row_mut(i).assign(&Array1::from(b));
        labels.push(y);
    }
    let meta = DatasetMeta { seed: cfg.seed, samples: cfg.samples, gp: cfg.gp, forcing: cfg.forcing, label_point: cfg.label_point };
    Ok(RegressionDataset { inputs, labels, meta })
}

/// Sizes of the carved subsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    /// Training pool shared by labeled and unlabeled samples.
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self { train: 1000, val: 100, test: 10_000 }
    }
}

/// Disjoint index sets into a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub seed: u64,
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..total` with `seed`, takes the training pool, validation and
/// test sets in that order, and labels `round(fraction · train)` of the pool.
pub fn split(total: usize, sizes: SplitSizes, labeled_fraction: f64, seed: u64) -> Result<Split> {
    if !(labeled_fraction > 0.0 && labeled_fraction < 1.0) {
        return Err(Error::InvalidFraction(format!("labeled fraction {labeled_fraction} must lie in (0, 1)")));
    }
    let needed = sizes.train + sizes.val + sizes.test;
    if needed > total {
        return Err(Error::InvalidFraction(format!("split needs {needed} samples, dataset has {total}")));
    }
    let labeled_count = (labeled_fraction * sizes.train as f64).round() as usize;
    if labeled_count == 0 || labeled_count == sizes.train || sizes.val == 0 || sizes.test == 0 {
        return Err(Error::InvalidFraction(format!(
            "empty subset: {labeled_count} labeled of {} train, {} val, {} test",
            sizes.train, sizes.val, sizes.test
        )));
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, rest) = order.split_at(sizes.train);
    let (val, rest) = rest.split_at(sizes.val);
    let test = &rest[..sizes.test];
    Ok(Split {
        seed,
        labeled: train[..labeled_count].to_vec(),
        unlabeled: train[labeled_count..].to_vec(),
        val: val.to_vec(),
        test: test.to_vec(),
    })
}

pub const INPUTS_FILE: &str = "inputs.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPLIT_FILE: &str = "split.json";
pub const META_FILE: &str = "meta.json";

/// Writes `inputs.csv`, `labels.csv`, `meta.json` and, if given, `split.json`.
pub fn save_dataset(dir: impl AsRef<Path>, ds: &RegressionDataset, split: Option<&Split>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join(INPUTS_FILE), format_csv(ds.inputs.view()))?;
    let labels = Array2::from_shape_vec((ds.len(), 1), ds.labels.clone()).expect("one column per label");
    fs::write(dir.join(LABELS_FILE), format_csv(labels.view()))?;
    fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&ds.meta)?)?;
    if let Some(split) = split {
        fs::write(dir.join(SPLIT_FILE), serde_json::to_string_pretty(split)?)?;
    }
    Ok(())
}

fn read_required(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::DataNotFound(path.display().to_string()));
    }
    Ok(fs::read_to_string(path)?)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<RegressionDataset> {
    let dir = dir.as_ref();
    let inputs = parse_csv(&read_required(dir, INPUTS_FILE)?)?;
    let labels = parse_csv(&read_required(dir, LABELS_FILE)?)?;
    let meta: DatasetMeta = serde_json::from_str(&read_required(dir, META_FILE)?)?;
    if labels.ncols() != 1 || labels.nrows() != inputs.nrows() {
        return Err(Error::DimensionMismatch { expected: inputs.nrows(), got: labels.nrows() });
    }
    Ok(RegressionDataset { inputs, labels: labels.column(0).to_vec(), meta })
}

/// The stored split, if the directory has one.
pub fn load_split(dir: impl AsRef<Path>) -> Result<Option<Split>> {
    let path = dir.as_ref().join(SPLIT_FILE);
    if !path.is_file() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(path)?)?))
}
