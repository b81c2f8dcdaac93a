//! Labeled-fraction sweep comparing the semi-supervised method with the
//! supervised-only baseline.
//!
//! Both methods of a seed share the split and the initial weights, so each
//! comparison is paired.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split, RegressionDataset, SplitSizes};
use crate::error::Result;
use crate::metrics::{mae, r2, summarize, Summary};
use crate::train::{train, TrainConfig, TrainData};

pub const PAPER_FRACTIONS: [f64; 4] = [1.0 / 5.0, 1.0 / 4.0, 1.0 / 3.0, 1.0 / 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gclss,
    Supervised,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gclss => "gclss",
            Method::Supervised => "supervised",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub sizes: SplitSizes,
    /// Training settings for the semi-supervised runs; the seed field is replaced per run.
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { fractions: PAPER_FRACTIONS.to_vec(), seeds: (0..10).collect(), sizes: SplitSizes::default(), train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub fraction: f64,
    pub seed: u64,
    pub test_mae: f64,
    pub test_r2: f64,
    pub val_mae: f64,
    pub val_r2: f64,
    pub skipped_aux: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: Method,
    pub fraction: f64,
    pub mae: Summary,
    pub r2: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub epochs: usize,
    pub runs: Vec<RunResult>,
    pub table: Vec<TableRow>,
}

pub fn run_single(ds: &RegressionDataset, sizes: SplitSizes, fraction: f64, seed: u64, method: Method, base: &TrainConfig) -> Result<RunResult> {
    let started = Instant::now();
    let s = split(ds.len(), sizes, fraction, seed)?;
    let (lx, ly) = ds.rows(&s.labeled);
    let (ux, _) = ds.rows(&s.unlabeled);
    let (vx, vy) = ds.rows(&s.val);
    let (tx, ty) = ds.rows(&s.test);
    let data = TrainData { labeled_x: lx.view(), labeled_y: &ly, unlabeled_x: ux.view(), val_x: vx.view(), val_y: &vy };
    let cfg = TrainConfig { seed, ..*base };
    let cfg = match method {
        Method::Gclss => cfg,
        Method::Supervised => cfg.supervised(),
    };
    let out = train(cfg, data)?;
    let test_pred = out.model.predict(tx.view())?;
    let val_pred = out.model.predict(vx.view())?;
    let result = RunResult {
        method,
        fraction,
        seed,
        test_mae: mae(&test_pred, &ty)?,
        test_r2: r2(&test_pred, &ty)?,
        val_mae: mae(&val_pred, &vy)?,
        val_r2: r2(&val_pred, &vy)?,
        skipped_aux: out.skipped_aux,
        seconds: started.elapsed().as_secs_f64(),
    };
    log::info!(
        "{} fraction {:.3} seed {}: test MAE {:.4}, R² {:.4} ({:.1}s)",
        method.name(),
        fraction,
        seed,
        result.test_mae,
        result.test_r2,
        result.seconds
    );
    Ok(result)
}

/// Runs every (fraction, seed, method) combination on the current rayon pool.
pub fn run_experiment(ds: &RegressionDataset, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let jobs: Vec<(f64, u64, Method)> = cfg
        .fractions
        .iter()
        .flat_map(|&f| cfg.seeds.iter().flat_map(move |&s| [Method::Gclss, Method::Supervised].map(|m| (f, s, m))))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(f, s, m)| run_single(ds, cfg.sizes, f, s, m, &cfg.train))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { epochs: cfg.train.epochs, table: tabulate(&runs, &cfg.fractions), runs })
}

fn tabulate(runs: &[RunResult], fractions: &[f64]) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for method in [Method::Supervised, Method::Gclss] {
        for &fraction in fractions {
            let sel: Vec<&RunResult> = runs.iter().filter(|r| r.method == method && r.fraction == fraction).collect();
            let maes: Vec<f64> = sel.iter().map(|r| r.test_mae).collect();
            let r2s: Vec<f64> = sel.iter().map(|r| r.test_r2).collect();
            if let (Some(mae), Some(r2)) = (summarize(&maes), summarize(&r2s)) {
                rows.push(TableRow { method, fraction, mae, r2 });
            }
        }
    }
    rows
}

impl ExperimentReport {
    pub fn row(&self, method: Method, fraction: f64) -> Option<&TableRow> {
        self.table.iter().find(|r| r.method == method && r.fraction == fraction)
    }

    /// Fractions at which the semi-supervised mean test MAE is below the baseline's.
    pub fn ordering(&self) -> Vec<(f64, bool)> {
        let mut fractions: Vec<f64> = self.table.iter().map(|r| r.fraction).collect();
        fractions.sort_by(f64::total_cmp);
        fractions.dedup();
        fractions
            .into_iter()
            .filter_map(|f| Some((f, self.row(Method::Gclss, f)?.mae.mean < self.row(Method::Supervised, f)?.mae.mean)))
            .collect()
    }

    /// Text table with one row per method and MAE/R² columns per fraction.
    pub fn render(&self) -> String {
        let mut fractions: Vec<f64> = self.table.iter().map(|r| r.fraction).collect();
        fractions.sort_by(f64::total_cmp);
        fractions.dedup();
        let fmt = |s: Summary, pct: bool| {
            let k = if pct { 100.0 } else { 1.0 };
            match s.std {
                Some(sd) if pct => format!("{:.1}%±{:.1}", s.mean * k, sd * k),
                Some(sd) => format!("{:.3}±{:.3}", s.mean, sd),
                None if pct => format!("{:.1}%", s.mean * k),
                None => format!("{:.3}", s.mean),
            }
        };
        let mut out = format!("{:<11}", "method");
        for f in &fractions {
            let _ = write!(out, " | MAE {:<13}", format!("{f:.3}"));
        }
        for f in &fractions {
            let _ = write!(out, " | R² {:<13}", format!("{f:.3}"));
        }
        out.push('\n');
        for method in [Method::Supervised, Method::Gclss] {
            let _ = write!(out, "{:<11}", method.name());
            for metric in [false, true] {
                for &f in &fractions {
                    let cell = self.row(method, f).map(|r| fmt(if metric { r.r2 } else { r.mae }, metric)).unwrap_or_else(|| "-".into());
                    let _ = write!(out, " | {cell:<17}");
                }
            }
            out.push('\n');
        }
        out
    }
}
