use std::io::Write;
use std::path::Path;
use std::time::Instant;

use gclss_core::bounds::{check_robustness, similarity_bound};
use gclss_core::data::{load_dataset, load_split, make_dataset, save_dataset, split, DatasetConfig, GpConfig, RegressionDataset, Split, SplitSizes};
use gclss_core::experiment::{run_experiment, ExperimentConfig, PAPER_FRACTIONS};
use gclss_core::instances::{near_tie_instance, random_mixed_instance};
use gclss_core::linalg::io::{from_json, parse_csv, read_csv};
use gclss_core::metrics::{mae, r2, summarize};
use gclss_core::mfsm::{brute_select, dp_select, toy_experiment, ToyConfig, VarianceMatrix};
use gclss_core::model::{AdamConfig, LossWeights, RegressionModel};
use gclss_core::seriation::{seriate, seriate_anchored, AnchorMode};
use gclss_core::train::{write_metrics_csv, Checkpoint, Profile, TrainConfig, TrainData, Trainer};
use gclss_core::{MixedBatchLayout, SymMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, TrainSection};
use crate::{BoundArgs, Cli, CliError, Command, EvalArgs, ExperimentArgs, GenDataArgs, RobustnessArgs, SelectArgs, SeriateArgs, SplitFlags, ToyDpArgs, TrainArgs, TrainFlags};

type CliResult<T> = Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::GenData(a) => gen_data(a, &config),
        Command::Train(a) => train(a, &config),
        Command::Experiment(a) => experiment(a, &config),
        Command::Seriate(a) => cmd_seriate(a),
        Command::Select(a) => select(a),
        Command::Bound(a) => bound(a),
        Command::RobustnessSweep(a) => robustness_sweep(a),
        Command::ToyDp(a) => toy_dp(a),
        Command::Eval(a) => eval(a),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(gclss_core::Error::from)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| CliError::Compute(e.into())),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Compute(e.into())),
            _ => Ok(()),
        },
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read_matrix(path: &Path) -> CliResult<SymMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    Ok(if is_json { from_json(&text)? } else { SymMatrix::new(parse_csv(&text)?)? })
}

fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_csv(&text)?.into_iter().collect())
}

fn split_sizes(flags: &SplitFlags, config: &RunConfig) -> SplitSizes {
    let d = SplitSizes::default();
    SplitSizes {
        train: flags.train_size.or(config.data.train_size).unwrap_or(d.train),
        val: flags.val_size.or(config.data.val_size).unwrap_or(d.val),
        test: flags.test_size.or(config.data.test_size).unwrap_or(d.test),
    }
}

fn parse_with<T: std::str::FromStr<Err = gclss_core::Error>>(raw: &str) -> CliResult<T> {
    raw.parse().map_err(|e: gclss_core::Error| usage(e.to_string()))
}

/// Flags over config file over defaults.
fn train_config(flags: &TrainFlags, file: &TrainSection, seed: Option<u64>, supervised: bool) -> CliResult<TrainConfig> {
    let d = TrainConfig::default();
    let profile = match flags.profile.as_deref().or(file.profile.as_deref()) {
        Some(p) => parse_with::<Profile>(p)?,
        None => Profile::Fast,
    };
    let anchor_mode = match flags.anchor_mode.as_deref().or(file.anchor_mode.as_deref()) {
        Some(m) => parse_with::<AnchorMode>(m)?,
        None => d.anchor_mode,
    };
    let w = d.weights;
    let weights = LossWeights {
        sc: flags.lambda_sc.or(file.lambda_sc).unwrap_or(w.sc),
        uc: flags.lambda_uc.or(file.lambda_uc).unwrap_or(w.uc),
        ur: flags.lambda_ur.or(file.lambda_ur).unwrap_or(w.ur),
        step: flags.step.or(file.step).unwrap_or(w.step),
    };
    let cfg = TrainConfig {
        seed: seed.or(file.seed).unwrap_or(d.seed),
        epochs: flags.epochs.or(file.epochs).unwrap_or(profile.epochs()),
        hidden: flags.hidden.or(file.hidden).unwrap_or(d.hidden),
        adam: AdamConfig { lr: flags.lr.or(file.lr).unwrap_or(d.adam.lr), ..d.adam },
        weights,
        unlabeled_batch: flags.unlabeled_batch.or(file.unlabeled_batch).unwrap_or(d.unlabeled_batch),
        anchors: flags.anchors.or(file.anchors).unwrap_or(d.anchors),
        budget: flags.budget.or(file.budget).unwrap_or(d.budget),
        anchor_mode,
        eval_every: flags.eval_every.or(file.eval_every).unwrap_or(d.eval_every),
    };
    let cfg = if supervised { cfg.supervised() } else { cfg };
    cfg.validate().map_err(|e| usage(format!("invalid training configuration: {e}")))?;
    Ok(cfg)
}

fn gen_data(a: GenDataArgs, config: &RunConfig) -> CliResult<()> {
    let d = DatasetConfig::default();
    let c = &config.data;
    let gp = GpConfig {
        grid: a.grid.or(c.grid).unwrap_or(d.gp.grid),
        length_scale: a.length_scale.or(c.length_scale).unwrap_or(d.gp.length_scale),
        ..d.gp
    };
    let cfg = DatasetConfig {
        samples: a.n.or(c.n).unwrap_or(d.samples),
        seed: a.seed.or(c.seed).unwrap_or(d.seed),
        gp,
        forcing: a.forcing.or(c.forcing).unwrap_or(d.forcing),
        label_point: a.label_point.or(c.label_point).unwrap_or(d.label_point),
    };
    let fraction = a.labeled_frac.or(c.labeled_frac).unwrap_or(0.5);
    let sizes = split_sizes(&a.split, config);
    let needed = sizes.train + sizes.val + sizes.test;
    if needed > cfg.samples {
        return Err(usage(format!(
            "split needs {needed} samples but --n is {}; pass --train-size/--val-size/--test-size",
            cfg.samples
        )));
    }
    let started = Instant::now();
    let ds = make_dataset(&cfg)?;
    let s = split(ds.len(), sizes, fraction, cfg.seed)?;
    save_dataset(&a.out, &ds, Some(&s))?;
    eprintln!("wrote {} samples to {} ({:.1}s)", ds.len(), a.out.display(), started.elapsed().as_secs_f64());
    emit(
        &json!({
            "dir": a.out,
            "meta": ds.meta,
            "labeled": s.labeled.len(),
            "unlabeled": s.unlabeled.len(),
            "val": s.val.len(),
            "test": s.test.len(),
        }),
        None,
    )
}

fn dataset_split(ds: &RegressionDataset, dir: &Path, fraction: Option<f64>, sizes: SplitSizes, seed: u64) -> CliResult<Split> {
    if let Some(f) = fraction {
        return Ok(split(ds.len(), sizes, f, seed)?);
    }
    load_split(dir)?.ok_or_else(|| usage(format!("{} has no saved split; pass --labeled-frac", dir.display())))
}

#[derive(Serialize)]
struct TrainReport {
    seed: u64,
    epochs: usize,
    steps: usize,
    labeled: usize,
    unlabeled: usize,
    skipped_aux: usize,
    val_mae: f64,
    val_r2: f64,
    test_mae: f64,
    test_r2: f64,
    seconds: f64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string(value).map_err(gclss_core::Error::from)?;
    std::fs::write(path, text).map_err(|e| CliError::Compute(e.into()))
}

fn train(a: TrainArgs, config: &RunConfig) -> CliResult<()> {
    let cfg = train_config(&a.train, &config.train, a.seed, a.supervised)?;
    let ds = load_dataset(&a.data)?;
    let s = dataset_split(&ds, &a.data, a.labeled_frac, split_sizes(&a.split, config), cfg.seed)?;
    let (lx, ly) = ds.rows(&s.labeled);
    let (ux, _) = ds.rows(&s.unlabeled);
    let (vx, vy) = ds.rows(&s.val);
    let (tx, ty) = ds.rows(&s.test);
    let data = TrainData { labeled_x: lx.view(), labeled_y: &ly, unlabeled_x: ux.view(), val_x: vx.view(), val_y: &vy };

    let started = Instant::now();
    let mut trainer = match &a.resume {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read checkpoint {}: {e}", path.display())))?;
            let ckpt: Checkpoint = serde_json::from_str(&text).map_err(|e| usage(format!("bad checkpoint {}: {e}", path.display())))?;
            Trainer::resume(cfg, data, ckpt)?
        }
        None => Trainer::new(cfg, data)?,
    };
    let chunk = if a.checkpoint.is_some() { a.checkpoint_every.max(1) } else { cfg.epochs };
    while trainer.step() < cfg.epochs {
        trainer.run_for(chunk)?;
        if let Some(path) = &a.checkpoint {
            write_json(path, &trainer.checkpoint())?;
            log::info!("checkpoint at step {} written to {}", trainer.step(), path.display());
        }
    }
    let outcome = trainer.finish();
    if let Some(path) = &a.metrics {
        let file = std::fs::File::create(path).map_err(|e| CliError::Compute(e.into()))?;
        write_metrics_csv(std::io::BufWriter::new(file), &outcome.history)?;
    }
    if let Some(path) = &a.model_out {
        write_json(path, &outcome.model)?;
    }
    let val_pred = outcome.model.predict(vx.view())?;
    let test_pred = outcome.model.predict(tx.view())?;
    let report = TrainReport {
        seed: cfg.seed,
        epochs: cfg.epochs,
        steps: outcome.steps,
        labeled: s.labeled.len(),
        unlabeled: s.unlabeled.len(),
        skipped_aux: outcome.skipped_aux,
        val_mae: mae(&val_pred, &vy)?,
        val_r2: r2(&val_pred, &vy)?,
        test_mae: mae(&test_pred, &ty)?,
        test_r2: r2(&test_pred, &ty)?,
        seconds: started.elapsed().as_secs_f64(),
    };
    eprintln!("seed {}: test MAE {:.4}, R² {:.2}% after {} steps", report.seed, report.test_mae, report.test_r2 * 100.0, report.steps);
    emit(&report, a.out.as_deref())
}

fn experiment(a: ExperimentArgs, config: &RunConfig) -> CliResult<()> {
    let train = train_config(&a.train, &config.train, None, false)?;
    let fractions = a.fractions.or_else(|| config.experiment.fractions.clone()).unwrap_or_else(|| PAPER_FRACTIONS.to_vec());
    let seeds = a.seeds.or_else(|| config.experiment.seeds.clone()).unwrap_or_else(|| (0..10).collect());
    if fractions.is_empty() || seeds.is_empty() {
        return Err(usage("need at least one fraction and one seed"));
    }
    let ds = load_dataset(&a.data)?;
    let cfg = ExperimentConfig { fractions, seeds, sizes: split_sizes(&a.split, config), train };
    let report = run_experiment(&ds, &cfg)?;
    eprint!("{}", report.render());
    for (f, better) in report.ordering() {
        eprintln!("fraction {f:.3}: semi-supervised MAE {} baseline", if better { "below" } else { "not below" });
    }
    emit(&json!({ "report": report, "ordering": report.ordering() }), a.out.as_deref())
}

fn cmd_seriate(a: SeriateArgs) -> CliResult<()> {
    let s = read_matrix(&a.matrix)?;
    match (a.labeled, &a.labels) {
        (Some(m), Some(path)) => {
            let labels = read_vector(path)?;
            let layout = MixedBatchLayout::for_matrix(s.n(), m)?;
            let mode = parse_with::<AnchorMode>(&a.anchor_mode)?;
            let result = seriate_anchored(&s, layout, &labels, mode)?;
            emit(
                &json!({
                    "ranks": result.mixed.ranks,
                    "scores": result.mixed.scores,
                    "anchor": result.anchor,
                    "ridge": result.ridge,
                }),
                a.out.as_deref(),
            )
        }
        _ => emit(&json!({ "ranks": seriate(&s)? }), a.out.as_deref()),
    }
}

fn select(a: SelectArgs) -> CliResult<()> {
    let raw = read_csv(&a.matrix).map_err(|e| match e {
        gclss_core::Error::Io(io) => usage(format!("cannot read {}: {io}", a.matrix.display())),
        other => other.into(),
    })?;
    let v = VarianceMatrix::from_array(raw)?;
    let dp = dp_select(&v, a.budget)?;
    let exact = if a.exact { Some(brute_select(&v, a.budget)?) } else { None };
    if let Some(ex) = &exact {
        eprintln!("heuristic cost {:.6e}, exact cost {:.6e}", dp.cost, ex.cost);
    }
    emit(&json!({ "indices": dp.indices, "cost": dp.cost, "exact": exact }), a.out.as_deref())
}

fn bound(a: BoundArgs) -> CliResult<()> {
    let s = read_matrix(&a.matrix)?;
    let layout = MixedBatchLayout::for_matrix(s.n(), a.labeled)?;
    let b = similarity_bound(&s, layout)?;
    eprintln!("similarity tolerance {:.6e}, feature tolerance {:.6e}", b.sim_bound, b.feat_bound);
    if let Some(cross) = &b.cross {
        eprintln!("alternate reading (symmetrized cross block): {:.6e}", cross.sim_bound);
    }
    emit(&b, a.out.as_deref())
}

#[derive(Serialize)]
struct SweepSummary {
    instances: usize,
    trials: usize,
    scale: f64,
    near_tie: bool,
    /// Instances where at least one perturbation changed the ranking.
    changed_instances: usize,
    unchanged_trials: usize,
    max_displacement: usize,
    min_sim_bound: f64,
}

fn robustness_sweep(a: RobustnessArgs) -> CliResult<()> {
    if a.instances == 0 || a.trials == 0 {
        return Err(usage("instances and trials must be positive"));
    }
    let mode = parse_with::<AnchorMode>(&a.anchor_mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut summary = SweepSummary {
        instances: a.instances,
        trials: a.trials,
        scale: a.scale,
        near_tie: a.near_tie,
        changed_instances: 0,
        unchanged_trials: 0,
        max_displacement: 0,
        min_sim_bound: f64::INFINITY,
    };
    for k in 0..a.instances {
        let inst = if a.near_tie {
            near_tie_instance(&mut rng, a.labeled, a.unlabeled, 1e-6, 2.0)?
        } else {
            random_mixed_instance(&mut rng, a.labeled, a.unlabeled, 0.3, 2.0)?
        };
        let anchor = gclss_core::seriation::anchor_vector(&inst.similarity, inst.layout, inst.labeled_labels(), mode)?;
        let rep = check_robustness(&inst.similarity, inst.layout, &anchor, a.trials, a.scale, a.seed.wrapping_add(k as u64))?;
        if !rep.all_unchanged() {
            summary.changed_instances += 1;
        }
        summary.unchanged_trials += rep.unchanged;
        summary.max_displacement = summary.max_displacement.max(rep.max_displacement);
        summary.min_sim_bound = summary.min_sim_bound.min(rep.bound.sim_bound);
    }
    eprintln!(
        "{} of {} instances changed ranking at scale {}",
        summary.changed_instances, summary.instances, summary.scale
    );
    emit(&summary, a.out.as_deref())
}

fn toy_dp(a: ToyDpArgs) -> CliResult<()> {
    if a.seeds == 0 {
        return Err(usage("--seeds must be positive"));
    }
    let d = ToyConfig::default();
    let base = ToyConfig {
        samples: a.samples.unwrap_or(d.samples),
        dim: a.dim.unwrap_or(d.dim),
        groups: a.groups.unwrap_or(d.groups),
        budget: a.budget.unwrap_or(d.budget),
        sigma_base: a.sigma_base.unwrap_or(d.sigma_base),
        sigma_step: a.sigma_step.unwrap_or(d.sigma_step),
        exact: a.exact,
        ..d
    };
    let mut runs = Vec::new();
    for seed in a.first_seed..a.first_seed + a.seeds {
        let out = toy_experiment(&ToyConfig { seed, ..base.clone() })?;
        match out.exact_accuracy {
            Some(ex) => eprintln!("seed {seed}: accuracy {:.0}% (exact {:.0}%)", out.accuracy * 100.0, ex * 100.0),
            None => eprintln!("seed {seed}: accuracy {:.0}%", out.accuracy * 100.0),
        }
        runs.push(out);
    }
    let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    let summary = summarize(&acc).expect("at least one seed");
    eprintln!("mean accuracy {:.1}%", summary.mean * 100.0);
    emit(&json!({ "runs": runs, "accuracy": summary }), a.out.as_deref())
}

fn eval(a: EvalArgs) -> CliResult<()> {
    let ds = load_dataset(&a.data)?;
    let text = std::fs::read_to_string(&a.model).map_err(|e| usage(format!("cannot read model {}: {e}", a.model.display())))?;
    let model: RegressionModel = serde_json::from_str(&text).map_err(|e| usage(format!("bad model {}: {e}", a.model.display())))?;
    let rows: Vec<usize> = match a.subset.as_str() {
        "all" => (0..ds.len()).collect(),
        name => {
            let s = load_split(&a.data)?.ok_or_else(|| usage(format!("{} has no saved split", a.data.display())))?;
            match name {
                "test" => s.test,
                "val" => s.val,
                "labeled" => s.labeled,
                "unlabeled" => s.unlabeled,
                other => return Err(usage(format!("unknown subset {other:?}"))),
            }
        }
    };
    let (x, y) = ds.rows(&rows);
    let pred = model.predict(x.view())?;
    let (m, r) = (mae(&pred, &y)?, r2(&pred, &y)?);
    eprintln!("{} samples: MAE {m:.4}, R² {:.2}%", y.len(), r * 100.0);
    emit(&json!({ "subset": a.subset, "count": y.len(), "mae": m, "r2": r }), a.out.as_deref())
}
