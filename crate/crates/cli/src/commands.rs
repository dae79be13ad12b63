use std::io::Write;
use std::path::Path;

use anyhow::Context;
use rjcma::autodiff::Fault;
use rjcma::checkpoint::Checkpoint;
use rjcma::data::{
    generate_synthetic, make_folds, make_folds_with_canonical, write_features, Manifest, ManifestEntry, SequenceRecord,
    Split,
};
use rjcma::metrics::{evaluate, EvalResult, Target};
use rjcma::model::check_model_gradients;
use rjcma::train::{ablate_recursions, cross_validate, train_on_split, ResultTable};
use serde::Serialize;

use crate::config::RunConfig;
use crate::rundir::RunDir;
use crate::{DataError, NumericalFailure, EXIT_NUMERICAL, EXIT_OK};

/// Stdout writes that ignore a closed pipe (e.g. `rjcma cv | head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
}

macro_rules! sayln {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

/// Sequences in manifest (or generation) order, each tagged with its split.
struct Dataset {
    records: Vec<SequenceRecord>,
    splits: Vec<Split>,
}

impl Dataset {
    fn split(&self, which: Split) -> Vec<SequenceRecord> {
        self.records.iter().zip(&self.splits).filter(|(_, &s)| s == which).map(|(r, _)| r.clone()).collect()
    }

    /// Train and val sequences for fold construction; val positions become
    /// the canonical fold.
    fn development(&self) -> (Vec<SequenceRecord>, Vec<usize>) {
        let mut records = Vec::new();
        let mut canonical = Vec::new();
        for (r, &s) in self.records.iter().zip(&self.splits) {
            if s == Split::Test {
                continue;
            }
            if s == Split::Val {
                canonical.push(records.len());
            }
            records.push(r.clone());
        }
        (records, canonical)
    }
}

/// Fold 0 of a seeded k-fold split is the val partition.
fn synthetic_splits(n: usize, cfg: &RunConfig) -> anyhow::Result<Vec<Split>> {
    let folds = make_folds(n, cfg.cv.n_folds, cfg.seed)?;
    let val = folds.val_indices(0);
    Ok((0..n).map(|i| if val.contains(&i) { Split::Val } else { Split::Train }).collect())
}

fn load_dataset(cfg: &RunConfig, manifest: Option<&Path>) -> anyhow::Result<Dataset> {
    let manifest = manifest.or(cfg.paths.manifest.as_deref());
    let data = match manifest {
        Some(path) => {
            let m = Manifest::load(path).with_context(|| format!("reading manifest {}", path.display()))?;
            let (splits, records) = m
                .load_records(path)
                .with_context(|| format!("loading sequences of {}", path.display()))?
                .into_iter()
                .unzip();
            Dataset { records, splits }
        }
        None => {
            let records = generate_synthetic(&cfg.synthetic, cfg.seed)?;
            let splits = synthetic_splits(records.len(), cfg)?;
            Dataset { records, splits }
        }
    };
    if data.records.is_empty() {
        anyhow::bail!(DataError("dataset is empty".into()));
    }
    Ok(data)
}

fn check_dims(data: &Dataset, expected: [usize; 3], what: &str) -> anyhow::Result<()> {
    for r in &data.records {
        let got = [0, 1, 2].map(|i| r.features[i].rows());
        if got != expected {
            anyhow::bail!(DataError(format!(
                "sequence `{}` has feature dims (audio, visual, text) = {got:?} but the {what} expects {expected:?}",
                r.id
            )));
        }
    }
    Ok(())
}

fn start(cfg: &RunConfig, verb: &str) -> anyhow::Result<RunDir> {
    let dir = RunDir::create(&cfg.paths.out_dir, verb)?;
    dir.write_json("config.json", cfg)?;
    Ok(dir)
}

fn finish(dir: &RunDir) {
    sayln!("run directory: {}", dir.path().display());
}

pub fn gen(cfg: &RunConfig) -> anyhow::Result<u8> {
    let records = generate_synthetic(&cfg.synthetic, cfg.seed)?;
    let splits = synthetic_splits(records.len(), cfg)?;
    let dir = start(cfg, "gen")?;
    let data_dir = dir.join("data");
    std::fs::create_dir(&data_dir).with_context(|| format!("creating {}", data_dir.display()))?;
    let mut entries = Vec::with_capacity(records.len());
    for (r, &split) in records.iter().zip(&splits) {
        let rel = format!("data/{}.mmf", r.id);
        let path = dir.join(&rel);
        write_features(&path, r).with_context(|| format!("writing {}", path.display()))?;
        entries.push(ManifestEntry { id: r.id.clone(), path: rel, split });
    }
    let manifest_path = dir.join("manifest.json");
    Manifest { entries }.save(&manifest_path).with_context(|| format!("writing {}", manifest_path.display()))?;
    sayln!("wrote {} sequences", records.len());
    sayln!("manifest: {}", manifest_path.display());
    finish(&dir);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct TrainReport {
    target: Target,
    #[serde(flatten)]
    eval: EvalResult,
    best_val_ccc: f64,
    best_epoch: usize,
    epochs: usize,
    stopped_early: bool,
}

pub fn train(cfg: &RunConfig, manifest: Option<&Path>) -> anyhow::Result<u8> {
    let data = load_dataset(cfg, manifest)?;
    check_dims(&data, cfg.model.fusion.dims(), "model config")?;
    let (train, val) = (data.split(Split::Train), data.split(Split::Val));
    if train.is_empty() || val.is_empty() {
        anyhow::bail!(DataError(format!(
            "training needs both splits; got {} train and {} val sequences",
            train.len(),
            val.len()
        )));
    }
    let dir = start(cfg, "train")?;
    let run = train_on_split(&train, &val, &cfg.model, &cfg.window, &cfg.train)?;
    dir.write("checkpoint.bin", run.checkpoint.encode()?)?;
    dir.write("history.csv", run.outcome.history_csv())?;
    let report = TrainReport {
        target: cfg.train.target,
        eval: run.eval.clone(),
        best_val_ccc: run.outcome.best_val_ccc,
        best_epoch: run.outcome.best_epoch,
        epochs: run.outcome.history.len(),
        stopped_early: run.outcome.stopped_early,
    };
    dir.write_json("report.json", &report)?;
    sayln!(
        "best val CCC ({}) {:.4} at epoch {} of {}",
        cfg.train.target,
        run.outcome.best_val_ccc,
        run.outcome.best_epoch,
        run.outcome.history.len()
    );
    finish(&dir);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct EvalReport {
    target: Target,
    split: Split,
    #[serde(flatten)]
    eval: EvalResult,
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path, manifest: &Path, split: Split) -> anyhow::Result<u8> {
    let ckpt = Checkpoint::load(checkpoint).with_context(|| format!("reading checkpoint {}", checkpoint.display()))?;
    let data = load_dataset(cfg, Some(manifest))?;
    check_dims(&data, ckpt.model.config().fusion.dims(), "checkpoint")?;
    let records = data.split(split);
    if records.is_empty() {
        anyhow::bail!(DataError(format!("the manifest has no `{split:?}` sequences")));
    }
    let normalized = ckpt.normalizer.apply_all(&records)?;
    let scores = evaluate(&ckpt.model, &normalized, ckpt.target)?;
    let report = EvalReport { target: ckpt.target, split, eval: EvalResult::from_targets(&[scores]) };
    let dir = start(cfg, "eval")?;
    dir.write_json("report.json", &report)?;
    say!("{}", report.eval.render());
    finish(&dir);
    Ok(EXIT_OK)
}

pub fn gradcheck(cfg: &RunConfig, fault: Option<Fault>) -> anyhow::Result<u8> {
    let gc = &cfg.gradcheck;
    let dir = start(cfg, "gradcheck")?;
    let report = check_model_gradients(&gc.model, gc.seed, gc.h, gc.tol, fault)?;
    dir.write_json("report.json", &report)?;
    say!("{}", report.render());
    finish(&dir);
    if report.passed {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "{}",
            NumericalFailure(format!("gradient check failed: max relative error {:.3e}", report.max_rel_err))
        );
        Ok(EXIT_NUMERICAL)
    }
}

fn write_table(dir: &RunDir, table: &ResultTable) -> anyhow::Result<()> {
    let text = table.render();
    dir.write("table.md", &text)?;
    dir.write_json("report.json", table)?;
    say!("{text}");
    Ok(())
}

pub fn ablate(
    cfg: &RunConfig,
    l_values: &[usize],
    fold: Option<usize>,
    manifest: Option<&Path>,
    targets: &[Target],
) -> anyhow::Result<u8> {
    let data = load_dataset(cfg, manifest)?;
    check_dims(&data, cfg.model.fusion.dims(), "model config")?;
    let (records, canonical) = data.development();
    let folds = make_folds_with_canonical(records.len(), &canonical, cfg.cv.n_folds, cfg.seed)?;
    let fold = fold.unwrap_or(cfg.cv.ablation_fold);
    let dir = start(cfg, "ablate")?;
    let table = ablate_recursions(&records, &folds, fold, &cfg.model, &cfg.window, &cfg.train, l_values, targets)?;
    write_table(&dir, &table)?;
    finish(&dir);
    Ok(EXIT_OK)
}

pub fn cv(cfg: &RunConfig, n_folds: Option<usize>, manifest: Option<&Path>, targets: &[Target]) -> anyhow::Result<u8> {
    let data = load_dataset(cfg, manifest)?;
    check_dims(&data, cfg.model.fusion.dims(), "model config")?;
    let (records, canonical) = data.development();
    let n_folds = n_folds.unwrap_or(cfg.cv.n_folds);
    let folds = make_folds_with_canonical(records.len(), &canonical, n_folds, cfg.seed)?;
    let dir = start(cfg, "cv")?;
    let table = cross_validate(&records, &folds, &cfg.model, &cfg.window, &cfg.train, targets)?;
    write_table(&dir, &table)?;
    finish(&dir);
    Ok(EXIT_OK)
}
