use rayon::prelude::*;

use super::{train_on_split, ResultTable, TableRow, TrainConfig};
use crate::data::{Folds, SequenceRecord, WindowSpec};
use crate::error::{Error, Result};
use crate::metrics::Target;
use crate::model::ModelConfig;

/// One (fold, target) training job.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CvJob {
    pub fold: usize,
    pub target: Target,
}

/// Trains one model per fold and target and tabulates validation CCC as
/// `Fold i | Valence | Arousal | Mean`. Jobs run in parallel; each job is
/// itself deterministic.
pub fn cross_validate(
    records: &[SequenceRecord],
    folds: &Folds,
    model_cfg: &ModelConfig,
    spec: &WindowSpec,
    cfg: &TrainConfig,
    targets: &[Target],
) -> Result<ResultTable> {
    let jobs: Vec<CvJob> =
        (0..folds.n_folds()).flat_map(|fold| targets.iter().map(move |&target| CvJob { fold, target })).collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|job| {
            let pick = |idx: Vec<usize>| idx.into_iter().map(|i| records[i].clone()).collect::<Vec<_>>();
            let train = pick(folds.train_indices(job.fold));
            let val = pick(folds.val_indices(job.fold));
            let cfg = TrainConfig { target: job.target, ..cfg.clone() };
            let run = train_on_split(&train, &val, model_cfg, spec, &cfg)?;
            log::info!("fold {} {}: {:.4}", job.fold, job.target, run.outcome.best_val_ccc);
            Ok(run.outcome.best_val_ccc)
        })
        .collect::<Result<_>>()?;
    let rows = (0..folds.n_folds())
        .map(|fold| {
            let score =
                |t: Target| jobs.iter().zip(&scores).find(|(j, _)| j.fold == fold && j.target == t).map(|(_, &s)| s);
            TableRow::new(format!("Fold {fold}"), score(Target::Valence), score(Target::Arousal))
        })
        .collect();
    Ok(ResultTable {
        title: format!("CCC on {} folds of cross-validation", folds.n_folds()),
        key: "Validation Set".into(),
        rows,
    })
}

/// Trains one model per recursion depth and target on the same fold, seed
/// and data, and tabulates `l = n | Valence | Arousal | Mean`.
#[allow(clippy::too_many_arguments)]
pub fn ablate_recursions(
    records: &[SequenceRecord],
    folds: &Folds,
    fold: usize,
    model_cfg: &ModelConfig,
    spec: &WindowSpec,
    cfg: &TrainConfig,
    l_values: &[usize],
    targets: &[Target],
) -> Result<ResultTable> {
    if l_values.is_empty() {
        return Err(Error::Config("no recursion depths to compare".into()));
    }
    if fold >= folds.n_folds() {
        return Err(Error::Config(format!("fold {fold} out of range for {} folds", folds.n_folds())));
    }
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| records[i].clone()).collect::<Vec<_>>();
    let train = pick(folds.train_indices(fold));
    let val = pick(folds.val_indices(fold));
    let jobs: Vec<(usize, Target)> = l_values.iter().flat_map(|&l| targets.iter().map(move |&t| (l, t))).collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(l, target)| {
            let mut m = model_cfg.clone();
            m.fusion.iterations = l;
            let cfg = TrainConfig { target, ..cfg.clone() };
            let run = train_on_split(&train, &val, &m, spec, &cfg)?;
            log::info!("l = {l} {target}: {:.4}", run.outcome.best_val_ccc);
            Ok(run.outcome.best_val_ccc)
        })
        .collect::<Result<_>>()?;
    let rows = l_values
        .iter()
        .map(|&l| {
            let score =
                |t: Target| jobs.iter().zip(&scores).find(|((jl, jt), _)| *jl == l && *jt == t).map(|(_, &s)| s);
            TableRow::new(format!("l = {l}"), score(Target::Valence), score(Target::Arousal))
        })
        .collect();
    Ok(ResultTable {
        title: format!("CCC by number of recursions (fold {fold})"),
        key: "Num. of recursions (l)".into(),
        rows,
    })
}
