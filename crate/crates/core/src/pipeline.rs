//! End-to-end evaluation of one dataset on one reservoir: run, train on the
//! training split, score on the test split.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::readout::{nmse, predict, train_ridge, train_ridge_multi, wta_classify, RidgeOptions};
use crate::sidebands::Reservoir;
use crate::tasks::{capacities_from_features, ser, CapacityOptions, TaskDataset, TaskKind};

/// Named scalar metrics of one evaluation.
pub type Metrics = BTreeMap<String, f64>;

/// Record the reservoir's response to the whole dataset from a zero state.
pub fn record_intensities(dataset: &TaskDataset, reservoir: &Reservoir, noise_seed: u64) -> Result<DMatrix<f64>> {
    reservoir.run(&dataset.inputs, &reservoir.zero_state(), noise_seed)
}

/// Train and score a readout on already recorded intensities.
///
/// Metrics per task: `nmse` (NARMA10); `ser` and `nmse` (channel); `lmc`,
/// `qmc`, `xmc`, `total` (memory); `wer` (classification).
pub fn evaluate_features(
    dataset: &TaskDataset,
    features: &DMatrix<f64>,
    ridge: RidgeOptions,
    capacity: &CapacityOptions,
) -> Result<Metrics> {
    let split = dataset.split;
    if features.nrows() != dataset.len() {
        return Err(Error::Usage(format!(
            "{} intensity rows for a dataset of {}",
            features.nrows(),
            dataset.len()
        )));
    }
    if split.train == 0 || split.test == 0 {
        return Err(Error::Usage("train and test splits must be non-empty".into()));
    }
    let train_x = features.rows(split.warmup, split.train).into_owned();
    let test_x = features.rows(split.warmup + split.train, split.test).into_owned();
    let mut metrics = Metrics::new();

    match dataset.task {
        TaskKind::Narma10 | TaskKind::Channel => {
            let target = dataset
                .targets
                .first()
                .ok_or_else(|| Error::Usage("dataset has no target".into()))?;
            let model = train_ridge(&train_x, &target[split.train_range()], ridge)?;
            let pred = predict(&model, &test_x)?;
            let truth = &target[split.test_range()];
            metrics.insert("nmse".into(), nmse(&pred, truth)?);
            if dataset.task == TaskKind::Channel {
                metrics.insert("ser".into(), ser(&pred, truth)?);
            }
        }
        TaskKind::Memory => {
            let r = capacities_from_features(&dataset.inputs, features, split, capacity, ridge)?;
            metrics.insert("lmc".into(), r.lmc);
            metrics.insert("qmc".into(), r.qmc);
            metrics.insert("xmc".into(), r.xmc);
            metrics.insert("total".into(), r.total);
        }
        TaskKind::Classification => {
            let c = dataset.targets.len();
            let train_y = DMatrix::from_fn(split.train, c, |i, j| dataset.targets[j][split.warmup + i]);
            let models = train_ridge_multi(&train_x, &train_y, ridge)?;
            let mut scores = DMatrix::zeros(split.test, c);
            for (j, m) in models.iter().enumerate() {
                let p = predict(m, &test_x)?;
                scores.column_mut(j).copy_from_slice(&p);
            }
            let test = split.test_range();
            let (segs, labels): (Vec<_>, Vec<_>) = dataset
                .segments
                .iter()
                .zip(&dataset.labels)
                .filter(|((s, e), _)| *s >= test.start && *e <= test.end)
                .map(|(&(s, e), &l)| ((s - test.start, e - test.start), l))
                .unzip();
            if segs.is_empty() {
                return Err(Error::Usage("no labelled segment lies inside the test split".into()));
            }
            let decided = wta_classify(&scores, &segs)?;
            let wrong = decided.iter().zip(&labels).filter(|(a, b)| a != b).count();
            metrics.insert("wer".into(), wrong as f64 / segs.len() as f64);
        }
    }
    Ok(metrics)
}

/// Run the reservoir once and evaluate every ridge parameter in `lambdas`.
pub fn evaluate_lambdas(
    dataset: &TaskDataset,
    reservoir: &Reservoir,
    ridge: RidgeOptions,
    lambdas: &[f64],
    capacity: &CapacityOptions,
    noise_seed: u64,
) -> Result<Vec<Result<Metrics>>> {
    let features = record_intensities(dataset, reservoir, noise_seed)?;
    Ok(lambdas
        .iter()
        .map(|&l| evaluate_features(dataset, &features, ridge.with_lambda(l), capacity))
        .collect())
}

pub fn evaluate(
    dataset: &TaskDataset,
    reservoir: &Reservoir,
    ridge: RidgeOptions,
    capacity: &CapacityOptions,
    noise_seed: u64,
) -> Result<Metrics> {
    let features = record_intensities(dataset, reservoir, noise_seed)?;
    evaluate_features(dataset, &features, ridge, capacity)
}
