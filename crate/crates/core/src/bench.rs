//! Standard benchmark protocols built on [`crate::scan`], and their summaries.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::readout::RidgeOptions;
use crate::scan::{best_in, default_split, run_scan, Direction, GridAxis, ParamGrid, PointParams, ScanResult, ScanSpec};
use crate::sidebands::{InputEncoding, ReservoirConfig};
use crate::tasks::{CapacityOptions, TaskKind};

pub const DEFAULT_REPLICATES: usize = 10;
pub const DEFAULT_SEED: u64 = 20_240_601;

fn range(start: f64, stop: f64, step: f64) -> Option<GridAxis> {
    Some(GridAxis::Range { start, stop, step })
}

fn sine(n_neurons: usize, m: f64, beta: f64, input_bias: f64) -> ReservoirConfig {
    ReservoirConfig {
        alpha: 0.81,
        phi1: 3.0,
        m,
        beta,
        n_neurons,
        input_encoding: InputEncoding::Sine,
        input_bias,
        ..ReservoirConfig::default()
    }
}

/// Standard sweep for a task at `n_neurons` readout sidebands.
pub fn preset(task: TaskKind, n_neurons: usize) -> Result<ScanSpec> {
    let m = if n_neurons > 13 { 4.0 } else { 2.0 };
    let (reservoir, grid) = match task {
        TaskKind::Narma10 => (
            sine(n_neurons, m, 0.05, 0.5),
            ParamGrid {
                phi0: range(0.0, 3.62, 0.05),
                ..ParamGrid::default()
            },
        ),
        TaskKind::Memory => (
            sine(n_neurons, m, 0.4, 0.3),
            ParamGrid {
                phi0: range(0.0, std::f64::consts::FRAC_PI_2, 0.05),
                ..ParamGrid::default()
            },
        ),
        TaskKind::Channel => (
            sine(n_neurons, m, 0.5, 0.5),
            ParamGrid {
                alpha: Some(GridAxis::Values(vec![0.5, 0.7, 0.81, 0.9])),
                phi0: range(0.0, 3.1, 0.1),
                snr_db: range(12.0, 32.0, 4.0),
                ..ParamGrid::default()
            },
        ),
        TaskKind::Classification => (
            sine(n_neurons, m, 0.5, 0.5),
            ParamGrid {
                phi0: range(0.0, 3.1, 0.2),
                ..ParamGrid::default()
            },
        ),
    };
    let spec = ScanSpec {
        task,
        replicates: DEFAULT_REPLICATES,
        base_seed: DEFAULT_SEED,
        split: Some(default_split(task)),
        reservoir,
        ridge: RidgeOptions::default(),
        grid,
        capacity: CapacityOptions::default(),
        classification: Default::default(),
    };
    spec.validate()?;
    Ok(spec)
}

/// One headline number of a benchmark and where on the grid it was found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub label: String,
    pub metric: String,
    pub direction: Direction,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub index: usize,
    pub params: PointParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub task: TaskKind,
    pub n_neurons: usize,
    pub replicates: usize,
    pub entries: Vec<BenchEntry>,
}

impl BenchReport {
    pub fn entry(&self, label: &str) -> Option<&BenchEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// `label,metric,mean,std,n,index,alpha,phi0,phi1,m,beta,input_bias,lambda,snr_db`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "label", "metric", "mean", "std", "n", "index", "alpha", "phi0", "phi1", "m", "beta", "input_bias",
            "lambda", "snr_db",
        ])?;
        for e in &self.entries {
            let p = &e.params;
            w.write_record([
                e.label.clone(),
                e.metric.clone(),
                e.mean.to_string(),
                e.std.to_string(),
                e.n.to_string(),
                e.index.to_string(),
                p.alpha.to_string(),
                p.phi0.to_string(),
                p.phi1.to_string(),
                p.m.to_string(),
                p.beta.to_string(),
                p.input_bias.to_string(),
                p.lambda.to_string(),
                p.snr_db.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn entry(label: &str, metric: &str, direction: Direction, rec: &crate::scan::ScanRecord) -> BenchEntry {
    let s = rec.summary[metric];
    BenchEntry {
        label: label.to_string(),
        metric: metric.to_string(),
        direction,
        mean: s.mean,
        std: s.std,
        n: s.n,
        index: rec.index,
        params: rec.params,
    }
}

/// Headline numbers of a finished sweep.
///
/// NARMA10: lowest mean NMSE. Channel: lowest mean SER per SNR, labelled
/// `ser@<snr>dB`, in increasing SNR. Memory: the largest mean of each of
/// `lmc`, `qmc`, `xmc` and `total`, each maximised separately, followed by
/// the three components at the best-total point (`total.lmc`, …).
/// Classification: lowest mean WER.
pub fn summarize(result: &ScanResult) -> Result<BenchReport> {
    let spec = &result.spec;
    let mut entries = Vec::new();
    match spec.task {
        TaskKind::Narma10 => {
            let r = best_in(&result.records, "nmse", Direction::Minimize)?;
            entries.push(entry("nmse", "nmse", Direction::Minimize, r));
        }
        TaskKind::Classification => {
            let r = best_in(&result.records, "wer", Direction::Minimize)?;
            entries.push(entry("wer", "wer", Direction::Minimize, r));
        }
        TaskKind::Channel => {
            let mut snrs: Vec<f64> = result.records.iter().filter_map(|r| r.params.snr_db).collect();
            snrs.sort_by(f64::total_cmp);
            snrs.dedup();
            for snr in snrs {
                let r = best_in(
                    result.records.iter().filter(|r| r.params.snr_db == Some(snr)),
                    "ser",
                    Direction::Minimize,
                )?;
                entries.push(entry(&format!("ser@{snr}dB"), "ser", Direction::Minimize, r));
            }
        }
        TaskKind::Memory => {
            for m in ["lmc", "qmc", "xmc", "total"] {
                let r = best_in(&result.records, m, Direction::Maximize)?;
                entries.push(entry(m, m, Direction::Maximize, r));
            }
            let r = best_in(&result.records, "total", Direction::Maximize)?;
            for m in ["lmc", "qmc", "xmc"] {
                entries.push(entry(&format!("total.{m}"), m, Direction::Maximize, r));
            }
        }
    }
    if entries.is_empty() {
        return Err(Error::Usage("sweep produced no summary".into()));
    }
    Ok(BenchReport {
        task: spec.task,
        n_neurons: spec.reservoir.n_neurons,
        replicates: spec.replicates,
        entries,
    })
}

pub fn run_bench(spec: &ScanSpec) -> Result<(ScanResult, BenchReport)> {
    let result = run_scan(spec)?;
    let report = summarize(&result)?;
    Ok((result, report))
}
