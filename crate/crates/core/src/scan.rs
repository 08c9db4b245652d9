//! Seeded parameter sweeps with replicate statistics.
//!
//! A [`ScanSpec`] names a task, a base reservoir configuration, and value lists
//! for the scanned parameters. Every grid point is evaluated on the same
//! `replicates` datasets: replicate `r` uses a seed derived from
//! `(base_seed, task, r)` only, so comparisons across grid points are paired.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{evaluate_lambdas, Metrics};
use crate::readout::RidgeOptions;
use crate::seeding::derive_seed;
use crate::sidebands::{Reservoir, ReservoirConfig};
use crate::tasks::classification::gen_synthetic_classification_with;
use crate::tasks::memory::MEMORY_SPLIT;
use crate::tasks::{
    gen_channel, gen_memory_inputs, gen_narma10, CapacityOptions, ClassificationOptions, SplitSizes, TaskDataset,
    TaskKind,
};

const NOISE_SALT: u64 = 0x006e_6f69_7365;
const MAX_AXIS_LEN: usize = 100_000;

/// Values of one scanned parameter: an explicit list or an inclusive range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridAxis {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl GridAxis {
    pub fn values(&self, field: &str) -> Result<Vec<f64>> {
        let v = match self {
            GridAxis::Values(v) => v.clone(),
            GridAxis::Range { start, stop, step } => {
                if !(start.is_finite() && stop.is_finite() && step.is_finite()) || *step <= 0.0 || stop < start {
                    return Err(Error::config(field, "range needs finite start <= stop and step > 0"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                if n > MAX_AXIS_LEN {
                    return Err(Error::config(field, format!("range has more than {MAX_AXIS_LEN} values")));
                }
                (0..n).map(|i| start + i as f64 * step).collect()
            }
        };
        if v.is_empty() {
            return Err(Error::config(field, "grid axis is empty"));
        }
        if v.iter().any(|x| x.is_nan()) {
            return Err(Error::config(field, "grid axis contains NaN"));
        }
        Ok(v)
    }
}

/// Scanned parameters. A missing axis holds the base configuration's value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamGrid {
    pub alpha: Option<GridAxis>,
    pub phi0: Option<GridAxis>,
    pub phi1: Option<GridAxis>,
    pub m: Option<GridAxis>,
    pub beta: Option<GridAxis>,
    pub input_bias: Option<GridAxis>,
    pub lambda: Option<GridAxis>,
    pub snr_db: Option<GridAxis>,
}

/// Everything needed to reproduce a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub task: TaskKind,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Defaults to the task's standard split.
    #[serde(default)]
    pub split: Option<SplitSizes>,
    #[serde(default)]
    pub reservoir: ReservoirConfig,
    #[serde(default)]
    pub ridge: RidgeOptions,
    #[serde(default)]
    pub grid: ParamGrid,
    #[serde(default)]
    pub capacity: CapacityOptions,
    #[serde(default)]
    pub classification: ClassificationSpec,
}

fn default_replicates() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassificationSpec {
    pub n_classes: usize,
    pub segment_len: usize,
    pub amplitude: f64,
    pub noise_std: f64,
}

impl ClassificationSpec {
    pub fn options(&self) -> ClassificationOptions {
        ClassificationOptions {
            segment_len: self.segment_len,
            amplitude: self.amplitude,
            noise_std: self.noise_std,
        }
    }
}

impl Default for ClassificationSpec {
    fn default() -> Self {
        let o = ClassificationOptions::default();
        Self {
            n_classes: 3,
            segment_len: o.segment_len,
            amplitude: o.amplitude,
            noise_std: o.noise_std,
        }
    }
}

/// Standard split per task.
pub fn default_split(task: TaskKind) -> SplitSizes {
    match task {
        TaskKind::Memory => MEMORY_SPLIT,
        TaskKind::Narma10 => SplitSizes::new(200, 1000, 2000),
        TaskKind::Channel => SplitSizes::new(200, 3000, 6000),
        TaskKind::Classification => SplitSizes::new(200, 2400, 1200),
    }
}

/// Parameter values of one grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointParams {
    pub alpha: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub m: f64,
    pub beta: f64,
    pub input_bias: f64,
    pub lambda: f64,
    pub snr_db: Option<f64>,
}

impl PointParams {
    pub fn apply(&self, base: &ReservoirConfig) -> ReservoirConfig {
        ReservoirConfig {
            alpha: self.alpha,
            phi0: self.phi0,
            phi1: self.phi1,
            m: self.m,
            beta: self.beta,
            input_bias: self.input_bias,
            ..base.clone()
        }
    }
}

impl ScanSpec {
    /// Parse a TOML spec; errors name the offending field or line.
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScanSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn split(&self) -> SplitSizes {
        self.split.unwrap_or_else(|| default_split(self.task))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be >= 1"));
        }
        let split = self.split();
        if split.train == 0 || split.test == 0 {
            return Err(Error::config("split", "train and test must be non-empty"));
        }
        if self.task == TaskKind::Memory && split.warmup < self.capacity.k_max {
            return Err(Error::config("split.warmup", "must be >= capacity.k_max"));
        }
        if self.task == TaskKind::Channel && self.grid.snr_db.is_none() {
            return Err(Error::config("grid.snr_db", "required for the channel task"));
        }
        if self.task != TaskKind::Channel && self.grid.snr_db.is_some() {
            return Err(Error::config("grid.snr_db", "only meaningful for the channel task"));
        }
        if self.task == TaskKind::Classification && self.classification.n_classes < 2 {
            return Err(Error::config("classification.n_classes", "must be >= 2"));
        }
        let points = self.points()?;
        for p in points.iter() {
            let field = |f: &str| format!("grid.{f}");
            p.apply(&self.reservoir).validate().map_err(|e| match e {
                Error::Config { field: f, reason } => Error::config(field(&f), reason),
                other => other,
            })?;
            if !(p.lambda >= 0.0) || !p.lambda.is_finite() {
                return Err(Error::config("grid.lambda", "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    fn axis(&self, field: &str, axis: &Option<GridAxis>, base: f64) -> Result<Vec<f64>> {
        match axis {
            Some(a) => a.values(&format!("grid.{field}")),
            None => Ok(vec![base]),
        }
    }

    /// Grid points in scan order: `snr_db`, `alpha`, `phi0`, `phi1`, `m`,
    /// `beta`, `input_bias`, `lambda`, the last varying fastest.
    pub fn points(&self) -> Result<Vec<PointParams>> {
        let r = &self.reservoir;
        let g = &self.grid;
        let snr: Vec<Option<f64>> = match &g.snr_db {
            Some(a) => a.values("grid.snr_db")?.into_iter().map(Some).collect(),
            None => vec![None],
        };
        let alpha = self.axis("alpha", &g.alpha, r.alpha)?;
        let phi0 = self.axis("phi0", &g.phi0, r.phi0)?;
        let phi1 = self.axis("phi1", &g.phi1, r.phi1)?;
        let m = self.axis("m", &g.m, r.m)?;
        let beta = self.axis("beta", &g.beta, r.beta)?;
        let bias = self.axis("input_bias", &g.input_bias, r.input_bias)?;
        let lambda = self.axis("lambda", &g.lambda, self.ridge.lambda)?;

        let mut out = Vec::new();
        for &s in &snr {
            for &a in &alpha {
                for &p0 in &phi0 {
                    for &p1 in &phi1 {
                        for &mm in &m {
                            for &b in &beta {
                                for &ib in &bias {
                                    for &l in &lambda {
                                        out.push(PointParams {
                                            alpha: a,
                                            phi0: p0,
                                            phi1: p1,
                                            m: mm,
                                            beta: b,
                                            input_bias: ib,
                                            lambda: l,
                                            snr_db: s,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn n_lambdas(&self) -> Result<usize> {
        Ok(self.axis("lambda", &self.grid.lambda, self.ridge.lambda)?.len())
    }

    /// Seed of replicate `r`'s dataset.
    pub fn dataset_seed(&self, replicate: usize) -> u64 {
        derive_seed(self.base_seed, &[self.task.id(), replicate as u64])
    }

    /// Seed of replicate `r`'s readout noise.
    pub fn noise_seed(&self, replicate: usize) -> u64 {
        derive_seed(self.base_seed, &[self.task.id(), replicate as u64, NOISE_SALT])
    }

    /// Dataset of replicate `r` (at the given SNR for the channel task).
    pub fn dataset(&self, replicate: usize, snr_db: Option<f64>) -> Result<TaskDataset> {
        let split = self.split();
        let len = split.total();
        let seed = self.dataset_seed(replicate);
        let ds = match self.task {
            TaskKind::Memory => gen_memory_inputs(len, seed)?,
            TaskKind::Narma10 => gen_narma10(len, seed)?,
            TaskKind::Channel => {
                let snr = snr_db.ok_or_else(|| Error::config("grid.snr_db", "required for the channel task"))?;
                gen_channel(len, snr, seed)?
            }
            TaskKind::Classification => gen_synthetic_classification_with(
                self.classification.n_classes,
                len,
                seed,
                &self.classification.options(),
            )?,
        };
        ds.with_split(split)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
}

/// Mean and sample standard deviation (n - 1) over successful replicates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MetricSummary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, n })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRecord {
    /// Position in grid order.
    pub index: usize,
    pub params: PointParams,
    pub replicates: Vec<ReplicateOutcome>,
    pub summary: BTreeMap<String, MetricSummary>,
    /// Seconds spent on this point. Not serialised: it is the only
    /// non-reproducible field.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Compares everything except `wall_time_s`.
impl PartialEq for ScanRecord {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index
            && self.params == other.params
            && self.replicates == other.replicates
            && self.summary == other.summary
    }
}

impl ScanRecord {
    pub fn failures(&self) -> usize {
        self.replicates.iter().filter(|r| r.error.is_some()).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub spec: ScanSpec,
    pub metric_names: Vec<String>,
    pub records: Vec<ScanRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl ScanResult {
    pub fn all_succeeded(&self) -> bool {
        self.records.iter().all(|r| r.failures() == 0)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// One row per grid point:
    /// `index,alpha,phi0,phi1,m,beta,input_bias,lambda,snr_db,<metric>_mean,<metric>_std,…,n_ok,n_failed`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = ["index", "alpha", "phi0", "phi1", "m", "beta", "input_bias", "lambda", "snr_db"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for m in &self.metric_names {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_std"));
        }
        header.push("n_ok".into());
        header.push("n_failed".into());
        w.write_record(&header)?;
        for r in &self.records {
            let p = &r.params;
            let mut row = vec![
                r.index.to_string(),
                p.alpha.to_string(),
                p.phi0.to_string(),
                p.phi1.to_string(),
                p.m.to_string(),
                p.beta.to_string(),
                p.input_bias.to_string(),
                p.lambda.to_string(),
                p.snr_db.map(|s| s.to_string()).unwrap_or_default(),
            ];
            for m in &self.metric_names {
                match r.summary.get(m) {
                    Some(s) => {
                        row.push(s.mean.to_string());
                        row.push(s.std.to_string());
                    }
                    None => {
                        row.push(String::new());
                        row.push(String::new());
                    }
                }
            }
            let failed = r.failures();
            row.push((r.replicates.len() - failed).to_string());
            row.push(failed.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Metric names produced for a task.
pub fn task_metrics(task: TaskKind) -> Vec<String> {
    let names: &[&str] = match task {
        TaskKind::Memory => &["lmc", "qmc", "xmc", "total"],
        TaskKind::Narma10 => &["nmse"],
        TaskKind::Channel => &["nmse", "ser"],
        TaskKind::Classification => &["wer"],
    };
    names.iter().map(|s| s.to_string()).collect()
}

/// Evaluate every grid point on every replicate. Uses the current rayon pool.
pub fn run_scan(spec: &ScanSpec) -> Result<ScanResult> {
    spec.validate()?;
    let points = spec.points()?;
    let n_lambda = spec.n_lambdas()?;
    let lambdas: Vec<f64> = points[..n_lambda].iter().map(|p| p.lambda).collect();
    let n_groups = points.len() / n_lambda;

    // A work unit is one reservoir configuration on one replicate; all ridge
    // parameters reuse its recorded intensities.
    let units: Vec<(usize, usize)> = (0..n_groups)
        .flat_map(|g| (0..spec.replicates).map(move |r| (g, r)))
        .collect();
    let outcomes: Vec<(Vec<std::result::Result<Metrics, String>>, f64)> = units
        .par_iter()
        .map(|&(g, r)| {
            let started = Instant::now();
            let head = &points[g * n_lambda];
            let res = (|| -> Result<Vec<Result<Metrics>>> {
                let ds = spec.dataset(r, head.snr_db)?;
                let reservoir = Reservoir::new(head.apply(&spec.reservoir))?;
                let ridge = RidgeOptions {
                    lambda: head.lambda,
                    ..spec.ridge
                };
                evaluate_lambdas(&ds, &reservoir, ridge, &lambdas, &spec.capacity, spec.noise_seed(r))
            })();
            let per_lambda = match res {
                Ok(v) => v.into_iter().map(|m| m.map_err(|e| e.to_string())).collect(),
                Err(e) => vec![Err(e.to_string()); n_lambda],
            };
            (per_lambda, started.elapsed().as_secs_f64())
        })
        .collect();

    let metric_names = task_metrics(spec.task);
    let mut records: Vec<ScanRecord> = points
        .iter()
        .enumerate()
        .map(|(index, p)| ScanRecord {
            index,
            params: *p,
            replicates: Vec::with_capacity(spec.replicates),
            summary: BTreeMap::new(),
            wall_time_s: 0.0,
        })
        .collect();
    for (&(g, r), (per_lambda, secs)) in units.iter().zip(outcomes) {
        for (li, outcome) in per_lambda.into_iter().enumerate() {
            let rec = &mut records[g * n_lambda + li];
            rec.wall_time_s += secs / n_lambda as f64;
            let (metrics, error) = match outcome {
                Ok(m) => (Some(m), None),
                Err(e) => (None, Some(e)),
            };
            rec.replicates.push(ReplicateOutcome {
                replicate: r,
                seed: spec.dataset_seed(r),
                metrics,
                error,
            });
        }
    }
    for rec in &mut records {
        for name in &metric_names {
            let values: Vec<f64> = rec
                .replicates
                .iter()
                .filter_map(|o| o.metrics.as_ref()?.get(name).copied())
                .collect();
            if let Some(s) = MetricSummary::from_values(&values) {
                rec.summary.insert(name.clone(), s);
            }
        }
    }
    Ok(ScanResult {
        spec: spec.clone(),
        metric_names,
        records,
    })
}

/// [`run_scan`] on a dedicated pool of `threads` workers.
pub fn run_scan_with_threads(spec: &ScanSpec, threads: usize) -> Result<ScanResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Usage(e.to_string()))?;
    pool.install(|| run_scan(spec))
}

/// Record with the best mean `metric`; ties go to the earliest grid point.
/// Records without that metric (all replicates failed) are skipped.
pub fn best_point<'a>(result: &'a ScanResult, metric: &str, direction: Direction) -> Result<&'a ScanRecord> {
    best_in(result.records.iter(), metric, direction)
}

/// [`best_point`] over an arbitrary subset of records, in the given order.
pub fn best_in<'a>(
    records: impl IntoIterator<Item = &'a ScanRecord>,
    metric: &str,
    direction: Direction,
) -> Result<&'a ScanRecord> {
    let mut best: Option<(&ScanRecord, f64)> = None;
    for r in records {
        let Some(s) = r.summary.get(metric) else { continue };
        let better = match best {
            None => true,
            Some((_, b)) => match direction {
                Direction::Minimize => s.mean < b,
                Direction::Maximize => s.mean > b,
            },
        };
        if better {
            best = Some((r, s.mean));
        }
    }
    best.map(|(r, _)| r)
        .ok_or_else(|| Error::Usage(format!("no scan record carries metric `{metric}`")))
}
