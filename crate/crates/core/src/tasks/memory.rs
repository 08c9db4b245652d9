//! Linear, quadratic and cross memory capacities.
//!
//! For i.i.d. inputs `u ∈ [-1, 1]` a separate readout is trained for each
//! target
//!
//! * linear: `u(n-k)`
//! * quadratic (second Legendre polynomial): `3 u(n-k)² - 1`
//! * cross: `u(n-k) u(n-k')`, `k < k'`
//!
//! and scored on the test split by `max(0, 1 - NMSE)`. Scores below a
//! threshold are treated as noise and not summed.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SplitSizes, TaskDataset, TaskKind};
use crate::error::{Error, Result};
use crate::readout::{nmse, predict, train_ridge_multi, RidgeOptions};
use crate::seeding::derive_seed;
use crate::sidebands::{Reservoir, ReservoirConfig};

/// I.i.d. uniform inputs on `[-1, 1]`.
pub fn gen_memory_inputs(length: usize, seed: u64) -> Result<TaskDataset> {
    if length == 0 {
        return Err(Error::Domain("memory task needs length >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..length).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Ok(TaskDataset::new(TaskKind::Memory, seed, u.clone(), u))
}

/// `max(0, 1 - NMSE)`.
pub fn capacity(predicted: &[f64], target: &[f64]) -> Result<f64> {
    Ok((1.0 - nmse(predicted, target)?).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityOptions {
    /// Largest delay considered.
    pub k_max: usize,
    /// Capacities below this value are discarded from the sums.
    pub threshold: f64,
    /// Whether delay 0 counts.
    pub include_zero_delay: bool,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        Self {
            k_max: 30,
            threshold: 0.1,
            include_zero_delay: true,
        }
    }
}

impl CapacityOptions {
    fn first_delay(&self) -> usize {
        usize::from(!self.include_zero_delay)
    }
}

/// Default split for one 3200-sample memory dataset.
pub const MEMORY_SPLIT: SplitSizes = SplitSizes {
    warmup: 200,
    train: 2000,
    test: 1000,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayCapacity {
    pub delay: usize,
    pub capacity: f64,
    pub retained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCapacity {
    pub delay: usize,
    pub delay2: usize,
    pub capacity: f64,
    pub retained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub lmc: f64,
    pub qmc: f64,
    pub xmc: f64,
    pub total: f64,
    pub linear: Vec<DelayCapacity>,
    pub quadratic: Vec<DelayCapacity>,
    pub cross: Vec<CrossCapacity>,
    pub threshold: f64,
    pub k_max: usize,
    pub n_features: usize,
    /// `total <= n_features`, the bound for orthogonal target families.
    pub within_bound: bool,
}

enum MemoryTarget {
    Linear(usize),
    Quadratic(usize),
    Cross(usize, usize),
}

impl MemoryTarget {
    fn eval(&self, u: &[f64], n: usize) -> f64 {
        match *self {
            MemoryTarget::Linear(k) => u[n - k],
            MemoryTarget::Quadratic(k) => 3.0 * u[n - k] * u[n - k] - 1.0,
            MemoryTarget::Cross(k, k2) => u[n - k] * u[n - k2],
        }
    }
}

fn targets_for(opts: &CapacityOptions) -> Vec<MemoryTarget> {
    let k0 = opts.first_delay();
    let mut out: Vec<_> = (k0..=opts.k_max).map(MemoryTarget::Linear).collect();
    out.extend((k0..=opts.k_max).map(MemoryTarget::Quadratic));
    for k in k0..=opts.k_max {
        for k2 in k + 1..=opts.k_max {
            out.push(MemoryTarget::Cross(k, k2));
        }
    }
    out
}

/// Capacities of an arbitrary feature matrix aligned with `inputs`
/// (row `n` of `features` may depend on `inputs[..=n]`).
pub fn capacities_from_features(
    inputs: &[f64],
    features: &DMatrix<f64>,
    split: SplitSizes,
    opts: &CapacityOptions,
    ridge: RidgeOptions,
) -> Result<CapacityReport> {
    if features.nrows() != inputs.len() {
        return Err(Error::Usage(format!(
            "{} feature rows for {} inputs",
            features.nrows(),
            inputs.len()
        )));
    }
    if split.total() > inputs.len() {
        return Err(Error::Usage(format!(
            "split of {} exceeds {} inputs",
            split.total(),
            inputs.len()
        )));
    }
    if split.warmup < opts.k_max {
        return Err(Error::Usage(format!(
            "warm-up {} shorter than the delay horizon {}",
            split.warmup, opts.k_max
        )));
    }
    if !(opts.threshold >= 0.0) {
        return Err(Error::Domain("capacity threshold must be >= 0".into()));
    }
    let defs = targets_for(opts);
    let build = |range: std::ops::Range<usize>| {
        DMatrix::from_fn(range.len(), defs.len(), |i, j| defs[j].eval(inputs, range.start + i))
    };
    let train_targets = build(split.train_range());
    let test_targets = build(split.test_range());
    let train_x = features.rows(split.warmup, split.train).into_owned();
    let test_x = features.rows(split.warmup + split.train, split.test).into_owned();

    let models = train_ridge_multi(&train_x, &train_targets, ridge)?;
    let mut report = CapacityReport {
        lmc: 0.0,
        qmc: 0.0,
        xmc: 0.0,
        total: 0.0,
        linear: Vec::new(),
        quadratic: Vec::new(),
        cross: Vec::new(),
        threshold: opts.threshold,
        k_max: opts.k_max,
        n_features: features.ncols(),
        within_bound: true,
    };
    for (j, (def, model)) in defs.iter().zip(&models).enumerate() {
        let pred = predict(model, &test_x)?;
        let c = capacity(&pred, test_targets.column(j).as_slice())?;
        let retained = c >= opts.threshold;
        let kept = if retained { c } else { 0.0 };
        match *def {
            MemoryTarget::Linear(k) => {
                report.lmc += kept;
                report.linear.push(DelayCapacity { delay: k, capacity: c, retained });
            }
            MemoryTarget::Quadratic(k) => {
                report.qmc += kept;
                report.quadratic.push(DelayCapacity { delay: k, capacity: c, retained });
            }
            MemoryTarget::Cross(k, k2) => {
                report.xmc += kept;
                report.cross.push(CrossCapacity { delay: k, delay2: k2, capacity: c, retained });
            }
        }
    }
    report.total = report.lmc + report.qmc + report.xmc;
    report.within_bound = report.total <= report.n_features as f64;
    Ok(report)
}

/// Capacities of a reservoir on one seeded 3200-sample dataset
/// ([`MEMORY_SPLIT`]), readout noise seeded from `seed`.
pub fn memory_capacities(
    config: &ReservoirConfig,
    k_max: usize,
    threshold: f64,
    seed: u64,
) -> Result<CapacityReport> {
    let opts = CapacityOptions {
        k_max,
        threshold,
        ..Default::default()
    };
    let ds = gen_memory_inputs(MEMORY_SPLIT.total(), seed)?;
    let reservoir = Reservoir::new(config.clone())?;
    let features = reservoir.run(&ds.inputs, &reservoir.zero_state(), derive_seed(seed, &[0x6e6f697365]))?;
    capacities_from_features(&ds.inputs, &features, MEMORY_SPLIT, &opts, RidgeOptions::default())
}
