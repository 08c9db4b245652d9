//! Benchmark task generators and their metrics.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod channel;
pub mod classification;
pub mod memory;
pub mod narma;

pub use channel::{channel_trace, gen_channel, ser, ChannelTrace, CHANNEL_TAPS};
pub use classification::{gen_synthetic_classification, ClassificationOptions};
pub use memory::{capacities_from_features, capacity, gen_memory_inputs, memory_capacities, CapacityOptions, CapacityReport};
pub use narma::{gen_narma10, narma10_series};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Memory,
    Narma10,
    Channel,
    Classification,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::Memory,
        TaskKind::Narma10,
        TaskKind::Channel,
        TaskKind::Classification,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Memory => "memory",
            TaskKind::Narma10 => "narma10",
            TaskKind::Channel => "channel",
            TaskKind::Classification => "classification",
        }
    }

    /// Salt used when deriving per-replicate seeds.
    pub fn id(self) -> u64 {
        match self {
            TaskKind::Memory => 1,
            TaskKind::Narma10 => 2,
            TaskKind::Channel => 3,
            TaskKind::Classification => 4,
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = TaskKind::ALL.iter().map(|t| t.name()).collect();
                Error::Usage(format!("unknown task `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

/// Lengths of the warm-up, training and test parts, in temporal order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub warmup: usize,
    pub train: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn new(warmup: usize, train: usize, test: usize) -> Self {
        Self { warmup, train, test }
    }

    pub fn total(&self) -> usize {
        self.warmup + self.train + self.test
    }

    pub fn train_range(&self) -> std::ops::Range<usize> {
        self.warmup..self.warmup + self.train
    }

    pub fn test_range(&self) -> std::ops::Range<usize> {
        self.warmup + self.train..self.total()
    }
}

/// Seeded input/target sequences for one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub task: TaskKind,
    /// Seed the caller asked for.
    pub seed: u64,
    /// Seed that actually produced the data (differs after regeneration).
    pub effective_seed: u64,
    /// Number of discarded attempts (NARMA10 divergence).
    pub regenerations: u32,
    /// Conditioned reservoir input, each value in `[-1, 1]`.
    pub inputs: Vec<f64>,
    /// Input before conditioning.
    pub raw_inputs: Vec<f64>,
    pub target_names: Vec<String>,
    /// One sequence per name, each as long as `inputs`.
    pub targets: Vec<Vec<f64>>,
    pub split: SplitSizes,
    /// Half-open labelled segments (classification only).
    pub segments: Vec<(usize, usize)>,
    pub labels: Vec<usize>,
}

impl TaskDataset {
    pub(crate) fn new(task: TaskKind, seed: u64, inputs: Vec<f64>, raw_inputs: Vec<f64>) -> Self {
        let len = inputs.len();
        Self {
            task,
            seed,
            effective_seed: seed,
            regenerations: 0,
            inputs,
            raw_inputs,
            target_names: Vec::new(),
            targets: Vec::new(),
            split: SplitSizes::new(0, len, 0),
            segments: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Attach a split; it must fit inside the sequence.
    pub fn with_split(mut self, split: SplitSizes) -> Result<Self> {
        if split.total() > self.len() {
            return Err(Error::Usage(format!(
                "split of {} samples exceeds dataset length {}",
                split.total(),
                self.len()
            )));
        }
        self.split = split;
        Ok(self)
    }

    pub fn target(&self, name: &str) -> Option<&[f64]> {
        self.target_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.targets[i].as_slice())
    }

    /// CSV with header `index,input,<target names…>`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["index".to_string(), "input".to_string()];
        header.extend(self.target_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![i.to_string(), self.inputs[i].to_string()];
            row.extend(self.targets.iter().map(|t| t[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a CSV written by [`TaskDataset::write_csv`] (or by another
    /// implementation using the same columns). Raw inputs are set equal to
    /// the conditioned inputs.
    pub fn read_csv<R: Read>(reader: R, task: TaskKind, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "index" || &header[1] != "input" {
            return Err(Error::Parse("dataset CSV must start with columns `index,input`".into()));
        }
        let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut inputs = Vec::new();
        let mut targets = vec![Vec::new(); names.len()];
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |col: usize| -> Result<f64> {
                rec.get(col)
                    .ok_or_else(|| Error::Parse(format!("row {}: missing column {col}", line + 2)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}, column {col}: {e}", line + 2)))
            };
            let index = parse(0)?;
            if index != inputs.len() as f64 {
                return Err(Error::Parse(format!("row {}: index {index} out of sequence", line + 2)));
            }
            inputs.push(parse(1)?);
            for (j, t) in targets.iter_mut().enumerate() {
                t.push(parse(2 + j)?);
            }
        }
        let mut ds = TaskDataset::new(task, seed, inputs.clone(), inputs);
        ds.target_names = names;
        ds.targets = targets;
        Ok(ds)
    }
}

/// `f(u)` mapping `[lo, hi]` affinely onto `[-1, 1]`.
pub(crate) fn affine_to_unit(u: f64, lo: f64, hi: f64) -> f64 {
    (2.0 * (u - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
}
