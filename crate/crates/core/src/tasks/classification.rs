//! Synthetic multi-class task: labelled segments of noisy sinusoids whose
//! frequency depends on the class. Exercises one-vs-all training followed by
//! winner-take-all decisions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{TaskDataset, TaskKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassificationOptions {
    /// Nominal samples per segment.
    pub segment_len: usize,
    pub amplitude: f64,
    /// Std-dev of additive Gaussian noise; 0 gives a noiseless signal.
    pub noise_std: f64,
}

impl Default for ClassificationOptions {
    fn default() -> Self {
        Self {
            segment_len: 40,
            amplitude: 0.8,
            noise_std: 0.05,
        }
    }
}

/// Frequency in cycles per sample of class `c` out of `n`.
pub fn class_frequency(c: usize, n: usize) -> f64 {
    0.03 + 0.3 * c as f64 / (n - 1) as f64
}

pub fn gen_synthetic_classification(n_classes: usize, length: usize, seed: u64) -> Result<TaskDataset> {
    gen_synthetic_classification_with(n_classes, length, seed, &ClassificationOptions::default())
}

/// Segments are contiguous and cover the whole sequence; class labels are
/// balanced to within one segment and shuffled. Target `c` is `+1` on
/// segments of class `c` and `-1` elsewhere.
pub fn gen_synthetic_classification_with(
    n_classes: usize,
    length: usize,
    seed: u64,
    opts: &ClassificationOptions,
) -> Result<TaskDataset> {
    if n_classes < 2 {
        return Err(Error::Domain(format!("need at least 2 classes, got {n_classes}")));
    }
    if opts.segment_len == 0 {
        return Err(Error::Domain("segment_len must be positive".into()));
    }
    if !(opts.noise_std >= 0.0) || !(0.0..=1.0).contains(&opts.amplitude) {
        return Err(Error::Domain("amplitude must lie in [0, 1] and noise_std be >= 0".into()));
    }
    let n_segments = (length / opts.segment_len).max(n_classes);
    if length < n_segments {
        return Err(Error::Domain(format!("length {length} too short for {n_classes} classes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n_segments).map(|i| i % n_classes).collect();
    labels.shuffle(&mut rng);

    let bounds: Vec<(usize, usize)> = (0..n_segments)
        .map(|i| (i * length / n_segments, (i + 1) * length / n_segments))
        .collect();
    let noise = (opts.noise_std > 0.0).then(|| Normal::new(0.0, opts.noise_std).expect("valid std"));

    let mut inputs = vec![0.0; length];
    let mut targets = vec![vec![-1.0; length]; n_classes];
    for (&(start, end), &label) in bounds.iter().zip(&labels) {
        let f = class_frequency(label, n_classes);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        for n in start..end {
            let mut v = opts.amplitude * (std::f64::consts::TAU * f * (n - start) as f64 + phase).sin();
            if let Some(d) = &noise {
                v += d.sample(&mut rng);
            }
            inputs[n] = v.clamp(-1.0, 1.0);
            targets[label][n] = 1.0;
        }
    }
    let mut ds = TaskDataset::new(TaskKind::Classification, seed, inputs.clone(), inputs);
    ds.target_names = (0..n_classes).map(|c| format!("class{c}")).collect();
    ds.targets = targets;
    ds.segments = bounds;
    ds.labels = labels;
    Ok(ds)
}
