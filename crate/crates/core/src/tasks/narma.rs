//! NARMA10: tenth-order nonlinear autoregressive moving-average target system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{affine_to_unit, TaskDataset, TaskKind};
use crate::error::{Error, Result};

const INPUT_MAX: f64 = 0.5;
const DIVERGENCE_LIMIT: f64 = 10.0;
const MAX_ATTEMPTS: u32 = 1000;

/// Evaluate the NARMA10 recurrence from zero history.
///
/// Returns `y` with `y.len() == u.len() + 1`, `y[0] = 0` and
///
/// ```text
/// y[n+1] = 0.3 y[n] + 0.05 y[n] Σ_{i=0}^{9} y[n-i] + 1.5 u[n-9] u[n] + 0.1
/// ```
///
/// where terms with negative index are zero.
pub fn narma10_series(u: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; u.len() + 1];
    for n in 0..u.len() {
        let window: f64 = y[n.saturating_sub(9)..=n].iter().sum();
        let lagged = if n >= 9 { u[n - 9] } else { 0.0 };
        y[n + 1] = 0.3 * y[n] + 0.05 * y[n] * window + 1.5 * lagged * u[n] + 0.1;
    }
    y
}

/// Inputs `u ~ U[0, 0.5)` and the target `target[n] = y[n+1]`, which depends
/// on inputs up to and including `u[n]`.
///
/// The reservoir receives `u` mapped affinely onto `[-1, 1]`; the raw `u` is
/// kept in `raw_inputs`. A trajectory with `|y| > 10` is discarded and the
/// next seed is tried.
pub fn gen_narma10(length: usize, seed: u64) -> Result<TaskDataset> {
    if length < 10 {
        return Err(Error::Domain(format!("NARMA10 needs length >= 10, got {length}")));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let effective = seed.wrapping_add(attempt as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(effective);
        let u: Vec<f64> = (0..length).map(|_| rng.random_range(0.0..INPUT_MAX)).collect();
        let y = narma10_series(&u);
        if y.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            continue;
        }
        let inputs = u.iter().map(|&v| affine_to_unit(v, 0.0, INPUT_MAX)).collect();
        let mut ds = TaskDataset::new(TaskKind::Narma10, seed, inputs, u);
        ds.effective_seed = effective;
        ds.regenerations = attempt;
        ds.target_names = vec!["narma10".into()];
        ds.targets = vec![y[1..].to_vec()];
        return Ok(ds);
    }
    Err(Error::Undefined(format!(
        "NARMA10 diverged for {MAX_ATTEMPTS} consecutive seeds from {seed}"
    )))
}
