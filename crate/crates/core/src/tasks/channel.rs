//! Nonlinear channel equalisation.
//!
//! Symbols `d(n) ∈ {-3, -1, 1, 3}` pass a linear channel with two anticausal
//! taps, a memoryless cubic nonlinearity, and additive Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{TaskDataset, TaskKind};
use crate::error::{Error, Result};

pub const SYMBOLS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];

/// `q(n) = Σ_i CHANNEL_TAPS[i] d(n + 2 - i)`: taps for `d(n+2)` down to `d(n-7)`.
pub const CHANNEL_TAPS: [f64; 10] = [0.08, -0.12, 1.0, 0.18, -0.1, 0.091, -0.05, 0.04, 0.03, 0.01];

const LOOKAHEAD: usize = 2;
const HISTORY: usize = 7;

/// Linear channel over an extended symbol sequence. Output `q[n]` uses
/// `ext[n ..= n + 9]`, so `ext[n + 9 - i]` is the symbol multiplying tap `i`;
/// the output is `ext.len() - 9` samples long.
pub fn linear_channel(ext: &[f64]) -> Vec<f64> {
    let span = CHANNEL_TAPS.len() - 1;
    if ext.len() <= span {
        return Vec::new();
    }
    (0..ext.len() - span)
        .map(|n| {
            CHANNEL_TAPS
                .iter()
                .enumerate()
                .map(|(i, c)| c * ext[n + span - i])
                .sum()
        })
        .collect()
}

/// Memoryless channel nonlinearity.
pub fn channel_nonlinearity(q: f64) -> f64 {
    q + 0.036 * q * q - 0.011 * q * q * q
}

/// All intermediate signals of one generated channel realisation.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTrace {
    /// `d(n)` for `n ∈ [-7, length + 2)`.
    pub symbols_ext: Vec<f64>,
    /// `d(n)` for `n ∈ [0, length)`.
    pub symbols: Vec<f64>,
    pub q: Vec<f64>,
    pub noiseless: Vec<f64>,
    /// Noisy channel output before conditioning.
    pub received: Vec<f64>,
    pub noise_std: f64,
}

/// Generate a channel realisation. `snr_db = +∞` disables the noise.
///
/// The noise power is set relative to the mean square of the noiseless
/// nonlinear output.
pub fn channel_trace(length: usize, snr_db: f64, seed: u64) -> Result<ChannelTrace> {
    if length < 20 {
        return Err(Error::Domain(format!("channel task needs length >= 20, got {length}")));
    }
    if snr_db.is_nan() {
        return Err(Error::Domain("SNR must not be NaN".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols_ext: Vec<f64> = (0..length + HISTORY + LOOKAHEAD)
        .map(|_| SYMBOLS[rng.random_range(0..SYMBOLS.len())])
        .collect();
    let q = linear_channel(&symbols_ext);
    let noiseless: Vec<f64> = q.iter().map(|&v| channel_nonlinearity(v)).collect();
    let power = noiseless.iter().map(|v| v * v).sum::<f64>() / length as f64;
    let noise_std = if snr_db.is_infinite() && snr_db > 0.0 {
        0.0
    } else {
        (power / 10f64.powf(snr_db / 10.0)).sqrt()
    };
    let received = if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::Domain(e.to_string()))?;
        noiseless.iter().map(|v| v + normal.sample(&mut rng)).collect()
    } else {
        noiseless.clone()
    };
    let symbols = symbols_ext[HISTORY..HISTORY + length].to_vec();
    Ok(ChannelTrace {
        symbols_ext,
        symbols,
        q,
        noiseless,
        received,
        noise_std,
    })
}

/// Channel-equalisation dataset: input is the received signal divided by its
/// largest magnitude, target is `d(n)`.
pub fn gen_channel(length: usize, snr_db: f64, seed: u64) -> Result<TaskDataset> {
    let trace = channel_trace(length, snr_db, seed)?;
    let peak = trace.received.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let inputs = if peak > 0.0 {
        trace.received.iter().map(|v| (v / peak).clamp(-1.0, 1.0)).collect()
    } else {
        trace.received.clone()
    };
    let mut ds = TaskDataset::new(TaskKind::Channel, seed, inputs, trace.received);
    ds.target_names = vec!["symbol".into()];
    ds.targets = vec![trace.symbols];
    Ok(ds)
}

/// Nearest symbol, ties resolved towards the smaller symbol.
pub fn nearest_symbol(x: f64) -> f64 {
    if x <= -2.0 {
        -3.0
    } else if x <= 0.0 {
        -1.0
    } else if x <= 2.0 {
        1.0
    } else {
        3.0
    }
}

/// Symbol error rate: fraction of predictions whose nearest symbol differs
/// from the transmitted one.
pub fn ser(predicted: &[f64], symbols: &[f64]) -> Result<f64> {
    if predicted.len() != symbols.len() {
        return Err(Error::Usage(format!(
            "{} predictions for {} symbols",
            predicted.len(),
            symbols.len()
        )));
    }
    if predicted.is_empty() {
        return Ok(0.0);
    }
    let errors = predicted
        .iter()
        .zip(symbols)
        .filter(|(p, s)| nearest_symbol(**p) != **s)
        .count();
    Ok(errors as f64 / predicted.len() as f64)
}
