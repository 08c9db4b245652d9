//! Linear complex dynamics of the sideband amplitudes and their intensity readout.
//!
//! One cavity roundtrip maps the amplitude vector `x` to
//!
//! ```text
//! x_k(n+1) = α e^{j(φ0 + k φ1)} Σ_l J_l(m) (-1)^l x_{k-l}(n) + s(u(n)) δ_{k,0}
//! ```
//!
//! where `s` is the input encoding. The comb is unbounded physically; we
//! simulate `n_internal` sidebands centred on `k = 0` and read out only the
//! central `n_neurons`. Terms that would couple to sidebands outside the
//! simulated band are dropped.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_j_orders, MAX_ARG, MAX_ORDER};
use crate::error::{Error, Result};

/// How the scalar input is imposed on the field injected at `k = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputEncoding {
    /// `β u`
    #[default]
    Linear,
    /// Mach-Zehnder transfer `sin((π/2)(β u + bias))`.
    Sine,
}

/// Global physical parameters of the reservoir.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReservoirConfig {
    /// Feedback strength (per-roundtrip amplitude gain).
    pub alpha: f64,
    /// Roundtrip phase offset, radians.
    pub phi0: f64,
    /// Roundtrip phase slope per sideband, radians.
    pub phi1: f64,
    /// Phase-modulation depth.
    pub m: f64,
    /// Input strength.
    pub beta: f64,
    /// Number of sidebands read out.
    pub n_neurons: usize,
    /// Number of simulated sidebands. `None` pads the readout band by
    /// [`band_half_width`] on each side.
    pub n_internal: Option<usize>,
    pub input_encoding: InputEncoding,
    /// DC bias of the sine encoding, in units of the half-wave voltage.
    pub input_bias: f64,
    /// Std-dev of additive Gaussian noise on each intensity, as a fraction of
    /// that neuron's signal range over the trace.
    pub readout_noise_sigma: f64,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            alpha: 0.81,
            phi0: 0.0,
            phi1: 0.0,
            m: 2.0,
            beta: 1.0,
            n_neurons: 13,
            n_internal: None,
            input_encoding: InputEncoding::Linear,
            input_bias: 0.0,
            readout_noise_sigma: 0.0,
        }
    }
}

/// Coupling orders beyond the band are below this magnitude.
pub const BESSEL_TAIL: f64 = 1e-10;

/// Half-width `L_max` of the coupling band: orders `|l| > L_max` are dropped.
///
/// At least `ceil(m) + 8`, widened until `|J_{L_max+1}(m)| < BESSEL_TAIL`
/// (the Bessel tail decreases monotonically there).
pub fn band_half_width(m: f64) -> usize {
    let m = m.clamp(0.0, MAX_ARG);
    let floor = m.ceil() as usize + 8;
    let j = bessel_j_orders(MAX_ORDER, m).expect("order and argument within the supported range");
    (floor..MAX_ORDER)
        .find(|&l| j[l + 1].abs() < BESSEL_TAIL)
        .unwrap_or(MAX_ORDER)
}

impl ReservoirConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("alpha", self.alpha),
            ("phi0", self.phi0),
            ("phi1", self.phi1),
            ("m", self.m),
            ("beta", self.beta),
            ("input_bias", self.input_bias),
            ("readout_noise_sigma", self.readout_noise_sigma),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        if self.alpha < 0.0 {
            return Err(Error::config("alpha", "must be >= 0"));
        }
        if !(0.0..=MAX_ARG).contains(&self.m) {
            return Err(Error::config("m", format!("must lie in [0, {MAX_ARG}]")));
        }
        if self.readout_noise_sigma < 0.0 {
            return Err(Error::config("readout_noise_sigma", "must be >= 0"));
        }
        if self.n_neurons == 0 || self.n_neurons.is_multiple_of(2) {
            return Err(Error::config("n_neurons", "must be odd and positive"));
        }
        if let Some(k) = self.n_internal {
            if k % 2 == 0 {
                return Err(Error::config("n_internal", "must be odd"));
            }
            if k < self.n_neurons {
                return Err(Error::config("n_internal", "must be >= n_neurons"));
            }
        }
        Ok(())
    }

    /// Number of simulated sidebands.
    pub fn internal_dim(&self) -> usize {
        self.n_internal
            .unwrap_or(self.n_neurons + 2 * band_half_width(self.m))
    }

    /// Roundtrip phase of sideband `k`.
    pub fn phase(&self, k: i64) -> f64 {
        self.phi0 + k as f64 * self.phi1
    }
}

/// Slowly varying complex amplitudes, index `i` holding sideband `k = i - (K-1)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SidebandState {
    pub amplitudes: Vec<Complex64>,
}

impl SidebandState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            amplitudes: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    /// All light in the central sideband.
    pub fn unit_center(dim: usize) -> Self {
        let mut s = Self::zeros(dim);
        let c = s.center();
        s.amplitudes[c] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Storage index of `k = 0`.
    pub fn center(&self) -> usize {
        (self.dim() - 1) / 2
    }

    /// Amplitude of sideband `k`, zero outside the simulated band.
    pub fn get(&self, k: i64) -> Complex64 {
        let i = self.center() as i64 + k;
        if i < 0 || i >= self.dim() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.amplitudes[i as usize]
        }
    }

    /// Σ |x_k|².
    pub fn energy(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// Euclidean distance between two states of equal dimension.
    pub fn distance(&self, other: &Self) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Banded matrix realising one roundtrip of the linear sideband map.
///
/// Row `i` stores coefficients for columns `i - l`, `l ∈ [-L, L]`; entries
/// whose column falls outside the simulated band are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    dim: usize,
    half_band: usize,
    band: Vec<Complex64>,
}

impl CouplingMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_band(&self) -> usize {
        self.half_band
    }

    fn width(&self) -> usize {
        2 * self.half_band + 1
    }

    /// Entry coupling sideband `col_k` into sideband `row_k`.
    pub fn entry(&self, row_k: i64, col_k: i64) -> Complex64 {
        let h = ((self.dim - 1) / 2) as i64;
        let (i, j) = (row_k + h, col_k + h);
        let l = row_k - col_k;
        let dim = self.dim as i64;
        if i < 0 || j < 0 || i >= dim || j >= dim || l.unsigned_abs() as usize > self.half_band {
            return Complex64::new(0.0, 0.0);
        }
        self.band[i as usize * self.width() + (l + self.half_band as i64) as usize]
    }

    /// Dense `K × K` copy, rows and columns in storage order.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let h = ((self.dim - 1) / 2) as i64;
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            self.entry(i as i64 - h, j as i64 - h)
        })
    }

    /// `out = self · x`.
    pub fn apply_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        let w = self.width();
        let lb = self.half_band;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.band[i * w..(i + 1) * w];
            // column j = i - l  <=>  band slot s = l + L = i - j + L
            let j_lo = i.saturating_sub(lb);
            let j_hi = (i + lb).min(self.dim - 1);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in j_lo..=j_hi {
                acc += row[i + lb - j] * x[j];
            }
            *o = acc;
        }
    }
}

/// Build the coupling matrix for a validated configuration.
pub fn build_coupling_matrix(config: &ReservoirConfig) -> Result<CouplingMatrix> {
    config.validate()?;
    let dim = config.internal_dim();
    let half_band = band_half_width(config.m);
    let bessel = bessel_j_orders(half_band, config.m)?;
    let width = 2 * half_band + 1;
    let h = ((dim - 1) / 2) as i64;

    // J_l(m) (-1)^l; for negative l this equals J_|l|(m).
    let weight = |l: i64| -> f64 {
        let a = bessel[l.unsigned_abs() as usize];
        if l > 0 && l % 2 == 1 {
            -a
        } else {
            a
        }
    };

    let mut band = vec![Complex64::new(0.0, 0.0); dim * width];
    for i in 0..dim {
        let k = i as i64 - h;
        let rot = Complex64::from_polar(config.alpha, config.phase(k));
        for s in 0..width {
            let l = s as i64 - half_band as i64;
            let j = i as i64 - l;
            if j >= 0 && j < dim as i64 {
                band[i * width + s] = rot * weight(l);
            }
        }
    }
    Ok(CouplingMatrix {
        dim,
        half_band,
        band,
    })
}

/// Field injected at `k = 0` for a conditioned input `u ∈ [-1, 1]`.
pub fn encode_input(u: f64, config: &ReservoirConfig) -> Result<f64> {
    if !(-1.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("input {u} outside [-1, 1]")));
    }
    Ok(match config.input_encoding {
        InputEncoding::Linear => config.beta * u,
        InputEncoding::Sine => {
            (std::f64::consts::FRAC_PI_2 * (config.beta * u + config.input_bias)).sin()
        }
    })
}

/// One roundtrip: `matrix · state + encode_input(u) e_0`.
pub fn step(
    state: &SidebandState,
    u: f64,
    matrix: &CouplingMatrix,
    config: &ReservoirConfig,
) -> Result<SidebandState> {
    if state.dim() != matrix.dim() {
        return Err(Error::Usage(format!(
            "state has {} sidebands but the coupling matrix expects {}",
            state.dim(),
            matrix.dim()
        )));
    }
    let drive = encode_input(u, config)?;
    let mut next = SidebandState::zeros(state.dim());
    matrix.apply_into(&state.amplitudes, &mut next.amplitudes);
    let c = next.center();
    next.amplitudes[c] += drive;
    Ok(next)
}

/// A configured reservoir with its coupling matrix built once.
#[derive(Clone, Debug)]
pub struct Reservoir {
    config: ReservoirConfig,
    matrix: CouplingMatrix,
}

impl Reservoir {
    pub fn new(config: ReservoirConfig) -> Result<Self> {
        let matrix = build_coupling_matrix(&config)?;
        Ok(Self { config, matrix })
    }

    pub fn config(&self) -> &ReservoirConfig {
        &self.config
    }

    pub fn matrix(&self) -> &CouplingMatrix {
        &self.matrix
    }

    pub fn zero_state(&self) -> SidebandState {
        SidebandState::zeros(self.matrix.dim())
    }

    /// Drive the reservoir and record `|x_k(n+1)|²` for the central
    /// `n_neurons` sidebands after each input. Returns the `T × N` intensity
    /// matrix and the final state.
    pub fn run_with_state(
        &self,
        inputs: &[f64],
        initial: &SidebandState,
        noise_seed: u64,
    ) -> Result<(DMatrix<f64>, SidebandState)> {
        let dim = self.matrix.dim();
        if initial.dim() != dim {
            return Err(Error::Usage(format!(
                "initial state has {} sidebands, expected {dim}",
                initial.dim()
            )));
        }
        let n = self.config.n_neurons;
        let first = (dim - n) / 2;
        let mut out = DMatrix::<f64>::zeros(inputs.len(), n);

        let mut x = initial.amplitudes.clone();
        let mut next = vec![Complex64::new(0.0, 0.0); dim];
        let c = (dim - 1) / 2;
        for (t, &u) in inputs.iter().enumerate() {
            let drive = encode_input(u, &self.config)?;
            self.matrix.apply_into(&x, &mut next);
            next[c] += drive;
            std::mem::swap(&mut x, &mut next);
            for col in 0..n {
                let v = x[first + col].norm_sqr();
                if !v.is_finite() {
                    return Err(Error::Instability { step: t });
                }
                out[(t, col)] = v;
            }
            if !x[c].re.is_finite() || !x[c].im.is_finite() {
                return Err(Error::Instability { step: t });
            }
        }
        if self.config.readout_noise_sigma > 0.0 && !inputs.is_empty() {
            add_readout_noise(&mut out, self.config.readout_noise_sigma, noise_seed);
        }
        let final_state = SidebandState { amplitudes: x };
        if !final_state.is_finite() {
            return Err(Error::Instability {
                step: inputs.len().saturating_sub(1),
            });
        }
        Ok((out, final_state))
    }

    pub fn run(&self, inputs: &[f64], initial: &SidebandState, noise_seed: u64) -> Result<DMatrix<f64>> {
        self.run_with_state(inputs, initial, noise_seed).map(|(m, _)| m)
    }
}

fn add_readout_noise(intensities: &mut DMatrix<f64>, sigma: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for mut col in intensities.column_iter_mut() {
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let std = sigma * (hi - lo);
        if std <= 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, std).expect("positive finite std");
        for v in col.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
}

/// Run a whole input sequence from `initial`; see [`Reservoir::run_with_state`].
pub fn run_sequence(
    inputs: &[f64],
    config: &ReservoirConfig,
    initial: &SidebandState,
    noise_seed: u64,
) -> Result<DMatrix<f64>> {
    Reservoir::new(config.clone())?.run(inputs, initial, noise_seed)
}

/// Write intensities as CSV: `step,input,I_-h,…,I_h`, one row per step.
pub fn write_intensity_csv<W: std::io::Write>(writer: W, inputs: &[f64], intensities: &DMatrix<f64>) -> Result<()> {
    if inputs.len() != intensities.nrows() {
        return Err(Error::Usage(format!(
            "{} inputs for {} intensity rows",
            inputs.len(),
            intensities.nrows()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    let half = intensities.ncols() as i64 / 2;
    let mut header = vec!["step".to_string(), "input".to_string()];
    header.extend((-half..=half).map(|k| format!("I_{k}")));
    w.write_record(&header)?;
    for (n, u) in inputs.iter().enumerate() {
        let mut row = vec![n.to_string(), u.to_string()];
        row.extend(intensities.row(n).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
