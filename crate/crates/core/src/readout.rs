//! Linear output layer trained on recorded intensities.
//!
//! Features are rescaled per neuron to `[-1, 1]` using statistics of the
//! training split, then a ridge regression with an unpenalised constant term
//! is solved. The same machinery drives one-vs-all classifiers whose scores are
//! combined by [`wta_classify`].

use log::warn;
use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative residual on the normal equations accepted from the Cholesky path.
const SOLVER_RTOL: f64 = 1e-10;
/// Cholesky pivots below this fraction of the largest are treated as singular.
const PIVOT_RTOL: f64 = 1e-13;

/// Per-neuron `(min, max)` of the training intensities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    pub fn from_features(features: &DMatrix<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::Usage("cannot compute normalisation on zero rows".into()));
        }
        let (min, max) = features
            .column_iter()
            .map(|c| c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))))
            .unzip();
        Ok(Self { min, max })
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    /// Indices of neurons whose training signal is constant.
    pub fn constant_neurons(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !(self.max[i] > self.min[i])).collect()
    }
}

/// Affine per-neuron map sending `(min, max)` to `(-1, +1)`. Constant neurons
/// map to 0.
pub fn normalize(intensities: &DMatrix<f64>, stats: &NormStats) -> Result<DMatrix<f64>> {
    if intensities.ncols() != stats.len() {
        return Err(Error::Usage(format!(
            "{} intensity columns but normalisation for {} neurons",
            intensities.ncols(),
            stats.len()
        )));
    }
    let mut out = intensities.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let (lo, hi) = (stats.min[j], stats.max[j]);
        if hi > lo {
            let scale = 2.0 / (hi - lo);
            col.iter_mut().for_each(|v| *v = (*v - lo) * scale - 1.0);
        } else {
            col.fill(0.0);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeOptions {
    pub lambda: f64,
    /// Fit an unpenalised constant term.
    pub fit_bias: bool,
    /// Rescale features to `[-1, 1]` with training statistics before fitting.
    pub normalize: bool,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        Self {
            lambda: 1e-6,
            fit_bias: true,
            normalize: true,
        }
    }
}

impl RidgeOptions {
    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }
}

/// A trained linear readout.
///
/// JSON layout: `{"weights": [..], "bias": b, "ridge_lambda": λ,
/// "norm_stats": {"min": [..], "max": [..]} | null, "warnings": [..]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub ridge_lambda: f64,
    pub norm_stats: Option<NormStats>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ReadoutModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }
}

/// Shared, factorised ridge problem for one feature matrix; solving for
/// several targets reuses the factorisation.
struct RidgeSystem {
    features: DMatrix<f64>,
    col_means: DVector<f64>,
    centered: DMatrix<f64>,
    gram: DMatrix<f64>,
    cholesky: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    svd: Option<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    norm_stats: Option<NormStats>,
    opts: RidgeOptions,
    warnings: Vec<String>,
}

impl RidgeSystem {
    fn new(raw: &DMatrix<f64>, opts: RidgeOptions) -> Result<Self> {
        if !(opts.lambda >= 0.0) || !opts.lambda.is_finite() {
            return Err(Error::Domain(format!("ridge lambda {} must be finite and >= 0", opts.lambda)));
        }
        let (t, n) = raw.shape();
        if t == 0 {
            return Err(Error::Usage("no training rows".into()));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("non-finite training features".into()));
        }
        let mut warnings = Vec::new();
        let (features, norm_stats) = if opts.normalize {
            let stats = NormStats::from_features(raw)?;
            let constant = stats.constant_neurons();
            if !constant.is_empty() {
                let msg = format!("constant neurons mapped to 0: {constant:?}");
                warn!("{msg}");
                warnings.push(msg);
            }
            (normalize(raw, &stats)?, Some(stats))
        } else {
            (raw.clone(), None)
        };

        let col_means = if opts.fit_bias {
            DVector::from_iterator(n, features.column_iter().map(|c| c.mean()))
        } else {
            DVector::zeros(n)
        };
        let mut centered = features.clone();
        for (j, mut col) in centered.column_iter_mut().enumerate() {
            col.add_scalar_mut(-col_means[j]);
        }
        let mut gram = centered.tr_mul(&centered);
        for i in 0..n {
            gram[(i, i)] += opts.lambda;
        }

        let cholesky = gram.clone().cholesky().filter(|c| {
            let d = c.l_dirty().diagonal();
            let max = d.iter().fold(0.0_f64, |a, &v| a.max(v * v));
            d.iter().all(|&v| v * v > PIVOT_RTOL * max)
        });

        let mut sys = Self {
            features,
            col_means,
            centered,
            gram,
            cholesky,
            svd: None,
            norm_stats,
            opts,
            warnings,
        };
        if sys.cholesky.is_none() {
            sys.init_svd();
        }
        Ok(sys)
    }

    fn init_svd(&mut self) {
        if self.svd.is_some() {
            return;
        }
        if self.opts.lambda == 0.0 {
            let msg = "singular normal equations at lambda = 0; using minimum-norm solution".to_string();
            warn!("{msg}");
            self.warnings.push(msg);
        }
        let n = self.centered.ncols();
        let t = self.centered.nrows();
        // Least squares on [Xc; sqrt(λ) I] has the ridge solution as its
        // minimum-norm minimiser.
        let mut aug = DMatrix::zeros(t + n, n);
        aug.rows_mut(0, t).copy_from(&self.centered);
        let s = self.opts.lambda.sqrt();
        for i in 0..n {
            aug[(t + i, i)] = s;
        }
        self.svd = Some(SVD::new(aug, true, true));
    }

    fn solve(&mut self, targets: &[f64]) -> Result<ReadoutModel> {
        let t = self.features.nrows();
        if targets.len() != t {
            return Err(Error::Usage(format!(
                "{} targets for {t} feature rows",
                targets.len()
            )));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("non-finite targets".into()));
        }
        let y = DVector::from_column_slice(targets);
        let y_mean = if self.opts.fit_bias { y.mean() } else { 0.0 };
        let yc = y.add_scalar(-y_mean);
        let rhs = self.centered.tr_mul(&yc);

        let mut weights = None;
        if let Some(chol) = &self.cholesky {
            let mut w = chol.solve(&rhs);
            // one step of iterative refinement
            let r = &rhs - &self.gram * &w;
            w += chol.solve(&r);
            let resid = (&rhs - &self.gram * &w).norm();
            let scale = rhs.norm().max(f64::MIN_POSITIVE);
            if resid <= SOLVER_RTOL * scale || rhs.norm() == 0.0 {
                weights = Some(w);
            }
        }
        let w = match weights {
            Some(w) => w,
            None => {
                self.init_svd();
                let n = self.centered.ncols();
                let mut y_aug = DVector::zeros(t + n);
                y_aug.rows_mut(0, t).copy_from(&yc);
                let svd = self.svd.as_ref().expect("initialised above");
                let smax = svd.singular_values.max();
                let eps = smax * (t.max(n) as f64) * f64::EPSILON;
                svd.solve(&y_aug, eps).map_err(|e| Error::Undefined(e.to_string()))?
            }
        };
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Undefined("ridge solution is not finite".into()));
        }
        let bias = if self.opts.fit_bias {
            y_mean - self.col_means.dot(&w)
        } else {
            0.0
        };
        Ok(ReadoutModel {
            weights: w.iter().copied().collect(),
            bias,
            ridge_lambda: self.opts.lambda,
            norm_stats: self.norm_stats.clone(),
            warnings: self.warnings.clone(),
        })
    }
}

/// Ridge regression `argmin_w Σ (y - w·x - b)² + λ |w|²`, the bias unpenalised.
pub fn train_ridge(features: &DMatrix<f64>, targets: &[f64], opts: RidgeOptions) -> Result<ReadoutModel> {
    RidgeSystem::new(features, opts)?.solve(targets)
}

/// [`train_ridge`] for several targets sharing one feature matrix. `targets`
/// holds one target per column.
pub fn train_ridge_multi(
    features: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    opts: RidgeOptions,
) -> Result<Vec<ReadoutModel>> {
    let mut sys = RidgeSystem::new(features, opts)?;
    targets
        .column_iter()
        .map(|c| sys.solve(c.as_slice()))
        .collect()
}

/// Apply normalisation then `w·x + b` to every row.
pub fn predict(model: &ReadoutModel, intensities: &DMatrix<f64>) -> Result<Vec<f64>> {
    if intensities.ncols() != model.n_features() {
        return Err(Error::Usage(format!(
            "model expects {} features, got {}",
            model.n_features(),
            intensities.ncols()
        )));
    }
    let x = match &model.norm_stats {
        Some(stats) => normalize(intensities, stats)?,
        None => intensities.clone(),
    };
    let w = DVector::from_column_slice(&model.weights);
    Ok((x * w).iter().map(|v| v + model.bias).collect())
}

/// Normalised mean square error `⟨(ỹ - y)²⟩ / ⟨(ỹ - ⟨ỹ⟩)²⟩`.
pub fn nmse(predicted: &[f64], target: &[f64]) -> Result<f64> {
    if predicted.len() != target.len() {
        return Err(Error::Usage(format!(
            "{} predictions for {} targets",
            predicted.len(),
            target.len()
        )));
    }
    if target.len() < 2 {
        return Err(Error::Undefined("NMSE needs at least two samples".into()));
    }
    let n = target.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let var = target.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::Undefined("NMSE of a constant target".into()));
    }
    let mse = predicted
        .iter()
        .zip(target)
        .map(|(p, t)| (t - p).powi(2))
        .sum::<f64>()
        / n;
    Ok(mse / var)
}

/// Winner-take-all over one-vs-all classifier scores.
///
/// `class_scores` is `T × C`; each segment is a half-open row range
/// `[start, end)`. Scores are averaged over the segment and the class with
/// the highest mean wins, ties going to the lowest class index.
pub fn wta_classify(class_scores: &DMatrix<f64>, segments: &[(usize, usize)]) -> Result<Vec<usize>> {
    let (t, c) = class_scores.shape();
    if c < 2 {
        return Err(Error::Usage(format!("winner-take-all needs >= 2 classes, got {c}")));
    }
    let mut sorted: Vec<_> = segments.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[1].0 < w[0].1) {
        return Err(Error::Usage("segments overlap".into()));
    }
    segments
        .iter()
        .map(|&(start, end)| {
            if end <= start {
                return Err(Error::Usage(format!("empty segment [{start}, {end})")));
            }
            if end > t {
                return Err(Error::Usage(format!("segment [{start}, {end}) exceeds {t} rows")));
            }
            let len = (end - start) as f64;
            let means = (0..c).map(|j| class_scores.view((start, j), (end - start, 1)).sum() / len);
            let mut best = (0, f64::NEG_INFINITY);
            for (j, m) in means.enumerate() {
                if m > best.1 {
                    best = (j, m);
                }
            }
            Ok(best.0)
        })
        .collect()
}

/// Features and targets of one contiguous part of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPart {
    pub features: DMatrix<f64>,
    pub targets: DMatrix<f64>,
}

/// Warm-up, training and test parts of a recorded run, in temporal order.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    pub warmup: SplitPart,
    pub train: SplitPart,
    pub test: SplitPart,
}

impl SplitDataset {
    /// Cut rows `[0, w)`, `[w, w + tr)`, `[w + tr, w + tr + te)`.
    pub fn from_rows(
        features: &DMatrix<f64>,
        targets: &DMatrix<f64>,
        warmup: usize,
        train: usize,
        test: usize,
    ) -> Result<Self> {
        let total = warmup + train + test;
        if features.nrows() < total || targets.nrows() < total {
            return Err(Error::Usage(format!(
                "split needs {total} rows, have {} features and {} targets",
                features.nrows(),
                targets.nrows()
            )));
        }
        let part = |start: usize, len: usize| SplitPart {
            features: features.rows(start, len).into_owned(),
            targets: targets.rows(start, len).into_owned(),
        };
        Ok(Self {
            warmup: part(0, warmup),
            train: part(warmup, train),
            test: part(warmup + train, test),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_row_iterator(rows.len(), rows[0].len(), rows.iter().flat_map(|r| r.iter().copied()))
    }

    #[test]
    fn normalize_examples() {
        let f = mat(&[&[0.0, 5.0], &[2.0, 5.0], &[1.0, 5.0]]);
        let stats = NormStats::from_features(&f).unwrap();
        assert_eq!(stats.constant_neurons(), vec![1]);
        let n = normalize(&f, &stats).unwrap();
        assert_eq!(n[(0, 0)], -1.0);
        assert_eq!(n[(1, 0)], 1.0);
        assert_eq!(n[(2, 0)], 0.0);
        assert!(n.column(1).iter().all(|&v| v == 0.0));
        // test data may leave [-1, 1]
        let t = normalize(&mat(&[&[3.0, 1.0]]), &stats).unwrap();
        assert_eq!(t[(0, 0)], 2.0);
        assert!(normalize(&mat(&[&[1.0]]), &stats).is_err());
    }

    #[test]
    fn nmse_examples() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(nmse(&t, &t).unwrap(), 0.0);
        assert!((nmse(&[1.5; 4], &t).unwrap() - 1.0).abs() < 1e-15);
        assert!((nmse(&[0.0, 1.0, 2.0, 4.0], &t).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(nmse(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::Undefined(_))));
        assert!(matches!(nmse(&[1.0], &[2.0]), Err(Error::Undefined(_))));
        assert!(matches!(nmse(&[1.0, 2.0], &[2.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn exact_linear_fit() {
        let f = DMatrix::from_fn(40, 3, |i, j| ((i * (j + 2)) as f64 * 0.37).sin());
        let y: Vec<f64> = (0..40).map(|i| 0.5 * f[(i, 0)] - 2.0 * f[(i, 1)] + 0.25 * f[(i, 2)] + 0.1).collect();
        let model = train_ridge(&f, &y, RidgeOptions::default().with_lambda(0.0)).unwrap();
        let p = predict(&model, &f).unwrap();
        assert!(nmse(&p, &y).unwrap() < 1e-20);
    }

    #[test]
    fn huge_lambda_predicts_mean() {
        let f = DMatrix::from_fn(30, 4, |i, j| ((i + 3 * j) as f64).cos());
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.2).sin() + 3.0).collect();
        let model = train_ridge(&f, &y, RidgeOptions::default().with_lambda(1e14)).unwrap();
        let mean = y.iter().sum::<f64>() / 30.0;
        assert!(model.weights.iter().all(|w| w.abs() < 1e-10));
        assert!(predict(&model, &f).unwrap().iter().all(|p| (p - mean).abs() < 1e-9));
    }

    #[test]
    fn predict_examples() {
        let f = mat(&[&[0.0, 1.0], &[2.0, 3.0], &[1.0, 5.0]]);
        let stats = NormStats::from_features(&f).unwrap();
        let zero = ReadoutModel {
            weights: vec![0.0, 0.0],
            bias: 0.7,
            ridge_lambda: 0.0,
            norm_stats: Some(stats.clone()),
            warnings: vec![],
        };
        assert_eq!(predict(&zero, &f).unwrap(), vec![0.7; 3]);
        let one_hot = ReadoutModel {
            weights: vec![0.0, 1.0],
            bias: 0.0,
            ..zero
        };
        let col = normalize(&f, &stats).unwrap();
        assert_eq!(predict(&one_hot, &f).unwrap(), col.column(1).iter().copied().collect::<Vec<_>>());
        assert!(matches!(predict(&one_hot, &mat(&[&[1.0]])), Err(Error::Usage(_))));
    }

    #[test]
    fn singular_system_falls_back_to_min_norm() {
        // duplicated column: XᵀX is singular at λ = 0
        let f = DMatrix::from_fn(20, 3, |i, j| if j == 2 { (i as f64).sin() } else { ((i + j) as f64 * 0.7).cos() });
        let mut dup = DMatrix::zeros(20, 4);
        dup.columns_mut(0, 3).copy_from(&f);
        dup.column_mut(3).copy_from(&f.column(2));
        let y: Vec<f64> = (0..20).map(|i| f[(i, 2)] * 2.0 + f[(i, 0)]).collect();
        let opts = RidgeOptions { lambda: 0.0, fit_bias: false, normalize: false };
        let model = train_ridge(&dup, &y, opts).unwrap();
        assert!(!model.warnings.is_empty());
        // minimum norm splits the weight evenly across the duplicates
        assert!((model.weights[2] - 1.0).abs() < 1e-8);
        assert!((model.weights[3] - 1.0).abs() < 1e-8);
        assert!(nmse(&predict(&model, &dup).unwrap(), &y).unwrap() < 1e-20);
    }

    #[test]
    fn wta_examples() {
        let s = mat(&[&[1.0, -1.0], &[1.0, -1.0]]);
        assert_eq!(wta_classify(&s, &[(0, 2)]).unwrap(), vec![0]);
        let eq = mat(&[&[0.3, 0.3, 0.3], &[0.3, 0.3, 0.3]]);
        assert_eq!(wta_classify(&eq, &[(0, 2)]).unwrap(), vec![0]);
        let two = mat(&[&[0.0, 1.0], &[0.0, 1.0], &[2.0, 1.0]]);
        assert_eq!(wta_classify(&two, &[(0, 2), (2, 3)]).unwrap(), vec![1, 0]);
        assert!(wta_classify(&two, &[(1, 1)]).is_err());
        assert!(wta_classify(&two, &[(0, 2), (1, 3)]).is_err());
        assert!(wta_classify(&two, &[(0, 4)]).is_err());
        assert!(wta_classify(&mat(&[&[1.0]]), &[(0, 1)]).is_err());
    }

    #[test]
    fn split_is_contiguous() {
        let f = DMatrix::from_fn(10, 2, |i, j| (i * 10 + j) as f64);
        let t = DMatrix::from_fn(10, 1, |i, _| i as f64);
        let s = SplitDataset::from_rows(&f, &t, 2, 5, 3).unwrap();
        assert_eq!(s.warmup.targets.as_slice(), &[0.0, 1.0]);
        assert_eq!(s.train.targets.as_slice(), &[2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(s.test.targets.as_slice(), &[7.0, 8.0, 9.0]);
        assert_eq!(s.test.features[(0, 1)], 71.0);
        assert!(SplitDataset::from_rows(&f, &t, 2, 5, 4).is_err());
    }

    #[test]
    fn model_json_roundtrip() {
        let f = DMatrix::from_fn(12, 2, |i, j| ((i + j) as f64).sin());
        let y: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let m = train_ridge(&f, &y, RidgeOptions::default()).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"weights\"") && s.contains("\"norm_stats\""));
        let back: ReadoutModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
