use fdm_reservoir::bessel::bessel_j;
use fdm_reservoir::pipeline::evaluate;
use fdm_reservoir::readout::{nmse, predict, train_ridge, wta_classify, RidgeOptions};
use fdm_reservoir::sidebands::band_half_width;
use fdm_reservoir::tasks::classification::gen_synthetic_classification_with;
use fdm_reservoir::tasks::{
    channel_trace, gen_channel, gen_narma10, memory_capacities, ser, CapacityOptions, ClassificationOptions,
    SplitSizes,
};
use fdm_reservoir::{build_coupling_matrix, run_sequence, step, InputEncoding, Reservoir, ReservoirConfig, SidebandState};
use fdm_reservoir_validation::{
    bessel_series, channel_q_oracle, mean_argmax, narma10_oracle, ridge_oracle, step_oracle, StepParams,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(alpha: f64, phi0: f64, phi1: f64, m: f64) -> ReservoirConfig {
    ReservoirConfig {
        alpha,
        phi0,
        phi1,
        m,
        ..ReservoirConfig::default()
    }
}

fn params(c: &ReservoirConfig) -> StepParams {
    StepParams {
        alpha: c.alpha,
        phi0: c.phi0,
        phi1: c.phi1,
        m: c.m,
        l_max: band_half_width(c.m) as i64,
    }
}

fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> SidebandState {
    SidebandState {
        amplitudes: (0..dim)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    }
}

/// Random state supported on `|k| <= support`.
fn central_state(seed: u64, dim: usize, support: usize) -> SidebandState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = (dim - 1) / 2;
    let mut s = SidebandState::zeros(dim);
    for i in c - support..=c + support {
        s.amplitudes[i] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    s
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn bessel_squares_sum_to_one_within_band() {
    for m in [0.5_f64, 1.0, 2.0] {
        let l = band_half_width(m) as i32;
        let s: f64 = (-l..=l).map(|n| bessel_j(n, m).unwrap().powi(2)).sum();
        assert!((s - 1.0).abs() < 1e-8, "m={m}: {s}");
        for n in -l..=l {
            assert!((bessel_j(n, m).unwrap() - bessel_series(n, m)).abs() < 1e-12);
        }
    }
}

#[test]
fn step_matches_scalar_loop_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let c = ReservoirConfig {
            alpha: rng.random_range(0.0..1.0),
            phi0: rng.random_range(0.0..6.3),
            phi1: rng.random_range(-3.0..3.0),
            m: rng.random_range(0.0..3.0),
            beta: rng.random_range(0.1..2.0),
            n_neurons: 13,
            ..ReservoirConfig::default()
        };
        let matrix = build_coupling_matrix(&c).unwrap();
        let x = random_state(&mut rng, c.internal_dim());
        let u = rng.random_range(-1.0..1.0);
        let got = step(&x, u, &matrix, &c).unwrap();
        let want = step_oracle(&x.amplitudes, c.beta * u, params(&c));
        assert!(max_diff(&got.amplitudes, &want) < 1e-10);

        let dense = matrix.to_dense() * DVector::from_vec(x.amplitudes.clone());
        let mut banded = vec![Complex64::new(0.0, 0.0); x.dim()];
        matrix.apply_into(&x.amplitudes, &mut banded);
        assert!(max_diff(dense.as_slice(), &banded) < 1e-12);
    }
}

#[test]
fn single_step_from_central_sideband() {
    let c = config(0.81, 0.4, 0.9, 2.0);
    let matrix = build_coupling_matrix(&c).unwrap();
    let x = SidebandState::unit_center(c.internal_dim());
    let next = step(&x, 0.0, &matrix, &c).unwrap();
    let want = step_oracle(&x.amplitudes, 0.0, params(&c));
    assert!(max_diff(&next.amplitudes, &want) < 1e-12);
    let l = band_half_width(2.0) as i64;
    for k in -l..=l {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let expect = Complex64::from_polar(0.81, 0.4 + k as f64 * 0.9) * (bessel_series(k as i32, 2.0) * sign);
        assert!((next.get(k) - expect).norm() < 1e-12);
    }
}

#[test]
fn five_step_run_matches_oracle_intensities() {
    let c = ReservoirConfig {
        alpha: 0.81,
        phi0: 0.7,
        phi1: 1.3,
        m: 2.0,
        beta: 0.8,
        n_neurons: 13,
        ..ReservoirConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inputs: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dim = c.internal_dim();
    let got = run_sequence(&inputs, &c, &SidebandState::zeros(dim), 0).unwrap();
    assert_eq!(got.shape(), (5, 13));
    let mut x = vec![Complex64::new(0.0, 0.0); dim];
    let first = (dim - 13) / 2;
    for (n, &u) in inputs.iter().enumerate() {
        x = step_oracle(&x, c.beta * u, params(&c));
        for j in 0..13 {
            assert!((got[(n, j)] - x[first + j].norm_sqr()).abs() < 1e-10);
        }
    }
}

#[test]
fn initial_state_is_forgotten() {
    for alpha in [0.3, 0.81, 0.9] {
        let c = ReservoirConfig {
            input_encoding: InputEncoding::Sine,
            input_bias: 0.3,
            ..config(alpha, 1.1, 0.4, 2.0)
        };
        let res = Reservoir::new(c.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let inputs: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = random_state(&mut rng, c.internal_dim());
        let b = random_state(&mut rng, c.internal_dim());
        let (_, fa) = res.run_with_state(&inputs, &a, 0).unwrap();
        let (_, fb) = res.run_with_state(&inputs, &b, 0).unwrap();
        assert!(fa.distance(&fb) < 1e-6, "alpha={alpha}: {}", fa.distance(&fb));
    }
}

#[test]
fn beta_does_not_change_trained_error() {
    let split = SplitSizes::new(200, 600, 400);
    let ds = gen_narma10(split.total(), 3).unwrap().with_split(split).unwrap();
    let ridge = RidgeOptions {
        lambda: 0.0,
        ..RidgeOptions::default()
    };
    for normalize in [true, false] {
        let run = |beta: f64| {
            let c = ReservoirConfig {
                beta,
                ..config(0.81, 0.9, 0.5, 2.0)
            };
            let res = Reservoir::new(c).unwrap();
            evaluate(&ds, &res, RidgeOptions { normalize, ..ridge }, &CapacityOptions::default(), 0).unwrap()["nmse"]
        };
        let (a, b) = (run(1.0), run(2.0));
        assert!((a - b).abs() < 1e-8, "normalize={normalize}: {a} vs {b}");
    }
}

fn random_rows(rng: &mut ChaCha8Rng, t: usize, n: usize) -> Vec<Vec<f64>> {
    (0..t).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn raw(lambda: f64, fit_bias: bool) -> RidgeOptions {
    RidgeOptions {
        lambda,
        fit_bias,
        normalize: false,
    }
}

#[test]
fn ridge_matches_normal_equations_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let rows = random_rows(&mut rng, 5, 3);
    let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model = train_ridge(&to_matrix(&rows), &y, raw(0.1, false)).unwrap();
    let (w, _) = ridge_oracle(&rows, &y, 0.1, false);
    for (a, b) in model.weights.iter().zip(&w) {
        assert!((a - b).abs() < 1e-10);
    }
    assert_eq!(model.bias, 0.0);

    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let rows = random_rows(&mut rng, 50, 13);
        let y: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..2.0)).collect();
        for lambda in [0.0, 1e-3, 0.1] {
            let model = train_ridge(&to_matrix(&rows), &y, raw(lambda, true)).unwrap();
            let (w, b) = ridge_oracle(&rows, &y, lambda, true);
            for (a, o) in model.weights.iter().zip(&w) {
                assert!((a - o).abs() < 1e-10, "seed {seed} lambda {lambda}");
            }
            assert!((model.bias - b).abs() < 1e-10);
        }
    }
}

#[test]
fn large_lambda_predicts_the_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = to_matrix(&random_rows(&mut rng, 40, 5));
    let y: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..3.0)).collect();
    let model = train_ridge(&x, &y, RidgeOptions::default().with_lambda(1e14)).unwrap();
    let mean = y.iter().sum::<f64>() / 40.0;
    assert!(model.weights.iter().all(|w| w.abs() < 1e-10));
    for p in predict(&model, &x).unwrap() {
        assert!((p - mean).abs() < 1e-9);
    }
}

#[test]
fn fitted_values_are_a_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = to_matrix(&random_rows(&mut rng, 60, 13));
    let y: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
    let opts = RidgeOptions::default().with_lambda(0.0);
    let fitted = predict(&train_ridge(&x, &y, opts).unwrap(), &x).unwrap();
    let refit = predict(&train_ridge(&x, &fitted, opts).unwrap(), &x).unwrap();
    for (a, b) in fitted.iter().zip(&refit) {
        assert!((a - b).abs() < 1e-10);
    }
    assert!(nmse(&fitted, &fitted).unwrap() == 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn one_step_conserves_energy_at_unit_gain(
        seed in any::<u64>(), m in 0.0f64..4.0, phi0 in 0.0f64..6.3, phi1 in -3.0f64..3.0,
    ) {
        let c = config(1.0, phi0, phi1, m);
        let dim = c.internal_dim();
        let support = (dim - 1) / 2 - band_half_width(m);
        let x = central_state(seed, dim, support);
        let next = step(&x, 0.0, &build_coupling_matrix(&c).unwrap(), &c).unwrap();
        prop_assert!((next.energy() - x.energy()).abs() < 1e-8, "{} vs {}", next.energy(), x.energy());
    }

    #[test]
    fn one_step_contracts_energy(
        seed in any::<u64>(), alpha in 0.0f64..1.0, m in 0.0f64..4.0, phi1 in -3.0f64..3.0,
    ) {
        let c = config(alpha, 0.3, phi1, m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_state(&mut rng, c.internal_dim());
        let next = step(&x, 0.0, &build_coupling_matrix(&c).unwrap(), &c).unwrap();
        prop_assert!(next.energy() <= alpha * alpha * x.energy() + 1e-8);
    }

    #[test]
    fn global_phase_leaves_intensities_unchanged(seed in any::<u64>(), theta in 0.0f64..6.3) {
        let c = config(0.81, 0.5, 1.2, 2.0);
        let res = Reservoir::new(c.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_state(&mut rng, c.internal_dim());
        let rotated = SidebandState {
            amplitudes: x.amplitudes.iter().map(|a| a * Complex64::from_polar(1.0, theta)).collect(),
        };
        let zeros = vec![0.0; 6];
        let a = res.run(&zeros, &x, 0).unwrap();
        let b = res.run(&zeros, &rotated, 0).unwrap();
        prop_assert!((a - b).abs().max() < 1e-12);
    }

    #[test]
    fn training_error_grows_with_lambda(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = to_matrix(&random_rows(&mut rng, 40, 6));
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut last = -1.0;
        for lambda in [0.0, 1e-4, 1e-2, 1.0, 100.0] {
            let model = train_ridge(&x, &y, RidgeOptions::default().with_lambda(lambda)).unwrap();
            let e = nmse(&predict(&model, &x).unwrap(), &y).unwrap();
            prop_assert!(e >= last - 1e-12);
            last = e;
        }
    }

    #[test]
    fn residual_is_orthogonal_to_features(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = random_rows(&mut rng, 30, 5);
        let x = to_matrix(&rows);
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let model = train_ridge(&x, &y, raw(0.0, true)).unwrap();
        let r: Vec<f64> = predict(&model, &x).unwrap().iter().zip(&y).map(|(p, t)| t - p).collect();
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ones = vec![1.0; 30];
        let mut columns: Vec<Vec<f64>> = (0..5).map(|j| rows.iter().map(|row| row[j]).collect()).collect();
        columns.push(ones);
        for col in columns {
            let dot: f64 = col.iter().zip(&r).map(|(a, b)| a * b).sum();
            let cn = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(dot.abs() < 1e-8 * cn * rn.max(1e-300) + 1e-14);
        }
    }

    #[test]
    fn wta_ignores_common_offset_and_positive_scale(
        seed in any::<u64>(), offset in -5.0f64..5.0, scale in 0.1f64..10.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores = DMatrix::from_fn(30, 3, |_, _| rng.random_range(-1.0..1.0));
        let segs = [(0, 10), (10, 20), (20, 30)];
        let base = wta_classify(&scores, &segs).unwrap();
        let moved = scores.map(|v| v * scale + offset);
        prop_assert_eq!(base, wta_classify(&moved, &segs).unwrap());
    }

    #[test]
    fn ser_ignores_a_shared_permutation(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sym = [-3.0, -1.0, 1.0, 3.0];
        let symbols: Vec<f64> = (0..50).map(|_| sym[rng.random_range(0..4)]).collect();
        let pred: Vec<f64> = (0..50).map(|_| rng.random_range(-4.0..4.0)).collect();
        let mut idx: Vec<usize> = (0..50).collect();
        for i in (1..50).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let ps: Vec<f64> = idx.iter().map(|&i| pred[i]).collect();
        let ss: Vec<f64> = idx.iter().map(|&i| symbols[i]).collect();
        prop_assert_eq!(ser(&pred, &symbols).unwrap(), ser(&ps, &ss).unwrap());
    }
}

#[test]
fn wta_agrees_with_direct_mean_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> = (0..12).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let got = wta_classify(&to_matrix(&rows), &[(0, 12)]).unwrap();
        assert_eq!(got, vec![mean_argmax(&rows, 0, 12)]);
    }
}

#[test]
fn narma_targets_follow_the_recurrence() {
    for seed in [1, 2, 3] {
        let ds = gen_narma10(3200, seed).unwrap();
        let want = narma10_oracle(&ds.raw_inputs);
        for (a, b) in ds.targets[0].iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        for (u, raw) in ds.inputs.iter().zip(&ds.raw_inputs) {
            assert!((u - (4.0 * raw - 1.0)).abs() < 1e-12);
        }
    }
}

#[test]
fn channel_signals_follow_their_definitions() {
    let trace = channel_trace(5000, 20.0, 9).unwrap();
    let q = channel_q_oracle(&trace.symbols_ext);
    for (a, b) in trace.q.iter().zip(&q) {
        assert!((a - b).abs() < 1e-12);
    }
    for (v, q) in trace.noiseless.iter().zip(&q) {
        assert!((v - (q + 0.036 * q * q - 0.011 * q * q * q)).abs() < 1e-12);
    }
    let ds = gen_channel(5000, 20.0, 9).unwrap();
    assert_eq!(ds.targets[0], trace.symbols);
    let peak = trace.received.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    for (u, r) in ds.inputs.iter().zip(&trace.received) {
        assert!((u - r / peak).abs() < 1e-15);
    }
}

#[test]
fn empirical_snr_matches_request() {
    for snr in [12.0, 20.0, 32.0] {
        let t = channel_trace(100_000, snr, 77).unwrap();
        let ps = t.noiseless.iter().map(|v| v * v).sum::<f64>();
        let pn = t.received.iter().zip(&t.noiseless).map(|(r, s)| (r - s).powi(2)).sum::<f64>();
        let measured = 10.0 * (ps / pn).log10();
        assert!((measured - snr).abs() < 0.1, "{snr}: {measured}");
    }
}

#[test]
fn ser_of_all_zero_predictions_is_three_quarters() {
    let t = channel_trace(10_000, f64::INFINITY, 5).unwrap();
    let s = ser(&vec![0.0; 10_000], &t.symbols).unwrap();
    assert!((s - 0.75).abs() < 0.02, "{s}");
}

#[test]
fn noiseless_two_class_task_is_separable() {
    let opts = ClassificationOptions {
        noise_std: 0.0,
        ..ClassificationOptions::default()
    };
    let split = SplitSizes::new(200, 2400, 1200);
    let ds = gen_synthetic_classification_with(2, split.total(), 4, &opts)
        .unwrap()
        .with_split(split)
        .unwrap();
    let c = ReservoirConfig {
        input_encoding: InputEncoding::Sine,
        beta: 0.5,
        input_bias: 0.5,
        ..config(0.81, 0.5, 1.0, 2.0)
    };
    let m = evaluate(&ds, &Reservoir::new(c).unwrap(), RidgeOptions::default(), &CapacityOptions::default(), 0).unwrap();
    assert!(m["wer"] <= 0.1, "{m:?}");
}

#[test]
fn memoryless_reservoir_keeps_no_delayed_input() {
    let c = ReservoirConfig {
        input_encoding: InputEncoding::Sine,
        beta: 0.4,
        input_bias: 0.3,
        ..config(0.0, 0.0, 0.0, 2.0)
    };
    let report = memory_capacities(&c, 30, 0.1, 12).unwrap();
    assert!(report.linear.iter().filter(|d| d.delay >= 1).all(|d| !d.retained));
    assert!(report.linear.iter().any(|d| d.delay == 0 && d.retained));
}
