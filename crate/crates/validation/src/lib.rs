//! Slow, direct reference implementations used to check the simulator.
//!
//! Nothing here shares code with `fdm-reservoir`: each function evaluates its
//! defining formula term by term.

use num_complex::Complex64;

/// `J_n(m)` from its power series, summed until terms drop below 1e-16
/// relative to the running sum.
pub fn bessel_series(n: i32, m: f64) -> f64 {
    let order = n.unsigned_abs() as i32;
    let half = m / 2.0;
    let mut term = 1.0;
    for k in 1..=order {
        term *= half / k as f64;
    }
    let mut sum = term;
    let mut s = 0;
    loop {
        s += 1;
        term *= -half * half / (s as f64 * (s + order) as f64);
        sum += term;
        if term.abs() < 1e-16 * sum.abs().max(1e-300) || s > 500 {
            break;
        }
    }
    if n < 0 && order % 2 == 1 {
        -sum
    } else {
        sum
    }
}

/// Parameters of the recurrence, as plain numbers.
#[derive(Clone, Copy, Debug)]
pub struct StepParams {
    pub alpha: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub m: f64,
    pub l_max: i64,
}

/// One roundtrip evaluated as a double loop over sidebands and orders:
/// `x'_k = α e^{j(φ0+kφ1)} Σ_{|l|≤L} J_l(m) (-1)^l x_{k-l} + drive δ_{k,0}`,
/// with terms outside the simulated band dropped.
pub fn step_oracle(x: &[Complex64], drive: f64, p: StepParams) -> Vec<Complex64> {
    let dim = x.len() as i64;
    let half = (dim - 1) / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
    for k in -half..=half {
        let mut acc = Complex64::new(0.0, 0.0);
        for l in -p.l_max..=p.l_max {
            let src = k - l;
            if src < -half || src > half {
                continue;
            }
            let sign = if l.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            acc += x[(src + half) as usize] * (sign * bessel_series(l as i32, p.m));
        }
        let phase = Complex64::from_polar(p.alpha, p.phi0 + k as f64 * p.phi1);
        out[(k + half) as usize] = phase * acc;
    }
    out[half as usize] += drive;
    out
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Ridge weights and bias from the explicit normal equations. With
/// `fit_bias`, features and target are centred first so the constant is not
/// penalised.
pub fn ridge_oracle(rows: &[Vec<f64>], y: &[f64], lambda: f64, fit_bias: bool) -> (Vec<f64>, f64) {
    let t = rows.len();
    let n = rows[0].len();
    let (mx, my) = if fit_bias {
        let mx: Vec<f64> = (0..n).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / t as f64).collect();
        (mx, y.iter().sum::<f64>() / t as f64)
    } else {
        (vec![0.0; n], 0.0)
    };
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for (r, &yv) in rows.iter().zip(y) {
        for i in 0..n {
            let xi = r[i] - mx[i];
            b[i] += xi * (yv - my);
            for j in 0..n {
                a[i][j] += xi * (r[j] - mx[j]);
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += lambda;
    }
    let w = solve_dense(a, b);
    let bias = my - w.iter().zip(&mx).map(|(w, m)| w * m).sum::<f64>();
    (w, bias)
}

/// NARMA10 from zero history; returns `y(1..=T)`.
pub fn narma10_oracle(u: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0_f64; u.len() + 1];
    for n in 0..u.len() {
        let mut s = 0.0;
        for i in 0..10 {
            if n >= i {
                s += y[n - i];
            }
        }
        let u9 = if n >= 9 { u[n - 9] } else { 0.0 };
        y[n + 1] = 0.3 * y[n] + 0.05 * y[n] * s + 1.5 * u9 * u[n] + 0.1;
    }
    y[1..].to_vec()
}

/// Linear channel `q(n) = Σ_i h_i d(n + 2 - i)` for `d` given on `n ∈ [-7, T+2)`.
pub fn channel_q_oracle(d_ext: &[f64]) -> Vec<f64> {
    const H: [f64; 10] = [0.08, -0.12, 1.0, 0.18, -0.1, 0.091, -0.05, 0.04, 0.03, 0.01];
    let t = d_ext.len() - 9;
    (0..t)
        .map(|n| {
            // d(n + 2 - i) lives at index n + 2 - i + 7.
            H.iter().enumerate().map(|(i, h)| h * d_ext[n + 9 - i]).sum()
        })
        .collect()
}

/// Class with the largest mean score over rows `start..end`; lowest index on ties.
pub fn mean_argmax(scores: &[Vec<f64>], start: usize, end: usize) -> usize {
    let c = scores[0].len();
    let means: Vec<f64> = (0..c)
        .map(|j| scores[start..end].iter().map(|r| r[j]).sum::<f64>() / (end - start) as f64)
        .collect();
    let mut best = 0;
    for j in 1..c {
        if means[j] > means[best] {
            best = j;
        }
    }
    best
}
