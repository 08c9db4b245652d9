//! Bessel functions of the first kind, J_n(x), for integer order.
//!
//! Values are produced with Miller's backward recurrence normalised by
//! `J_0(x) + 2 Σ_{k≥1} J_{2k}(x) = 1`. One sweep yields every order from 0 up
//! to the requested maximum, which is what the coupling-matrix builder needs.

use crate::error::{Error, Result};

/// Largest supported |order|.
pub const MAX_ORDER: usize = 60;
/// Largest supported argument.
pub const MAX_ARG: f64 = 10.0;

const RESCALE_ABOVE: f64 = 1e250;

fn check_arg(m: f64) -> Result<()> {
    if !m.is_finite() || !(0.0..=MAX_ARG).contains(&m) {
        return Err(Error::Domain(format!(
            "Bessel argument {m} outside [0, {MAX_ARG}]"
        )));
    }
    Ok(())
}

/// J_order(m) for `|order| <= 60` and `0 <= m <= 10`.
///
/// Negative orders follow `J_{-l}(m) = (-1)^l J_l(m)`.
pub fn bessel_j(order: i32, m: f64) -> Result<f64> {
    let n = order.unsigned_abs() as usize;
    if n > MAX_ORDER {
        return Err(Error::Domain(format!(
            "Bessel order {order} outside [-{MAX_ORDER}, {MAX_ORDER}]"
        )));
    }
    let value = bessel_j_orders(n, m)?[n];
    Ok(if order < 0 && n % 2 == 1 { -value } else { value })
}

/// `[J_0(m), J_1(m), ..., J_max_order(m)]`.
pub fn bessel_j_orders(max_order: usize, m: f64) -> Result<Vec<f64>> {
    if max_order > MAX_ORDER {
        return Err(Error::Domain(format!(
            "Bessel order {max_order} outside [0, {MAX_ORDER}]"
        )));
    }
    check_arg(m)?;

    let mut out = vec![0.0; max_order + 1];
    if m == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }

    // Start far enough above both the order and the argument that the seed's
    // error has decayed below double precision by the time we reach max_order.
    let mut start = max_order.max(m.ceil() as usize) + 40;
    if start % 2 == 1 {
        start += 1;
    }

    let mut upper = 0.0_f64; // j_{k+1}
    let mut current = 1e-300_f64; // j_k
    let mut norm = 0.0_f64;
    let two_over_m = 2.0 / m;

    for k in (0..=start).rev() {
        if k <= max_order {
            out[k] = current;
        }
        if k % 2 == 0 {
            norm += if k == 0 { current } else { 2.0 * current };
        }
        if k == 0 {
            break;
        }
        let lower = (k as f64) * two_over_m * current - upper;
        upper = current;
        current = lower;

        if current.abs() > RESCALE_ABOVE {
            let s = 1.0 / RESCALE_ABOVE;
            current *= s;
            upper *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }

    for v in out.iter_mut() {
        *v /= norm;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: Σ_s (-1)^s (m/2)^{2s+n} / (s! (s+n)!), stopped once
    /// the term falls below 1e-16 in magnitude.
    fn power_series(n: usize, m: f64) -> f64 {
        let half = m / 2.0;
        let mut term = 1.0;
        for i in 1..=n {
            term *= half / i as f64;
        }
        let mut sum = term;
        let mut s = 1usize;
        loop {
            term *= -half * half / (s as f64 * (s + n) as f64);
            sum += term;
            if term.abs() < 1e-16 && s > 2 {
                break;
            }
            s += 1;
        }
        sum
    }

    #[test]
    fn values_at_zero() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(-7, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn j0_of_two_matches_power_series() {
        let oracle = power_series(0, 2.0);
        assert!((bessel_j(0, 2.0).unwrap() - oracle).abs() < 1e-12);
        // Sanity check on the oracle itself against the tabulated value.
        assert!((oracle - 0.223_890_779_141_235_67).abs() < 1e-15);
    }

    #[test]
    fn matches_power_series_over_domain() {
        for &m in &[1e-3, 0.1, 0.5, 1.0, 2.0, 3.7, 6.25, 9.0, 10.0] {
            for n in 0..=40 {
                let got = bessel_j(n as i32, m).unwrap();
                let want = power_series(n, m);
                assert!(
                    (got - want).abs() < 1e-12,
                    "J_{n}({m}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn negative_order_parity() {
        for l in 0..=20 {
            let pos = bessel_j(l, 2.0).unwrap();
            let neg = bessel_j(-l, 2.0).unwrap();
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(neg, sign * pos);
        }
    }

    #[test]
    fn high_order_small_argument_does_not_overflow() {
        let v = bessel_j(60, 1e-3).unwrap();
        assert!(v.is_finite() && v >= 0.0 && v < 1e-250);
        assert!((bessel_j(60, 10.0).unwrap() - power_series(60, 10.0)).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(bessel_j(61, 1.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_j(-61, 1.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_j(0, -0.1), Err(Error::Domain(_))));
        assert!(matches!(bessel_j(0, 10.5), Err(Error::Domain(_))));
        assert!(matches!(bessel_j(0, f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn squared_sum_is_one() {
        for &m in &[0.5_f64, 1.0, 2.0] {
            let lmax = m.ceil() as usize + 8;
            let j = bessel_j_orders(lmax, m).unwrap();
            let total = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
            assert!((total - 1.0).abs() < 1e-8, "m={m}: {total}");
        }
    }
}
