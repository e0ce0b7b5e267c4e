//! Small numeric helpers shared across modules.

/// Pairwise (cascade) summation. The result depends only on the order of
/// `values`, never on how the vector was produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Logistic function without overflow for large |x|.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `p (1 - p)` for `p = logistic(x)`, accurate in both tails.
#[inline]
pub fn logistic_variance(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `1 / (p (1 - p))` for `p = logistic(x)`, i.e. `2 + 2 cosh(x)`.
#[inline]
pub fn inverse_logistic_variance(x: f64) -> f64 {
    2.0 + 2.0 * x.cosh()
}

/// Formats a float with 17 significant digits. Non-finite values map to
/// `None` so that callers can decide how to encode them.
pub fn format_sig17(x: f64) -> Option<String> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() });
    }
    let sci = format!("{:.16e}", x);
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(1) as usize;
        Some(format!("{:.*}", decimals, x))
    } else {
        Some(sci)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_for_small_inputs() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 5050.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn logistic_tails() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0);
        assert_eq!(logistic(800.0), 1.0);
        assert!((logistic_variance(0.0) - 0.25).abs() < 1e-16);
        let x: f64 = 30.0;
        let expected = (-x).exp();
        assert!(((logistic_variance(x) - expected) / expected).abs() < 1e-12);
        assert_eq!(inverse_logistic_variance(0.0), 4.0);
    }

    #[test]
    fn sig17_digits() {
        assert_eq!(format_sig17(0.5).unwrap(), "0.50000000000000000");
        assert_eq!(format_sig17(2.5).unwrap(), "2.5000000000000000");
        assert_eq!(format_sig17(1e-7).unwrap(), "9.9999999999999995e-8");
        assert_eq!(format_sig17(2.5e20).unwrap(), "2.5000000000000000e20");
        assert_eq!(format_sig17(f64::NAN), None);
        for &x in &[0.1, 1.0 / 3.0, 2.5757, 9.99999999, 1e16, -123.456, 1e-5, 0.0009999] {
            let s = format_sig17(x).unwrap();
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }
}
