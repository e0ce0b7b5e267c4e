//! Gauss–Legendre and Gauss–Hermite nodes by Newton iteration on the
//! three-term recurrences.

use std::f64::consts::PI;

/// Nodes and weights on `[-1, 1]` for weight function 1; weights sum to 2.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                dp = legendre_with_derivative(n, z).1;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[m - 1] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let prev = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (z * p - prev) / (z * z - 1.0);
    (p, d)
}

/// Values of the orthonormal Hermite functions `psi_n(x)` and `psi_{n-1}(x)`,
/// both multiplied by `exp(-log_scale)`. Rescaling keeps the recurrence finite
/// far from the origin where `psi_0 = pi^{-1/4} exp(-x^2/2)` underflows.
fn hermite_functions(n: usize, x: f64) -> (f64, f64, f64) {
    const RESCALE: f64 = 1e150;
    let mut log_scale = -0.5 * x * x - 0.25 * PI.ln();
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 1..=n {
        let kf = k as f64;
        let next = (2.0 / kf).sqrt() * x * cur - ((kf - 1.0) / kf).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    (cur, prev, log_scale)
}

/// Nodes and weights for `int exp(-x^2) f(x) dx`; weights sum to `sqrt(pi)`.
/// Weights of extreme nodes underflow to zero for large `n`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    // roots[i] is the i-th largest positive root.
    let mut roots: Vec<f64> = Vec::with_capacity(m);
    for i in 0..m {
        let mut z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => roots[0] - 1.14 * nf.powf(0.426) / roots[0],
            2 => 1.86 * roots[1] - 0.86 * roots[0],
            3 => 1.91 * roots[2] - 0.91 * roots[1],
            _ => 2.0 * roots[i - 1] - roots[i - 2],
        };
        let mut last = (0.0, 0.0, 0.0);
        for _ in 0..200 {
            let (p, q, s) = hermite_functions(n, z);
            let dp = (2.0 * nf).sqrt() * q - z * p;
            let dz = p / dp;
            z -= dz;
            last = (p, q, s);
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                last = hermite_functions(n, z);
                break;
            }
        }
        let (_, q, s) = last;
        // w = exp(-x^2) / (n psi_{n-1}(x)^2)
        let log_w = -z * z - nf.ln() - 2.0 * (q.abs().ln() + s);
        let wi = log_w.exp();
        roots.push(z);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[m - 1] = 0.0;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_small_rules() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(3);
        assert_eq!(x[1], 0.0);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_integrates_polynomials() {
        for n in [5, 64, 333, 1024] {
            let (x, w) = gauss_legendre(n);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n} {total}");
            let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
            assert!((m4 - 0.4).abs() < 1e-13);
        }
    }

    #[test]
    fn hermite_integrates_moments() {
        let sqrt_pi = PI.sqrt();
        for n in [2, 3, 10, 64, 128, 256, 512, 1024] {
            let (x, w) = gauss_hermite(n);
            assert!(x.windows(2).all(|p| p[0] < p[1]), "n={n} not increasing");
            let total: f64 = w.iter().sum();
            assert!((total / sqrt_pi - 1.0).abs() < 1e-12, "n={n} total {total}");
            if n >= 3 {
                let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
                assert!((m2 / sqrt_pi - 0.5).abs() < 1e-12, "n={n} m2 {m2}");
            }
            if n >= 10 {
                let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
                assert!((m4 / sqrt_pi - 0.75).abs() < 1e-12, "n={n} m4 {m4}");
            }
        }
    }
}
