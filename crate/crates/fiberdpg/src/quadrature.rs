//! Gauss–Legendre and Gauss–Lobatto–Legendre rules on `[0, 1]`.

use std::f64::consts::PI;

/// Legendre polynomial P_n(x) and its derivative on `[-1, 1]`.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (x * x - 1.0).abs() < 1e-300 {
        let s = if x > 0.0 { 1.0 } else { (-1.0f64).powi(n as i32 - 1) };
        s * (n * (n + 1)) as f64 / 2.0
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule mapped to `[0, 1]`; exact for degree `2n − 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, t);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, t);
        x[n - 1 - i] = 0.5 * (1.0 + t);
        w[n - 1 - i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// `n`-point Gauss–Lobatto–Legendre rule on `[0, 1]` (`n >= 2`), endpoints included.
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let m = n - 1;
    let mut t = vec![0.0; n];
    t[0] = -1.0;
    t[m] = 1.0;
    for i in 1..m {
        // interior nodes are roots of P_m'
        let mut s = -(PI * i as f64 / m as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(m, s);
            // P_m'' from the Legendre ODE
            let d2p = (2.0 * s * dp - (m * (m + 1)) as f64 * p) / (1.0 - s * s);
            let ds = dp / d2p;
            s -= ds;
            if ds.abs() < 1e-16 {
                break;
            }
        }
        t[i] = s;
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let (p, _) = legendre_with_derivative(m, t[i]);
        x[i] = 0.5 * (1.0 + t[i]);
        w[i] = 1.0 / ((m * (m + 1)) as f64 * p * p);
    }
    (x, w)
}
