//! Gauss-Legendre quadrature.
//!
//! Nodes and weights are computed once per order by Newton iteration on the
//! Legendre polynomial, which is accurate to machine precision for the
//! orders used here (<= 512).

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Default node count for kernel integrals.
pub const DEFAULT_NODES: usize = 256;

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    // three-term recurrence for P_n and its derivative
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th positive root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn cached(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard.entry(n).or_insert_with(|| compute_nodes(n)).clone()
}

/// Integrate `f` over `[a, b]` with an `n`-point Gauss-Legendre rule.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    if a >= b {
        return 0.0;
    }
    let (nodes, weights) = cached(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Integrate over `[a, b]` split into `panels` equal panels. Useful when the
/// integrand has kinks at unknown interior points.
pub fn integrate_paneled<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize, panels: usize) -> f64 {
    if a >= b {
        return 0.0;
    }
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * width;
            integrate(&f, lo, lo + width, n)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        // degree-7 polynomial is exact under a 4-point rule
        let f = |x: f64| 3.0 * x.powi(7) - x.powi(4) + 2.0 * x - 5.0;
        let exact = |x: f64| 3.0 / 8.0 * x.powi(8) - x.powi(5) / 5.0 + x * x - 5.0 * x;
        let got = integrate(f, -1.0, 2.5, 4);
        assert!((got - (exact(2.5) - exact(-1.0))).abs() < 1e-10);
    }

    #[test]
    fn gaussian_moment_matches() {
        // integral of h^2 phi(h) over (0, 8) = 1/2 for a standard normal
        let f = |h: f64| h * h * (-0.5 * h * h).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let got = integrate(f, 0.0, 8.0, DEFAULT_NODES);
        assert!((got - 0.5).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(integrate(|x| x, 1.0, 1.0, 16), 0.0);
        assert_eq!(integrate(|x| x, 2.0, 1.0, 16), 0.0);
    }
}
