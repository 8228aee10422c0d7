//! Gauss-Legendre quadrature with node caching and a doubling refinement
//! driver for the action integrals.
//!
//! Square-root endpoint behavior is handled upstream by the substitution
//! u = edge ∓ s², which turns √-type integrands into smooth ones; the
//! integrals that reach this module are smooth, so plain Gauss-Legendre
//! with node doubling converges fast.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Compute the n-point rule by Newton iteration on P_n, seeded with the
    /// Chebyshev approximation to the roots.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x.abs();
            nodes[n - 1 - i] = x.abs();
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            let (_, d) = legendre_with_derivative(n, 0.0);
            nodes[n / 2] = 0.0;
            weights[n / 2] = 2.0 / (d * d);
        }
        GaussLegendre { nodes, weights }
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule(n: usize) -> GaussLegendre {
    static CACHE: OnceLock<Mutex<HashMap<usize, GaussLegendre>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n).or_insert_with(|| GaussLegendre::new(n)).clone()
}

/// n-point Gauss-Legendre on [a, b] for a complex-valued integrand.
pub fn integrate_n(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, n: usize) -> Complex64 {
    let gl = rule(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in gl.nodes.iter().zip(gl.weights.iter()) {
        acc += f(mid + half * x) * *w;
    }
    acc * half
}

/// Gauss-Legendre with node doubling (64, 128, ..., 1024) until two
/// successive rules agree to `target` in absolute value.
pub fn integrate_refining(
    f: &dyn Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    target: f64,
) -> Result<Complex64> {
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut prev = integrate_n(f, a, b, 64);
    for n in [128usize, 256, 512, 1024] {
        let cur = integrate_n(f, a, b, n);
        if (cur - prev).norm() <= target {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Numeric(format!(
        "quadrature did not stabilize to {target:.1e} on [{a}, {b}] at 1024 nodes"
    )))
}

/// Same doubling driver for real integrands.
pub fn integrate_refining_real(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    target: f64,
) -> Result<f64> {
    let g = |x: f64| Complex64::new(f(x), 0.0);
    Ok(integrate_refining(&g, a, b, target)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gl_nodes_integrate_polynomials_exactly() {
        // 64-point rule is exact through degree 127
        let f = |x: f64| Complex64::new(x.powi(8) - 3.0 * x.powi(3) + 1.0, 0.0);
        let got = integrate_n(&f, -1.0, 1.0, 64).re;
        assert_abs_diff_eq!(got, 2.0 / 9.0 + 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gl_weights_sum_to_interval_length() {
        for n in [2usize, 5, 64, 129] {
            let gl = GaussLegendre::new(n);
            let s: f64 = gl.weights.iter().sum();
            assert_abs_diff_eq!(s, 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn refining_driver_hits_target_on_smooth_integrand() {
        let f = |x: f64| Complex64::new((3.0 * x).sin() * (-x).exp(), 0.0);
        let got = integrate_refining(&f, 0.0, 2.0, 1e-12).unwrap().re;
        // closed form of ∫ sin(3x) e^{-x} dx on [0, 2]
        let antider = |x: f64| -(-x).exp() * ((3.0 * x).sin() + 3.0 * (3.0 * x).cos()) / 10.0;
        assert_abs_diff_eq!(got, antider(2.0) - antider(0.0), epsilon = 1e-11);
    }
}
