//! Adaptive embedded Runge-Kutta (Dormand-Prince 5(4)) for small fixed-size
//! complex systems.
//!
//! Monodromy accuracy bounds everything downstream, so the default relative
//! tolerance is 1e-11 and the error estimate uses the max norm with a
//! PI-free step controller clamped to [0.2, 5].

use num_complex::Complex64;

use crate::error::{Error, Result};

const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
/// 5th-order weights (also the 7th stage row: FSAL).
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
/// B - B* (error estimate weights, incl. the FSAL stage).
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

pub const DEFAULT_RTOL: f64 = 1e-12;
pub const DEFAULT_ATOL: f64 = 1e-14;

/// Integrate y' = f(x, y) from `x0` to `x1` (x1 > x0), returning y(x1).
pub fn integrate<const N: usize>(
    f: &dyn Fn(f64, &[Complex64; N]) -> [Complex64; N],
    x0: f64,
    x1: f64,
    y0: [Complex64; N],
    rtol: f64,
    atol: f64,
) -> Result<[Complex64; N]> {
    let span = x1 - x0;
    debug_assert!(span > 0.0);
    let mut x = x0;
    let mut y = y0;
    let mut h = (span / 16.0).min(0.05);
    let mut k1 = f(x, &y);
    let min_step = span * 1e-14;

    while x < x1 {
        if h > x1 - x {
            h = x1 - x;
        }
        let mut k = [[Complex64::new(0.0, 0.0); N]; 7];
        k[0] = k1;

        let stage = |coefs: &[f64], k: &[[Complex64; N]; 7]| {
            let mut yi = y;
            for (j, &a) in coefs.iter().enumerate() {
                if a != 0.0 {
                    for i in 0..N {
                        yi[i] += k[j][i] * (a * h);
                    }
                }
            }
            yi
        };

        k[1] = f(x + C[0] * h, &stage(&A2, &k));
        k[2] = f(x + C[1] * h, &stage(&A3, &k));
        k[3] = f(x + C[2] * h, &stage(&A4, &k));
        k[4] = f(x + C[3] * h, &stage(&A5, &k));
        k[5] = f(x + C[4] * h, &stage(&A6, &k));

        let mut y_new = y;
        for (j, &b) in B.iter().enumerate() {
            if b != 0.0 {
                for i in 0..N {
                    y_new[i] += k[j][i] * (b * h);
                }
            }
        }
        let k7 = f(x + h, &y_new);
        k[6] = k7;

        let mut err: f64 = 0.0;
        for i in 0..N {
            let mut e = Complex64::new(0.0, 0.0);
            for (j, &w) in E.iter().enumerate() {
                if w != 0.0 {
                    e += k[j][i] * (w * h);
                }
            }
            let scale = atol + rtol * y[i].norm().max(y_new[i].norm());
            err = err.max(e.norm() / scale);
        }

        if err <= 1.0 {
            x += h;
            y = y_new;
            k1 = k7;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < min_step {
            return Err(Error::Numeric(format!(
                "ODE step underflow at x = {x} (h = {h:.3e})"
            )));
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integrates_complex_exponential() {
        // y' = i*w*y on [0, 1]
        let w = 7.3;
        let f = |_x: f64, y: &[Complex64; 1]| [y[0] * Complex64::new(0.0, w)];
        let y = integrate(&f, 0.0, 1.0, [Complex64::new(1.0, 0.0)], 1e-12, 1e-14).unwrap();
        let exact = Complex64::new(0.0, w).exp();
        assert_abs_diff_eq!((y[0] - exact).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn integrates_airy_like_system() {
        // y'' = x y, y(0) = 1, y'(0) = 0; compare against a tight-tolerance rerun
        let f = |x: f64, y: &[Complex64; 2]| [y[1], y[0] * x];
        let a = integrate(
            &f,
            0.0,
            2.0,
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            1e-9,
            1e-12,
        )
        .unwrap();
        let b = integrate(
            &f,
            0.0,
            2.0,
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            1e-13,
            1e-15,
        )
        .unwrap();
        assert!((a[0] - b[0]).norm() < 1e-8);
    }
}
