//! Independent reference routes used to validate the production paths:
//! a truncated plane-wave (Fourier) Hill matrix for band edges and the
//! discriminant, a dense Jacobi eigensolver for small symmetric matrices,
//! and composite Simpson quadrature. These deliberately share no code with
//! the ODE/Sturm/Gauss-Legendre implementations they check.

use crate::error::{Error, Result};
use crate::potentials::PeriodicPotential;

/// Eigenvalues of the plane-wave Hamiltonian at quasi-momentum q with
/// `n_modes` Fourier modes (n_modes odd): H_{mn} = (q + 2πm)² δ + V̂_{m-n}.
pub fn plane_wave_eigenvalues(v: &PeriodicPotential, q: f64, n_modes: usize) -> Vec<f64> {
    let m_half = n_modes / 2;
    let dim = 2 * m_half + 1;
    let mut h = vec![vec![0.0f64; dim]; dim];
    for (i, row) in h.iter_mut().enumerate() {
        let m = i as i64 - m_half as i64;
        for (j, x) in row.iter_mut().enumerate() {
            let n = j as i64 - m_half as i64;
            if m == n {
                let k = q + 2.0 * std::f64::consts::PI * m as f64;
                *x = k * k;
            } else {
                *x = v.fourier_coefficient(m - n);
            }
        }
    }
    let mut eig = jacobi_eigenvalues(&mut h);
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

/// Band edges below `e_max` from the plane-wave matrices at q = 0 and q = π:
/// q = 0 carries E_1; E_4, E_5; E_8, E_9; ...; q = π carries E_2, E_3; E_6, E_7; ...
pub fn plane_wave_band_edges(v: &PeriodicPotential, e_max: f64, n_modes: usize) -> Vec<f64> {
    let e0 = plane_wave_eigenvalues(v, 0.0, n_modes);
    let epi = plane_wave_eigenvalues(v, std::f64::consts::PI, n_modes);
    let mut edges = vec![e0[0]];
    let (mut i0, mut ipi) = (1usize, 0usize);
    loop {
        // pairs alternate: (pi, pi), (0, 0), (pi, pi), ...
        let from_pi = (edges.len() - 1) % 4 == 0;
        let pair = if from_pi {
            let p = [epi.get(ipi), epi.get(ipi + 1)];
            ipi += 2;
            p
        } else {
            let p = [e0.get(i0), e0.get(i0 + 1)];
            i0 += 2;
            p
        };
        match (pair[0], pair[1]) {
            (Some(&a), Some(&b)) => {
                edges.push(a);
                edges.push(b);
            }
            _ => break,
        }
        if *edges.last().unwrap() > e_max {
            break;
        }
    }
    edges.retain(|&e| e <= e_max);
    edges
}

/// Discriminant oracle: find the reduced quasi-momentum q ∈ [0, π] with a
/// plane-wave eigenvalue equal to `e` (which must lie in band `band`,
/// 1-based), then Δ = 2 cos q.
pub fn plane_wave_discriminant(
    v: &PeriodicPotential,
    e: f64,
    band: usize,
    n_modes: usize,
) -> Result<f64> {
    let level = |q: f64| plane_wave_eigenvalues(v, q, n_modes)[band - 1];
    // the band-th eigenvalue is monotone in q on [0, pi] (up over odd bands,
    // down over even); bracket and bisect
    let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
    let (f_lo, f_hi) = (level(lo) - e, level(hi) - e);
    if f_lo * f_hi > 0.0 {
        return Err(Error::Numeric(format!(
            "E = {e} not bracketed in band {band} of the plane-wave oracle"
        )));
    }
    let rising = f_lo < 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let fm = level(mid) - e;
        if (fm < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(2.0 * (0.5 * (lo + hi)).cos())
}

/// Cyclic-Jacobi eigenvalues of a dense symmetric matrix (destroys the
/// input). Plenty for the N ≤ 300 oracle duty.
pub fn jacobi_eigenvalues(a: &mut [Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    for sweep in 0..100 {
        let mut off: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(a)) || sweep == 99 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Composite Simpson with `n` subintervals (n even).
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn jacobi_on_known_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let mut m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let mut e = jacobi_eigenvalues(&mut m);
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_abs_diff_eq!(e[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn plane_wave_free_particle_edges() {
        let edges = plane_wave_band_edges(&PeriodicPotential::free(), 50.0, 41);
        assert_abs_diff_eq!(edges[0], 0.0, epsilon = 1e-12);
        let pi2 = std::f64::consts::PI.powi(2);
        assert_abs_diff_eq!(edges[1], pi2, epsilon = 1e-10);
        assert_abs_diff_eq!(edges[2], pi2, epsilon = 1e-10);
    }

    #[test]
    fn simpson_matches_closed_form() {
        let got = simpson(&|x: f64| x.exp(), 0.0, 1.0, 1000);
        assert_abs_diff_eq!(got, 1.0f64.exp() - 1.0, epsilon = 1e-12);
    }
}
