//! Ground-truth eigenvalues of H_{φ,ε} by second-order finite differences
//! on a Dirichlet-truncated interval, with Sturm-sequence bisection
//! restricted to the energy window of interest.
//!
//! The grid step is an exact reciprocal of an integer points-per-period m,
//! so a shift φ -> φ + ε maps the discrete operator onto itself up to
//! boundary terms (the spectrum shift is then exponentially small, which is
//! the φ-periodicity check). Production eigenvalues are Richardson
//! extrapolations from the (m, 2m) grid pair; the discretization floor is
//! estimated from the (m/2, m) vs (m, 2m) extrapolation difference.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potentials::{AnalyticPerturbation, PeriodicPotential};

/// Symmetric tridiagonal discretization of -d²/dx² + V(x) + W(εx + φ) on
/// [-L, L] with Dirichlet ends.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub half_length: f64,
    pub points_per_period: usize,
    pub step: f64,
    pub n: usize,
    pub diagonal: Vec<f64>,
    /// Constant off-diagonal -1/h².
    pub offdiag: f64,
    pub epsilon: f64,
    pub phi: f64,
}

/// Eigenvalues found in a window for one (ε, φ).
#[derive(Debug, Clone, Serialize)]
pub struct DirectSpectrum {
    pub epsilon: f64,
    pub phi: f64,
    pub eigenvalues_in_window: Vec<f64>,
    pub count: usize,
    pub discretization_floor: f64,
}

/// Build the discrete operator. `boundary_tol` bounds |W| at the truncation
/// points; a violation is a configuration error suggesting a larger L.
pub fn build_operator(
    v: &PeriodicPotential,
    w: &AnalyticPerturbation,
    epsilon: f64,
    phi: f64,
    half_length: f64,
    points_per_period: usize,
    boundary_tol: f64,
) -> Result<DiscreteOperator> {
    if half_length <= 0.0 || points_per_period == 0 {
        return Err(Error::Config("L and points-per-period must be positive".into()));
    }
    let tail = w
        .eval_real(epsilon * half_length + phi)
        .abs()
        .max(w.eval_real(-epsilon * half_length + phi).abs());
    if tail > boundary_tol {
        return Err(Error::Config(format!(
            "|W| = {tail:.3e} at the boundary exceeds {boundary_tol:.3e}; increase L beyond {half_length}"
        )));
    }
    let m = points_per_period;
    let h = 1.0 / m as f64;
    let n = (2.0 * half_length * m as f64).round() as usize - 1;
    let inv_h2 = 1.0 / (h * h);
    let diagonal: Vec<f64> = (1..=n)
        .map(|j| {
            let x = -half_length + j as f64 * h;
            2.0 * inv_h2 + v.eval(x) + w.eval_real(epsilon * x + phi)
        })
        .collect();
    Ok(DiscreteOperator {
        half_length,
        points_per_period: m,
        step: h,
        n,
        diagonal,
        offdiag: -inv_h2,
        epsilon,
        phi,
    })
}

/// Gershgorin interval containing the whole spectrum.
pub fn gershgorin(op: &DiscreteOperator) -> (f64, f64) {
    let r = 2.0 * op.offdiag.abs();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &d in &op.diagonal {
        lo = lo.min(d - r);
        hi = hi.max(d + r);
    }
    (lo, hi)
}

/// Number of eigenvalues strictly below λ: negative pivots of the LDLᵀ
/// (Sturm) recurrence, with the standard underflow guard.
pub fn sturm_count(diagonal: &[f64], offdiag: f64, lambda: f64) -> usize {
    if diagonal.is_empty() {
        return 0;
    }
    let c2 = offdiag * offdiag;
    let mut count = 0usize;
    let mut q = diagonal[0] - lambda;
    if q < 0.0 {
        count += 1;
    }
    for &d in &diagonal[1..] {
        let q_safe = if q.abs() < 1e-300 {
            if q >= 0.0 {
                1e-300
            } else {
                -1e-300
            }
        } else {
            q
        };
        q = (d - lambda) - c2 / q_safe;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

const BISECT_ABS_TOL: f64 = 1e-11;

/// All eigenvalues in [window.0, window.1), each isolated by bisection on
/// the Sturm count to 1e-11 absolute.
pub fn eigenvalues_in_window(op: &DiscreteOperator, window: (f64, f64)) -> Result<DirectSpectrum> {
    let (g_lo, g_hi) = gershgorin(op);
    if window.0 < g_lo - 1.0 || window.1 > g_hi + 1.0 {
        return Err(Error::Config(format!(
            "window [{}, {}] outside Gershgorin range [{g_lo}, {g_hi}]",
            window.0, window.1
        )));
    }
    let k_lo = sturm_count(&op.diagonal, op.offdiag, window.0);
    let k_hi = sturm_count(&op.diagonal, op.offdiag, window.1);
    let eigenvalues: Vec<f64> = (k_lo..k_hi)
        .map(|k| bisect_index(op, k, window.0, window.1))
        .collect();
    Ok(DirectSpectrum {
        epsilon: op.epsilon,
        phi: op.phi,
        count: eigenvalues.len(),
        eigenvalues_in_window: eigenvalues,
        discretization_floor: 0.0,
    })
}

/// The k-th eigenvalue (0-based, global index) within a bracket known to
/// contain it.
fn bisect_index(op: &DiscreteOperator, k: usize, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > BISECT_ABS_TOL {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if sturm_count(&op.diagonal, op.offdiag, mid) <= k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One matched level across the φ grid.
#[derive(Debug, Clone, Serialize)]
pub struct LevelTrace {
    pub energies: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Cosine-fit amplitude √(b² + c²) at period ε.
    pub amplitude: f64,
    /// RMS residual of the 3-parameter fit (noise floor of the extraction).
    pub fit_rms: f64,
    /// Best-fit period from a scan around ε.
    pub fitted_period: f64,
}

/// φ-sweep output: matched traces plus the periodicity probe at φ = ε.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub epsilon: f64,
    pub phis: Vec<f64>,
    pub traces: Vec<LevelTrace>,
    /// |E_l(0) - E_l(ε)| per trace (grid-shift periodicity check).
    pub periodicity_defect: Vec<f64>,
    pub discretization_floor: f64,
    /// Eigenvalue lists per φ (Richardson-extrapolated), for trace-formula use.
    pub spectra: Vec<Vec<f64>>,
}

/// Solver grid parameters.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    pub half_length: f64,
    pub points_per_period: usize,
    pub boundary_tol: f64,
}

/// Solve on the (m, 2m) pair and extrapolate; eigenvalue sets are matched by
/// global Sturm index so both grids describe the same physical levels.
fn solve_extrapolated(
    v: &PeriodicPotential,
    w: &AnalyticPerturbation,
    epsilon: f64,
    phi: f64,
    grid: GridSpec,
    window: (f64, f64),
) -> Result<Vec<f64>> {
    let coarse = build_operator(v, w, epsilon, phi, grid.half_length, grid.points_per_period, grid.boundary_tol)?;
    let fine = build_operator(v, w, epsilon, phi, grid.half_length, 2 * grid.points_per_period, grid.boundary_tol)?;
    let ec = eigenvalues_in_window(&coarse, window)?;
    let ef = eigenvalues_in_window(&fine, window)?;
    if ec.count != ef.count {
        return Err(Error::Numeric(format!(
            "eigenvalue count changed under refinement: {} (m) vs {} (2m) at phi = {phi}",
            ec.count, ef.count
        )));
    }
    Ok(ef
        .eigenvalues_in_window
        .iter()
        .zip(ec.eigenvalues_in_window.iter())
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect())
}

/// Discretization floor: difference between the (m/2, m) and (m, 2m)
/// Richardson extrapolations at φ = 0, maximized over the window levels.
fn estimate_floor(
    v: &PeriodicPotential,
    w: &AnalyticPerturbation,
    epsilon: f64,
    grid: GridSpec,
    window: (f64, f64),
) -> Result<f64> {
    if grid.points_per_period % 2 != 0 {
        return Err(Error::Config("points-per-period must be even for the floor estimate".into()));
    }
    let half = GridSpec {
        points_per_period: grid.points_per_period / 2,
        ..grid
    };
    let r_low = solve_extrapolated(v, w, epsilon, 0.0, half, window)?;
    let r_hi = solve_extrapolated(v, w, epsilon, 0.0, grid, window)?;
    if r_low.len() != r_hi.len() {
        return Err(Error::Numeric("floor estimate: level count drifted".into()));
    }
    Ok(r_low
        .iter()
        .zip(r_hi.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(1e-15, f64::max))
}

/// Sweep φ over a uniform grid of `phi_count` points in [0, ε), plus the
/// extra probe at φ = ε, matching levels across φ by nearest continuation.
pub fn phi_sweep(
    v: &PeriodicPotential,
    w: &AnalyticPerturbation,
    epsilon: f64,
    window: (f64, f64),
    phi_count: usize,
    grid: GridSpec,
) -> Result<SweepResult> {
    if phi_count < 8 {
        return Err(Error::Config("phi sweep needs at least 8 samples".into()));
    }
    let floor = estimate_floor(v, w, epsilon, grid, window)?;
    let mut phis: Vec<f64> = (0..phi_count)
        .map(|j| epsilon * j as f64 / phi_count as f64)
        .collect();
    phis.push(epsilon); // periodicity probe

    let spectra: Vec<Result<Vec<f64>>> = crate::exec::map_collect(phis.clone(), |phi| {
        solve_extrapolated(v, w, epsilon, phi, grid, window)
    });
    let mut per_phi = Vec::with_capacity(spectra.len());
    for s in spectra {
        per_phi.push(s?);
    }

    // nearest-continuation matching seeded at φ = 0
    let n_levels = per_phi[0].len();
    if n_levels == 0 {
        return Err(Error::Numeric("no eigenvalues in the window".into()));
    }
    let mut traces: Vec<Vec<f64>> = (0..n_levels).map(|i| vec![per_phi[0][i]]).collect();
    let min_spacing = per_phi[0]
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    for snapshot in per_phi.iter().skip(1) {
        for trace in traces.iter_mut() {
            let last = *trace.last().unwrap();
            let nearest = snapshot
                .iter()
                .min_by(|p, q| (*p - last).abs().partial_cmp(&(*q - last).abs()).unwrap())
                .copied()
                .ok_or_else(|| Error::Numeric("empty spectrum mid-sweep".into()))?;
            if (nearest - last).abs() > 0.45 * min_spacing {
                return Err(Error::Numeric(format!(
                    "level matching lost continuity at phi sweep (jump {:.3e} vs spacing {:.3e})",
                    (nearest - last).abs(),
                    min_spacing
                )));
            }
            trace.push(nearest);
        }
    }

    // crossing guard: spacing must dominate the oscillation
    let max_span = traces
        .iter()
        .map(|t| {
            let lo = t.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .fold(0.0, f64::max);
    if min_spacing < 5.0 * max_span {
        return Err(Error::Numeric(format!(
            "levels too close for reliable matching: spacing {min_spacing:.3e} < 5 x oscillation span {max_span:.3e}"
        )));
    }

    let n_fit = phi_count; // fit over the fundamental domain only
    let mut out_traces = Vec::with_capacity(traces.len());
    let mut periodicity = Vec::with_capacity(traces.len());
    for t in &traces {
        let ys = &t[..n_fit];
        let (a, b, c) = cosine_fit_period(&phis[..n_fit], ys, epsilon);
        let amplitude = (b * b + c * c).sqrt();
        let rms = fit_rms(&phis[..n_fit], ys, epsilon, a, b, c);
        let fitted_period = best_period(&phis[..n_fit], ys, epsilon);
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        periodicity.push((t[n_fit] - t[0]).abs());
        out_traces.push(LevelTrace {
            energies: ys.to_vec(),
            mean,
            min,
            max,
            amplitude,
            fit_rms: rms,
            fitted_period,
        });
    }

    Ok(SweepResult {
        epsilon,
        phis: phis[..n_fit].to_vec(),
        traces: out_traces,
        periodicity_defect: periodicity,
        discretization_floor: floor,
        spectra: per_phi[..n_fit].to_vec(),
    })
}

/// Least-squares fit of a + b cos(2πφ/T) + c sin(2πφ/T) at fixed period T.
fn cosine_fit_period(phis: &[f64], ys: &[f64], period: f64) -> (f64, f64, f64) {
    // general 3x3 normal equations (the grid is uniform over one period for
    // T = ε, but the period scan calls this with incommensurate T)
    let om = 2.0 * std::f64::consts::PI / period;
    let mut g = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for (&p, &y) in phis.iter().zip(ys.iter()) {
        let basis = [1.0, (om * p).cos(), (om * p).sin()];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] += basis[i] * basis[j];
            }
            r[i] += basis[i] * y;
        }
    }
    solve3(g, r)
}

fn solve3(mut g: [[f64; 3]; 3], mut r: [f64; 3]) -> (f64, f64, f64) {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| g[i][col].abs().partial_cmp(&g[j][col].abs()).unwrap())
            .unwrap();
        g.swap(col, piv);
        r.swap(col, piv);
        let d = g[col][col];
        for row in 0..3 {
            if row != col && g[row][col] != 0.0 {
                let f = g[row][col] / d;
                for k in col..3 {
                    g[row][k] -= f * g[col][k];
                }
                r[row] -= f * r[col];
            }
        }
    }
    (r[0] / g[0][0], r[1] / g[1][1], r[2] / g[2][2])
}

fn fit_rms(phis: &[f64], ys: &[f64], period: f64, a: f64, b: f64, c: f64) -> f64 {
    let om = 2.0 * std::f64::consts::PI / period;
    let ss: f64 = phis
        .iter()
        .zip(ys.iter())
        .map(|(&p, &y)| {
            let model = a + b * (om * p).cos() + c * (om * p).sin();
            (y - model) * (y - model)
        })
        .sum();
    (ss / ys.len() as f64).sqrt()
}

/// Best-fit oscillation period: golden-section scan of the fit residual
/// over [0.85ε, 1.15ε].
fn best_period(phis: &[f64], ys: &[f64], epsilon: f64) -> f64 {
    let resid = |t: f64| {
        let (a, b, c) = cosine_fit_period(phis, ys, t);
        fit_rms(phis, ys, t, a, b, c)
    };
    let mut lo = 0.85 * epsilon;
    let mut hi = 1.15 * epsilon;
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - gr * (hi - lo);
    let mut x2 = lo + gr * (hi - lo);
    let mut f1 = resid(x1);
    let mut f2 = resid(x2);
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = resid(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = resid(x2);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn free_w() -> AnalyticPerturbation {
        // effectively zero perturbation, far away and tiny
        AnalyticPerturbation::new(
            vec![crate::potentials::LorentzianTerm {
                amplitude: 1e-12,
                center: 0.0,
                width: 1.0,
            }],
            None,
        )
        .unwrap()
    }

    #[test]
    fn operator_entries_small_box() {
        // V = 0, W ~ 0, L = 1, h = 0.5: N = 3, diagonal 8, off-diagonal -4
        let op = build_operator(
            &PeriodicPotential::free(),
            &free_w(),
            0.05,
            0.0,
            1.0,
            2,
            1.0,
        )
        .unwrap();
        assert_eq!(op.n, 3);
        for &d in &op.diagonal {
            assert_abs_diff_eq!(d, 8.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(op.offdiag, -4.0, epsilon = 1e-12);
    }

    #[test]
    fn boundary_tolerance_violation_is_config_error() {
        let w = AnalyticPerturbation::lorentzian_well(9.0).unwrap();
        let r = build_operator(&PeriodicPotential::free(), &w, 0.05, 0.0, 10.0, 8, 1e-6);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn dirichlet_box_eigenvalues() {
        // V = 0, W ~ 0: eigenvalues approximate (n pi / 2L)^2
        let op = build_operator(&PeriodicPotential::free(), &free_w(), 0.05, 0.0, 4.0, 64, 1.0).unwrap();
        let spec = eigenvalues_in_window(&op, (0.0, 2.5)).unwrap();
        assert!(spec.count >= 3);
        for (i, &e) in spec.eigenvalues_in_window.iter().take(3).enumerate() {
            let exact = (((i + 1) as f64) * PI / 8.0).powi(2);
            assert!((e - exact).abs() < 3e-3, "box level {i}: {e} vs {exact}");
        }
    }

    #[test]
    fn sturm_full_range_counts_all() {
        let op = build_operator(&PeriodicPotential::cosine(1, 2.0), &free_w(), 0.05, 0.0, 3.0, 16, 1.0).unwrap();
        let (lo, hi) = gershgorin(&op);
        assert_eq!(sturm_count(&op.diagonal, op.offdiag, lo - 1.0), 0);
        assert_eq!(sturm_count(&op.diagonal, op.offdiag, hi + 1.0), op.n);
    }

    #[test]
    fn diagonal_shift_moves_spectrum_exactly() {
        let mut op = build_operator(&PeriodicPotential::cosine(1, 2.0), &free_w(), 0.05, 0.0, 3.0, 20, 1.0).unwrap();
        let before = eigenvalues_in_window(&op, (0.0, 9.0)).unwrap();
        let shift = 0.731;
        for d in op.diagonal.iter_mut() {
            *d += shift;
        }
        let after = eigenvalues_in_window(&op, (shift, 9.0 + shift)).unwrap();
        assert_eq!(before.count, after.count);
        for (a, b) in before
            .eigenvalues_in_window
            .iter()
            .zip(after.eigenvalues_in_window.iter())
        {
            assert_abs_diff_eq!(a + shift, *b, epsilon = 5e-11);
        }
    }

    #[test]
    fn parity_symmetric_operator_matches_reflection() {
        let w = AnalyticPerturbation::lorentzian_well(2.0).unwrap();
        let op = build_operator(&PeriodicPotential::cosine(1, 2.0), &w, 0.1, 0.0, 40.0, 20, 0.15).unwrap();
        // symmetric W at phi = 0 on a symmetric grid: diagonal is palindromic
        for j in 0..op.n {
            assert_abs_diff_eq!(op.diagonal[j], op.diagonal[op.n - 1 - j], epsilon = 1e-9);
        }
    }

    #[test]
    fn cosine_fit_recovers_known_signal() {
        let eps = 0.04;
        let phis: Vec<f64> = (0..16).map(|j| eps * j as f64 / 16.0).collect();
        let ys: Vec<f64> = phis
            .iter()
            .map(|&p| 3.0 + 2e-4 * (2.0 * PI * p / eps).cos() - 7e-5 * (2.0 * PI * p / eps).sin())
            .collect();
        let (a, b, c) = cosine_fit_period(&phis, &ys, eps);
        assert_abs_diff_eq!(a, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 2e-4, epsilon = 1e-12);
        assert_abs_diff_eq!(c, -7e-5, epsilon = 1e-12);
        let t = best_period(&phis, &ys, eps);
        assert_abs_diff_eq!(t, eps, epsilon = 0.01 * eps);
    }
}
