//! Bohr-Sommerfeld quantization in the gap: energy levels E^(l) solving
//! Φ(E) = ε(lπ + π/2), their exponentially small φ-oscillation amplitudes
//! ε·t/|Φ'|, and the harmonic edge asymptotic near the collapsed cross.

use serde::Serialize;

use crate::actions;
use crate::error::{Error, Result};
use crate::geometry::{build_cross, AdiabaticModel, CrossSetup};

/// One predicted level.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Level {
    pub l: i64,
    pub energy: f64,
    pub phi_at: f64,
    pub action_at: f64,
    pub phi_prime_at: f64,
    /// Envelope amplitude ε·t/|Φ'| of the φ-oscillation.
    pub amplitude: f64,
    /// t underflowed to zero.
    pub amplitude_underflow: bool,
    /// Amplitude below the direct solver's discretization floor.
    pub sub_resolution: bool,
    /// Within 2A + 10·floor of ∂J; excluded from acceptance comparisons.
    pub boundary_unreliable: bool,
}

/// All levels of one ε in J.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralPrediction {
    pub epsilon: f64,
    pub levels: Vec<Level>,
    pub l_range: (i64, i64),
    pub diagnostics: Vec<String>,
}

const ROOT_TOL: f64 = 1e-12;

/// Solve the quantization rule on J for every admissible integer l.
///
/// `floor` is the direct solver's discretization floor (0 when unknown);
/// it feeds the sub-resolution and boundary flags. With `with_amplitudes`
/// false only Φ-side quantities are computed (no σ trace), which is all the
/// edge asymptotic needs.
pub fn bohr_sommerfeld_levels(
    model: &AdiabaticModel,
    setup: &CrossSetup,
    j: (f64, f64),
    epsilon: f64,
    floor: f64,
    with_amplitudes: bool,
) -> Result<SpectralPrediction> {
    if epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon = {epsilon} must be positive")));
    }
    let (a, b) = j;
    let phi_a = actions::phase_phi_at(model, setup, a)?;
    let phi_b = actions::phase_phi_at(model, setup, b)?;
    let increasing = phi_b > phi_a;
    let (q_lo, q_hi) = if increasing { (phi_a, phi_b) } else { (phi_b, phi_a) };

    let mut diagnostics = Vec::new();
    let l_min = ((q_lo / epsilon - 0.5 * std::f64::consts::PI) / std::f64::consts::PI).ceil() as i64;
    let l_max = ((q_hi / epsilon - 0.5 * std::f64::consts::PI) / std::f64::consts::PI).floor() as i64;
    let mut levels = Vec::new();
    if l_max < l_min.max(0) {
        diagnostics.push(format!(
            "no quantization values ε(lπ + π/2) inside Φ(J) = [{q_lo:.6}, {q_hi:.6}] at ε = {epsilon}"
        ));
        return Ok(SpectralPrediction {
            epsilon,
            levels,
            l_range: (0, -1),
            diagnostics,
        });
    }
    let l_min = l_min.max(0);

    let solved: Vec<Result<Level>> = crate::exec::map_collect(
        (l_min..=l_max).collect::<Vec<_>>(),
        |l| solve_level(model, setup, j, epsilon, l, increasing, floor, with_amplitudes),
    );
    for r in solved {
        match r {
            Ok(level) => levels.push(level),
            Err(Error::Numeric(msg)) if msg.starts_with("level at boundary") => {
                diagnostics.push(msg);
            }
            Err(e) => return Err(e),
        }
    }
    levels.sort_by(|p, q| p.energy.partial_cmp(&q.energy).unwrap());
    Ok(SpectralPrediction {
        epsilon,
        levels,
        l_range: (l_min, l_max),
        diagnostics,
    })
}

#[allow(clippy::too_many_arguments)]
fn solve_level(
    model: &AdiabaticModel,
    setup: &CrossSetup,
    j: (f64, f64),
    epsilon: f64,
    l: i64,
    increasing: bool,
    floor: f64,
    with_amplitudes: bool,
) -> Result<Level> {
    let (a, b) = j;
    let q = epsilon * (l as f64 * std::f64::consts::PI + 0.5 * std::f64::consts::PI);
    let g = |e: f64| -> Result<f64> {
        let p = actions::phase_phi_at(model, setup, e)?;
        Ok(if increasing { p - q } else { q - p })
    };
    let mut lo = a;
    let mut hi = b;
    let mut g_lo = g(lo)?;
    let g_hi = g(hi)?;
    if g_lo > 0.0 || g_hi < 0.0 {
        return Err(Error::Numeric(format!(
            "level at boundary: l = {l} has quantization value {q:.12} outside Φ(J) within root tolerance; excluded"
        )));
    }
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < ROOT_TOL * (1.0 + mid.abs()) {
            break;
        }
        let g_mid = g(mid)?;
        if g_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if g_lo * g_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            g_lo = g_mid;
        }
    }
    let energy = 0.5 * (lo + hi);
    let phi_at = actions::phase_phi_at(model, setup, energy)?;

    let (action_at, phi_prime_at) = if with_amplitudes {
        let geom = build_cross(model, setup, energy, true)?;
        (
            actions::action_s(model, &geom)?,
            actions::phase_derivative(model, &geom)?,
        )
    } else {
        let geom = build_cross(model, setup, energy, false)?;
        (f64::NAN, actions::phase_derivative(model, &geom)?)
    };
    let (amplitude, underflow) = if with_amplitudes {
        let (t, under) = actions::tunneling_coefficient(action_at, epsilon);
        (epsilon * t / phi_prime_at.abs(), under)
    } else {
        (f64::NAN, false)
    };
    let boundary_dist = (energy - a).abs().min((b - energy).abs());
    let guard = if amplitude.is_finite() { 2.0 * amplitude } else { 0.0 } + 10.0 * floor;
    Ok(Level {
        l,
        energy,
        phi_at,
        action_at,
        phi_prime_at,
        amplitude,
        amplitude_underflow: underflow,
        sub_resolution: amplitude.is_finite() && amplitude < floor,
        boundary_unreliable: boundary_dist < guard,
    })
}

/// Envelope amplitude ε·t(E_l, ε)/|Φ'(E_l)| for an already-solved level.
pub fn oscillation_amplitude(level: &Level, epsilon: f64) -> f64 {
    let (t, _) = actions::tunneling_coefficient(level.action_at, epsilon);
    epsilon * t / level.phi_prime_at.abs()
}

/// First-order harmonic levels near the collapsed cross:
/// E^(l) = E_r + W(x*) + sign(E_i - E_r)·√(|W''(x*)|/2)·(2l+1)·ε/d_i.
pub fn edge_asymptotic_levels(
    setup: &CrossSetup,
    w_at_extremum: f64,
    d_i: f64,
    epsilon: f64,
    l_list: &[i64],
) -> Vec<f64> {
    let sign = (setup.e_i - setup.e_r).signum();
    let omega = (setup.extremum.second_derivative.abs() / 2.0).sqrt();
    l_list
        .iter()
        .map(|&l| {
            setup.e_r + w_at_extremum + sign * omega * (2 * l + 1) as f64 * epsilon / d_i.abs()
        })
        .collect()
}

/// Spacing-bound constant c = 1.5·π·max(1/|Φ'|) over J; consecutive levels
/// must satisfy ε/c < ΔE < c·ε.
pub fn spacing_bound(model: &AdiabaticModel, setup: &CrossSetup, j: (f64, f64)) -> Result<f64> {
    let mut inv_min = f64::INFINITY;
    for t in 0..=20 {
        let e = j.0 + (j.1 - j.0) * t as f64 / 20.0;
        let geom = build_cross(model, setup, e, false)?;
        let pp = actions::phase_derivative(model, &geom)?.abs();
        inv_min = inv_min.min(pp);
    }
    Ok(1.5 * std::f64::consts::PI / inv_min)
}
