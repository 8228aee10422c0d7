//! Phase and action integrals of the complex momentum: Φ, S, Φ_d, Φ' and
//! the tunneling coefficient t = exp(-S/ε).
//!
//! On the cross the action branch satisfies κ̃ - tag = θ_r, a real in-band
//! phase vanishing at E_r, and κ̃ - κ̃(φ_i) = -θ_i with θ_i = π - θ_r
//! vanishing at E_i. Everything below is assembled from two real-segment
//! integrals and one σ_+ integral pulled back to the energy variable
//! (Jacobian -1/W'); the σ_- contributions enter by Schwarz reflection.
//! Square-root endpoint behavior is removed by the substitution u = edge ∓ s²
//! before quadrature.

use std::cell::Cell;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{solve_sigma_point, AdiabaticModel, CrossGeometry};
use crate::quadrature::integrate_refining;

/// Quadrature stability target for Φ, S, Φ_d.
pub const ACTION_QUAD_TARGET: f64 = 1e-9;
/// Quadrature stability target for Φ'.
pub const PHI_PRIME_QUAD_TARGET: f64 = 1e-8;

/// The four coefficients at one energy, with the numerical health indicator
/// `residual_im` (largest imaginary residue discarded when realizing the
/// paper-real quantities).
#[derive(Debug, Clone, Copy)]
pub struct ActionValues {
    pub energy: f64,
    pub phi: f64,
    pub action: f64,
    pub phi_d: f64,
    pub phi_prime: f64,
    pub residual_im: f64,
}

/// Φ(E): integral of (κ̃ - tag) over the real segment [φ_r^-, φ_r^+].
pub fn phase_phi(model: &AdiabaticModel, geom: &CrossGeometry) -> Result<f64> {
    let (a, b) = real_segment_integrals(model, geom, ACTION_QUAD_TARGET)?;
    Ok((a + b).re)
}

/// Φ'(E) = ∫ k'(E - W(u)) du over the real segment; the endpoint
/// substitution regularizes the inverse-square-root singularities.
pub fn phase_derivative(model: &AdiabaticModel, geom: &CrossGeometry) -> Result<f64> {
    if geom.phi_r_plus == geom.phi_r_minus {
        return Err(Error::Geometry(
            "Phi' diverges at the collapsed cross".into(),
        ));
    }
    let setup = geom.setup;
    let x0 = setup.extremum.position;
    let integrand = |u: f64| -> Complex64 {
        let e = geom.energy - model.w.eval_real(u);
        Complex64::new(setup.theta_r_prime(&model.bands, e).unwrap_or(f64::NAN), 0.0)
    };
    let left = integrate_substituted(&integrand, geom.phi_r_minus, x0, Endpoint::Left, PHI_PRIME_QUAD_TARGET)?;
    let right = integrate_substituted(&integrand, x0, geom.phi_r_plus, Endpoint::Right, PHI_PRIME_QUAD_TARGET)?;
    let total = (left + right).re;
    if !total.is_finite() {
        return Err(Error::Numeric("Phi' integrand failed".into()));
    }
    Ok(total)
}

/// S(E) = 2·Im ∫_{σ_+} θ_i dz > 0, the tunneling action.
pub fn action_s(model: &AdiabaticModel, geom: &CrossGeometry) -> Result<f64> {
    let (i_plus, _) = sigma_integral(model, geom, ACTION_QUAD_TARGET)?;
    Ok(2.0 * i_plus.im)
}

/// Φ_d(E): the four-integral combination; the σ_- integrals are obtained
/// from σ_+ by Schwarz reflection.
pub fn phase_phi_d(model: &AdiabaticModel, geom: &CrossGeometry) -> Result<f64> {
    let (a, b) = real_segment_integrals(model, geom, ACTION_QUAD_TARGET)?;
    let (i_plus, _) = sigma_integral(model, geom, ACTION_QUAD_TARGET)?;
    Ok((a - b).re - 2.0 * i_plus.re)
}

/// t(E, ε) = exp(-S/ε); underflow to zero is permitted and flagged.
pub fn tunneling_coefficient(action: f64, epsilon: f64) -> (f64, bool) {
    let t = (-action / epsilon).exp();
    (t, t == 0.0 || t.is_subnormal())
}

/// Compute all four coefficients at once, sharing the quadratures.
pub fn compute(model: &AdiabaticModel, geom: &CrossGeometry) -> Result<ActionValues> {
    let (a, b) = real_segment_integrals(model, geom, ACTION_QUAD_TARGET)?;
    let (i_plus, sigma_resid) = sigma_integral(model, geom, ACTION_QUAD_TARGET)?;
    let phi_prime = phase_derivative(model, geom)?;
    let phi = (a + b).re;
    let action = 2.0 * i_plus.im;
    let phi_d = (a - b).re - 2.0 * i_plus.re;
    let residual_im = (a + b).im.abs().max((a - b).im.abs()).max(sigma_resid);
    Ok(ActionValues {
        energy: geom.energy,
        phi,
        action,
        phi_d,
        phi_prime,
        residual_im,
    })
}

/// Fast path for root solving: Φ only, no σ required.
pub fn phase_phi_at(
    model: &AdiabaticModel,
    setup: &crate::geometry::CrossSetup,
    energy: f64,
) -> Result<f64> {
    let geom = crate::geometry::build_cross(model, setup, energy, false)?;
    phase_phi(model, &geom)
}

enum Endpoint {
    Left,
    Right,
}

/// ∫_a^b f(u) du where f has square-root behavior at the `which` endpoint:
/// substitute u = a + s² (left) or u = b - s² (right).
fn integrate_substituted(
    f: &dyn Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    which: Endpoint,
    target: f64,
) -> Result<Complex64> {
    if b <= a {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let s_max = (b - a).sqrt();
    let g: Box<dyn Fn(f64) -> Complex64> = match which {
        Endpoint::Left => Box::new(move |s: f64| f(a + s * s) * (2.0 * s)),
        Endpoint::Right => Box::new(move |s: f64| f(b - s * s) * (2.0 * s)),
    };
    integrate_refining(&g, 0.0, s_max, target)
}

/// The two halves of the real-segment integral of (κ̃ - tag) = θ_r, split at
/// the extremum: A over [φ_r^-, x*], B over [x*, φ_r^+] (both complex; their
/// imaginary parts are numerical residue).
fn real_segment_integrals(
    model: &AdiabaticModel,
    geom: &CrossGeometry,
    target: f64,
) -> Result<(Complex64, Complex64)> {
    let zero = Complex64::new(0.0, 0.0);
    if geom.phi_r_plus == geom.phi_r_minus {
        return Ok((zero, zero));
    }
    let setup = geom.setup;
    let x0 = setup.extremum.position;
    let f = |u: f64| -> Complex64 {
        let e = Complex64::new(geom.energy - model.w.eval_real(u), 0.0);
        setup
            .theta_r_complex(&model.bands, e)
            .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    };
    let a = integrate_substituted(&f, geom.phi_r_minus, x0, Endpoint::Left, target)?;
    let b = integrate_substituted(&f, x0, geom.phi_r_plus, Endpoint::Right, target)?;
    if !a.re.is_finite() || !b.re.is_finite() {
        return Err(Error::Numeric("theta_r evaluation failed on the real segment".into()));
    }
    Ok((a, b))
}

/// I_+ = ∫_{σ_+} θ_i dz pulled back to the energy variable:
/// ∫_{e0}^{E_i} θ_i(e)·(-1/W'(z(e))) de, endpoints desingularized by the
/// s² substitution (σ endpoints: extremum degeneracy at e0, square-root
/// branch point at E_i). Returns the integral and the worst σ-node
/// residual |Im(E - W(z))| encountered.
fn sigma_integral(
    model: &AdiabaticModel,
    geom: &CrossGeometry,
    target: f64,
) -> Result<(Complex64, f64)> {
    if geom.sigma_plus.len() < 2 {
        return Err(Error::Geometry(
            "sigma was not traced for this geometry (built with with_sigma = false)".into(),
        ));
    }
    let setup = geom.setup;
    let e0 = geom.e_center;
    let e_i = setup.e_i;
    let span = e_i - e0;
    if span == 0.0 {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let sign = span.signum();
    let worst = Cell::new(0.0f64);

    let eval = |e: f64| -> Complex64 {
        let z = match sigma_point(model, geom, e) {
            Ok(z) => z,
            Err(_) => return Complex64::new(f64::NAN, f64::NAN),
        };
        let resid = (Complex64::new(geom.energy - e, 0.0) - model.w.eval_unchecked(z)).im.abs();
        if resid > worst.get() {
            worst.set(resid);
        }
        let theta_i = Complex64::new(std::f64::consts::PI, 0.0)
            - setup
                .theta_r_complex(&model.bands, Complex64::new(e, 0.0))
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        theta_i * (-1.0 / model.w.eval_prime_unchecked(z))
    };

    let s_half = (0.5 * span.abs()).sqrt();
    // near e0: e = e0 + sign·s²
    let f_a = |s: f64| eval(e0 + sign * s * s) * (2.0 * s * sign);
    // near E_i: e = E_i - sign·s²
    let f_b = |s: f64| eval(e_i - sign * s * s) * (2.0 * s * sign);
    let part_a = integrate_refining(&f_a, 0.0, s_half, target)?;
    let part_b = integrate_refining(&f_b, 0.0, s_half, target)?;
    let total = part_a + part_b;
    if !total.re.is_finite() || !total.im.is_finite() {
        return Err(Error::Numeric("sigma integrand failed".into()));
    }
    Ok((total, worst.get()))
}

/// Point of σ_+ at in-band energy e, seeded from the nearest traced node.
fn sigma_point(model: &AdiabaticModel, geom: &CrossGeometry, e: f64) -> Result<Complex64> {
    let nodes = &geom.sigma_plus;
    let seed = nodes
        .iter()
        .min_by(|p, q| {
            (p.e - e)
                .abs()
                .partial_cmp(&(q.e - e).abs())
                .unwrap()
        })
        .map(|n| n.point())
        .ok_or_else(|| Error::Geometry("empty sigma trace".into()))?;
    // keep clear of the degenerate extremum where W' -> 0
    if (e - geom.e_center).abs() < 1e-14 {
        return Ok(Complex64::new(geom.setup.extremum.position, 0.0));
    }
    let seed = if seed.im == 0.0 {
        let d2 = geom.setup.extremum.second_derivative;
        let dz = (2.0 * (e - geom.e_center) / d2).sqrt().max(1e-9);
        Complex64::new(geom.setup.extremum.position, dz)
    } else {
        seed
    };
    solve_sigma_point(model, geom.energy, e, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cross, identify_cross};
    use crate::hill::BandStructure;
    use crate::potentials::{AnalyticPerturbation, PeriodicPotential};
    use approx::assert_abs_diff_eq;

    fn default_model() -> AdiabaticModel {
        let bands = BandStructure::compute(&PeriodicPotential::cosine(1, 2.0), 45.0).unwrap();
        let w = AnalyticPerturbation::lorentzian_well(9.0).unwrap();
        AdiabaticModel::new(bands, w, Some(0.42)).unwrap()
    }

    #[test]
    fn collapsed_cross_has_zero_phase() {
        let model = default_model();
        let setup = identify_cross(&model, (-1.4, -0.7)).unwrap();
        // E with E - W(0) = E_r exactly
        let e = setup.e_r + model.w.eval_real(0.0);
        let geom = build_cross(&model, &setup, e, false).unwrap();
        assert_eq!(geom.phi_r_minus, geom.phi_r_plus);
        assert_eq!(phase_phi(&model, &geom).unwrap(), 0.0);
    }

    #[test]
    fn tunneling_coefficient_laws() {
        let (t0, under0) = tunneling_coefficient(0.0, 0.05);
        assert_eq!(t0, 1.0);
        assert!(!under0);
        let (t, _) = tunneling_coefficient(1.3, 0.05);
        assert_abs_diff_eq!(t.ln(), -26.0, epsilon = 1e-12);
        let (t1, _) = tunneling_coefficient(0.4, 0.05);
        let (t2, _) = tunneling_coefficient(0.4, 0.025);
        assert_abs_diff_eq!(t2, t1 * t1, epsilon = 1e-15 * t2.abs().max(1e-300));
        let (tz, under) = tunneling_coefficient(50.0, 0.02);
        assert_eq!(tz, 0.0);
        assert!(under);
    }
}
