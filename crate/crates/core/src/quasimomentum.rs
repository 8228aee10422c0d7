//! Bloch quasi-momentum k(E) with explicit branch bookkeeping.
//!
//! k is stored as (region, offset): in band n the full k_0 = (n-1)π + θ_n
//! with θ_n ∈ [0, π]; in gap l, k = lπ + i·sign·arcosh(|Δ|/2), so Re k = lπ
//! is exact by representation rather than by floating arithmetic. cos k =
//! Δ/2 holds in every region.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hill::{BandStructure, Region};

/// Branch selection: which gap sheet (sign of Im k off the real axis).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuasiMomentumBranch {
    /// Sign of Im k in gaps: +1 or -1.
    pub orientation: i8,
}

impl Default for QuasiMomentumBranch {
    fn default() -> Self {
        QuasiMomentumBranch { orientation: 1 }
    }
}

/// Quasi-momentum value in branch-exact form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuasiMomentum {
    /// k = (band - 1)π + theta, theta ∈ [0, π].
    Band { band: usize, theta: f64 },
    /// k = gap·π + i·im (im carries the orientation sign).
    Gap { gap: usize, im: f64 },
}

impl QuasiMomentum {
    pub fn re(&self) -> f64 {
        match self {
            QuasiMomentum::Band { band, theta } => (*band as f64 - 1.0) * std::f64::consts::PI + theta,
            QuasiMomentum::Gap { gap, .. } => *gap as f64 * std::f64::consts::PI,
        }
    }

    pub fn im(&self) -> f64 {
        match self {
            QuasiMomentum::Band { .. } => 0.0,
            QuasiMomentum::Gap { im, .. } => *im,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re(), self.im())
    }
}

/// k(E) for real E in bands, gaps or at edges.
pub fn quasimomentum(
    bs: &BandStructure,
    e: f64,
    branch: QuasiMomentumBranch,
) -> Result<QuasiMomentum> {
    match bs.locate(e)? {
        Region::Band(n) => Ok(QuasiMomentum::Band {
            band: n,
            theta: bs.theta_in_band(n, e)?,
        }),
        Region::Gap(l) => {
            let d = bs.discriminant_real(e)?;
            let w = (gap_parity(l) * d / 2.0).max(1.0);
            Ok(QuasiMomentum::Gap {
                gap: l,
                im: branch.orientation as f64 * w.acosh(),
            })
        }
        Region::Edge(i) => {
            // Im k = 0, Re k = lπ for the adjacent gap index l
            let gap = i.div_ceil(2);
            Ok(QuasiMomentum::Gap { gap, im: 0.0 })
        }
    }
}

/// Analytic continuation of k to complex E, on the branch k_l cut outside
/// the gap containing Re E (or the k_0-style band branch when Re E is in a
/// band). Satisfies cos k = Δ/2 identically.
pub fn quasimomentum_complex(
    bs: &BandStructure,
    e: Complex64,
    branch: QuasiMomentumBranch,
) -> Result<Complex64> {
    let pi = std::f64::consts::PI;
    match bs.locate(e.re)? {
        Region::Band(n) => {
            let theta = bs.theta_in_band_complex(n, e)?;
            Ok(Complex64::new((n as f64 - 1.0) * pi, 0.0) + theta)
        }
        region => {
            let l = match region {
                Region::Edge(i) => i.div_ceil(2),
                Region::Gap(l) => l,
                Region::Band(_) => unreachable!(),
            };
            let d = bs.discriminant(e)?;
            let w = d * (0.5 * gap_parity(l));
            Ok(Complex64::new(l as f64 * pi, 0.0)
                + Complex64::new(0.0, branch.orientation as f64) * w.acosh())
        }
    }
}

/// Tolerance below which k'(E) is refused near an edge (inverse square-root
/// singularity). Action integrals that must reach the edges use the
/// substitution quadrature in `actions` instead.
pub const EDGE_TOL_KPRIME: f64 = 1e-7;

/// k'(E) = -Δ'/(2 sin k): real and positive in band interiors, purely
/// imaginary in gaps. Δ' comes from the variational system.
pub fn quasimomentum_derivative(
    bs: &BandStructure,
    e: f64,
    branch: QuasiMomentumBranch,
) -> Result<Complex64> {
    if let Some((_, edge)) = nearest_edge(bs, e) {
        if (e - edge).abs() < EDGE_TOL_KPRIME {
            return Err(Error::EdgeSingularity {
                energy: e,
                edge,
                tolerance: EDGE_TOL_KPRIME,
            });
        }
    }
    match bs.locate(e)? {
        Region::Band(n) => Ok(Complex64::new(bs.theta_prime_in_band(n, e)?, 0.0)),
        Region::Gap(l) => {
            let (d, dp) = bs.discriminant_with_derivative(e)?;
            let w = (gap_parity(l) * d / 2.0).max(1.0);
            let sinh = (w * w - 1.0).sqrt().max(1e-300);
            let im_prime = gap_parity(l) * dp / (2.0 * sinh);
            Ok(Complex64::new(0.0, branch.orientation as f64 * im_prime))
        }
        Region::Edge(_) => unreachable!("edge tolerance checked above"),
    }
}

fn nearest_edge(bs: &BandStructure, e: f64) -> Option<(usize, f64)> {
    bs.edges()
        .iter()
        .enumerate()
        .map(|(i, &x)| (i, x))
        .min_by(|a, b| (a.1 - e).abs().partial_cmp(&(b.1 - e).abs()).unwrap())
}

/// Side from which a band edge is approached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
}

/// Square-root slope d_p(E_n) of the quasi-momentum at edge n, approached
/// from `side`: the limit of (k-distance from the edge value, in the
/// region's natural real coordinate) / s at E_n ± s², accelerated by
/// Richardson extrapolation in s². The k-distance expansion in s has only
/// odd powers, so the extrapolation converges at order s² per level.
pub fn edge_slope(bs: &BandStructure, edge_index: usize, side: Side) -> Result<f64> {
    let edges = bs.edges();
    if edge_index >= edges.len() {
        return Err(Error::Config(format!("edge index {edge_index} out of range")));
    }
    let edge = edges[edge_index];

    // width of the adjacent region limits the largest probe offset
    let neighbor_gap = match side {
        Side::Above => edges.get(edge_index + 1).map(|&x| x - edge),
        Side::Below => edge_index.checked_sub(1).map(|i| edge - edges[i]),
    }
    .unwrap_or(f64::INFINITY)
    .max(1e-6);
    let s0 = (0.45 * neighbor_gap.sqrt()).min(0.35);

    let probe = |s: f64| -> Result<f64> {
        let e = match side {
            Side::Above => edge + s * s,
            Side::Below => edge - s * s,
        };
        let lambda = match bs.locate(e)? {
            Region::Band(n) => {
                let theta = bs.theta_in_band(n, e)?;
                let (lo, hi) = bs.band(n);
                // distance of θ from its value at this edge (0 at the lower
                // edge, π at the upper edge)
                if (edge - lo).abs() < (edge - hi).abs() {
                    theta
                } else {
                    std::f64::consts::PI - theta
                }
            }
            Region::Gap(l) => {
                let d = bs.discriminant_real(e)?;
                (gap_parity(l) * d / 2.0).max(1.0).acosh()
            }
            Region::Edge(_) => 0.0,
        };
        Ok(lambda / s)
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut col0 = Vec::new();
    for j in 0..6 {
        col0.push(probe(s0 / 2f64.powi(j))?);
    }
    rows.push(col0);
    for k in 1..6 {
        let prev = &rows[k - 1];
        let f = 4f64.powi(k as i32);
        let next: Vec<f64> = (0..prev.len() - 1)
            .map(|i| (f * prev[i + 1] - prev[i]) / (f - 1.0))
            .collect();
        rows.push(next);
    }
    let last = rows[5][0];
    let prev = rows[4][0];
    if (last - prev).abs() > 1e-6 * (1.0 + last.abs()) {
        return Err(Error::Numeric(format!(
            "edge slope extrapolation at edge {edge_index} did not converge: last two estimates {prev} vs {last} (s0 = {s0})"
        )));
    }
    Ok(last)
}

fn gap_parity(l: usize) -> f64 {
    if l % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PeriodicPotential;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn free_bs() -> BandStructure {
        BandStructure::compute(&PeriodicPotential::free(), 110.0).unwrap()
    }

    fn cos_bs() -> BandStructure {
        BandStructure::compute(&PeriodicPotential::cosine(1, 2.0), 45.0).unwrap()
    }

    #[test]
    fn free_particle_k_is_sqrt_e() {
        let bs = free_bs();
        let k = quasimomentum(&bs, 4.0, QuasiMomentumBranch::default()).unwrap();
        assert_abs_diff_eq!(k.re(), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(k.im(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn free_particle_k_prime() {
        let bs = free_bs();
        let kp = quasimomentum_derivative(&bs, 4.0, QuasiMomentumBranch::default()).unwrap();
        assert_abs_diff_eq!(kp.re, 0.25, epsilon = 1e-8);
        assert_abs_diff_eq!(kp.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn k_at_edges_has_exact_real_part() {
        let bs = cos_bs();
        for (i, &e) in bs.edges().iter().take(4).enumerate() {
            let k = quasimomentum(&bs, e, QuasiMomentumBranch::default()).unwrap();
            let l = i.div_ceil(2);
            assert_eq!(k.re(), l as f64 * PI, "edge {i}");
            assert_eq!(k.im(), 0.0);
        }
    }

    #[test]
    fn open_gap_identity() {
        let bs = cos_bs();
        // 2 cos(Re k) cosh(Im k) = Δ in the open gap
        let gap = bs.gaps()[1];
        for t in [0.1, 0.35, 0.5, 0.82] {
            let e = gap.lo + t * (gap.hi - gap.lo);
            let k = quasimomentum(&bs, e, QuasiMomentumBranch::default()).unwrap();
            assert_eq!(k.re(), PI);
            assert!(k.im() > 0.0);
            let d = bs.discriminant_real(e).unwrap();
            assert_abs_diff_eq!(2.0 * k.re().cos() * k.im().cosh(), d, epsilon = 1e-9);
        }
    }

    #[test]
    fn cos_k_equals_half_discriminant_across_regions() {
        let bs = cos_bs();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let lo = bs.edges()[0] - 2.0;
        let hi = *bs.edges().last().unwrap() - 1e-6;
        let mut checked = 0;
        while checked < 200 {
            let e = rng.gen_range(lo..hi);
            let k = quasimomentum(&bs, e, QuasiMomentumBranch::default())
                .unwrap()
                .to_complex();
            let d = bs.discriminant_real(e).unwrap();
            assert!(
                (k.cos().re - d / 2.0).abs() <= 1e-9 && k.cos().im.abs() <= 1e-9,
                "cos k mismatch at E = {e}"
            );
            checked += 1;
        }
    }

    #[test]
    fn k_prime_positive_in_bands() {
        let bs = cos_bs();
        for n in [1usize, 2] {
            let (lo, hi) = bs.band(n);
            for j in 1..30 {
                let e = lo + (hi - lo) * j as f64 / 30.0;
                if (e - lo).abs() < 1e-6 || (e - hi).abs() < 1e-6 {
                    continue;
                }
                let kp = quasimomentum_derivative(&bs, e, QuasiMomentumBranch::default()).unwrap();
                assert!(kp.re > 0.0, "k' = {kp} at E = {e} in band {n}");
            }
        }
    }

    #[test]
    fn k_prime_matches_finite_difference() {
        let bs = cos_bs();
        let branch = QuasiMomentumBranch::default();
        for e in [2.0, 5.0, 8.0, 9.9, 15.0, 30.0] {
            let kp = quasimomentum_derivative(&bs, e, branch).unwrap();
            let h = 1e-6;
            let kplus = quasimomentum(&bs, e + h, branch).unwrap().to_complex();
            let kminus = quasimomentum(&bs, e - h, branch).unwrap().to_complex();
            let fd = (kplus - kminus) / (2.0 * h);
            assert!(
                (kp - fd).norm() <= 1e-5 * kp.norm().max(1.0),
                "E = {e}: k' = {kp} vs fd {fd}"
            );
        }
    }

    #[test]
    fn k_prime_refused_at_edges() {
        let bs = cos_bs();
        let e = bs.edges()[1] + 1e-9;
        assert!(matches!(
            quasimomentum_derivative(&bs, e, QuasiMomentumBranch::default()),
            Err(Error::EdgeSingularity { .. })
        ));
    }

    #[test]
    fn continuity_across_band_gap_junctions() {
        let bs = cos_bs();
        let branch = QuasiMomentumBranch::default();
        for i in 0..4 {
            let edge = bs.edges()[i];
            let below = quasimomentum(&bs, edge - 1e-7, branch).unwrap().to_complex();
            let above = quasimomentum(&bs, edge + 1e-7, branch).unwrap().to_complex();
            assert!(
                (below - above).norm() <= 1e-3,
                "junction {i}: {below} vs {above}"
            );
            let at = quasimomentum(&bs, edge, branch).unwrap().to_complex();
            assert!((below - at).norm() <= 1e-3 && (above - at).norm() <= 1e-3);
        }
    }

    #[test]
    fn gap_branch_symmetry_kl() {
        // k_l(E+iδ) + conj(k_l(E-iδ)) -> 2πl for real E in gap l
        let bs = cos_bs();
        let branch = QuasiMomentumBranch::default();
        let delta = 1e-6;
        for (l, e) in [(0usize, -1.3), (1usize, 9.8)] {
            let kp = quasimomentum_complex(&bs, Complex64::new(e, delta), branch).unwrap();
            let km = quasimomentum_complex(&bs, Complex64::new(e, -delta), branch).unwrap();
            let s = kp + km.conj();
            assert!(
                (s.re - 2.0 * PI * l as f64).abs() <= 1e-4 && s.im.abs() <= 1e-4,
                "gap {l}: sum = {s}"
            );
        }
    }

    #[test]
    fn edge_slope_free_particle_is_one() {
        let bs = free_bs();
        // k = sqrt(E) at E = 0: d = 1
        let d = edge_slope(&bs, 0, Side::Above).unwrap();
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn edge_slope_convergence_order() {
        let bs = cos_bs();
        let d = edge_slope(&bs, 2, Side::Above).unwrap();
        let edge = bs.edges()[2];
        // |k(E_n + s^2) - k(E_n) - d s| = O(s^3)
        let mut prev_ratio = None;
        for &s in &[0.2, 0.1, 0.05] {
            let theta = bs.theta_in_band(2, edge + s * s).unwrap();
            let resid = (theta - d * s).abs();
            let ratio = resid / (s * s * s);
            if let Some(p) = prev_ratio {
                let p: f64 = p;
                assert!(
                    ratio < 4.0 * p.max(1e-3),
                    "not O(s^3): ratios {p} then {ratio}"
                );
            }
            prev_ratio = Some(ratio);
        }
    }

    #[test]
    fn edge_slope_sign_matches_k_prime_in_band() {
        let bs = cos_bs();
        for (i, side) in [(0usize, Side::Above), (2usize, Side::Above)] {
            let d = edge_slope(&bs, i, side).unwrap();
            let e_in = bs.edges()[i] + 0.05;
            let kp = quasimomentum_derivative(&bs, e_in, QuasiMomentumBranch::default()).unwrap();
            assert!(d > 0.0 && kp.re > 0.0, "edge {i}: d = {d}, k' = {kp}");
        }
    }
}
