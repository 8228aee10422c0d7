//! Hill equation machinery: monodromy matrix, discriminant, band edges.
//!
//! The monodromy M(E) is the fundamental matrix of -y'' + V y = E y over one
//! period, integrated with the adaptive RK scheme in `ode`. The discriminant
//! Δ(E) = tr M(E); |Δ| ≤ 2 characterizes the spectral bands. Δ'(E) comes from
//! the variational system integrated alongside the monodromy, not from
//! finite differences.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode;
use crate::potentials::PeriodicPotential;

/// Fundamental matrix at x = 1 for initial data (1,0) and (0,1).
#[derive(Debug, Clone, Copy)]
pub struct MonodromyResult {
    /// Column j is the j-th fundamental solution (value; derivative).
    pub m: [[Complex64; 2]; 2],
    pub energy: Complex64,
    /// Wronskian of the integrated flow, accumulated segment-wise. The
    /// fundamental solutions grow like e^{√|E|}, so a determinant taken
    /// from the stored entries would lose up to |m|²·ulp to cancellation
    /// and mask the integrator's actual conservation defect.
    det: Complex64,
}

impl MonodromyResult {
    /// det M = 1 up to the integrator's Wronskian defect.
    pub fn det(&self) -> Complex64 {
        self.det
    }

    /// Hill discriminant Δ = tr M.
    pub fn discriminant(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }
}

/// Σ aᵢ·bᵢ with two-product (FMA) error terms and Kahan accumulation.
fn compensated_dot(terms: &[(f64, f64)]) -> f64 {
    let mut s = 0.0f64;
    let mut comp = 0.0f64;
    for &(a, b) in terms {
        let p = a * b;
        let p_err = f64::mul_add(a, b, -p);
        let t = s + p;
        let round = if s.abs() >= p.abs() {
            (s - t) + p
        } else {
            (p - t) + s
        };
        s = t;
        comp += round + p_err;
    }
    s + comp
}

/// Number of sub-intervals for one period: keeps per-segment growth (and
/// with it the cancellation in the per-segment determinant) moderate.
fn segment_count(v: &PeriodicPotential, energy: Complex64) -> usize {
    let reach = (energy.norm() + v.sup_norm_bound()).sqrt();
    ((reach / 3.0).ceil() as usize).clamp(1, 8)
}

fn mat_mul(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut c = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn det2(m: &[[Complex64; 2]; 2]) -> Complex64 {
    let (a, b, c, d) = (m[0][0], m[1][1], m[0][1], m[1][0]);
    let re = compensated_dot(&[(a.re, b.re), (-a.im, b.im), (-c.re, d.re), (c.im, d.im)]);
    let im = compensated_dot(&[(a.re, b.im), (a.im, b.re), (-c.re, d.im), (-c.im, d.re)]);
    Complex64::new(re, im)
}

/// Propagator of -y'' + Vy = Ey over [x0, x1] from identity data.
fn propagator(
    v: &PeriodicPotential,
    energy: Complex64,
    x0: f64,
    x1: f64,
) -> Result<[[Complex64; 2]; 2]> {
    let rhs = |x: f64, y: &[Complex64; 4]| {
        let q = Complex64::new(v.eval(x), 0.0) - energy;
        [y[1], q * y[0], y[3], q * y[2]]
    };
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let y = ode::integrate(
        &rhs,
        x0,
        x1,
        [one, zero, zero, one],
        ode::DEFAULT_RTOL,
        ode::DEFAULT_ATOL,
    )?;
    Ok([[y[0], y[2]], [y[1], y[3]]])
}

/// Monodromy matrix by adaptive integration; det M = 1 within 1e-10.
pub fn monodromy(v: &PeriodicPotential, energy: Complex64) -> Result<MonodromyResult> {
    let k = segment_count(v, energy);
    let mut m = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
                 [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
    let mut det = Complex64::new(1.0, 0.0);
    for s in 0..k {
        let x0 = s as f64 / k as f64;
        let x1 = (s + 1) as f64 / k as f64;
        let p = propagator(v, energy, x0, x1)?;
        det *= det2(&p);
        m = mat_mul(&p, &m);
    }
    Ok(MonodromyResult { m, energy, det })
}

/// Monodromy together with its energy derivative dM/dE from the augmented
/// (variational) system, accumulated across segments by the product rule.
pub fn monodromy_with_derivative(
    v: &PeriodicPotential,
    energy: Complex64,
) -> Result<(MonodromyResult, [[Complex64; 2]; 2])> {
    let rhs = |x: f64, y: &[Complex64; 8]| {
        let q = Complex64::new(v.eval(x), 0.0) - energy;
        // y[0..4]: two fundamental solutions; y[4..8]: their E-derivatives
        [
            y[1],
            q * y[0],
            y[3],
            q * y[2],
            y[5],
            q * y[4] - y[0],
            y[7],
            q * y[6] - y[2],
        ]
    };
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let k = segment_count(v, energy);
    let mut m = [[one, zero], [zero, one]];
    let mut dm = [[zero, zero], [zero, zero]];
    let mut det = Complex64::new(1.0, 0.0);
    for s in 0..k {
        let x0 = s as f64 / k as f64;
        let x1 = (s + 1) as f64 / k as f64;
        let y = ode::integrate(
            &rhs,
            x0,
            x1,
            [one, zero, zero, one, zero, zero, zero, zero],
            ode::DEFAULT_RTOL,
            ode::DEFAULT_ATOL,
        )?;
        let p = [[y[0], y[2]], [y[1], y[3]]];
        let dp = [[y[4], y[6]], [y[5], y[7]]];
        det *= det2(&p);
        // d(P·M) = dP·M + P·dM
        let dp_m = mat_mul(&dp, &m);
        let p_dm = mat_mul(&p, &dm);
        for i in 0..2 {
            for j in 0..2 {
                dm[i][j] = dp_m[i][j] + p_dm[i][j];
            }
        }
        m = mat_mul(&p, &m);
    }
    Ok((MonodromyResult { m, energy, det }, dm))
}

/// Δ(E) for complex energy.
pub fn discriminant(v: &PeriodicPotential, energy: Complex64) -> Result<Complex64> {
    Ok(monodromy(v, energy)?.discriminant())
}

/// (Δ, Δ') for real energy.
pub fn discriminant_with_derivative(v: &PeriodicPotential, energy: f64) -> Result<(f64, f64)> {
    let (m, dm) = monodromy_with_derivative(v, Complex64::new(energy, 0.0))?;
    Ok((m.discriminant().re, (dm[0][0] + dm[1][1]).re))
}

/// Spectral gap (E_lo, E_hi); gap 0 is the semi-infinite interval below E_1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub lo: f64,
    pub hi: f64,
    pub open: bool,
}

/// Band edges, bands and gaps of H_0 = -d²/dx² + V below a search ceiling.
#[derive(Debug, Clone)]
pub struct BandStructure {
    v: PeriodicPotential,
    /// E_1 < E_2 <= E_3 < E_4 ... (closed gaps give coincident pairs).
    edges: Vec<f64>,
    bands: Vec<(f64, f64)>,
    /// gaps[l] is the gap above band l; gaps[0] = (-inf, E_1).
    gaps: Vec<Gap>,
    e_max: f64,
}

/// Where an energy sits relative to the band structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// 1-based band number.
    Band(usize),
    /// Gap index l >= 0 (gap l lies above band l).
    Gap(usize),
    /// Within edge tolerance of edges[i].
    Edge(usize),
}

const SCAN_STEP: f64 = 0.05;
const EDGE_BISECT_TOL: f64 = 1e-12;
/// |Δ|-2 threshold below which a non-crossing extremum is a closed gap.
const CLOSED_GAP_TOL: f64 = 1e-8;
/// Energies closer than this to an edge are classified as Edge.
pub const EDGE_CLASSIFY_TOL: f64 = 1e-12;

impl BandStructure {
    /// Find all roots of Δ(E) = ±2 below `e_max` by coarse scan plus
    /// bisection; tangential double roots are recorded as closed gaps.
    pub fn compute(v: &PeriodicPotential, e_max: f64) -> Result<Self> {
        let e_lo = -v.sup_norm_bound() - 1.0;
        if e_max < e_lo + 2.0 * SCAN_STEP {
            return Err(Error::Config(format!("E_max = {e_max} below scan floor")));
        }
        let n = ((e_max - e_lo) / SCAN_STEP).ceil() as usize;
        let samples = crate::exec::map_range(n + 1, |i| {
            let e = e_lo + (e_max - e_lo) * i as f64 / n as f64;
            let (d, dp) = discriminant_with_derivative(v, e)
                .unwrap_or((f64::NAN, f64::NAN));
            (e, d, dp)
        });
        for (e, d, _) in &samples {
            if !d.is_finite() {
                return Err(Error::Numeric(format!("discriminant failed at E = {e}")));
            }
        }

        // roots of Δ = target, tagged with the target
        let mut roots: Vec<(f64, f64)> = Vec::new();
        for win in samples.windows(2) {
            let (ea, da, dpa) = win[0];
            let (eb, db, dpb) = win[1];
            for target in [2.0f64, -2.0] {
                let ga = da - target;
                let gb = db - target;
                if ga == 0.0 {
                    // scan node sits exactly on a root (the previous cell
                    // cannot have recorded it: its right-end g was 0 too)
                    roots.push((ea, target));
                    continue;
                }
                if ga * gb < 0.0 {
                    let r = bisect_to(|e| self::value_minus(v, e, target), ea, eb)?;
                    roots.push((r, target));
                } else if dpa * dpb < 0.0 {
                    // Δ has an interior extremum; the curve may touch or
                    // doubly cross the target inside the cell.
                    let e_star = bisect_to(|e| discriminant_with_derivative(v, e).map(|p| p.1), ea, eb)?;
                    let g_star = value_minus(v, e_star, target)?;
                    if g_star * ga < 0.0 {
                        let r1 = bisect_to(|e| self::value_minus(v, e, target), ea, e_star)?;
                        let r2 = bisect_to(|e| self::value_minus(v, e, target), e_star, eb)?;
                        roots.push((r1, target));
                        roots.push((r2, target));
                    } else if g_star.abs() <= CLOSED_GAP_TOL && ga.abs() > CLOSED_GAP_TOL {
                        // tangential touch: closed gap, doubled edge
                        roots.push((e_star, target));
                        roots.push((e_star, target));
                    }
                }
            }
        }
        roots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        // Interlacing pattern: Δ(E_1)=+2, then -2,-2, +2,+2, ...
        for (i, (e, target)) in roots.iter().enumerate() {
            let want = if (i + 1) % 4 == 1 || (i + 1) % 4 == 0 {
                2.0
            } else {
                -2.0
            };
            if *target != want {
                return Err(Error::Numeric(format!(
                    "edge pattern broken at root {i} (E = {e}): found Δ = {target}, expected {want}; scan step too coarse?"
                )));
            }
        }

        let edges: Vec<f64> = roots.iter().map(|r| r.0).collect();
        if edges.len() < 2 {
            return Err(Error::Config(format!(
                "E_max = {e_max} too low: found {} band edges, need at least 2",
                edges.len()
            )));
        }
        let mut bands = Vec::new();
        let mut gaps = vec![Gap {
            lo: f64::NEG_INFINITY,
            hi: edges[0],
            open: true,
        }];
        let mut i = 0;
        while i + 1 < edges.len() {
            bands.push((edges[i], edges[i + 1]));
            if i + 2 < edges.len() {
                gaps.push(Gap {
                    lo: edges[i + 1],
                    hi: edges[i + 2],
                    open: edges[i + 2] - edges[i + 1] > 2.0 * EDGE_BISECT_TOL,
                });
            }
            i += 2;
        }

        Ok(BandStructure {
            v: v.clone(),
            edges,
            bands,
            gaps,
            e_max,
        })
    }

    pub fn potential(&self) -> &PeriodicPotential {
        &self.v
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bands(&self) -> &[(f64, f64)] {
        &self.bands
    }

    pub fn gaps(&self) -> &[Gap] {
        &self.gaps
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    /// Band number n (1-based) for band index into `bands()`.
    pub fn band(&self, n: usize) -> (f64, f64) {
        self.bands[n - 1]
    }

    pub fn discriminant(&self, e: Complex64) -> Result<Complex64> {
        discriminant(&self.v, e)
    }

    pub fn discriminant_real(&self, e: f64) -> Result<f64> {
        Ok(discriminant(&self.v, Complex64::new(e, 0.0))?.re)
    }

    pub fn discriminant_with_derivative(&self, e: f64) -> Result<(f64, f64)> {
        discriminant_with_derivative(&self.v, e)
    }

    /// Classify a real energy. Energies above the last computed band edge
    /// are out of range.
    pub fn locate(&self, e: f64) -> Result<Region> {
        let last = *self.edges.last().unwrap();
        if e > last {
            return Err(Error::OutOfRange {
                energy: e,
                e_max: last,
            });
        }
        for (i, &edge) in self.edges.iter().enumerate() {
            if (e - edge).abs() <= EDGE_CLASSIFY_TOL {
                return Ok(Region::Edge(i));
            }
        }
        for (j, &(lo, hi)) in self.bands.iter().enumerate() {
            if e > lo && e < hi {
                return Ok(Region::Band(j + 1));
            }
        }
        for (l, gap) in self.gaps.iter().enumerate() {
            if e > gap.lo && e < gap.hi {
                return Ok(Region::Gap(l));
            }
        }
        Err(Error::OutOfRange {
            energy: e,
            e_max: last,
        })
    }

    /// In-band phase θ_n ∈ [0, π] measured from the lower edge of band n:
    /// cos θ = (-1)^{n-1} Δ/2, θ increasing through the band. The full
    /// quasi-momentum is k_0 = (n-1)π + θ_n.
    pub fn theta_in_band(&self, n: usize, e: f64) -> Result<f64> {
        let d = self.discriminant_real(e)?;
        let w = (band_parity(n) * d / 2.0).clamp(-1.0, 1.0);
        Ok(w.acos())
    }

    /// Complex continuation of θ_n via the principal arccos; for real
    /// in-band energies the imaginary part is numerical noise and is kept
    /// as a health indicator.
    pub fn theta_in_band_complex(&self, n: usize, e: Complex64) -> Result<Complex64> {
        let d = self.discriminant(e)?;
        Ok((d * (0.5 * band_parity(n))).acos())
    }

    /// dθ_n/dE = -(-1)^{n-1} Δ' / (2 sin θ). Diverges like an inverse square
    /// root at the edges.
    pub fn theta_prime_in_band(&self, n: usize, e: f64) -> Result<f64> {
        let (d, dp) = self.discriminant_with_derivative(e)?;
        let w = (band_parity(n) * d / 2.0).clamp(-1.0, 1.0);
        let sin_theta = (1.0 - w * w).sqrt().max(1e-300);
        Ok(-band_parity(n) * dp / (2.0 * sin_theta))
    }
}

fn band_parity(n: usize) -> f64 {
    if n % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

fn value_minus(v: &PeriodicPotential, e: f64, target: f64) -> Result<f64> {
    Ok(discriminant(v, Complex64::new(e, 0.0))?.re - target)
}

fn bisect_to(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::Numeric(format!(
            "bisection bracket [{a}, {b}] has no sign change"
        )));
    }
    while b - a > EDGE_BISECT_TOL {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn free_particle_monodromy_at_zero() {
        // solutions 1 and x: M = [[1, 1], [0, 1]]
        let m = monodromy(&PeriodicPotential::free(), cx(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!((m.m[0][0] - 1.0).norm(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!((m.m[0][1] - 1.0).norm(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.m[1][0].norm(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!((m.m[1][1] - 1.0).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn free_particle_discriminant_at_pi_squared() {
        let d = discriminant(&PeriodicPotential::free(), cx(PI * PI, 0.0)).unwrap();
        assert_abs_diff_eq!(d.re, -2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(d.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn determinant_is_one_at_random_complex_energies() {
        let v = PeriodicPotential::cosine(1, 2.0);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let r = 50.0 * rng.gen::<f64>().sqrt();
            let phi = rng.gen_range(0.0..2.0 * PI);
            let e = cx(r * phi.cos(), r * phi.sin());
            let m = monodromy(&v, e).unwrap();
            assert!(
                (m.det() - 1.0).norm() <= 1e-10,
                "det residual {:.2e} at E = {e}",
                (m.det() - 1.0).norm()
            );
        }
    }

    #[test]
    fn variational_derivative_matches_finite_differences() {
        let v = PeriodicPotential::cosine(1, 2.0);
        for e in [-1.3, 5.0, 9.7, 22.0] {
            let (_, dp) = discriminant_with_derivative(&v, e).unwrap();
            let h = 1e-6;
            let fd = (discriminant(&v, cx(e + h, 0.0)).unwrap().re
                - discriminant(&v, cx(e - h, 0.0)).unwrap().re)
                / (2.0 * h);
            assert!((dp - fd).abs() <= 1e-6 * dp.abs().max(1.0), "E={e}: {dp} vs {fd}");
        }
    }

    #[test]
    fn free_particle_gaps_all_closed() {
        let bs = BandStructure::compute(&PeriodicPotential::free(), 100.0).unwrap();
        // edges coincide in pairs at (n pi)^2
        assert_abs_diff_eq!(bs.edges()[0], 0.0, epsilon = 1e-9);
        for (n, pair) in bs.edges()[1..].chunks_exact(2).enumerate() {
            let expect = ((n + 1) as f64 * PI).powi(2);
            assert_abs_diff_eq!(pair[0], expect, epsilon = 2e-7);
            assert_abs_diff_eq!(pair[1], expect, epsilon = 2e-7);
        }
        for gap in &bs.gaps()[1..] {
            assert!(!gap.open, "free-particle gap should be closed: {gap:?}");
        }
    }

    #[test]
    fn small_amplitude_first_gap_width_is_perturbative() {
        // V = 2A cos(2 pi x): first gap width 2|A| + O(A^2) around pi^2
        let a = 0.05;
        let bs = BandStructure::compute(&PeriodicPotential::cosine(1, 2.0 * a), 15.0).unwrap();
        let gap = bs.gaps()[1];
        assert!(gap.open);
        let width = gap.hi - gap.lo;
        assert!(
            (width - 2.0 * a).abs() <= 3.0 * a * a,
            "width {width} vs 2A = {}",
            2.0 * a
        );
        assert_abs_diff_eq!(0.5 * (gap.hi + gap.lo), PI * PI, epsilon = 0.05);
    }

    #[test]
    fn edge_classification_and_bands() {
        let bs = BandStructure::compute(&PeriodicPotential::cosine(1, 2.0), 45.0).unwrap();
        let e = bs.edges();
        assert!(e.len() >= 4);
        assert!(matches!(bs.locate(e[0] - 0.5).unwrap(), Region::Gap(0)));
        assert!(matches!(bs.locate(0.5 * (e[0] + e[1])).unwrap(), Region::Band(1)));
        assert!(matches!(bs.locate(0.5 * (e[1] + e[2])).unwrap(), Region::Gap(1)));
        assert!(matches!(bs.locate(e[1]).unwrap(), Region::Edge(1)));
        assert!(bs.locate(e.last().unwrap() + 1.0).is_err());
    }

    #[test]
    fn discriminant_at_edges_is_plus_minus_two() {
        let bs = BandStructure::compute(&PeriodicPotential::cosine(1, 2.0), 45.0).unwrap();
        let signs = [2.0, -2.0, -2.0, 2.0, 2.0, -2.0];
        for (i, (&e, want)) in bs.edges().iter().zip(signs.iter()).enumerate() {
            let d = bs.discriminant_real(e).unwrap();
            assert!((d - want).abs() <= 1e-8, "edge {i}: Δ = {d}, want {want}");
        }
    }

    #[test]
    fn theta_runs_zero_to_pi_in_band() {
        let bs = BandStructure::compute(&PeriodicPotential::cosine(1, 2.0), 45.0).unwrap();
        for n in [1usize, 2] {
            let (lo, hi) = bs.band(n);
            let t0 = bs.theta_in_band(n, lo + 1e-9).unwrap();
            let t1 = bs.theta_in_band(n, hi - 1e-9).unwrap();
            assert!(t0 < 1e-3, "θ at lower edge = {t0}");
            assert!((t1 - PI).abs() < 1e-3, "θ at upper edge = {t1}");
            // increasing
            let mut prev = t0;
            for j in 1..20 {
                let e = lo + (hi - lo) * j as f64 / 20.0;
                let t = bs.theta_in_band(n, e).unwrap();
                assert!(t > prev);
                prev = t;
            }
        }
    }
}
