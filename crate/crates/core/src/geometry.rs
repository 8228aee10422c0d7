//! Cross geometry for the complex momentum κ(φ) = k(E - W(φ)): turning
//! points, the complex branch point φ_i, the vertical curve σ, and the
//! geometric hypothesis checks.
//!
//! The cross is the connected preimage (E-W)^{-1}(B) of the single visible
//! band B: a real segment [φ_r^-, φ_r^+] through the relevant extremum of W,
//! crossed by σ running from the conjugate branch point up to φ_i. σ is
//! traced in the energy variable (a ladder of real values of E - W), which
//! later makes the action quadrature a 1-D integral with Jacobian -1/W'.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hill::{BandStructure, Region};
use crate::potentials::{AnalyticPerturbation, Extremum};

/// Value of the action branch at the real turning points: κ(φ_r^±) ∈ {0, π}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BranchTag {
    Zero,
    Pi,
}

impl BranchTag {
    pub fn value(self) -> f64 {
        match self {
            BranchTag::Zero => 0.0,
            BranchTag::Pi => std::f64::consts::PI,
        }
    }
}

/// Immutable bundle of everything κ-related evaluations need.
#[derive(Debug, Clone)]
pub struct AdiabaticModel {
    pub bands: BandStructure,
    pub w: AnalyticPerturbation,
    /// Strip half-width actually used (≤ the perturbation's analyticity strip).
    pub strip: f64,
}

impl AdiabaticModel {
    pub fn new(bands: BandStructure, w: AnalyticPerturbation, strip: Option<f64>) -> Result<Self> {
        let strip = match strip {
            Some(y) => {
                if y > w.strip_half_width() {
                    return Err(Error::Config(format!(
                        "strip {y} exceeds the perturbation's analyticity bound {}",
                        w.strip_half_width()
                    )));
                }
                y
            }
            None => w.strip_half_width(),
        };
        Ok(AdiabaticModel { bands, w, strip })
    }
}

/// E-independent identification of the cross: which band is visible, which
/// end is E_r, which extremum carries the cross, and the branch tag.
#[derive(Debug, Clone, Copy)]
pub struct CrossSetup {
    /// 1-based number of the visible band B.
    pub band: usize,
    /// Band end attained on the real axis.
    pub e_r: f64,
    /// Band end attained only at the complex branch points.
    pub e_i: f64,
    /// true when E_r is the lower end of B.
    pub e_r_is_lower: bool,
    /// The extremum of W whose neighborhood sees the band.
    pub extremum: Extremum,
    /// κ(φ_r^±) per the branch case analysis.
    pub branch_tag: BranchTag,
}

impl CrossSetup {
    /// In-band phase measured from the E_r end: θ_r ∈ [0, π], zero at E_r,
    /// π at E_i. κ̃(φ) - branch_tag = θ_r(E - W(φ)) on the cross.
    pub fn theta_r(&self, bands: &BandStructure, e: f64) -> Result<f64> {
        let t = bands.theta_in_band(self.band, e)?;
        Ok(if self.e_r_is_lower { t } else { std::f64::consts::PI - t })
    }

    pub fn theta_r_complex(&self, bands: &BandStructure, e: Complex64) -> Result<Complex64> {
        let t = bands.theta_in_band_complex(self.band, e)?;
        Ok(if self.e_r_is_lower {
            t
        } else {
            Complex64::new(std::f64::consts::PI, 0.0) - t
        })
    }

    /// dθ_r/de; positive toward E_i.
    pub fn theta_r_prime(&self, bands: &BandStructure, e: f64) -> Result<f64> {
        let tp = bands.theta_prime_in_band(self.band, e)?;
        Ok(if self.e_r_is_lower { tp } else { -tp })
    }
}

/// One sample of σ_+: E - W(z) = e with e real in band B.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SigmaNode {
    pub e: f64,
    pub z: [f64; 2],
}

impl SigmaNode {
    pub fn point(&self) -> Complex64 {
        Complex64::new(self.z[0], self.z[1])
    }
}

/// Per-energy cross geometry.
#[derive(Debug, Clone)]
pub struct CrossGeometry {
    pub energy: f64,
    pub setup: CrossSetup,
    pub phi_r_minus: f64,
    pub phi_r_plus: f64,
    /// E - W at the extremum: the in-band energy at the center of the cross.
    pub e_center: f64,
    /// Complex branch point with Im > 0; absent when σ was not traced.
    pub phi_i: Option<Complex64>,
    /// Ordered samples of σ_+ from the extremum to φ_i.
    pub sigma_plus: Vec<SigmaNode>,
}

const TURNING_RESIDUAL_TOL: f64 = 1e-11;
const NEWTON_RESIDUAL_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;
/// Default number of σ ladder nodes.
pub const SIGMA_DEFAULT_NODES: usize = 65;

/// Identify the visible band, E_r/E_i assignment and branch tag for J.
///
/// Follows the case analysis of the branch lemma: κ(φ_r^-) = 0 exactly when
/// the extremum is a minimum and the band number is odd, or a maximum and
/// the band number is even; π otherwise.
pub fn identify_cross(model: &AdiabaticModel, j: (f64, f64)) -> Result<CrossSetup> {
    let report = check_assumptions(model, j)?;
    match report.setup {
        Some(setup) if report.hj_ok => Ok(setup),
        _ => Err(Error::Assumption(format!(
            "(H_J) violated: {}",
            report
                .violations
                .iter()
                .map(|v| v.label.as_str())
                .collect::<Vec<_>>()
                .join("; ")
        ))),
    }
}

/// Build the per-energy geometry. With `with_sigma` the curve σ_+ is traced
/// and φ_i solved; otherwise only the real segment is computed (enough for
/// Φ and Φ').
pub fn build_cross(
    model: &AdiabaticModel,
    setup: &CrossSetup,
    energy: f64,
    with_sigma: bool,
) -> Result<CrossGeometry> {
    let (phi_r_minus, phi_r_plus) = turning_points(model, setup, energy)?;
    let e_center = energy - model.w.eval_real(setup.extremum.position);
    let mut geom = CrossGeometry {
        energy,
        setup: *setup,
        phi_r_minus,
        phi_r_plus,
        e_center,
        phi_i: None,
        sigma_plus: Vec::new(),
    };
    if with_sigma {
        geom.sigma_plus = trace_sigma(model, setup, energy, SIGMA_DEFAULT_NODES)?;
        geom.phi_i = Some(complex_branch_point(model, setup, energy, &geom.sigma_plus)?);
    }
    Ok(geom)
}

/// The two real solutions of E - W(φ) = E_r bracketing the extremum.
///
/// When E - W at the extremum equals E_r the cross is collapsed and both
/// turning points coincide with the extremum.
pub fn turning_points(
    model: &AdiabaticModel,
    setup: &CrossSetup,
    energy: f64,
) -> Result<(f64, f64)> {
    let x0 = setup.extremum.position;
    let e_center = energy - model.w.eval_real(x0);
    let g = |x: f64| energy - model.w.eval_real(x) - setup.e_r;
    let g0 = g(x0);
    if g0.abs() <= TURNING_RESIDUAL_TOL {
        return Ok((x0, x0));
    }
    let (lo, hi) = setup.band_interval();
    if e_center <= lo - TURNING_RESIDUAL_TOL || e_center >= hi + TURNING_RESIDUAL_TOL {
        return Err(Error::Geometry(format!(
            "E - W at the extremum ({e_center}) lies outside band {} = [{lo}, {hi}]",
            setup.band
        )));
    }

    let find_side = |dir: f64| -> Result<f64> {
        let mut step = 0.25;
        let mut dist = step;
        let mut a = x0;
        let mut b = x0 + dir * dist;
        for _ in 0..64 {
            if g(b) * g0 < 0.0 {
                // bisect then polish with Newton on the exact derivative
                let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
                let mut fa = g(lo);
                for _ in 0..90 {
                    let m = 0.5 * (lo + hi);
                    let fm = g(m);
                    if fm == 0.0 || hi - lo < 1e-13 {
                        break;
                    }
                    if fa * fm < 0.0 {
                        hi = m;
                    } else {
                        lo = m;
                        fa = fm;
                    }
                }
                let mut x = 0.5 * (lo + hi);
                for _ in 0..8 {
                    let wp = model.w.eval_prime_real(x);
                    if wp == 0.0 {
                        break;
                    }
                    let dx = g(x) / wp; // g' = -W'
                    x += dx;
                    if dx.abs() < 1e-15 * (1.0 + x.abs()) {
                        break;
                    }
                }
                return Ok(x);
            }
            a = b;
            step *= 1.6;
            dist += step;
            b = x0 + dir * dist;
            if dist > 1e4 {
                break;
            }
        }
        Err(Error::Geometry(format!(
            "no turning point found on the {} side of the extremum at E = {energy}",
            if dir < 0.0 { "left" } else { "right" }
        )))
    };

    let minus = find_side(-1.0)?;
    let plus = find_side(1.0)?;
    Ok((minus, plus))
}

impl CrossSetup {
    fn band_interval(&self) -> (f64, f64) {
        if self.e_r_is_lower {
            (self.e_r, self.e_i)
        } else {
            (self.e_i, self.e_r)
        }
    }
}

/// Trace σ_+ from the extremum to φ_i as a ladder of real in-band energies
/// e_j running from E - W(extremum) to E_i, Chebyshev-clustered at both
/// ends (square-root behavior at E_i, extremum degeneracy at the center).
pub fn trace_sigma(
    model: &AdiabaticModel,
    setup: &CrossSetup,
    energy: f64,
    n_points: usize,
) -> Result<Vec<SigmaNode>> {
    if n_points < 8 {
        return Err(Error::Config("sigma trace needs at least 8 nodes".into()));
    }
    let x0 = setup.extremum.position;
    let e0 = energy - model.w.eval_real(x0);
    let mut nodes = Vec::with_capacity(n_points);
    nodes.push(SigmaNode { e: e0, z: [x0, 0.0] });
    let mut z = Complex64::new(x0, 0.0);
    for j in 1..n_points {
        let t = j as f64 / (n_points - 1) as f64;
        let cluster = (0.5 * std::f64::consts::PI * t).sin().powi(2);
        let e = e0 + (setup.e_i - e0) * cluster;
        z = if j == 1 {
            // local quadratic model off the extremum, into the upper half-plane
            let d2 = setup.extremum.second_derivative;
            let dz = (2.0 * (e - e0) / d2).sqrt().max(1e-12);
            solve_sigma_point(model, energy, e, Complex64::new(x0, dz))?
        } else {
            let predictor = z - (e - nodes[j - 1].e) / model.w.eval_prime_unchecked(z);
            solve_sigma_point(model, energy, e, predictor)?
        };
        if z.im > model.strip + 1e-12 {
            return Err(Error::Geometry(format!(
                "sigma left the strip at Im z = {} (Y = {})",
                z.im, model.strip
            )));
        }
        if z.im < 0.0 {
            return Err(Error::Geometry(format!(
                "sigma dropped into the lower half-plane at {z}"
            )));
        }
        nodes.push(SigmaNode { e, z: [z.re, z.im] });
    }
    Ok(nodes)
}

/// Newton solve of E - W(z) = e from a seed, with damped steps when the
/// iterate tries to leave the strip.
pub fn solve_sigma_point(
    model: &AdiabaticModel,
    energy: f64,
    e: f64,
    seed: Complex64,
) -> Result<Complex64> {
    let mut z = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let g = Complex64::new(energy - e, 0.0) - model.w.eval_unchecked(z);
        if g.norm() <= NEWTON_RESIDUAL_TOL {
            return Ok(z);
        }
        let wp = model.w.eval_prime_unchecked(z);
        if wp.norm() < 1e-14 {
            return Err(Error::Geometry(format!(
                "W' vanished on sigma at {z} (e = {e})"
            )));
        }
        let mut step = g / wp;
        // damp steps that would leave the strip
        let mut tries = 0;
        while (z + step).im.abs() > model.strip && tries < 20 {
            step *= 0.5;
            tries += 1;
        }
        z += step;
    }
    let resid = (Complex64::new(energy - e, 0.0) - model.w.eval_unchecked(z)).norm();
    Err(Error::Geometry(format!(
        "sigma Newton stalled at e = {e}: residual {resid:.3e}"
    )))
}

/// The branch point φ_i in the upper half-strip: E - W(φ_i) = E_i, seeded
/// from the σ continuation; residual ≤ 1e-12.
pub fn complex_branch_point(
    model: &AdiabaticModel,
    setup: &CrossSetup,
    energy: f64,
    sigma: &[SigmaNode],
) -> Result<Complex64> {
    let seed = sigma
        .last()
        .map(|n| n.point())
        .ok_or_else(|| Error::Geometry("empty sigma trace".into()))?;
    let z = solve_sigma_point(model, energy, setup.e_i, seed)?;
    if z.im <= 0.0 || z.im > model.strip + 1e-12 {
        return Err(Error::Geometry(format!(
            "phi_i = {z} escaped the upper half-strip (Y = {})",
            model.strip
        )));
    }
    Ok(z)
}

/// κ evaluated on the action branch κ̃: κ̃ - branch_tag = θ_r on the cross,
/// Re κ̃ = branch_tag with Im κ̃ ≥ 0 on the adjacent real gap rays.
#[derive(Debug, Clone, Copy)]
pub struct KappaValue {
    pub value: Complex64,
    /// Set when the evaluation landed within tolerance of a branch point of κ.
    pub at_branch_point: bool,
}

const BRANCH_POINT_TOL: f64 = 1e-10;

/// Evaluate κ̃(φ) = k(E - W(φ)) on the action branch fixed by the cross
/// setup: κ̃ = branch_tag + θ_r(E - W(φ)) with θ_r the principal arccos
/// continuation. Valid on the sheet covering band B and the adjacent gap
/// through E_r; on the real gap rays the principal branch picks one side of
/// the cut (Re κ̃ stays frozen at the tag there).
pub fn kappa(
    model: &AdiabaticModel,
    setup: &CrossSetup,
    energy: f64,
    phi: Complex64,
) -> Result<KappaValue> {
    let e = Complex64::new(energy, 0.0) - model.w.eval(phi)?;
    let tag = setup.branch_tag.value();
    let (lo, hi) = setup.band_interval();

    let near_er = (e - setup.e_r).norm() <= BRANCH_POINT_TOL;
    let near_ei = (e - setup.e_i).norm() <= BRANCH_POINT_TOL;
    if near_er || near_ei {
        let value = if near_er { tag } else { std::f64::consts::PI + tag };
        return Ok(KappaValue {
            value: Complex64::new(value, 0.0),
            at_branch_point: true,
        });
    }

    // validity: the band plus the gap adjacent to E_r, up to the next branch
    // points (the far ends of that gap)
    let gaps = model.bands.gaps();
    let (e_min, e_max) = if setup.e_r_is_lower {
        (gaps[setup.band - 1].lo, hi)
    } else {
        (
            lo,
            gaps.get(setup.band).map(|g| g.hi).unwrap_or(f64::INFINITY),
        )
    };
    if e.re < e_min || e.re > e_max {
        return Err(Error::Domain(format!(
            "E - W(phi) = {e} is outside the sheet covered by the cross branch ([{e_min}, {e_max}])"
        )));
    }
    let theta_r = setup.theta_r_complex(&model.bands, e)?;
    Ok(KappaValue {
        value: theta_r + tag,
        at_branch_point: false,
    })
}

/// A labeled assumption violation.
#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub label: String,
    pub detail: String,
}

/// Result of the (H_J)/(H_W,g) checks: violations found, what was verified,
/// and the cross setup when the hypotheses hold.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub hj_ok: bool,
    pub violations: Vec<Violation>,
    pub checked: Vec<String>,
    pub setup: Option<CrossSetup>,
}

/// Verify the geometric hypotheses for the interval J.
///
/// Checks, by range analysis of W over the real line and over the traced
/// vertical lines of W^{-1}(R) through each real extremum: (1) J lies inside
/// one open gap of H_0; (2) exactly one band B has nonempty preimage within
/// the strip; (3) exactly one real extremum maps into the open band.
/// Violations are reported, not thrown.
pub fn check_assumptions(model: &AdiabaticModel, j: (f64, f64)) -> Result<AssumptionReport> {
    let mut violations = Vec::new();
    let mut checked = Vec::new();
    let bands = &model.bands;
    let (a, b) = j;
    if !(b > a) {
        return Err(Error::Config(format!("empty interval J = [{a}, {b}]")));
    }

    // (1) J inside one gap, away from the spectrum
    let gap_of = |e: f64| -> Option<usize> {
        match bands.locate(e) {
            Ok(Region::Gap(l)) => Some(l),
            _ => None,
        }
    };
    let gap = match (gap_of(a), gap_of(b)) {
        (Some(la), Some(lb)) if la == lb => {
            checked.push(format!("J = [{a}, {b}] lies inside gap {la} of H_0"));
            Some(la)
        }
        _ => {
            violations.push(Violation {
                label: "J intersects spectrum".into(),
                detail: format!("J = [{a}, {b}] is not contained in a single spectral gap"),
            });
            None
        }
    };
    if let Some(l) = gap {
        if l > 0 && !bands.gaps()[l].open {
            violations.push(Violation {
                label: "J intersects spectrum".into(),
                detail: format!("gap {l} is closed"),
            });
        }
    }

    // W range on the real axis
    let window = extremum_window(&model.w);
    let extrema = model.w.real_extrema(window)?;
    let mut w_lo = 0.0f64; // W -> 0 at infinity
    let mut w_hi = 0.0f64;
    for ex in &extrema {
        w_lo = w_lo.min(ex.value);
        w_hi = w_hi.max(ex.value);
    }
    checked.push(format!(
        "W range on R: [{w_lo:.6}, {w_hi:.6}] from {} non-degenerate extrema",
        extrema.len()
    ));

    // (2) bands visible from the real axis, at several E in J
    let mut visible: Vec<usize> = Vec::new();
    for t in [0.0, 0.5, 1.0] {
        let e = a + (b - a) * t;
        for (idx, &(lo, hi)) in bands.bands().iter().enumerate() {
            let reach_lo = e - w_hi;
            let reach_hi = e - w_lo;
            if reach_hi >= lo && reach_lo <= hi && !visible.contains(&(idx + 1)) {
                visible.push(idx + 1);
            }
        }
    }
    // vertical lines through extrema: what do they add within the strip?
    let mut line_ranges = Vec::new();
    for ex in &extrema {
        let range = vertical_line_w_range(model, ex);
        line_ranges.push((ex.position, range));
    }
    for t in [0.0, 1.0] {
        let e = a + (b - a) * t;
        for &(_, (wl, wh)) in &line_ranges {
            // the line covers E - W in [e - wh, e - wl]
            for (idx, &(lo, hi)) in bands.bands().iter().enumerate() {
                let overlap = (e - wh).max(lo) <= (e - wl).min(hi);
                if overlap && !visible.contains(&(idx + 1)) {
                    visible.push(idx + 1);
                }
            }
        }
    }
    checked.push(format!(
        "bands visible from R and from {} traced vertical lines within |Im z| <= {}: {visible:?}",
        line_ranges.len(),
        model.strip
    ));
    visible.sort_unstable();
    if visible.len() > 1 {
        violations.push(Violation {
            label: "second band visible".into(),
            detail: format!("bands {visible:?} all have nonempty preimage over the strip"),
        });
    }
    if visible.is_empty() {
        violations.push(Violation {
            label: "no band visible".into(),
            detail: "E - W never meets the spectrum; no cross exists".into(),
        });
    }

    let mut setup = None;
    if let Some(&band) = visible.first() {
        let (lo, hi) = bands.band(band);
        // (3) extrema mapping into the open band
        let mut carriers: Vec<&Extremum> = Vec::new();
        for e_t in [a, b] {
            for ex in &extrema {
                let ec = e_t - ex.value;
                if ec > lo && ec < hi && !carriers.iter().any(|c| c.position == ex.position) {
                    carriers.push(ex);
                }
            }
        }
        if carriers.len() != 1 {
            violations.push(Violation {
                label: "extremum count != 1".into(),
                detail: format!(
                    "{} real extrema map into band {band} over J (need exactly 1)",
                    carriers.len()
                ),
            });
        } else {
            let extremum = *carriers[0];
            // E_r is the band end on the real-axis side of the cross
            let e_r_is_lower = b <= lo;
            if !e_r_is_lower && a < hi {
                violations.push(Violation {
                    label: "J intersects spectrum".into(),
                    detail: format!("J = [{a}, {b}] straddles band {band} = [{lo}, {hi}]"),
                });
            }
            let (e_r, e_i) = if e_r_is_lower { (lo, hi) } else { (hi, lo) };
            // reality check: the real segment must not reach past E_i
            for e_t in [a, b] {
                let ec = e_t - extremum.value;
                let reach = if e_r_is_lower { e_t - w_lo } else { e_t - w_hi };
                let overshoot = if e_r_is_lower { reach >= hi } else { reach <= lo };
                if overshoot {
                    violations.push(Violation {
                        label: "disconnected preimage".into(),
                        detail: format!(
                            "E - W over R reaches through the whole band at E = {e_t} (E-W(extremum) = {ec})"
                        ),
                    });
                    break;
                }
            }
            // completeness: the line through the carrier must reach E_i in the strip
            if let Some(&(_, (wl, wh))) = line_ranges
                .iter()
                .find(|(p, _)| (*p - extremum.position).abs() < 1e-9)
            {
                for e_t in [a, b] {
                    let reached = if e_r_is_lower { e_t - wl >= hi } else { e_t - wh <= lo };
                    if !reached {
                        violations.push(Violation {
                            label: "sigma exits strip".into(),
                            detail: format!(
                                "vertical line through the extremum reaches only E - W in [{:.6}, {:.6}] at E = {e_t}, short of E_i = {e_i}",
                                e_t - wh, e_t - wl
                            ),
                        });
                        break;
                    }
                }
            }
            let minimum = extremum.second_derivative > 0.0;
            let tag = if minimum == (band % 2 == 1) {
                BranchTag::Zero
            } else {
                BranchTag::Pi
            };
            checked.push(format!(
                "cross carried by the extremum at x = {:.6} ({}), band {band}, E_r = {e_r:.6}, E_i = {e_i:.6}, branch tag {tag:?}",
                extremum.position,
                if minimum { "minimum" } else { "maximum" },
            ));
            setup = Some(CrossSetup {
                band,
                e_r,
                e_i,
                e_r_is_lower,
                extremum,
                branch_tag: tag,
            });
        }
    }

    // numerical verification of the branch tag just off the left turning point
    if let Some(s) = &setup {
        if violations.is_empty() {
            let e_mid = 0.5 * (a + b);
            if let Ok((pm, _)) = turning_points(model, s, e_mid) {
                let probe = Complex64::new(pm, 1e-3);
                if let Ok(kv) = kappa(model, s, e_mid, probe) {
                    let drift = (kv.value - s.branch_tag.value()).norm();
                    if drift > 0.5 {
                        violations.push(Violation {
                            label: "branch tag verification failed".into(),
                            detail: format!(
                                "kappa just above phi_r^- is {} but the tag is {:?}",
                                kv.value, s.branch_tag
                            ),
                        });
                    } else {
                        checked.push(format!(
                            "branch tag verified numerically at phi_r^- + i*1e-3 (|kappa - tag| = {drift:.2e})"
                        ));
                    }
                }
            }
        }
    }

    let hj_ok = violations.is_empty();
    Ok(AssumptionReport {
        hj_ok,
        violations,
        checked,
        setup: if hj_ok { setup } else { None },
    })
}

fn extremum_window(w: &AnalyticPerturbation) -> (f64, f64) {
    let mut lo = -10.0f64;
    let mut hi = 10.0f64;
    for t in w.terms() {
        lo = lo.min(t.center - 10.0 * t.width);
        hi = hi.max(t.center + 10.0 * t.width);
    }
    (lo, hi)
}

/// Range of (real) W values attained on the vertical line of W^{-1}(R)
/// through a real extremum, within the strip. Traced by Newton continuation
/// in the value of W; the line leaves the extremum in the direction where
/// W(x + iy) stays real, with W moving away from the extremal value.
fn vertical_line_w_range(model: &AdiabaticModel, ex: &Extremum) -> (f64, f64) {
    // W(x0 + iy) ≈ W0 - W''/2 y²: the line into the upper half-plane lowers
    // W below a minimum and raises it above a maximum.
    let dir = -ex.second_derivative.signum();
    let mut w_lo = ex.value;
    let mut w_hi = ex.value;
    let mut z = Complex64::new(ex.position, 0.0);
    let mut w = ex.value;
    let scale = model.w.sup_norm_bound().max(1.0);
    let mut step = 1e-4 * scale;
    let mut first = true;
    for _ in 0..100_000 {
        let w_next = w + dir * step;
        let seed = if first {
            // W(x0 + iy) ≈ W0 - W''·y²/2 along the line
            let dz2 = 2.0 * (ex.value - w_next) / ex.second_derivative;
            if dz2 <= 0.0 {
                break;
            }
            Complex64::new(ex.position, dz2.sqrt())
        } else {
            z + (w_next - w) / model.w.eval_prime_unchecked(z)
        };
        match solve_line_point(model, w_next, seed) {
            Ok(zn) if zn.im.abs() <= model.strip && zn.im >= 0.0 => {
                z = zn;
                w = w_next;
                w_lo = w_lo.min(w);
                w_hi = w_hi.max(w);
                first = false;
                step = (step * 1.5).min(0.05 * scale);
            }
            _ => {
                if step > 1e-6 * scale {
                    step *= 0.5;
                } else {
                    break;
                }
            }
        }
        if w.abs() > 50.0 * scale {
            break;
        }
    }
    (w_lo, w_hi)
}

fn solve_line_point(model: &AdiabaticModel, w_target: f64, seed: Complex64) -> Result<Complex64> {
    let mut z = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let g = model.w.eval_unchecked(z) - w_target;
        if g.norm() <= 1e-11 {
            return Ok(z);
        }
        let wp = model.w.eval_prime_unchecked(z);
        if wp.norm() < 1e-14 {
            return Err(Error::Geometry("W' vanished on vertical line".into()));
        }
        z -= g / wp;
        if z.im.abs() > 4.0 * model.strip {
            return Err(Error::Geometry("vertical line escaped".into()));
        }
    }
    Err(Error::Geometry("vertical line Newton stalled".into()))
}

/// Minimal SVG rendering of the cross (real segment, σ, branch points).
pub fn render_cross_svg(geom: &CrossGeometry, strip: f64) -> String {
    let pad = 0.4;
    let x0 = geom.phi_r_minus - pad;
    let x1 = geom.phi_r_plus + pad;
    let y1 = strip + pad;
    let w = 640.0;
    let h = 420.0;
    let sx = w / (x1 - x0);
    let sy = h / (2.0 * y1);
    let px = |x: f64| (x - x0) * sx;
    let py = |y: f64| h / 2.0 - y * sy;
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str(&format!(
        "  <line x1=\"0\" y1=\"{0}\" x2=\"{w}\" y2=\"{0}\" stroke=\"#bbb\"/>\n",
        py(0.0)
    ));
    for y in [strip, -strip] {
        s.push_str(&format!(
            "  <line x1=\"0\" y1=\"{0}\" x2=\"{w}\" y2=\"{0}\" stroke=\"#ddd\" stroke-dasharray=\"4\"/>\n",
            py(y)
        ));
    }
    s.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{2}\" x2=\"{}\" y2=\"{2}\" stroke=\"#1a6\" stroke-width=\"2\"/>\n",
        px(geom.phi_r_minus),
        px(geom.phi_r_plus),
        py(0.0)
    ));
    if !geom.sigma_plus.is_empty() {
        for mirror in [1.0, -1.0] {
            let pts: Vec<String> = geom
                .sigma_plus
                .iter()
                .map(|n| format!("{:.2},{:.2}", px(n.z[0]), py(mirror * n.z[1])))
                .collect();
            s.push_str(&format!(
                "  <polyline points=\"{}\" fill=\"none\" stroke=\"#16c\" stroke-width=\"2\"/>\n",
                pts.join(" ")
            ));
        }
    }
    for (x, y) in [
        (geom.phi_r_minus, 0.0),
        (geom.phi_r_plus, 0.0),
    ] {
        s.push_str(&format!(
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#c21\"/>\n",
            px(x),
            py(y)
        ));
    }
    if let Some(pi) = geom.phi_i {
        for mirror in [1.0, -1.0] {
            s.push_str(&format!(
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#c21\"/>\n",
                px(pi.re),
                py(mirror * pi.im)
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}
