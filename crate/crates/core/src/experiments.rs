//! Orchestration: scenario -> assumption gate -> geometry -> actions ->
//! predictions -> direct sweeps -> fits -> report.
//!
//! Everything here is deterministic given the scenario: grids are fixed by
//! the scenario parameters, parallel maps collect in index order, and the
//! emitted CSV/JSON use fixed-precision formatting.

use num_complex::Complex64;
use serde::Serialize;

use crate::actions::{self, ActionValues};
use crate::direct::{self, GridSpec, SweepResult};
use crate::error::{Error, Result};
use crate::geometry::{self, AdiabaticModel, AssumptionReport, CrossSetup};
use crate::hill::BandStructure;
use crate::potentials::AnalyticPerturbation;
use crate::quadrature::integrate_refining;
use crate::quantize::{self, SpectralPrediction};
use crate::quasimomentum::{edge_slope, Side};
use crate::scenario::Scenario;

/// A prepared pipeline: band structure, perturbation, validated geometry.
#[derive(Debug)]
pub struct Pipeline {
    pub scenario: Scenario,
    pub model: AdiabaticModel,
    pub setup: CrossSetup,
    pub assumptions: AssumptionReport,
}

/// Build the model and gate on the geometric hypotheses; scenarios failing
/// the check abort here, before any solver runs.
pub fn prepare(scenario: Scenario) -> Result<Pipeline> {
    scenario.validate().map_err(|e| e.at_stage("scenario"))?;
    let bands = BandStructure::compute(&scenario.v, scenario.band_e_max())
        .map_err(|e| e.at_stage("band structure"))?;
    let w = AnalyticPerturbation::from_spec(&scenario.w, scenario.strip)
        .map_err(|e| e.at_stage("perturbation"))?;
    let model = AdiabaticModel::new(bands, w, scenario.strip).map_err(|e| e.at_stage("model"))?;
    let assumptions =
        geometry::check_assumptions(&model, scenario.j).map_err(|e| e.at_stage("assumptions"))?;
    let setup = match (&assumptions.setup, assumptions.hj_ok) {
        (Some(s), true) => *s,
        _ => {
            let labels: Vec<&str> = assumptions
                .violations
                .iter()
                .map(|v| v.label.as_str())
                .collect();
            return Err(Error::Assumption(format!(
                "scenario rejected by the hypothesis check: [{}]",
                labels.join("; ")
            ))
            .at_stage("assumptions"));
        }
    };
    Ok(Pipeline {
        scenario,
        model,
        setup,
        assumptions,
    })
}

/// Action coefficients on a uniform n-point grid over J.
pub fn actions_sweep(pipe: &Pipeline, n: usize) -> Result<Vec<ActionValues>> {
    let (a, b) = pipe.scenario.j;
    let energies: Vec<f64> = (0..n)
        .map(|i| a + (b - a) * (i as f64 + 0.5) / n as f64)
        .collect();
    let rows = crate::exec::map_collect(energies, |e| {
        let geom = geometry::build_cross(&pipe.model, &pipe.setup, e, true)?;
        actions::compute(&pipe.model, &geom)
    });
    rows.into_iter().collect()
}

/// Bohr-Sommerfeld prediction for one ε (with amplitudes).
pub fn predict(pipe: &Pipeline, epsilon: f64, floor: f64) -> Result<SpectralPrediction> {
    quantize::bohr_sommerfeld_levels(&pipe.model, &pipe.setup, pipe.scenario.j, epsilon, floor, true)
        .map_err(|e| e.at_stage("quantization"))
}

/// Grid choice for the direct solver at one ε: the boundary criterion
/// |W(±εL)| ≤ 1e-3·dist(J, spectrum), the gap-decay criterion
/// Im κ·(L - L_well) ≥ 30, and points-per-period from the h⁴ floor model
/// targeting 1e-3·(min amplitude), capped at 2·10⁶ matrix rows.
pub fn choose_grid(pipe: &Pipeline, epsilon: f64, min_amplitude: f64) -> Result<GridSpec> {
    let scen = &pipe.scenario;
    let (a, b) = scen.j;
    let dist_spectrum = pipe
        .model
        .bands
        .edges()
        .iter()
        .map(|&e| (e - a).abs().min((e - b).abs()))
        .fold(f64::INFINITY, f64::min);
    let boundary_tol = 1e-3 * dist_spectrum;

    let half_length = match scen.solver.half_length {
        Some(l) => l,
        None => {
            // (a) tail smallness
            let mut y = 1.0;
            while pipe.model.w.eval_real(y).abs() > boundary_tol
                || pipe.model.w.eval_real(-y).abs() > boundary_tol
            {
                y *= 1.25;
                if y > 1e7 {
                    return Err(Error::Config("W decays too slowly for truncation".into()));
                }
            }
            // (b) gap decay beyond the widest turning region
            let geom = geometry::build_cross(&pipe.model, &pipe.setup, b, false)?;
            let reach = geom.phi_r_minus.abs().max(geom.phi_r_plus.abs());
            let e_mid = 0.5 * (a + b);
            let kv = crate::quasimomentum::quasimomentum(
                &pipe.model.bands,
                e_mid,
                crate::quasimomentum::QuasiMomentumBranch::default(),
            )?;
            let im_k = kv.im().abs().max(0.05);
            let l_decay = reach / epsilon + 30.0 / im_k;
            let l_tail = (y + 1.0) / epsilon;
            l_tail.max(l_decay).ceil()
        }
    };

    let points_per_period = match scen.solver.points_per_period {
        Some(m) => m,
        None => {
            let u_max = pipe.scenario.j.1.abs().max(pipe.scenario.j.0.abs())
                + pipe.scenario.v.sup_norm_bound()
                + pipe.model.w.sup_norm_bound();
            let c4 = u_max.powi(3) / 90.0;
            let target = (1e-3 * min_amplitude).max(1e-12);
            let m_target = (c4 / target).powf(0.25).ceil() as usize;
            let m_cap = (2_000_000.0 / (4.0 * half_length)).floor() as usize;
            let m = m_target.clamp(24, m_cap.max(24));
            m + m % 2
        }
    };
    Ok(GridSpec {
        half_length,
        points_per_period,
        boundary_tol,
    })
}

/// Direct φ-sweep at one ε over a window padded beyond J.
pub fn direct_sweep(pipe: &Pipeline, epsilon: f64, grid: GridSpec) -> Result<SweepResult> {
    let (a, b) = pipe.scenario.j;
    let pad = 0.35 * expected_spacing(pipe, epsilon)?;
    direct::phi_sweep(
        &pipe.scenario.v,
        &pipe.model.w,
        epsilon,
        (a - pad, b + pad),
        pipe.scenario.phi_samples,
        grid,
    )
    .map_err(|e| e.at_stage("direct solver"))
}

fn expected_spacing(pipe: &Pipeline, epsilon: f64) -> Result<f64> {
    let e_mid = 0.5 * (pipe.scenario.j.0 + pipe.scenario.j.1);
    let geom = geometry::build_cross(&pipe.model, &pipe.setup, e_mid, false)?;
    let pp = actions::phase_derivative(&pipe.model, &geom)?.abs();
    Ok(std::f64::consts::PI * epsilon / pp)
}

/// One predicted level matched against its direct trace.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub l: i64,
    pub energy_bs: f64,
    pub mean_direct: f64,
    pub mean_error: f64,
    pub mean_tolerance: f64,
    pub amplitude_pred: f64,
    pub amplitude_fit: f64,
    pub amplitude_ratio: f64,
    pub fitted_period: f64,
    pub period_tolerance: f64,
    pub periodicity_defect: f64,
    pub fit_rms: f64,
    pub resolvable: bool,
    pub interior: bool,
}

/// Match BS levels to direct traces (nearest mean) and assemble the
/// per-level comparison.
pub fn compare_eps(
    pipe: &Pipeline,
    prediction: &SpectralPrediction,
    sweep: &SweepResult,
) -> Result<Vec<ComparisonRow>> {
    let (a, b) = pipe.scenario.j;
    let eps = prediction.epsilon;
    let mut rows = Vec::new();
    for level in &prediction.levels {
        let (ti, trace) = sweep
            .traces
            .iter()
            .enumerate()
            .min_by(|(_, p), (_, q)| {
                (p.mean - level.energy)
                    .abs()
                    .partial_cmp(&(q.mean - level.energy).abs())
                    .unwrap()
            })
            .ok_or_else(|| Error::Numeric("no direct traces to compare".into()))?;
        let mean_error = (trace.mean - level.energy).abs();
        if mean_error > 0.4 * expected_spacing(pipe, eps)? {
            return Err(Error::Numeric(format!(
                "BS level l = {} at {:.9} has no direct counterpart (nearest mean {:.9})",
                level.l, level.energy, trace.mean
            )));
        }
        let resolvable = level.amplitude > 10.0 * trace.fit_rms
            && level.amplitude > sweep.discretization_floor;
        let boundary_guard = 2.0 * level.amplitude + 10.0 * sweep.discretization_floor;
        let interior =
            (level.energy - a).abs() > boundary_guard && (b - level.energy).abs() > boundary_guard;
        rows.push(ComparisonRow {
            l: level.l,
            energy_bs: level.energy,
            mean_direct: trace.mean,
            mean_error,
            mean_tolerance: 0.05 * eps,
            amplitude_pred: level.amplitude,
            amplitude_fit: trace.amplitude,
            amplitude_ratio: trace.amplitude / level.amplitude,
            fitted_period: trace.fitted_period,
            period_tolerance: 0.02 * eps,
            periodicity_defect: sweep.periodicity_defect[ti],
            fit_rms: trace.fit_rms,
            resolvable,
            interior,
        });
    }
    Ok(rows)
}

/// Slope fit core: given (ε, amplitude, |Φ'|) samples, regress
/// y = ln A + ln(|Φ'|/ε) against x = 1/ε; the slope is -S.
pub fn fit_tunneling_slope(points: &[(f64, f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "tunneling fit needs at least 3 resolvable points, got {}",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| p.1.ln() + (p.2 / p.0).ln())
        .collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    Ok((-slope, intercept))
}

#[derive(Debug, Clone, Serialize)]
pub struct TunnelingFit {
    pub tracked_energy: f64,
    pub s_fitted: f64,
    pub s_analytic: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    /// (ε, fitted amplitude, |Φ'| at the tracked level).
    pub points: Vec<(f64, f64, f64)>,
}

/// Track the level nearest the center of J across the ε list and fit the
/// tunneling slope from the direct-solver amplitudes.
pub fn tunneling_fit(
    pipe: &Pipeline,
    runs: &[(SpectralPrediction, Vec<ComparisonRow>)],
) -> Result<TunnelingFit> {
    let e_star_target = 0.5 * (pipe.scenario.j.0 + pipe.scenario.j.1);
    let mut points = Vec::new();
    let mut tracked_energy = e_star_target;
    let mut smallest_eps = f64::INFINITY;
    for (pred, rows) in runs {
        let row = rows
            .iter()
            .filter(|r| r.resolvable && r.interior)
            .min_by(|p, q| {
                (p.energy_bs - e_star_target)
                    .abs()
                    .partial_cmp(&(q.energy_bs - e_star_target).abs())
                    .unwrap()
            });
        if let Some(r) = row {
            let level = pred
                .levels
                .iter()
                .find(|l| l.l == r.l)
                .expect("comparison row refers to a predicted level");
            points.push((pred.epsilon, r.amplitude_fit, level.phi_prime_at.abs()));
            if pred.epsilon < smallest_eps {
                smallest_eps = pred.epsilon;
                tracked_energy = r.energy_bs;
            }
        }
    }
    let (s_fitted, _) = fit_tunneling_slope(&points)?;
    let geom = geometry::build_cross(&pipe.model, &pipe.setup, tracked_energy, true)?;
    let s_analytic = actions::action_s(&pipe.model, &geom)?;
    Ok(TunnelingFit {
        tracked_energy,
        s_fitted,
        s_analytic,
        relative_error: (s_fitted - s_analytic).abs() / s_analytic,
        tolerance: 0.10,
        points,
    })
}

/// C^∞ bump exp(-1/(1-u²)) on (lo, hi), vanishing outside.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Bump {
    pub lo: f64,
    pub hi: f64,
}

impl Bump {
    pub fn eval(&self, e: f64) -> f64 {
        let u = (2.0 * e - (self.lo + self.hi)) / (self.hi - self.lo);
        if u.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - u * u)).exp()
        }
    }

    pub fn sup_norm(&self) -> f64 {
        (-1.0f64).exp()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceCheck {
    pub epsilon: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub difference: f64,
    pub normalized: f64,
    pub bound: f64,
}

/// Trace formula check: lhs = ∫₀^ε tr f(H_u) du (φ-quadrature of the direct
/// spectra, scaled by ε), rhs = (1/2π)∫∫ f(W(u)+E(κ)) dκ du over band B.
pub fn trace_check(
    pipe: &Pipeline,
    sweep: &SweepResult,
    bump: Bump,
) -> Result<TraceCheck> {
    let (a, b) = pipe.scenario.j;
    if bump.lo <= a || bump.hi >= b {
        return Err(Error::Config(format!(
            "bump support [{}, {}] must lie strictly inside J = [{a}, {b}]",
            bump.lo, bump.hi
        )));
    }
    let eps = sweep.epsilon;
    // φ-quadrature: uniform grid over the fundamental domain, periodic mean
    let mean: f64 = sweep
        .spectra
        .iter()
        .map(|evs| evs.iter().map(|&e| bump.eval(e)).sum::<f64>())
        .sum::<f64>()
        / sweep.spectra.len() as f64;
    let lhs = eps * mean;
    let rhs = trace_check_rhs(pipe, bump)?;
    let difference = lhs - rhs;
    Ok(TraceCheck {
        epsilon: eps,
        lhs,
        rhs,
        difference,
        normalized: difference.abs() / eps,
        bound: 0.5 * eps * bump.sup_norm(),
    })
}

/// rhs of the trace formula: (1/π)∫₀^π ∫ f(E(θ) + W(u)) du dθ with E(θ) the
/// band function of B inverted from the in-band phase.
pub fn trace_check_rhs(pipe: &Pipeline, bump: Bump) -> Result<f64> {
    let setup = &pipe.setup;
    let bands = &pipe.model.bands;
    let (lo, hi) = bands.band(setup.band);
    // u-window: wherever E(θ) + W(u) can reach supp f
    let geom_hi = geometry::build_cross(&pipe.model, setup, bump.hi, false)
        .or_else(|_| geometry::build_cross(&pipe.model, setup, pipe.scenario.j.1, false))?;
    let u_max = geom_hi.phi_r_minus.abs().max(geom_hi.phi_r_plus.abs()) + 2.0;

    let inner = |theta: f64| -> Complex64 {
        let e_theta = match invert_band_function(bands, setup.band, theta, lo, hi) {
            Ok(v) => v,
            Err(_) => return Complex64::new(f64::NAN, 0.0),
        };
        let f_u = |u: f64| {
            Complex64::new(
                bump.eval(e_theta + pipe.model.w.eval_real(u)),
                0.0,
            )
        };
        integrate_refining(&f_u, -u_max, u_max, 1e-10).unwrap_or(Complex64::new(f64::NAN, 0.0))
    };
    let total = integrate_refining(&inner, 0.0, std::f64::consts::PI, 1e-9)?;
    if !total.re.is_finite() {
        return Err(Error::Numeric("trace rhs integrand failed".into()));
    }
    Ok(total.re / std::f64::consts::PI)
}

/// E(θ): invert the in-band phase over band n by bisection.
fn invert_band_function(
    bands: &BandStructure,
    band: usize,
    theta: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let mut a = lo + 1e-13;
    let mut b = hi - 1e-13;
    if theta <= 0.0 {
        return Ok(lo);
    }
    if theta >= std::f64::consts::PI {
        return Ok(hi);
    }
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        let t = bands.theta_in_band(band, mid)?;
        if t < theta {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-12 * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeCheckRow {
    pub epsilon: f64,
    pub l: i64,
    pub energy_bs: f64,
    pub energy_harmonic: f64,
    pub ratio: f64,
}

/// Edge-asymptotic check on a shallow-well scenario: compare BS levels near
/// the collapsed cross with the harmonic formula (actions only).
pub fn edge_check(scenario: Scenario, l_list: &[i64]) -> Result<Vec<EdgeCheckRow>> {
    let pipe = prepare(scenario)?;
    let setup = &pipe.setup;
    let edge_index = pipe
        .model
        .bands
        .edges()
        .iter()
        .position(|&e| (e - setup.e_r).abs() < 1e-9)
        .ok_or_else(|| Error::Numeric("E_r is not a computed band edge".into()))?;
    let side = if setup.e_r_is_lower { Side::Above } else { Side::Below };
    let d_i = edge_slope(&pipe.model.bands, edge_index, side)?;
    let w0 = pipe.model.w.eval_real(setup.extremum.position);
    let e_bot = setup.e_r + w0;

    let mut rows = Vec::new();
    for &eps in &pipe.scenario.epsilons {
        let pred = quantize::bohr_sommerfeld_levels(
            &pipe.model,
            setup,
            pipe.scenario.j,
            eps,
            0.0,
            false,
        )?;
        let harmonic = quantize::edge_asymptotic_levels(setup, w0, d_i, eps, l_list);
        for (&l, &eh) in l_list.iter().zip(harmonic.iter()) {
            let level = pred.levels.iter().find(|lv| lv.l == l).ok_or_else(|| {
                Error::Numeric(format!("level l = {l} not inside J at ε = {eps}"))
            })?;
            rows.push(EdgeCheckRow {
                epsilon: eps,
                l,
                energy_bs: level.energy,
                energy_harmonic: eh,
                ratio: (level.energy - e_bot) / (eh - e_bot),
            });
        }
    }
    Ok(rows)
}

/// One named pass/fail entry of the report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonReport {
    pub epsilon: f64,
    pub grid: GridSpec,
    pub discretization_floor: f64,
    pub prediction: SpectralPrediction,
    pub comparisons: Vec<ComparisonRow>,
    pub trace: TraceCheck,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: Scenario,
    pub assumptions_ok: bool,
    pub assumption_checked: Vec<String>,
    pub actions_sweep: Vec<ActionRow>,
    pub per_epsilon: Vec<EpsilonReport>,
    pub tunneling: TunnelingFit,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ActionRow {
    pub energy: f64,
    pub phi: f64,
    pub action: f64,
    pub phi_d: f64,
    pub phi_prime: f64,
    pub residual_im: f64,
}

impl From<ActionValues> for ActionRow {
    fn from(v: ActionValues) -> Self {
        ActionRow {
            energy: v.energy,
            phi: v.phi,
            action: v.action,
            phi_d: v.phi_d,
            phi_prime: v.phi_prime,
            residual_im: v.residual_im,
        }
    }
}

/// Full pipeline for the scenario: every stage, with the per-criterion
/// checks the report carries. Deterministic for a fixed scenario.
pub fn run(scenario: Scenario) -> Result<Report> {
    let pipe = prepare(scenario)?;
    let sweep_rows: Vec<ActionRow> = actions_sweep(&pipe, 50)?
        .into_iter()
        .map(ActionRow::from)
        .collect();

    let bump = pipe
        .scenario
        .trace_bump
        .map(|(lo, hi)| Bump { lo, hi })
        .unwrap_or_else(|| {
            let (a, b) = pipe.scenario.j;
            let w = b - a;
            Bump {
                lo: a + 0.2 * w,
                hi: b - 0.2 * w,
            }
        });

    let mut per_epsilon = Vec::new();
    let mut runs = Vec::new();
    let mut epsilons = pipe.scenario.epsilons.clone();
    epsilons.sort_by(|p, q| q.partial_cmp(p).unwrap());
    for &eps in &epsilons {
        let preliminary = predict(&pipe, eps, 0.0)?;
        let min_amp = preliminary
            .levels
            .iter()
            .map(|l| l.amplitude)
            .filter(|a| a.is_finite() && *a > 0.0)
            .fold(f64::INFINITY, f64::min);
        let grid = choose_grid(&pipe, eps, if min_amp.is_finite() { min_amp } else { 1e-6 })?;
        let sweep = direct_sweep(&pipe, eps, grid)?;
        let prediction = predict(&pipe, eps, sweep.discretization_floor)?;
        let comparisons = compare_eps(&pipe, &prediction, &sweep)?;
        let trace = trace_check(&pipe, &sweep, bump)?;
        per_epsilon.push(EpsilonReport {
            epsilon: eps,
            grid,
            discretization_floor: sweep.discretization_floor,
            prediction: prediction.clone(),
            comparisons: comparisons.clone(),
            trace,
        });
        runs.push((prediction, comparisons));
    }
    let tunneling = tunneling_fit(&pipe, &runs)?;

    let checks = assemble_checks(&sweep_rows, &per_epsilon, &tunneling, &pipe)?;
    Ok(Report {
        scenario: pipe.scenario.clone(),
        assumptions_ok: pipe.assumptions.hj_ok,
        assumption_checked: pipe.assumptions.checked.clone(),
        actions_sweep: sweep_rows,
        per_epsilon,
        tunneling,
        checks,
    })
}

fn assemble_checks(
    action_rows: &[ActionRow],
    per_eps: &[EpsilonReport],
    fit: &TunnelingFit,
    pipe: &Pipeline,
) -> Result<Vec<CheckResult>> {
    let mut checks = Vec::new();
    let sign_expected = (pipe.setup.e_i - pipe.setup.e_r).signum();

    let worst_resid = action_rows.iter().map(|r| r.residual_im).fold(0.0, f64::max);
    checks.push(CheckResult {
        name: "action-reality-residual".into(),
        value: worst_resid,
        tolerance: 1e-7,
        pass: worst_resid <= 1e-7,
        detail: "max imaginary residue of Phi, S, Phi_d over the J sweep".into(),
    });
    let positivity_ok = action_rows.iter().all(|r| r.phi > 0.0 && r.action > 0.0);
    checks.push(CheckResult {
        name: "action-positivity".into(),
        value: if positivity_ok { 1.0 } else { 0.0 },
        tolerance: 1.0,
        pass: positivity_ok,
        detail: "Phi > 0 and S > 0 across the sweep".into(),
    });
    let sign_ok = action_rows
        .iter()
        .all(|r| r.phi_prime.signum() == sign_expected);
    checks.push(CheckResult {
        name: "phi-prime-sign".into(),
        value: if sign_ok { 1.0 } else { 0.0 },
        tolerance: 1.0,
        pass: sign_ok,
        detail: "sign(Phi') = sign(E_i - E_r)".into(),
    });

    let mut prev_norm = f64::INFINITY;
    let mut mean_ok = true;
    let mut monotone_ok = true;
    for rep in per_eps {
        let interior: Vec<&ComparisonRow> =
            rep.comparisons.iter().filter(|r| r.interior).collect();
        let worst = interior
            .iter()
            .map(|r| r.mean_error)
            .fold(0.0f64, f64::max);
        mean_ok &= interior.iter().all(|r| r.mean_error <= r.mean_tolerance);
        let norm = worst / rep.epsilon;
        if norm > prev_norm + 1e-12 {
            monotone_ok = false;
        }
        prev_norm = norm;
        checks.push(CheckResult {
            name: format!("quantization-vs-direct-eps-{}", rep.epsilon),
            value: worst,
            tolerance: 0.05 * rep.epsilon,
            pass: worst <= 0.05 * rep.epsilon,
            detail: format!("{} interior levels", interior.len()),
        });
    }
    checks.push(CheckResult {
        name: "quantization-error-monotone".into(),
        value: if monotone_ok { 1.0 } else { 0.0 },
        tolerance: 1.0,
        pass: monotone_ok && mean_ok,
        detail: "normalized mean error non-increasing as epsilon decreases".into(),
    });

    let mut prev_trace = f64::INFINITY;
    let mut trace_monotone = true;
    for rep in per_eps {
        if rep.trace.normalized > prev_trace + 1e-12 {
            trace_monotone = false;
        }
        prev_trace = rep.trace.normalized;
        checks.push(CheckResult {
            name: format!("trace-formula-eps-{}", rep.epsilon),
            value: rep.trace.difference.abs(),
            tolerance: rep.trace.bound,
            pass: rep.trace.difference.abs() <= rep.trace.bound,
            detail: format!("lhs = {:.9e}, rhs = {:.9e}", rep.trace.lhs, rep.trace.rhs),
        });
    }
    checks.push(CheckResult {
        name: "trace-formula-monotone".into(),
        value: if trace_monotone { 1.0 } else { 0.0 },
        tolerance: 1.0,
        pass: trace_monotone,
        detail: "|lhs - rhs|/eps non-increasing over the epsilon list".into(),
    });

    checks.push(CheckResult {
        name: "tunneling-slope".into(),
        value: fit.relative_error,
        tolerance: fit.tolerance,
        pass: fit.relative_error <= fit.tolerance,
        detail: format!("S_fitted = {:.6}, S(E*) = {:.6}", fit.s_fitted, fit.s_analytic),
    });

    if let Some(rep) = per_eps.first() {
        let worst_ratio = rep
            .comparisons
            .iter()
            .filter(|r| r.resolvable && r.interior)
            .map(|r| r.amplitude_ratio.max(1.0 / r.amplitude_ratio))
            .fold(1.0f64, f64::max);
        checks.push(CheckResult {
            name: "amplitude-envelope".into(),
            value: worst_ratio,
            tolerance: 2.0,
            pass: worst_ratio <= 2.0,
            detail: format!("largest epsilon = {}", rep.epsilon),
        });
    }

    let mut period_ok = true;
    let mut periodicity_ok = true;
    for rep in per_eps {
        for r in rep.comparisons.iter().filter(|r| r.resolvable && r.interior) {
            period_ok &= (r.fitted_period - rep.epsilon).abs() <= r.period_tolerance;
            periodicity_ok &= r.periodicity_defect <= rep.discretization_floor.max(1e-12);
        }
    }
    checks.push(CheckResult {
        name: "oscillation-period".into(),
        value: if period_ok { 1.0 } else { 0.0 },
        tolerance: 1.0,
        pass: period_ok,
        detail: "fitted period within 2% of epsilon for resolvable levels".into(),
    });
    checks.push(CheckResult {
        name: "phi-periodicity".into(),
        value: if periodicity_ok { 1.0 } else { 0.0 },
        tolerance: 1.0,
        pass: periodicity_ok,
        detail: "|E_l(0) - E_l(eps)| below the discretization floor".into(),
    });

    Ok(checks)
}

/// CSV row formatting used by the CLI (fixed precision, reproducible).
pub fn fmt(v: f64) -> String {
    format!("{v:.15e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_slope_fit_recovers_exactly() {
        // amplitudes generated exactly as eps*exp(-S0/eps)/phi'
        let s0 = 0.1375;
        let phip = 2.9;
        let points: Vec<(f64, f64, f64)> = [0.05, 0.03, 0.02, 0.015]
            .iter()
            .map(|&eps| (eps, eps * (-s0 / eps as f64).exp() / phip, phip))
            .collect();
        let (s, intercept) = fit_tunneling_slope(&points).unwrap();
        assert!((s - s0).abs() <= 1e-10, "S = {s}");
        assert!(intercept.abs() <= 1e-10);
    }

    #[test]
    fn slope_fit_requires_three_points() {
        let points = vec![(0.05, 1e-3, 2.0), (0.03, 1e-4, 2.0)];
        assert!(matches!(
            fit_tunneling_slope(&points),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn bump_is_a_bump() {
        let b = Bump { lo: -1.0, hi: 1.0 };
        assert_eq!(b.eval(-1.0), 0.0);
        assert_eq!(b.eval(1.5), 0.0);
        assert!((b.eval(0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(b.eval(0.5) > 0.0 && b.eval(0.5) < b.eval(0.0));
    }

    #[test]
    fn gate_rejects_bad_geometry_before_solvers() {
        // J overlapping band 1 must abort in prepare()
        let mut s = Scenario::default_example();
        s.j = (-0.5, 1.0);
        s.trace_bump = None;
        let err = prepare(s).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("assumptions"), "{msg}");
    }
}
