//! Command-line driver: band structure, cross geometry, action sweeps,
//! level predictions, direct diagonalization and the cross-validation
//! checks, all from a JSON scenario file. Exit code 0 iff every check
//! selected by the subcommand passes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adiabloch::error::Result;
use adiabloch::experiments::{self, fmt, Bump, Pipeline};
use adiabloch::geometry;
use adiabloch::quasimomentum::{quasimomentum, QuasiMomentumBranch};
use adiabloch::scenario::Scenario;

#[derive(Parser)]
#[command(name = "adiabloch", about = "Gap eigenvalues of slowly perturbed periodic Schrödinger operators", version)]
struct Cli {
    /// Scenario JSON file; the built-in worked example when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discriminant and quasi-momentum over an energy grid + edge list.
    Bands {
        /// Grid step in energy.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
    },
    /// Cross geometry (turning points, sigma, phi_i) at one energy.
    Geometry {
        /// Energy; midpoint of J when omitted.
        #[arg(long)]
        energy: Option<f64>,
        /// Also write an SVG sketch of the cross.
        #[arg(long)]
        svg: bool,
    },
    /// Action coefficients over a J-grid (CSV).
    Actions {
        #[arg(long, default_value_t = 50)]
        grid: usize,
    },
    /// Bohr-Sommerfeld levels and oscillation amplitudes (JSON).
    Predict,
    /// Direct finite-difference eigenvalues over the phi sweep (CSV).
    Direct,
    /// Full comparison report: predictions vs direct solver (JSON).
    Compare,
    /// Tunneling-slope fit across the epsilon list.
    TunnelingFit,
    /// Trace-formula check at each epsilon.
    TraceCheck,
    /// Harmonic edge-asymptotic check (actions only).
    EdgeCheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_scenario(path: &Option<PathBuf>, fallback_edge: bool) -> Result<Scenario> {
    match path {
        Some(p) => Scenario::from_json(&fs::read_to_string(p)?),
        None if fallback_edge => Ok(Scenario::edge_example()),
        None => Ok(Scenario::default_example()),
    }
}

fn ensure_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    ensure_out(&cli.out)?;
    match cli.command {
        Command::Bands { step } => {
            let scenario = load_scenario(&cli.scenario, false)?;
            let pipe = experiments::prepare(scenario)?;
            cmd_bands(&pipe, step, &cli.out)
        }
        Command::Geometry { energy, svg } => {
            let scenario = load_scenario(&cli.scenario, false)?;
            let pipe = experiments::prepare(scenario)?;
            cmd_geometry(&pipe, energy, svg, &cli.out)
        }
        Command::Actions { grid } => {
            let scenario = load_scenario(&cli.scenario, false)?;
            let pipe = experiments::prepare(scenario)?;
            cmd_actions(&pipe, grid, &cli.out)
        }
        Command::Predict => {
            let scenario = load_scenario(&cli.scenario, false)?;
            let pipe = experiments::prepare(scenario)?;
            cmd_predict(&pipe, &cli.out)
        }
        Command::Direct => {
            let scenario = load_scenario(&cli.scenario, false)?;
            let pipe = experiments::prepare(scenario)?;
            cmd_direct(&pipe, &cli.out)
        }
        Command::Compare => {
            let scenario = load_scenario(&cli.scenario, false)?;
            cmd_compare(scenario, &cli.out)
        }
        Command::TunnelingFit => {
            let scenario = load_scenario(&cli.scenario, false)?;
            cmd_tunneling(scenario, &cli.out)
        }
        Command::TraceCheck => {
            let scenario = load_scenario(&cli.scenario, false)?;
            cmd_trace(scenario, &cli.out)
        }
        Command::EdgeCheck => {
            let scenario = load_scenario(&cli.scenario, true)?;
            cmd_edge(scenario, &cli.out)
        }
    }
}

fn cmd_bands(pipe: &Pipeline, step: f64, out: &Path) -> Result<bool> {
    let bands = &pipe.model.bands;
    let lo = bands.edges()[0] - 3.0;
    let hi = *bands.edges().last().unwrap();
    let n = ((hi - lo) / step).ceil() as usize;
    let branch = QuasiMomentumBranch::default();
    let rows = adiabloch::exec::map_range(n, |i| {
        let e = lo + step * i as f64;
        let d = bands.discriminant_real(e).unwrap_or(f64::NAN);
        let k = quasimomentum(bands, e, branch)
            .map(|k| (k.re(), k.im()))
            .unwrap_or((f64::NAN, f64::NAN));
        (e, d, k)
    });
    let mut csv = String::from("E,delta,re_k,im_k\n");
    for (e, d, (re, im)) in rows {
        csv.push_str(&format!("{},{},{},{}\n", fmt(e), fmt(d), fmt(re), fmt(im)));
    }
    fs::write(out.join("bands.csv"), csv)?;
    let edges = serde_json::json!({
        "edges": bands.edges(),
        "bands": bands.bands(),
        "gaps": bands.gaps().iter().map(|g| serde_json::json!({
            "lo": g.lo, "hi": g.hi, "open": g.open
        })).collect::<Vec<_>>(),
    });
    fs::write(out.join("edges.json"), serde_json::to_string_pretty(&edges)?)?;
    println!("bands.csv and edges.json written to {}", out.display());
    Ok(true)
}

fn cmd_geometry(pipe: &Pipeline, energy: Option<f64>, svg: bool, out: &Path) -> Result<bool> {
    let e = energy.unwrap_or(0.5 * (pipe.scenario.j.0 + pipe.scenario.j.1));
    let geom = geometry::build_cross(&pipe.model, &pipe.setup, e, true)?;
    let phi_i = geom.phi_i.expect("sigma traced");
    let doc = serde_json::json!({
        "energy": e,
        "phi_r": [geom.phi_r_minus, geom.phi_r_plus],
        "phi_i": [phi_i.re, phi_i.im],
        "sigma": geom.sigma_plus.iter().map(|n| n.z).collect::<Vec<_>>(),
        "branch_tag": pipe.setup.branch_tag,
        "E_r": pipe.setup.e_r,
        "E_i": pipe.setup.e_i,
        "band": pipe.setup.band,
    });
    fs::write(out.join("geometry.json"), serde_json::to_string_pretty(&doc)?)?;
    if svg {
        fs::write(
            out.join("cross.svg"),
            geometry::render_cross_svg(&geom, pipe.model.strip),
        )?;
    }
    println!("geometry.json written to {}", out.display());
    Ok(true)
}

fn cmd_actions(pipe: &Pipeline, grid: usize, out: &Path) -> Result<bool> {
    let rows = experiments::actions_sweep(pipe, grid)?;
    let mut csv = String::from("E,Phi,S,Phi_d,Phi_prime,residual_im\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt(r.energy),
            fmt(r.phi),
            fmt(r.action),
            fmt(r.phi_d),
            fmt(r.phi_prime),
            fmt(r.residual_im)
        ));
    }
    fs::write(out.join("actions.csv"), csv)?;
    println!("actions.csv written to {}", out.display());
    Ok(true)
}

fn cmd_predict(pipe: &Pipeline, out: &Path) -> Result<bool> {
    let mut docs = Vec::new();
    for &eps in &pipe.scenario.epsilons {
        let pred = experiments::predict(pipe, eps, 0.0)?;
        docs.push(serde_json::json!({
            "epsilon": eps,
            "levels": pred.levels.iter().map(|l| serde_json::json!({
                "l": l.l,
                "E": l.energy,
                "amplitude": l.amplitude,
                "S": l.action_at,
                "Phi_prime": l.phi_prime_at,
            })).collect::<Vec<_>>(),
        }));
    }
    fs::write(
        out.join("predict.json"),
        serde_json::to_string_pretty(&docs)?,
    )?;
    println!("predict.json written to {}", out.display());
    Ok(true)
}

fn cmd_direct(pipe: &Pipeline, out: &Path) -> Result<bool> {
    let mut csv = String::from("epsilon,phi,l,E\n");
    for &eps in &pipe.scenario.epsilons {
        let pred = experiments::predict(pipe, eps, 0.0)?;
        let min_amp = pred
            .levels
            .iter()
            .map(|l| l.amplitude)
            .filter(|a| a.is_finite() && *a > 0.0)
            .fold(f64::INFINITY, f64::min);
        let grid = experiments::choose_grid(pipe, eps, if min_amp.is_finite() { min_amp } else { 1e-6 })?;
        let sweep = experiments::direct_sweep(pipe, eps, grid)?;
        for (j, phi) in sweep.phis.iter().enumerate() {
            for (l, tr) in sweep.traces.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{l},{}\n",
                    fmt(eps),
                    fmt(*phi),
                    fmt(tr.energies[j])
                ));
            }
        }
    }
    fs::write(out.join("direct.csv"), csv)?;
    println!("direct.csv written to {}", out.display());
    Ok(true)
}

fn cmd_compare(scenario: Scenario, out: &Path) -> Result<bool> {
    let report = experiments::run(scenario)?;
    fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    let mut ok = true;
    for c in &report.checks {
        println!(
            "{} {}: value = {:.6e}, tolerance = {:.6e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
        ok &= c.pass;
    }
    println!("report.json written to {}", out.display());
    Ok(ok)
}

fn cmd_tunneling(scenario: Scenario, out: &Path) -> Result<bool> {
    let report = experiments::run(scenario)?;
    fs::write(
        out.join("tunneling.json"),
        serde_json::to_string_pretty(&report.tunneling)?,
    )?;
    let fitres = &report.tunneling;
    let pass = fitres.relative_error <= fitres.tolerance;
    println!(
        "{} tunneling-slope: S_fitted = {:.6}, S(E*) = {:.6}, rel err = {:.3e}",
        if pass { "PASS" } else { "FAIL" },
        fitres.s_fitted,
        fitres.s_analytic,
        fitres.relative_error
    );
    Ok(pass)
}

fn cmd_trace(scenario: Scenario, out: &Path) -> Result<bool> {
    let pipe = experiments::prepare(scenario)?;
    let bump = pipe
        .scenario
        .trace_bump
        .map(|(lo, hi)| Bump { lo, hi })
        .unwrap_or_else(|| {
            let (a, b) = pipe.scenario.j;
            let w = b - a;
            Bump { lo: a + 0.2 * w, hi: b - 0.2 * w }
        });
    let mut rows = Vec::new();
    let mut ok = true;
    let mut prev = f64::INFINITY;
    let mut epsilons = pipe.scenario.epsilons.clone();
    epsilons.sort_by(|p, q| q.partial_cmp(p).unwrap());
    for &eps in &epsilons {
        let pred = experiments::predict(&pipe, eps, 0.0)?;
        let min_amp = pred
            .levels
            .iter()
            .map(|l| l.amplitude)
            .filter(|a| a.is_finite() && *a > 0.0)
            .fold(f64::INFINITY, f64::min);
        let grid = experiments::choose_grid(&pipe, eps, if min_amp.is_finite() { min_amp } else { 1e-6 })?;
        let sweep = experiments::direct_sweep(&pipe, eps, grid)?;
        let tc = experiments::trace_check(&pipe, &sweep, bump)?;
        let pass = tc.difference.abs() <= tc.bound && tc.normalized <= prev + 1e-12;
        println!(
            "{} trace-check eps = {eps}: |lhs - rhs| = {:.3e} (bound {:.3e})",
            if pass { "PASS" } else { "FAIL" },
            tc.difference.abs(),
            tc.bound
        );
        ok &= pass;
        prev = tc.normalized;
        rows.push(tc);
    }
    fs::write(out.join("trace_check.json"), serde_json::to_string_pretty(&rows)?)?;
    Ok(ok)
}

fn cmd_edge(scenario: Scenario, out: &Path) -> Result<bool> {
    let rows = experiments::edge_check(scenario, &[0, 1, 2])?;
    fs::write(out.join("edge_check.json"), serde_json::to_string_pretty(&rows)?)?;
    let mut ok = true;
    let smallest = rows
        .iter()
        .map(|r| r.epsilon)
        .fold(f64::INFINITY, f64::min);
    for r in rows.iter().filter(|r| r.epsilon == smallest) {
        let pass = r.ratio >= 0.95 && r.ratio <= 1.05;
        println!(
            "{} edge-check l = {} at eps = {}: ratio = {:.5}",
            if pass { "PASS" } else { "FAIL" },
            r.l,
            r.epsilon,
            r.ratio
        );
        ok &= pass;
    }
    Ok(ok)
}
