//! Rayon vs sequential throughput on the hot kernels: discriminant grids,
//! Sturm eigenvalue sweeps, and action sweeps over J.
//!
//! The library's own sweeps go through `exec::map_*` (rayon under the
//! default `parallel` feature); here both schedules run explicitly so one
//! `cargo bench` reports the comparison.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::prelude::*;

use adiabloch::direct::{build_operator, eigenvalues_in_window};
use adiabloch::geometry;
use adiabloch::hill::BandStructure;
use adiabloch::potentials::{AnalyticPerturbation, PeriodicPotential};
use adiabloch::{actions, experiments, scenario::Scenario};

fn discriminant_grid(c: &mut Criterion) {
    let v = PeriodicPotential::cosine(1, 2.0);
    let bs = BandStructure::compute(&v, 45.0).unwrap();
    let energies: Vec<f64> = (0..256).map(|i| -2.0 + 0.16 * i as f64).collect();
    let mut group = c.benchmark_group("discriminant_grid_256");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("schedule", "sequential"), |b| {
        b.iter(|| {
            let v: Vec<f64> = energies
                .iter()
                .map(|&e| bs.discriminant_real(e).unwrap())
                .collect();
            criterion::black_box(v)
        })
    });
    group.bench_function(BenchmarkId::new("schedule", "rayon"), |b| {
        b.iter(|| {
            let v: Vec<f64> = energies
                .par_iter()
                .map(|&e| bs.discriminant_real(e).unwrap())
                .collect();
            criterion::black_box(v)
        })
    });
    group.finish();
}

fn sturm_phi_sweep(c: &mut Criterion) {
    let v = PeriodicPotential::cosine(1, 2.0);
    let w = AnalyticPerturbation::lorentzian_well(9.0).unwrap();
    let eps = 0.05;
    let phis: Vec<f64> = (0..8).map(|j| eps * j as f64 / 8.0).collect();
    let solve = |phi: f64| {
        let op = build_operator(&v, &w, eps, phi, 400.0, 24, 1.0).unwrap();
        eigenvalues_in_window(&op, (-1.4, -0.7)).unwrap().count
    };
    let mut group = c.benchmark_group("sturm_phi_sweep_8");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("schedule", "sequential"), |b| {
        b.iter(|| {
            let n: usize = phis.iter().map(|&p| solve(p)).sum();
            criterion::black_box(n)
        })
    });
    group.bench_function(BenchmarkId::new("schedule", "rayon"), |b| {
        b.iter(|| {
            let n: usize = phis.par_iter().map(|&p| solve(p)).sum();
            criterion::black_box(n)
        })
    });
    group.finish();
}

fn action_sweep(c: &mut Criterion) {
    let pipe = experiments::prepare(Scenario::default_example()).unwrap();
    let energies: Vec<f64> = (0..8).map(|i| -1.35 + 0.08 * i as f64).collect();
    let eval = |e: f64| {
        let geom = geometry::build_cross(&pipe.model, &pipe.setup, e, true).unwrap();
        actions::compute(&pipe.model, &geom).unwrap().phi
    };
    let mut group = c.benchmark_group("action_sweep_8");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("schedule", "sequential"), |b| {
        b.iter(|| {
            let s: f64 = energies.iter().map(|&e| eval(e)).sum();
            criterion::black_box(s)
        })
    });
    group.bench_function(BenchmarkId::new("schedule", "rayon"), |b| {
        b.iter(|| {
            let s: f64 = energies.par_iter().map(|&e| eval(e)).sum();
            criterion::black_box(s)
        })
    });
    group.finish();
}

criterion_group!(benches, discriminant_grid, sturm_phi_sweep, action_sweep);
criterion_main!(benches);
