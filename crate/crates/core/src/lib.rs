//! Spectral analysis of slowly perturbed one-dimensional periodic
//! Schrödinger operators H = -d²/dx² + V(x) + W(εx + φ).
//!
//! The crate computes, for an energy window J inside a spectral gap of the
//! periodic operator:
//!
//! - the Hill discriminant, band edges and Bloch quasi-momentum of
//!   H₀ = -d²/dx² + V ([`hill`], [`quasimomentum`]);
//! - the geometry of the complex momentum κ(φ) = k(E - W(φ)): turning
//!   points, the branch point φ_i, the vertical curve σ ([`geometry`]);
//! - the phase Φ, tunneling action S, second phase Φ_d and Φ'
//!   ([`actions`]);
//! - the Bohr-Sommerfeld gap levels Φ(E) = ε(lπ + π/2) and the
//!   exponentially small amplitude ε·e^{-S/ε}/|Φ'| of their ε-periodic
//!   oscillation in φ ([`quantize`]);
//! - ground-truth eigenvalues from a Sturm-bisection finite-difference
//!   solver for cross-validation ([`direct`], [`experiments`]).
//!
//! Energy sweeps, φ sweeps and per-ε batches run data-parallel under the
//! default `parallel` feature (rayon) with bit-identical sequential
//! fallback when the feature is disabled.

pub mod actions;
pub mod direct;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod geometry;
pub mod hill;
pub mod ode;
pub mod potentials;
pub mod quadrature;
pub mod quantize;
pub mod quasimomentum;
pub mod scenario;
pub mod validation;

pub use error::{Error, Result};
