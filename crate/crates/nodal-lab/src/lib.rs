//! Numerical laboratory for sign-changing multi-bump states of the
//! zero-mass scalar field equation
//!
//! ```text
//!     -Δu = f(u)  on ℝ^N,   N ≥ 5,
//! ```
//!
//! built around a positive radial ground state ω with polynomial decay
//! r^-(N-2). The crate provides:
//!
//! * a concrete nonlinearity family f(s) = |s|^(q-2) s / (1 + |s|^(q-p))
//!   together with growth/superlinearity diagnostics ([`model`]),
//! * a radial shooting solver for ω and its energy/decay constants
//!   ([`radial_ode`]),
//! * the rotation/swap orbit geometry in ℂ×ℂ×ℝ^(N-4) used to place signed
//!   copies of ω, with the exact and closed-form sign conditions on the
//!   number of copies ([`symmetry`]),
//! * dimension-reduced deterministic quadrature and seeded importance-sampled
//!   Monte Carlo for the interaction integrals ([`quadrature`]),
//! * the multi-bump test state, its scaling onto the natural constraint
//!   manifold, and two independent energy evaluations with certified
//!   comparison against the 2m·c0 threshold ([`ansatz`]),
//! * empirical verification suites for the pointwise inequalities and decay
//!   bounds that feed the energy expansion ([`verify`]),
//! * a deterministic CLI over all of the above ([`config`], [`cli`]).
//!
//! All stochastic estimates are reproducible: a run is a pure function of
//! (config, seed) and is bit-identical for any worker count.

pub mod ansatz;
pub mod cli;
pub mod config;
pub mod error;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod radial_ode;
pub mod symmetry;
pub(crate) mod util;
pub mod verify;

pub use error::{Error, Result};
