//! Numerical laboratory for the stochastic Allen–Cahn equation with
//! multiplicative transport noise.
//!
//! The crate is organised bottom-up:
//!
//! * [`potential`] – the double-well potential `F`, the Modica–Mortola
//!   transform `G` and the surface tension constant.
//! * [`grid`] – rectangular grids on `(0,1)^n`, finite-difference operators,
//!   quadrature and the binary snapshot format.
//! * [`noise`] – finite-mode vector-field Brownian motion, its local
//!   characteristic and the Itô–Stratonovich correction fields.
//! * [`solver`] – pathwise time stepping (Itô Euler–Maruyama and
//!   Stratonovich Heun).
//! * [`flow`] – the stochastic-flow backend: the transformed random PDE
//!   solved in Lagrangian coordinates.
//! * [`diagnostics`] – energies, curvature, energy-identity residuals,
//!   `G`-transform diagnostics and interface extraction.
//! * [`initial`] – initial data families.
//! * [`ensemble`] – deterministic parallel Monte Carlo statistics.
//! * [`report`] – CSV output with deterministic float formatting.

pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod flow;
pub mod grid;
pub mod initial;
pub mod interp;
pub mod noise;
pub mod potential;
pub mod report;
pub mod rng;
pub mod solver;
pub mod stats;

pub use error::{Result, SacError};
