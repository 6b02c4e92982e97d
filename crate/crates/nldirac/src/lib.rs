//! Solitary waves of the Soler-type nonlinear Dirac equation and their
//! linearized spectra in spatial dimensions one to three.
//!
//! The crate builds radial solitary-wave profiles (closed-form reduction in
//! one dimension, Newton continuation from the nonrelativistic limit in
//! general), assembles the linearization at a wave, computes and classifies
//! its point spectrum, and follows the real eigenvalue pair that bifurcates
//! from the origin as the frequency approaches the mass threshold whenever
//! the nonlinearity power exceeds 2/n. A nonrelativistic (Schrödinger-type)
//! module provides the limiting ground states, their charge scaling, and the
//! limiting eigenvalue that seeds the bifurcation; a contraction-mapping
//! module certifies the eigenvalue against the limiting problem.
//!
//! Numerical substrate: cell-centered uniform radial grids with 6th-order
//! parity-aware finite differences and endpoint-corrected midpoint
//! quadrature (a Chebyshev collocation alternative is available), dense
//! LAPACK eigensolves with a canonical eigenvalue sort, and deterministic
//! artifacts throughout. Frequency and coupling sweeps are data-parallel via
//! rayon when the `parallel` feature (on by default) is enabled; a
//! sequential fallback is always compiled.

pub mod eig;
pub mod error;
pub mod grid;
pub mod lin;
pub mod nls;
pub mod ops;
pub mod perturb;
pub mod sweep;
pub mod vk;
pub mod waves;

pub use error::{NldError, Result};
