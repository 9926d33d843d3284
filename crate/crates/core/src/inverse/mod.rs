//! Recovery of the edge potentials from Weyl matrix samples.
//!
//! 1. endpoint coefficients `g_n(L)`, `s_n(L)` per row ([`endpoint`]);
//! 2. Dirichlet-Dirichlet and Neumann-Dirichlet roots ([`spectra`]);
//! 3. `t_n(0)`, 4. multipliers and 5. interior `g_0(x)` ([`two_spectra`]);
//! 6. `q = g_0'' / (g_0 + 1)` ([`potential`]).

pub mod endpoint;
pub mod pipeline;
pub mod potential;
pub mod spectra;
pub mod two_spectra;

pub use endpoint::{recover_endpoint_coeffs, required_samples, EndpointCoeffs};
pub use pipeline::{recover_edge, run_inverse_pipeline, EdgeFailure, EdgeOutcome, EdgeRecovery, InverseConfig, Stage};
pub use potential::{recover_potential, recover_potential_from_s0, ErrorMetrics, RecoveredPotential, Smoothing};
pub use spectra::{extract_spectra, SpectrumPair};
pub use two_spectra::{compute_multipliers, solve_interior, solve_t_coeffs, MultiplierSet, TCoefficients};
