//! Steps 1-6 for every edge.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::endpoint::{recover_endpoint_coeffs, EndpointCoeffs};
use super::potential::{extrapolate, recover_potential, RecoveredPotential, Smoothing};
use super::spectra::{extract_spectra, SpectrumPair};
use super::two_spectra::{compute_multipliers, solve_interior, solve_t_coeffs, InteriorPoint, MultiplierSet, TCoefficients};
use crate::direct::WeylSample;
use crate::error::{Error, Result};
use crate::graph::grid_node;

/// Solver knobs of the inverse pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseConfig {
    /// Endpoint truncation `N`.
    pub order: usize,
    /// Interior truncation `N_c`; `None` means `N`.
    pub n_c: Option<usize>,
    /// Type-2 equations per spectral point.
    pub m_k: usize,
    /// Upper end of the root scan; `None` picks, per edge, enough range for
    /// `2(N_c+1) + 8` Neumann-Dirichlet roots.
    pub rho_max: Option<f64>,
    /// At most this many Neumann-Dirichlet roots enter the interior system.
    pub k_n: Option<usize>,
    pub svd_threshold: f64,
    /// Points of the uniform output grid on `[0, L]`, endpoints included.
    pub x_points: usize,
    /// Interior solves are restricted to `[margin L, (1 - margin) L]`.
    pub x_margin: f64,
    pub smoothing: Smoothing,
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            order: 9,
            n_c: None,
            m_k: 0,
            rho_max: None,
            k_n: None,
            svd_threshold: 1e-10,
            x_points: 151,
            x_margin: 0.01,
            smoothing: Smoothing {
                window: 11,
                degree: 4,
                pin_origin: true,
            },
        }
    }
}

impl InverseConfig {
    pub fn n_c(&self) -> usize {
        self.n_c.unwrap_or(self.order)
    }

    /// Scan limit for an edge of length `len`.
    pub fn rho_max_for(&self, len: f64) -> f64 {
        self.rho_max
            .unwrap_or_else(|| (2 * (self.n_c() + 1) + 8 + 1) as f64 * PI / len)
    }
}

/// Pipeline stage, for failure reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    EndpointCoefficients,
    Spectra,
    TCoefficients,
    Multipliers,
    Interior,
    Potential,
}

/// Everything computed for one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecovery {
    pub edge: usize,
    pub length: f64,
    pub endpoint: EndpointCoeffs,
    pub spectra: SpectrumPair,
    pub t: TCoefficients,
    pub multipliers: MultiplierSet,
    pub interior: Vec<InteriorPoint>,
    /// `g0(0)` extrapolated from the interior before being set to zero.
    pub g0_origin_extrapolated: f64,
    pub potential: RecoveredPotential,
}

impl EdgeRecovery {
    pub fn flagged_points(&self) -> usize {
        self.interior.iter().filter(|p| p.flagged).count()
    }

    pub fn max_interior_condition(&self) -> f64 {
        self.interior.iter().map(|p| p.condition).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFailure {
    pub edge: usize,
    pub stage: Stage,
    pub error: Error,
}

pub type EdgeOutcome = std::result::Result<EdgeRecovery, EdgeFailure>;

/// Output grid `x_m = m L / (n-1)`.
pub fn output_grid(len: f64, points: usize) -> Vec<f64> {
    (0..points).map(|m| grid_node(len, points, m)).collect()
}

/// Replaces flagged values by linear interpolation between the nearest
/// unflagged neighbours (constant continuation at the ends).
fn patch_flagged(x: &[f64], y: &mut [f64], flagged: &[bool]) {
    let good: Vec<usize> = (0..y.len()).filter(|&i| !flagged[i]).collect();
    if good.is_empty() {
        return;
    }
    for i in (0..y.len()).filter(|&i| flagged[i]) {
        let right = good.iter().position(|&g| g > i);
        y[i] = match right {
            None => y[*good.last().unwrap()],
            Some(0) => y[good[0]],
            Some(r) => {
                let (a, b) = (good[r - 1], good[r]);
                let t = (x[i] - x[a]) / (x[b] - x[a]);
                y[a] + t * (y[b] - y[a])
            }
        };
    }
}

/// Runs the pipeline for one edge (1-based) given all samples.
pub fn recover_edge(samples: &[WeylSample], lengths: &[f64], edge: usize, config: &InverseConfig) -> EdgeOutcome {
    let fail = |stage: Stage| move |error: Error| EdgeFailure { edge, stage, error };
    let len = lengths[edge - 1];
    let n_c = config.n_c();

    let endpoint = recover_endpoint_coeffs(samples, lengths, edge, config.order, config.m_k, config.svd_threshold)
        .map_err(fail(Stage::EndpointCoefficients))?;
    let spectra = extract_spectra(&endpoint.own(len), config.rho_max_for(len), n_c).map_err(fail(Stage::Spectra))?;
    let t = solve_t_coeffs(&spectra.mu, len, config.order, config.svd_threshold).map_err(fail(Stage::TCoefficients))?;
    let k_n = config.k_n.map_or(spectra.k_n(), |k| k.min(spectra.k_n()));
    let nu = &spectra.nu[..k_n];
    let multipliers = compute_multipliers(edge, &t.t0, nu, len).map_err(fail(Stage::Multipliers))?;

    let x = output_grid(len, config.x_points);
    let (lo, hi) = (config.x_margin * len, (1.0 - config.x_margin) * len);
    let inner: Vec<usize> = (0..x.len()).filter(|&m| x[m] >= lo - 1e-12 * len && x[m] <= hi + 1e-12 * len).collect();
    let xs: Vec<f64> = inner.iter().map(|&m| x[m]).collect();
    let interior = solve_interior(nu, &multipliers.beta, len, n_c, &xs, config.svd_threshold)
        .map_err(fail(Stage::Interior))?;

    let potential = (|| -> Result<_> {
        let mut g_in: Vec<f64> = interior.iter().map(|p| p.g[0]).collect();
        let flags: Vec<bool> = interior.iter().map(|p| p.flagged).collect();
        patch_flagged(&xs, &mut g_in, &flags);
        let mut g0 = vec![f64::NAN; x.len()];
        for (k, &m) in inner.iter().enumerate() {
            g0[m] = g_in[k];
        }
        let origin = extrapolate(&xs, &g_in, 0.0, config.smoothing)?;
        for m in 0..x.len() {
            if g0[m].is_nan() {
                // phi(0, 0) = 1 forces g0(0) = 0
                g0[m] = if x[m] == 0.0 {
                    0.0
                } else {
                    extrapolate(&xs, &g_in, x[m], config.smoothing)?
                };
            }
        }
        Ok((origin, recover_potential(edge, &x, &g0, config.smoothing)?))
    })()
    .map_err(fail(Stage::Potential))?;

    Ok(EdgeRecovery {
        edge,
        length: len,
        endpoint,
        spectra,
        t,
        multipliers,
        interior,
        g0_origin_extrapolated: potential.0,
        potential: potential.1,
    })
}

/// Recovers every edge independently; results are in edge order.
pub fn run_inverse_pipeline(samples: &[WeylSample], lengths: &[f64], config: &InverseConfig) -> Vec<EdgeOutcome> {
    (1..=lengths.len())
        .into_par_iter()
        .map(|i| recover_edge(samples, lengths, i, config))
        .collect()
}
