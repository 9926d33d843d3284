//! Steps 3-5: the two-spectra problem on one edge.
//!
//! `T(rho, x)` solves the edge equation with `T(L) = 0`, `T'(L) = 1`. At the
//! Dirichlet roots `mu_k` it vanishes at `x = 0`, which fixes `t_n(0)`; at the
//! Neumann-Dirichlet roots `nu_k` it is proportional to `phi`, which gives the
//! multipliers `beta_k` and then a linear system for `g_n(x)`, `t_n(x)` at
//! every interior point.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::tsvd_solve;
use crate::nsbf::{even_basis, odd_basis, odd_series};

fn real_even(order: usize, z: f64) -> Result<Vec<f64>> {
    Ok(even_basis(order, Complex64::new(z, 0.0))?.iter().map(|v| v.re).collect())
}

fn real_odd(order: usize, z: f64) -> Result<Vec<f64>> {
    Ok(odd_basis(order, Complex64::new(z, 0.0))?.iter().map(|v| v.re).collect())
}

/// `t_n(0)` with fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TCoefficients {
    pub t0: Vec<f64>,
    pub rank: usize,
    pub condition: f64,
    pub residual: f64,
}

/// Least-squares solution of `sum_n (-1)^n t_n(0) j_{2n+1}(mu_k L) = -sin(mu_k L)`.
pub fn solve_t_coeffs(mu: &[f64], length: f64, order: usize, svd_threshold: f64) -> Result<TCoefficients> {
    if mu.len() < order + 1 {
        return Err(Error::UnderDetermined {
            have: mu.len(),
            need: order + 1,
            detail: "Dirichlet-Dirichlet roots for the t-coefficient system".into(),
        });
    }
    let rows = mu.iter().map(|&m| real_odd(order, m * length)).collect::<Result<Vec<_>>>()?;
    let a = DMatrix::from_fn(mu.len(), order + 1, |r, c| rows[r][c]);
    let b = DVector::from_iterator(mu.len(), mu.iter().map(|&m| -(m * length).sin()));
    let sol = tsvd_solve(&a, &b, svd_threshold)?;
    Ok(TCoefficients {
        t0: sol.x,
        rank: sol.rank,
        condition: sol.condition,
        residual: sol.residual,
    })
}

/// `T_N(rho, 0)` for real `rho > 0`, using that odd-order `j` are odd.
pub fn t_at_origin(t0: &[f64], rho: f64, length: f64) -> Result<f64> {
    let z = rho * length;
    let series = odd_series(t0, Complex64::new(z, 0.0))?.re;
    Ok(-(z.sin() + series) / rho)
}

/// Multiplier constants `beta_k` with `phi(nu_k, .) = beta_k T(nu_k, .)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSet {
    pub edge: usize,
    pub beta: Vec<f64>,
}

impl MultiplierSet {
    /// Indices `k` (1-based) where `beta_k` and `beta_{k+1}` share a sign.
    /// For a clean spectrum the signs alternate.
    pub fn sign_irregularities(&self) -> Vec<usize> {
        self.beta
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].signum() == w[1].signum())
            .map(|(k0, _)| k0 + 1)
            .collect()
    }
}

pub fn compute_multipliers(edge: usize, t0: &[f64], nu: &[f64], length: f64) -> Result<MultiplierSet> {
    let beta = nu
        .iter()
        .enumerate()
        .map(|(k0, &v)| {
            let t = t_at_origin(t0, v, length)?;
            if !(t.abs() >= 1e-12) {
                return Err(Error::VanishingMultiplier { index: k0 + 1, nu: v });
            }
            Ok(1.0 / t)
        })
        .collect::<Result<_>>()?;
    Ok(MultiplierSet { edge, beta })
}

/// Result of the interior solve at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorPoint {
    pub x: f64,
    pub g: Vec<f64>,
    pub t: Vec<f64>,
    pub rank: usize,
    pub condition: f64,
    pub residual: f64,
    /// Numerically rank-deficient; the value should be replaced.
    pub flagged: bool,
}

/// Solves, at every `x`, the `K_N x 2(N_c+1)` system
///
/// ```text
/// sum (-1)^n g_n(x) j_2n(nu x) - beta/nu sum (-1)^n t_n(x) j_2n+1(nu (x-L))
///     = beta/nu sin(nu (x-L)) - cos(nu x)
/// ```
pub fn solve_interior(
    nu: &[f64],
    beta: &[f64],
    length: f64,
    n_c: usize,
    x_grid: &[f64],
    svd_threshold: f64,
) -> Result<Vec<InteriorPoint>> {
    if nu.len() != beta.len() {
        return Err(Error::InvalidInput(format!("{} roots but {} multipliers", nu.len(), beta.len())));
    }
    let unknowns = 2 * (n_c + 1);
    if nu.len() < n_c + 1 {
        return Err(Error::UnderDetermined {
            have: nu.len(),
            need: n_c + 1,
            detail: "Neumann-Dirichlet roots for the interior system".into(),
        });
    }
    x_grid
        .par_iter()
        .map(|&x| {
            let mut a = DMatrix::<f64>::zeros(nu.len(), unknowns);
            let mut b = DVector::<f64>::zeros(nu.len());
            for (k, (&v, &bt)) in nu.iter().zip(beta).enumerate() {
                let y = x - length;
                let even = real_even(n_c, v * x)?;
                let odd = real_odd(n_c, v * y)?;
                let w = bt / v;
                for n in 0..=n_c {
                    a[(k, n)] = even[n];
                    a[(k, n_c + 1 + n)] = -w * odd[n];
                }
                b[k] = w * (v * y).sin() - (v * x).cos();
            }
            let sol = tsvd_solve(&a, &b, svd_threshold)?;
            Ok(InteriorPoint {
                x,
                g: sol.x[..=n_c].to_vec(),
                t: sol.x[n_c + 1..].to_vec(),
                flagged: sol.rank < n_c + 1,
                rank: sol.rank,
                condition: sol.condition,
                residual: sol.residual,
            })
        })
        .collect()
}
