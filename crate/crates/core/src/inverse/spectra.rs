//! Step 2: Dirichlet-Dirichlet and Neumann-Dirichlet square-root eigenvalues
//! of one edge as zeros of the truncated characteristic functions
//! `S_N(rho, L)` and `phi_N(rho, L)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nsbf::{eval_truncated, Family, NsbfCoeffSet};
use crate::roots::real_roots;

/// Both spectra of one edge, as square roots `rho` of the eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPair {
    pub edge: usize,
    /// Dirichlet-Dirichlet, ascending.
    pub mu: Vec<f64>,
    /// Neumann-Dirichlet, ascending.
    pub nu: Vec<f64>,
    /// Roots discarded from the tail after an interlacing violation.
    pub dropped: usize,
}

impl SpectrumPair {
    pub fn k_d(&self) -> usize {
        self.mu.len()
    }

    pub fn k_n(&self) -> usize {
        self.nu.len()
    }

    /// First `k` (1-based) with `nu_k < mu_k < nu_{k+1}` failing, if any.
    pub fn first_interlacing_violation(&self) -> Option<usize> {
        first_violation(&self.mu, &self.nu)
    }

    /// Whether every `mu_k` lies within `2 + q_l1/2` of `k pi / L`.
    pub fn asymptotically_sane(&self, length: f64, q_l1: f64) -> bool {
        let c = 2.0 + 0.5 * q_l1;
        self.mu
            .iter()
            .enumerate()
            .all(|(k0, &mu)| (mu - (k0 + 1) as f64 * std::f64::consts::PI / length).abs() < c)
    }
}

fn first_violation(mu: &[f64], nu: &[f64]) -> Option<usize> {
    let k_max = mu.len().min(nu.len());
    for k0 in 0..k_max {
        let ok = nu[k0] < mu[k0] && nu.get(k0 + 1).is_none_or(|&next| mu[k0] < next);
        if !ok {
            return Some(k0 + 1);
        }
    }
    // a surplus of more than one nu below the last mu also breaks the pattern
    if nu.len() > mu.len() + 1 {
        return Some(mu.len() + 1);
    }
    if mu.len() > nu.len() {
        return Some(nu.len() + 1);
    }
    None
}

/// Zeros of `S_N(., L)` and `phi_N(., L)` on `(0, rho_max]`.
///
/// On an interlacing violation at index `k > max(20, 2 N_c)` both sequences
/// are cut to their first `k - 1` entries; earlier violations are errors.
pub fn extract_spectra(coeffs: &NsbfCoeffSet, rho_max: f64, n_c: usize) -> Result<SpectrumPair> {
    let g = coeffs.g.as_deref().ok_or(Error::MissingCoefficients("g"))?;
    let s = coeffs.s.as_deref().ok_or(Error::MissingCoefficients("s"))?;
    if g.len() != s.len() {
        return Err(Error::InvalidInput(format!(
            "endpoint coefficient lengths differ: {} vs {}",
            g.len(),
            s.len()
        )));
    }
    let len = coeffs.x;
    if !(rho_max > 0.0 && rho_max.is_finite()) {
        return Err(Error::InvalidInput(format!("rho_max must be positive, got {rho_max}")));
    }
    let step = std::f64::consts::PI / (8.0 * len);
    let real = |family: Family| move |r: f64| Ok(eval_truncated(coeffs, family, Complex64::new(r, 0.0), len)?.re);
    let mut mu = real_roots(real(Family::S), 0.0, rho_max, step, 1e-10)?;
    let mut nu = real_roots(real(Family::Phi), 0.0, rho_max, step, 1e-10)?;
    mu.retain(|&r| r > 0.0);
    nu.retain(|&r| r > 0.0);

    let mut dropped = 0;
    if let Some(k) = first_violation(&mu, &nu) {
        let floor = 20.max(2 * n_c);
        if k <= floor {
            let detail = format!(
                "nu_{k} = {:?}, mu_{k} = {:?}, nu_{} = {:?}",
                nu.get(k - 1),
                mu.get(k - 1),
                k + 1,
                nu.get(k)
            );
            return Err(Error::Interlacing {
                edge: coeffs.edge,
                index: k,
                detail,
            });
        }
        let keep = k - 1;
        dropped = mu.len().saturating_sub(keep) + nu.len().saturating_sub(keep);
        mu.truncate(keep);
        nu.truncate(keep);
    }
    Ok(SpectrumPair {
        edge: coeffs.edge,
        mu,
        nu,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn free_edge_of_length_pi() {
        let set = NsbfCoeffSet::endpoint(1, PI, vec![0.0; 10], vec![0.0; 10]);
        let sp = extract_spectra(&set, 30.7, 9).unwrap();
        assert_eq!(sp.k_d(), 30);
        assert_eq!(sp.k_n(), 31);
        for (k0, mu) in sp.mu.iter().enumerate() {
            assert!((mu - (k0 + 1) as f64).abs() < 1e-9);
        }
        for (k0, nu) in sp.nu.iter().enumerate() {
            assert!((nu - (k0 as f64 + 0.5)).abs() < 1e-9);
        }
        assert_eq!(sp.first_interlacing_violation(), None);
        assert!(sp.asymptotically_sane(PI, 0.0));
    }

    #[test]
    fn early_violation_is_an_error() {
        assert_eq!(first_violation(&[1.0, 2.0], &[0.5, 2.5]), Some(2));
        assert_eq!(first_violation(&[1.0, 2.0], &[0.5, 1.5, 2.5]), None);
        assert_eq!(first_violation(&[1.0, 2.0], &[1.5]), Some(1));
    }
}
