//! Step 1: endpoint coefficients `g_{i,n}(L_i)`, `s_{j,n}(L_j)` from rows of
//! the Weyl matrix.
//!
//! For row `i` and every sample the continuity condition between edges `i`
//! and `i+1` gives one equation in `g_i, s_i, s_{i+1}`; each further pair
//! `(j, j+1)` with `j = i+1, ..., i+M_k` adds one equation in `s_j, s_{j+1}`.
//! Indices are cyclic. Complex equations are split into real and imaginary
//! parts; the unknowns are real.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::direct::WeylSample;
use crate::error::{Error, Result};
use crate::graph::successor;
use crate::linalg::tsvd_solve;
use crate::nsbf::{even_basis, odd_basis, NsbfCoeffSet};

type C64 = Complex64;

/// Smallest number of spectral points for which the stacked system has at
/// least as many (complex) equations as unknowns:
/// `ceil((N+1)(M_k+3) / (M_k+1))`.
pub fn required_samples(order: usize, m_k: usize) -> usize {
    ((order + 1) * (m_k + 3)).div_ceil(m_k + 1)
}

/// Edges whose `s` coefficients enter the system for row `i`, in column order.
pub fn involved_edges(i: usize, m_k: usize, m: usize) -> Vec<usize> {
    let mut out = vec![i];
    let mut j = i;
    for _ in 0..m_k + 1 {
        j = successor(j, m);
        out.push(j);
    }
    out
}

/// Recovered endpoint coefficients for one row.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointCoeffs {
    pub edge: usize,
    pub order: usize,
    pub m_k: usize,
    /// `g_{i,n}(L_i)`
    pub g: Vec<f64>,
    /// `(j, s_{j,n}(L_j))` for every involved edge, own edge first.
    pub s: Vec<(usize, Vec<f64>)>,
    /// Real equations in the stacked system.
    pub equations: usize,
    pub rank: usize,
    pub condition: f64,
    /// `||A x - b|| / ||b||`
    pub residual: f64,
}

impl EndpointCoeffs {
    pub fn s_of(&self, j: usize) -> Option<&[f64]> {
        self.s.iter().find(|(e, _)| *e == j).map(|(_, v)| v.as_slice())
    }

    /// The `g`, `s` pair of the row's own edge as a coefficient set at `x = L`.
    pub fn own(&self, length: f64) -> NsbfCoeffSet {
        NsbfCoeffSet::endpoint(self.edge, length, self.g.clone(), self.s[0].1.clone())
    }
}

fn push_complex(rows: &mut Vec<Vec<f64>>, rhs: &mut Vec<f64>, row: &[C64], b: C64) {
    rows.push(row.iter().map(|v| v.re).collect());
    rhs.push(b.re);
    rows.push(row.iter().map(|v| v.im).collect());
    rhs.push(b.im);
}

/// Solves for `g_i` and the involved `s_j` of row `i` (1-based) using one
/// type-1 equation and `m_k` type-2 equations per sample.
pub fn recover_endpoint_coeffs(
    samples: &[WeylSample],
    lengths: &[f64],
    i: usize,
    order: usize,
    m_k: usize,
    svd_threshold: f64,
) -> Result<EndpointCoeffs> {
    let m = lengths.len();
    if m < 2 || i == 0 || i > m {
        return Err(Error::InvalidInput(format!("row {i} of a {m}-edge graph")));
    }
    if m_k > m - 2 {
        return Err(Error::InvalidInput(format!(
            "M_k = {m_k} exceeds M - 2 = {} for a {m}-edge graph",
            m - 2
        )));
    }
    let need = required_samples(order, m_k);
    if samples.len() < need {
        return Err(Error::UnderDetermined {
            have: samples.len(),
            need,
            detail: format!(
                "edge {i}: N = {order}, M_k = {m_k} needs m >= ceil((N+1)(M_k+3)/(M_k+1)) = {need} spectral points"
            ),
        });
    }

    let edges = involved_edges(i, m_k, m);
    let n1 = order + 1;
    let cols = n1 * (edges.len() + 1);
    let block = |b: usize| n1 * (b + 1);
    let zero = C64::new(0.0, 0.0);

    let mut rows = Vec::with_capacity(2 * samples.len() * (m_k + 1));
    let mut rhs = Vec::with_capacity(rows.capacity());
    for smp in samples {
        let rho = smp.rho;
        let odd: Vec<Vec<C64>> = edges
            .iter()
            .map(|&j| odd_basis(order, rho * lengths[j - 1]))
            .collect::<Result<_>>()?;
        let li = lengths[i - 1];

        // type 1
        let (e_i, e_next) = (edges[0], edges[1]);
        let m_ii = smp.require(i, e_i)?;
        let m_in = smp.require(i, e_next)?;
        let mut row = vec![zero; cols];
        for (n, v) in even_basis(order, rho * li)?.into_iter().enumerate() {
            row[n] = rho * v;
        }
        for n in 0..n1 {
            row[block(0) + n] = m_ii * odd[0][n];
            row[block(1) + n] = -m_in * odd[1][n];
        }
        let ln = lengths[e_next - 1];
        let b = m_in * (rho * ln).sin() - rho * (rho * li).cos() - m_ii * (rho * li).sin();
        push_complex(&mut rows, &mut rhs, &row, b);

        // type 2, pairs (j, j+1) walking away from i
        for p in 1..=m_k {
            let (j, jn) = (edges[p], edges[p + 1]);
            let m_ij = smp.require(i, j)?;
            let m_ijn = smp.require(i, jn)?;
            let mut row = vec![zero; cols];
            for n in 0..n1 {
                row[block(p) + n] = m_ij * odd[p][n];
                row[block(p + 1) + n] = -m_ijn * odd[p + 1][n];
            }
            let b = m_ijn * (rho * lengths[jn - 1]).sin() - m_ij * (rho * lengths[j - 1]).sin();
            push_complex(&mut rows, &mut rhs, &row, b);
        }
    }

    let a = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]);
    let b = DVector::from_vec(rhs);
    let sol = tsvd_solve(&a, &b, svd_threshold)?;
    if sol.rank == 0 {
        return Err(Error::RankDeficient { rank: 0, unknowns: cols });
    }
    let bn = b.norm();
    let residual = if bn > 0.0 { sol.residual / bn } else { sol.residual };
    Ok(EndpointCoeffs {
        edge: i,
        order,
        m_k,
        g: sol.x[..n1].to_vec(),
        s: edges
            .iter()
            .enumerate()
            .map(|(b, &j)| (j, sol.x[block(b)..block(b) + n1].to_vec()))
            .collect(),
        equations: a.nrows(),
        rank: sol.rank,
        condition: sol.condition,
        residual,
    })
}
