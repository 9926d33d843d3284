//! Weyl matrix of the star graph, one row at a time.
//!
//! Row `i` solves `A(rho) m = r_i`, where the first `M-1` rows of `A` encode
//! continuity of `sum_j M_ij S_j` at the common vertex and the last row the
//! Kirchhoff condition. Edge indices are 1-based throughout.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sample_rho, SpectralSamplingPlan, StarGraph};
use crate::linalg::{condition_number, ComplexLu};
use crate::nsbf::{fit_coefficients, Family, FitOptions, NsbfCoeffSet};
use crate::ode::{Fundamental, Integrator, OdeOptions};

type C64 = Complex64;

/// Condition number above which `A(rho)` is treated as singular.
pub const NEAR_SPECTRUM_CONDITION: f64 = 1e12;
/// Largest accepted relative residual of a row solve.
pub const ROW_RESIDUAL_TOL: f64 = 1e-8;

/// Where `phi, phi', S, S'` at `x = L_i` come from.
#[derive(Debug, Clone, Default)]
pub enum EndpointSource {
    #[default]
    Ode,
    /// Truncated series with fitted endpoint coefficients, one set per edge
    /// (see [`nsbf_endpoint_source`]).
    Nsbf(Vec<NsbfCoeffSet>),
}

#[derive(Debug, Clone, Default)]
pub struct DirectOptions {
    pub source: EndpointSource,
    pub ode: OdeOptions,
}

/// Fits `g, gamma, s, sigma` at every edge end for use as [`EndpointSource::Nsbf`].
pub fn nsbf_endpoint_source(graph: &StarGraph, order: usize) -> Result<EndpointSource> {
    let fit = FitOptions::default();
    let sets = graph
        .edges()
        .par_iter()
        .map(|e| {
            let phi = fit_coefficients(e, order, Family::Phi, e.length(), &fit)?;
            let s = fit_coefficients(e, order, Family::S, e.length(), &fit)?;
            Ok(NsbfCoeffSet {
                s: s.s,
                sigma: s.sigma,
                ..phi
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EndpointSource::Nsbf(sets))
}

/// `phi, phi', S, S'` at `x = L_i` for every edge, in edge order.
pub fn endpoint_values(graph: &StarGraph, rho: C64, options: &DirectOptions) -> Result<Vec<Fundamental>> {
    match &options.source {
        EndpointSource::Ode => {
            let ode = Integrator::new(options.ode);
            graph.edges().iter().map(|e| ode.endpoint(e, rho)).collect()
        }
        EndpointSource::Nsbf(sets) => {
            if sets.len() != graph.edge_count() {
                return Err(Error::InvalidInput(format!(
                    "{} endpoint coefficient sets for {} edges",
                    sets.len(),
                    graph.edge_count()
                )));
            }
            sets.iter()
                .map(|c| {
                    Ok(Fundamental {
                        phi: c.eval(Family::Phi, rho)?,
                        dphi: c.eval(Family::PhiPrime, rho)?,
                        s: c.eval(Family::S, rho)?,
                        ds: c.eval(Family::SPrime, rho)?,
                    })
                })
                .collect()
        }
    }
}

fn check_rho(rho: C64) -> Result<()> {
    let sq = rho * rho;
    if !(sq.re.is_finite() && sq.im.is_finite()) || sq.im.abs() <= 1e-12 {
        return Err(Error::InvalidInput(format!("rho^2 must be non-real, got rho = {rho}")));
    }
    Ok(())
}

/// `A(rho)` from precomputed endpoint values.
pub fn system_matrix(ends: &[Fundamental]) -> DMatrix<C64> {
    let m = ends.len();
    let mut a = DMatrix::from_element(m, m, C64::new(0.0, 0.0));
    for j in 0..m - 1 {
        a[(j, j)] = ends[j].s;
        a[(j, j + 1)] = -ends[j + 1].s;
    }
    for j in 0..m {
        a[(m - 1, j)] = ends[j].ds;
    }
    a
}

/// Right-hand side for row `i` (1-based).
pub fn row_rhs(ends: &[Fundamental], i: usize) -> DVector<C64> {
    let m = ends.len();
    let e = &ends[i - 1];
    let mut r = DVector::from_element(m, C64::new(0.0, 0.0));
    if i > 1 {
        r[i - 2] = e.phi;
    }
    if i < m {
        r[i - 1] = -e.phi;
    }
    r[m - 1] = -e.dphi;
    r
}

/// `A(rho)` and its 2-norm condition number.
#[derive(Debug, Clone)]
pub struct SystemMatrix {
    pub matrix: DMatrix<C64>,
    pub condition: f64,
}

pub fn assemble_a(graph: &StarGraph, rho: C64, options: &DirectOptions) -> Result<SystemMatrix> {
    check_rho(rho)?;
    let ends = endpoint_values(graph, rho, options)?;
    let matrix = system_matrix(&ends);
    let condition = condition_number(&matrix);
    Ok(SystemMatrix { matrix, condition })
}

/// One solved row with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylRow {
    pub values: Vec<C64>,
    pub condition: f64,
    /// `||A m - r|| / ||r||`
    pub residual: f64,
}

struct Factored {
    a: DMatrix<C64>,
    lu: ComplexLu,
    condition: f64,
    ends: Vec<Fundamental>,
}

fn factor(graph: &StarGraph, rho: C64, options: &DirectOptions) -> Result<Factored> {
    check_rho(rho)?;
    let ends = endpoint_values(graph, rho, options)?;
    let a = system_matrix(&ends);
    let condition = condition_number(&a);
    if !(condition <= NEAR_SPECTRUM_CONDITION) {
        return Err(Error::NearSpectrum {
            rho: rho.to_string(),
            condition,
        });
    }
    Ok(Factored {
        lu: ComplexLu::new(&a),
        a,
        condition,
        ends,
    })
}

impl Factored {
    fn row(&self, i: usize, rho: C64) -> Result<WeylRow> {
        let near = || Error::NearSpectrum {
            rho: rho.to_string(),
            condition: self.condition,
        };
        let r = row_rhs(&self.ends, i);
        let x = self.lu.solve(&r).ok_or_else(near)?;
        let residual = (&self.a * &x - &r).norm() / r.norm().max(f64::MIN_POSITIVE);
        if !(residual <= ROW_RESIDUAL_TOL) {
            return Err(near());
        }
        Ok(WeylRow {
            values: x.iter().copied().collect(),
            condition: self.condition,
            residual,
        })
    }
}

/// Row `i` (1-based) of the Weyl matrix at `rho`.
pub fn weyl_row(graph: &StarGraph, i: usize, rho: C64, options: &DirectOptions) -> Result<WeylRow> {
    if i == 0 || i > graph.edge_count() {
        return Err(Error::InvalidInput(format!("row index {i} out of range")));
    }
    factor(graph, rho, options)?.row(i, rho)
}

/// Which entries of each row are retained as measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskPolicy {
    Full,
    #[default]
    DiagPlusSuccessor,
}

impl MaskPolicy {
    pub fn keeps(self, i: usize, j: usize, m: usize) -> bool {
        match self {
            MaskPolicy::Full => true,
            MaskPolicy::DiagPlusSuccessor => j == i || j == crate::graph::successor(i, m),
        }
    }
}

/// Weyl matrix data at one spectral point. Unmeasured entries are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylSample {
    /// 1-based position in the sampling plan.
    pub k: usize,
    pub rho: C64,
    /// `entries[i-1][j-1]`
    pub entries: Vec<Vec<Option<C64>>>,
    pub condition: f64,
    /// Largest relative row residual.
    pub residual: f64,
}

impl WeylSample {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    /// `M_ij` with 1-based indices.
    pub fn get(&self, i: usize, j: usize) -> Option<C64> {
        self.entries.get(i.wrapping_sub(1))?.get(j.wrapping_sub(1)).copied().flatten()
    }

    /// Like [`get`](Self::get) but missing data is an error.
    pub fn require(&self, i: usize, j: usize) -> Result<C64> {
        self.get(i, j).ok_or(Error::MissingEntry { k: self.k, i, j })
    }

    pub fn mask(&self) -> Vec<Vec<bool>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(Option::is_some).collect())
            .collect()
    }

    pub fn retained(&self) -> usize {
        self.entries.iter().flatten().filter(|v| v.is_some()).count()
    }

    /// `||M - M^T|| / ||M||` over entries present in both positions.
    pub fn asymmetry(&self) -> f64 {
        let m = self.size();
        let (mut diff, mut norm) = (0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                if let (Some(a), Some(b)) = (self.entries[i][j], self.entries[j][i]) {
                    diff += (a - b).norm_sqr();
                    norm += a.norm_sqr();
                }
            }
        }
        if norm == 0.0 {
            0.0
        } else {
            (diff / norm).sqrt()
        }
    }
}

/// All rows at one `rho`, masked.
pub fn weyl_sample(
    graph: &StarGraph,
    k: usize,
    rho: C64,
    policy: MaskPolicy,
    options: &DirectOptions,
) -> Result<WeylSample> {
    let f = factor(graph, rho, options)?;
    let m = graph.edge_count();
    let mut entries = Vec::with_capacity(m);
    let mut residual: f64 = 0.0;
    for i in 1..=m {
        let row = f.row(i, rho)?;
        residual = residual.max(row.residual);
        entries.push(
            row.values
                .iter()
                .enumerate()
                .map(|(j0, v)| policy.keeps(i, j0 + 1, m).then_some(*v))
                .collect(),
        );
    }
    Ok(WeylSample {
        k,
        rho,
        entries,
        condition: f.condition,
        residual,
    })
}

/// A spectral point that could not be used.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFailure {
    pub k: usize,
    pub rho: C64,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylData {
    pub samples: Vec<WeylSample>,
    pub failures: Vec<SampleFailure>,
}

/// Weyl samples at every point of `plan`, ordered by `k`. Points where the
/// row solve fails are dropped and listed in `failures`.
pub fn synthesize_weyl_data(
    graph: &StarGraph,
    plan: &SpectralSamplingPlan,
    policy: MaskPolicy,
    options: &DirectOptions,
) -> Result<WeylData> {
    let rhos = sample_rho(plan)?;
    let results: Vec<_> = rhos
        .par_iter()
        .enumerate()
        .map(|(k0, &rho)| weyl_sample(graph, k0 + 1, rho, policy, options))
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (k0, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => samples.push(s),
            Err(error) => failures.push(SampleFailure {
                k: k0 + 1,
                rho: rhos[k0],
                error,
            }),
        }
    }
    Ok(WeylData { samples, failures })
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    k: usize,
    rho_re: f64,
    rho_im: f64,
    i: usize,
    j: usize,
    m_re: f64,
    m_im: f64,
}

/// Writes one line per retained entry: `k, rho_re, rho_im, i, j, m_re, m_im`.
pub fn write_weyl_csv<W: Write>(samples: &[WeylSample], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        for (i0, row) in s.entries.iter().enumerate() {
            for (j0, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    w.serialize(CsvRow {
                        k: s.k,
                        rho_re: s.rho.re,
                        rho_im: s.rho.im,
                        i: i0 + 1,
                        j: j0 + 1,
                        m_re: v.re,
                        m_im: v.im,
                    })?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads samples written by [`write_weyl_csv`]. The matrix size is the
/// largest edge index present; condition and residual are not stored and
/// come back as NaN.
pub fn read_weyl_csv<R: Read>(reader: R) -> Result<Vec<WeylSample>> {
    let mut rows = Vec::new();
    for r in csv::Reader::from_reader(reader).deserialize() {
        let r: CsvRow = r?;
        if r.i == 0 || r.j == 0 {
            return Err(Error::Parse(format!("edge indices are 1-based, got ({}, {})", r.i, r.j)));
        }
        rows.push(r);
    }
    let m = rows.iter().map(|r| r.i.max(r.j)).max().unwrap_or(0);
    let mut out: Vec<WeylSample> = Vec::new();
    for r in rows {
        let rho = C64::new(r.rho_re, r.rho_im);
        let idx = match out.iter().position(|s| s.k == r.k) {
            Some(p) => p,
            None => {
                out.push(WeylSample {
                    k: r.k,
                    rho,
                    entries: vec![vec![None; m]; m],
                    condition: f64::NAN,
                    residual: f64::NAN,
                });
                out.len() - 1
            }
        };
        let s = &mut out[idx];
        if s.rho != rho {
            return Err(Error::Parse(format!("sample {} lists two different rho values", r.k)));
        }
        s.entries[r.i - 1][r.j - 1] = Some(C64::new(r.m_re, r.m_im));
    }
    out.sort_by_key(|s| s.k);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, example1_graph, ClosedForm, EdgeSpec};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn free_graph(lengths: &[f64]) -> StarGraph {
        let specs: Vec<_> = lengths.iter().map(|&l| EdgeSpec::closed(l, ClosedForm::Zero)).collect();
        build_graph(&specs).unwrap()
    }

    /// Weyl row of the zero-potential star, derived by hand from continuity
    /// and the Kirchhoff condition with `S_j = sin(rho L_j)/rho`.
    fn free_row(lengths: &[f64], i: usize, rho: C64) -> Vec<C64> {
        let sum_cot: C64 = lengths.iter().map(|&l| (rho * l).cos() / (rho * l).sin()).sum();
        let si = (rho * lengths[i - 1]).sin();
        let cc = (1.0 / si) / sum_cot;
        lengths
            .iter()
            .enumerate()
            .map(|(j0, &l)| {
                if j0 + 1 == i {
                    rho * (cc - (rho * l).cos()) / (rho * l).sin()
                } else {
                    rho * cc / (rho * l).sin()
                }
            })
            .collect()
    }

    #[test]
    fn free_system_matrix_two_edges() {
        let g = free_graph(&[1.0, 1.0]);
        let rho = c(1.0, 1.0);
        let a = assemble_a(&g, rho, &DirectOptions::default()).unwrap().matrix;
        let s = rho.sin() / rho;
        let want = [[s, -s], [rho.cos(), rho.cos()]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[(i, j)] - want[i][j]).norm() < 1e-10, "({i},{j})");
            }
        }
    }

    #[test]
    fn free_system_matrix_three_edges() {
        let lens = [1.0, 2.0, 3.0];
        let g = free_graph(&lens);
        let rho = c(2.0, 0.5);
        let a = assemble_a(&g, rho, &DirectOptions::default()).unwrap().matrix;
        let s = |l: f64| (rho * l).sin() / rho;
        let zero = c(0.0, 0.0);
        let want = [
            [s(1.0), -s(2.0), zero],
            [zero, s(2.0), -s(3.0)],
            [(rho * 1.0).cos(), (rho * 2.0).cos(), (rho * 3.0).cos()],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[(i, j)] - want[i][j]).norm() < 1e-10, "({i},{j})");
            }
        }
    }

    #[test]
    fn free_rows_match_closed_form() {
        for lens in [[1.0, 1.0, 1.0], [1.0, 2.0, 3.0]] {
            let g = free_graph(&lens);
            let rho = c(1.0, 0.1);
            for i in 1..=3 {
                let row = weyl_row(&g, i, rho, &DirectOptions::default()).unwrap();
                let want = free_row(&lens, i, rho);
                for (got, want) in row.values.iter().zip(&want) {
                    assert!((got - want).norm() < 1e-9 * want.norm().max(1.0), "{got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn rows_satisfy_continuity_and_kirchhoff() {
        let g = example1_graph();
        let rho = c(10.0, 0.1);
        let opts = DirectOptions::default();
        let ends = endpoint_values(&g, rho, &opts).unwrap();
        for i in 1..=9 {
            let m = weyl_row(&g, i, rho, &opts).unwrap().values;
            // u_i on edge j at the common vertex
            let u = |j: usize| {
                let base = if j == i { ends[j - 1].phi } else { c(0.0, 0.0) };
                base + m[j - 1] * ends[j - 1].s
            };
            for j in 1..9 {
                assert!((u(j) - u(j + 1)).norm() < 1e-8 * u(j).norm().max(1.0));
            }
            let kn: C64 = ends[i - 1].dphi + (0..9).map(|j| m[j] * ends[j].ds).sum::<C64>();
            assert!(kn.norm() < 1e-8 * ends[i - 1].dphi.norm().max(1.0));
        }
    }

    #[test]
    fn matrix_entries_are_ode_endpoint_values() {
        let g = example1_graph();
        let rho = c(10.0, 0.1);
        let a = assemble_a(&g, rho, &DirectOptions::default()).unwrap().matrix;
        let ode = Integrator::default();
        for j in 0..9 {
            let f = ode.endpoint(g.edge(j + 1), rho).unwrap();
            assert!((a[(8, j)] - f.ds).norm() < 1e-10);
            if j < 8 {
                assert!((a[(j, j)] - f.s).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn real_rho_is_rejected() {
        let g = free_graph(&[1.0, 1.0]);
        assert!(weyl_row(&g, 1, c(2.0, 0.0), &DirectOptions::default()).is_err());
    }

    #[test]
    fn near_spectrum_is_detected() {
        // q = 0, L = (1, 1): S_j(L) = sin(rho)/rho vanishes at rho = pi,
        // the Dirichlet-Dirichlet eigenvalue shared by both edges.
        let g = free_graph(&[1.0, 1.0]);
        let r = weyl_row(&g, 1, c(std::f64::consts::PI, 2.5e-13), &DirectOptions::default());
        assert!(matches!(r, Err(Error::NearSpectrum { .. })), "{r:?}");
    }

    #[test]
    fn mask_policies_coincide_for_two_edges() {
        let g = free_graph(&[1.0, 1.5]);
        let o = DirectOptions::default();
        let a = weyl_sample(&g, 1, c(3.0, 0.1), MaskPolicy::Full, &o).unwrap();
        let b = weyl_sample(&g, 1, c(3.0, 0.1), MaskPolicy::DiagPlusSuccessor, &o).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.retained(), 4);
    }

    #[test]
    fn free_graph_is_symmetric() {
        let g = free_graph(&[1.0, 2.0, 3.0]);
        let s = weyl_sample(&g, 1, c(4.0, 0.1), MaskPolicy::Full, &DirectOptions::default()).unwrap();
        assert!(s.asymmetry() < 1e-10);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = free_graph(&[1.0, 2.0, 3.0]);
        let plan = SpectralSamplingPlan::uniform(c(1.0, 0.1), c(5.0, 0.1), 4);
        let data = synthesize_weyl_data(&g, &plan, MaskPolicy::DiagPlusSuccessor, &DirectOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_weyl_csv(&data.samples, &mut buf).unwrap();
        let back = read_weyl_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 4);
        for (a, b) in data.samples.iter().zip(&back) {
            assert_eq!(a.k, b.k);
            assert_eq!(a.rho, b.rho);
            assert_eq!(a.entries, b.entries);
        }
        let header = String::from_utf8(buf).unwrap();
        assert!(header.starts_with("k,rho_re,rho_im,i,j,m_re,m_im\n"));
    }

    #[test]
    fn nsbf_endpoints_track_ode_endpoints() {
        let g = example1_graph();
        let source = nsbf_endpoint_source(&g, 12).unwrap();
        let nsbf = DirectOptions {
            source,
            ..Default::default()
        };
        let rho = c(20.0, 0.1);
        let a = weyl_sample(&g, 1, rho, MaskPolicy::Full, &DirectOptions::default()).unwrap();
        let b = weyl_sample(&g, 1, rho, MaskPolicy::Full, &nsbf).unwrap();
        for i in 1..=9 {
            for j in 1..=9 {
                let (x, y) = (a.get(i, j).unwrap(), b.get(i, j).unwrap());
                assert!((x - y).norm() < 1e-4 * x.norm().max(1.0), "M_{i}{j}: {x} vs {y}");
            }
        }
    }
}
