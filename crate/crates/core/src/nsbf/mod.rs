//! Neumann series of Bessel functions (NSBF) for the solutions of
//! `-y'' + q y = rho^2 y` on one edge:
//!
//! ```text
//! phi(rho, x)  = cos(rho x)        + sum_n (-1)^n g_n(x)     j_{2n}(rho x)
//! S(rho, x)    = sin(rho x) / rho  + 1/rho sum_n (-1)^n s_n(x) j_{2n+1}(rho x)
//! phi'(rho, x) = -rho sin(rho x) + cos(rho x) Q(x)/2       + sum_n (-1)^n gamma_n(x) j_{2n}(rho x)
//! S'(rho, x)   = cos(rho x) + sin(rho x) Q(x)/(2 rho)      + 1/rho sum_n (-1)^n sigma_n(x) j_{2n+1}(rho x)
//! T(rho, x)    = sin(rho (x-L)) / rho + 1/rho sum_n (-1)^n t_n(x) j_{2n+1}(rho (x-L))
//! ```
//!
//! with `Q(x) = \int_0^x q`. Truncated sums keep `n = 0..=N`.

pub mod bessel;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::linalg::tsvd_solve;
use crate::ode::Integrator;

pub use bessel::{spherical_j, spherical_j_upto, spherical_j_upto_real};

type C64 = Complex64;

/// Which solution (or derivative) a series represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Phi,
    S,
    PhiPrime,
    SPrime,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    /// The common-vertex end `x = L`.
    Endpoint,
    Interior,
}

/// Truncated NSBF coefficients of one edge at one point `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct NsbfCoeffSet {
    pub edge: usize,
    pub order: usize,
    pub x: f64,
    pub length: f64,
    pub location: Location,
    pub g: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub sigma: Option<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    /// `\int_0^x q`, needed by the derivative series.
    pub q_integral: Option<f64>,
}

impl NsbfCoeffSet {
    /// A set with no coefficient families filled in.
    pub fn empty(edge: usize, order: usize, x: f64, length: f64) -> Self {
        let location = if x == length {
            Location::Endpoint
        } else {
            Location::Interior
        };
        Self {
            edge,
            order,
            x,
            length,
            location,
            g: None,
            s: None,
            gamma: None,
            sigma: None,
            t: None,
            q_integral: None,
        }
    }

    /// Every family present and identically zero (the free equation).
    pub fn zeros(edge: usize, order: usize, x: f64, length: f64) -> Self {
        let z = Some(vec![0.0; order + 1]);
        Self {
            g: z.clone(),
            s: z.clone(),
            gamma: z.clone(),
            sigma: z.clone(),
            t: z,
            q_integral: Some(0.0),
            ..Self::empty(edge, order, x, length)
        }
    }

    /// Endpoint set from recovered `g_n(L)`, `s_n(L)`.
    pub fn endpoint(edge: usize, length: f64, g: Vec<f64>, s: Vec<f64>) -> Self {
        let order = g.len().saturating_sub(1);
        Self {
            g: Some(g),
            s: Some(s),
            ..Self::empty(edge, order, length, length)
        }
    }

    pub fn eval(&self, family: Family, rho: C64) -> Result<C64> {
        eval_truncated(self, family, rho, self.x)
    }
}

/// `sum_n (-1)^n c_n j_{2n}(z)`
pub fn even_series(coeffs: &[f64], z: C64) -> Result<C64> {
    if coeffs.is_empty() {
        return Ok(C64::new(0.0, 0.0));
    }
    let j = spherical_j_upto(2 * coeffs.len() - 2, z)?;
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| alternate(n) * c * j[2 * n])
        .sum())
}

/// `sum_n (-1)^n c_n j_{2n+1}(z)`
pub fn odd_series(coeffs: &[f64], z: C64) -> Result<C64> {
    if coeffs.is_empty() {
        return Ok(C64::new(0.0, 0.0));
    }
    let j = spherical_j_upto(2 * coeffs.len() - 1, z)?;
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(n, c)| alternate(n) * c * j[2 * n + 1])
        .sum())
}

/// `[(-1)^n j_{2n}(z)]_{n=0..=order}`
pub fn even_basis(order: usize, z: C64) -> Result<Vec<C64>> {
    let j = spherical_j_upto(2 * order, z)?;
    Ok((0..=order).map(|n| alternate(n) * j[2 * n]).collect())
}

/// `[(-1)^n j_{2n+1}(z)]_{n=0..=order}`
pub fn odd_basis(order: usize, z: C64) -> Result<Vec<C64>> {
    let j = spherical_j_upto(2 * order + 1, z)?;
    Ok((0..=order).map(|n| alternate(n) * j[2 * n + 1]).collect())
}

fn alternate(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `odd_series(c, rho y) / rho`, continuous at `rho = 0` (limit `c_0 y / 3`).
fn odd_series_over_rho(coeffs: &[f64], rho: C64, y: f64) -> Result<C64> {
    if rho.norm() == 0.0 {
        return Ok(C64::new(coeffs.first().copied().unwrap_or(0.0) * y / 3.0, 0.0));
    }
    Ok(odd_series(coeffs, rho * y)? / rho)
}

/// `sin(rho y) / rho`, continuous at `rho = 0`.
fn sinc_scaled(rho: C64, y: f64) -> C64 {
    if rho.norm() == 0.0 {
        C64::new(y, 0.0)
    } else {
        (rho * y).sin() / rho
    }
}

/// Partial sum of the requested series at `(rho, x)`, leading trigonometric
/// term included. `T` is evaluated at argument `rho (x - L)`.
pub fn eval_truncated(coeffs: &NsbfCoeffSet, family: Family, rho: C64, x: f64) -> Result<C64> {
    let z = rho * x;
    match family {
        Family::Phi => {
            let g = coeffs.g.as_deref().ok_or(Error::MissingCoefficients("g"))?;
            Ok(z.cos() + even_series(g, z)?)
        }
        Family::S => {
            let s = coeffs.s.as_deref().ok_or(Error::MissingCoefficients("s"))?;
            Ok(sinc_scaled(rho, x) + odd_series_over_rho(s, rho, x)?)
        }
        Family::PhiPrime => {
            let gamma = coeffs.gamma.as_deref().ok_or(Error::MissingCoefficients("gamma"))?;
            let qi = coeffs.q_integral.ok_or(Error::MissingCoefficients("q_integral"))?;
            Ok(-rho * z.sin() + z.cos() * (0.5 * qi) + even_series(gamma, z)?)
        }
        Family::SPrime => {
            let sigma = coeffs.sigma.as_deref().ok_or(Error::MissingCoefficients("sigma"))?;
            let qi = coeffs.q_integral.ok_or(Error::MissingCoefficients("q_integral"))?;
            Ok(z.cos() + sinc_scaled(rho, x) * (0.5 * qi) + odd_series_over_rho(sigma, rho, x)?)
        }
        Family::T => {
            let t = coeffs.t.as_deref().ok_or(Error::MissingCoefficients("t"))?;
            let y = x - coeffs.length;
            Ok(sinc_scaled(rho, y) + odd_series_over_rho(t, rho, y)?)
        }
    }
}

/// Training grid for coefficient fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Number of real training points; `None` means `8 (N + 1)`.
    pub points: Option<usize>,
    pub rho_min: f64,
    pub rho_max: f64,
    pub svd_threshold: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            points: None,
            rho_min: 0.1,
            rho_max: 100.0,
            svd_threshold: 1e-12,
        }
    }
}

/// Chebyshev points of the first kind mapped to `[lo, hi]`, ascending.
pub fn chebyshev_points(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * (count - k) - 1) as f64 / (2 * count) as f64;
            0.5 * (lo + hi) + 0.5 * (hi - lo) * theta.cos()
        })
        .collect()
}

fn least_squares(rows: &[Vec<f64>], rhs: &[f64], threshold: f64) -> Result<Vec<f64>> {
    let cols = rows[0].len();
    let a = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(rhs);
    let sol = tsvd_solve(&a, &b, threshold)?;
    if sol.rank < cols {
        return Err(Error::IllConditionedFit {
            condition: sol.condition,
        });
    }
    Ok(sol.x)
}

/// Fits the truncated coefficients of `family` at `x` by least squares against
/// integrated solutions at real training points. `Phi` also fills `gamma`,
/// `S` also fills `sigma`; both set `q_integral`.
pub fn fit_coefficients(edge: &Edge, order: usize, family: Family, x: f64, options: &FitOptions) -> Result<NsbfCoeffSet> {
    let len = edge.length();
    let valid = match family {
        Family::T => (0.0..len).contains(&x),
        _ => x > 0.0 && x <= len,
    };
    if !valid {
        return Err(Error::InvalidInput(format!("cannot fit {family:?} coefficients at x = {x}")));
    }
    let count = options.points.unwrap_or(8 * (order + 1));
    if count < order + 1 {
        return Err(Error::IllConditionedFit {
            condition: f64::INFINITY,
        });
    }
    let ode = Integrator::default();
    let grid = chebyshev_points(count, options.rho_min, options.rho_max);
    let qi = edge.potential_integral(x);
    let mut set = NsbfCoeffSet::empty(edge.index(), order, x, len);
    set.q_integral = Some(qi);

    match family {
        Family::Phi | Family::PhiPrime => {
            let mut rows = Vec::with_capacity(count);
            let (mut rhs_v, mut rhs_d) = (Vec::with_capacity(count), Vec::with_capacity(count));
            for &r in &grid {
                let f = ode.fundamental(edge, C64::new(r, 0.0), x)?;
                let z = r * x;
                rows.push(even_basis(order, C64::new(z, 0.0))?.iter().map(|v| v.re).collect());
                rhs_v.push(f.phi.re - z.cos());
                rhs_d.push(f.dphi.re + r * z.sin() - 0.5 * qi * z.cos());
            }
            set.g = Some(least_squares(&rows, &rhs_v, options.svd_threshold)?);
            set.gamma = Some(least_squares(&rows, &rhs_d, options.svd_threshold)?);
        }
        Family::S | Family::SPrime => {
            let mut rows = Vec::with_capacity(count);
            let (mut rhs_v, mut rhs_d) = (Vec::with_capacity(count), Vec::with_capacity(count));
            for &r in &grid {
                let f = ode.fundamental(edge, C64::new(r, 0.0), x)?;
                let z = r * x;
                rows.push(odd_basis(order, C64::new(z, 0.0))?.iter().map(|v| v.re / r).collect());
                rhs_v.push(f.s.re - z.sin() / r);
                rhs_d.push(f.ds.re - z.cos() - 0.5 * qi * z.sin() / r);
            }
            set.s = Some(least_squares(&rows, &rhs_v, options.svd_threshold)?);
            set.sigma = Some(least_squares(&rows, &rhs_d, options.svd_threshold)?);
        }
        Family::T => {
            let y = x - len;
            let mut rows = Vec::with_capacity(count);
            let mut rhs = Vec::with_capacity(count);
            for &r in &grid {
                let (t, _) = ode.t_solution(edge, C64::new(r, 0.0), x)?;
                rows.push(odd_basis(order, C64::new(r * y, 0.0))?.iter().map(|v| v.re / r).collect());
                rhs.push(t.re - (r * y).sin() / r);
            }
            set.t = Some(least_squares(&rows, &rhs, options.svd_threshold)?);
        }
    }
    Ok(set)
}
