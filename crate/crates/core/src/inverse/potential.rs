//! Step 6: the potential from the first interior coefficient,
//! `q = g0'' / (g0 + 1)`, or alternatively `q = (x s0)'' / (x s0 + 3x)`.
//!
//! Derivatives come from local least-squares polynomials over a sliding
//! window; near the ends the window is shifted inward rather than shrunk.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::tsvd_solve;

/// Local-polynomial smoothing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    /// Points per window (odd).
    pub window: usize,
    pub degree: usize,
    /// When the grid starts at `x = 0`, fit the windows touching it with
    /// `sum_{p>=2} c_p x^p`, i.e. impose `y(0) = y'(0) = 0`. Both `g0` and
    /// `x s0` satisfy this because `phi'(0) = 0` and `S(0) = 0, S'(0) = 1`.
    pub pin_origin: bool,
}

impl Default for Smoothing {
    /// On a centred window the second derivative of an odd-degree fit equals
    /// that of the even degree below it; on the shifted end windows the
    /// extra degree removes the leading bias.
    fn default() -> Self {
        Self {
            window: 7,
            degree: 3,
            pin_origin: false,
        }
    }
}

impl Smoothing {
    fn validate(&self, points: usize) -> Result<()> {
        if self.window.is_multiple_of(2) || self.window <= self.degree || self.degree < 2 {
            return Err(Error::InvalidInput(format!(
                "smoothing window {} must be odd and exceed the degree {} (>= 2)",
                self.window, self.degree
            )));
        }
        if points < self.window.max(9) {
            return Err(Error::InvalidInput(format!(
                "{points} samples; need at least {} for the derivative stencil",
                self.window.max(9)
            )));
        }
        Ok(())
    }
}

/// Coefficients `c` of the least-squares polynomial `sum c_p (t - at)^p` over
/// `x[lo..lo+w]`.
fn local_poly(x: &[f64], y: &[f64], lo: usize, w: usize, degree: usize, at: f64) -> Result<Vec<f64>> {
    let scale = (x[lo + w - 1] - x[lo]).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(w, degree + 1, |r, c| ((x[lo + r] - at) / scale).powi(c as i32));
    let b = DVector::from_column_slice(&y[lo..lo + w]);
    let sol = tsvd_solve(&a, &b, 1e-13)?;
    Ok(sol.x.iter().enumerate().map(|(p, c)| c / scale.powi(p as i32)).collect())
}

fn window_start(i: usize, n: usize, w: usize) -> usize {
    i.saturating_sub(w / 2).min(n - w)
}

/// `[y, y', y'']` at `at` from `sum_{p=2..=degree} c_p x^p` fitted on
/// `x[1..w]` (with `x[0] = 0`).
fn pinned_poly(x: &[f64], y: &[f64], w: usize, degree: usize, at: f64) -> Result<[f64; 3]> {
    let scale = x[w - 1];
    let a = DMatrix::from_fn(w - 1, degree - 1, |r, c| (x[r + 1] / scale).powi(c as i32 + 2));
    let b = DVector::from_column_slice(&y[1..w]);
    let sol = tsvd_solve(&a, &b, 1e-13)?;
    let mut out = [0.0; 3];
    for (c, v) in sol.x.iter().enumerate() {
        let p = c as i32 + 2;
        let v = v / scale.powi(p);
        out[0] += v * at.powi(p);
        out[1] += v * p as f64 * at.powi(p - 1);
        out[2] += v * (p * (p - 1)) as f64 * at.powi(p - 2);
    }
    Ok(out)
}

/// Smoothed value and first and second derivatives at every sample.
pub fn local_derivatives(x: &[f64], y: &[f64], smoothing: Smoothing) -> Result<Vec<[f64; 3]>> {
    smoothing.validate(x.len())?;
    if x.len() != y.len() {
        return Err(Error::InvalidInput("x and y lengths differ".into()));
    }
    let pinned = smoothing.pin_origin && x[0] == 0.0;
    (0..x.len())
        .map(|i| {
            let lo = window_start(i, x.len(), smoothing.window);
            if pinned && lo == 0 {
                return pinned_poly(x, y, smoothing.window, smoothing.degree, x[i]);
            }
            let c = local_poly(x, y, lo, smoothing.window, smoothing.degree, x[i])?;
            Ok([c[0], c[1], 2.0 * c[2]])
        })
        .collect()
}

/// Value at `at` of the local polynomial fitted to the `window` samples
/// nearest to it.
pub fn extrapolate(x: &[f64], y: &[f64], at: f64, smoothing: Smoothing) -> Result<f64> {
    let w = smoothing.window.min(x.len());
    let nearest = x
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - at).abs().total_cmp(&(b.1 - at).abs()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidInput("no samples".into()))?;
    let lo = window_start(nearest, x.len(), w);
    Ok(local_poly(x, y, lo, w, smoothing.degree.min(w - 1), at)?[0])
}

/// Recovered potential of one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredPotential {
    pub edge: usize,
    pub x: Vec<f64>,
    pub g0: Vec<f64>,
    pub q: Vec<f64>,
    /// Ground truth on `x`, when known.
    pub q_true: Option<Vec<f64>>,
}

/// Error norms against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub sup_abs: f64,
    /// `sup |q - q_true| / sup |q_true|`
    pub sup_rel: f64,
    /// Discrete L2 norm of the error (trapezoid rule).
    pub l2: f64,
    /// Where the absolute error peaks.
    pub argmax: f64,
}

impl RecoveredPotential {
    pub fn with_truth(mut self, truth: impl Fn(f64) -> f64) -> Self {
        self.q_true = Some(self.x.iter().map(|&x| truth(x)).collect());
        self
    }

    pub fn abs_errors(&self) -> Option<Vec<f64>> {
        let t = self.q_true.as_ref()?;
        Some(self.q.iter().zip(t).map(|(a, b)| (a - b).abs()).collect())
    }

    pub fn metrics(&self) -> Option<ErrorMetrics> {
        let t = self.q_true.as_ref()?;
        let err = self.abs_errors()?;
        let (imax, sup_abs) = err
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best });
        let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l2 = self
            .x
            .windows(2)
            .zip(err.windows(2))
            .map(|(x, e)| 0.5 * (x[1] - x[0]) * (e[0] * e[0] + e[1] * e[1]))
            .sum::<f64>()
            .sqrt();
        Some(ErrorMetrics {
            sup_abs,
            sup_rel: if scale > 0.0 { sup_abs / scale } else { sup_abs },
            l2,
            argmax: self.x[imax],
        })
    }
}

/// `q = g0'' / (g0 + 1)` on the grid of `g0`.
pub fn recover_potential(edge: usize, x: &[f64], g0: &[f64], smoothing: Smoothing) -> Result<RecoveredPotential> {
    if let Some((&xb, _)) = x.iter().zip(g0).find(|(_, g)| (*g + 1.0).abs() < 1e-6) {
        return Err(Error::DenominatorDegeneracy { x: xb });
    }
    let d = local_derivatives(x, g0, smoothing)?;
    let q = d.iter().zip(g0).map(|(d, g)| d[2] / (g + 1.0)).collect();
    Ok(RecoveredPotential {
        edge,
        x: x.to_vec(),
        g0: g0.to_vec(),
        q,
        q_true: None,
    })
}

/// `q = (x s0)'' / (x (s0 + 3))`, the value at `x = 0` extrapolated from
/// the neighbouring samples. `g0` of the result holds `s0`.
pub fn recover_potential_from_s0(edge: usize, x: &[f64], s0: &[f64], smoothing: Smoothing) -> Result<RecoveredPotential> {
    let u: Vec<f64> = x.iter().zip(s0).map(|(x, s)| x * s).collect();
    let d = local_derivatives(x, &u, smoothing)?;
    let mut q = vec![0.0; x.len()];
    let mut zero_at = Vec::new();
    for (i, (&xi, &s)) in x.iter().zip(s0).enumerate() {
        if xi == 0.0 {
            zero_at.push(i);
            continue;
        }
        let den = xi * (s + 3.0);
        if den.abs() < 1e-6 * xi.abs().max(1e-300) {
            return Err(Error::DenominatorDegeneracy { x: xi });
        }
        q[i] = d[i][2] / den;
    }
    for i in zero_at {
        let (xs, qs): (Vec<f64>, Vec<f64>) = x
            .iter()
            .zip(&q)
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, (a, b))| (*a, *b))
            .unzip();
        q[i] = extrapolate(&xs, &qs, x[i], smoothing)?;
    }
    Ok(RecoveredPotential {
        edge,
        x: x.to_vec(),
        g0: s0.to_vec(),
        q,
        q_true: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, len: f64) -> Vec<f64> {
        (0..n).map(|k| len * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn zero_g0_gives_zero_potential() {
        let x = grid(101, 1.0);
        let p = recover_potential(1, &x, &vec![0.0; 101], Smoothing::default()).unwrap();
        assert!(p.q.iter().all(|q| q.abs() < 1e-14));
    }

    #[test]
    fn cosh_gives_unit_potential() {
        let x = grid(101, 1.0);
        let g0: Vec<f64> = x.iter().map(|x| x.cosh() - 1.0).collect();
        let p = recover_potential(1, &x, &g0, Smoothing::default()).unwrap();
        for (i, (&x, &q)) in x.iter().zip(&p.q).enumerate() {
            let tol = if !(3..=97).contains(&i) { 1e-2 } else { 1e-4 };
            assert!((q - 1.0).abs() < tol, "q({x}) = {q}");
        }
        let m = p.with_truth(|_| 1.0).metrics().unwrap();
        assert!(m.sup_rel < 1e-2);
    }

    #[test]
    fn s0_route_for_unit_potential() {
        let x = grid(101, 1.0);
        let s0: Vec<f64> = x
            .iter()
            .map(|&x| if x == 0.0 { 0.0 } else { 3.0 * (x.sinh() / x - 1.0) })
            .collect();
        let p = recover_potential_from_s0(1, &x, &s0, Smoothing::default()).unwrap();
        for (i, &q) in p.q.iter().enumerate().skip(3).take(95) {
            assert!((q - 1.0).abs() < 1e-3, "q at {i} = {q}");
        }
        let z = recover_potential_from_s0(1, &x, &vec![0.0; 101], Smoothing::default()).unwrap();
        assert!(z.q.iter().all(|q| q.abs() < 1e-12));
    }

    #[test]
    fn degenerate_denominator() {
        let x = grid(11, 1.0);
        let mut g0 = vec![0.0; 11];
        g0[4] = -1.0;
        assert!(matches!(
            recover_potential(1, &x, &g0, Smoothing::default()),
            Err(Error::DenominatorDegeneracy { .. })
        ));
    }

    #[test]
    fn extrapolation_of_a_quadratic_is_exact() {
        let x: Vec<f64> = (1..=10).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|x| 1.0 + 2.0 * x - x * x).collect();
        let v = extrapolate(&x, &y, 0.0, Smoothing::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn derivatives_of_polynomials_within_degree_are_exact(
            c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, c2 in -5.0f64..5.0, len in 0.5f64..3.0
        ) {
            let x = grid(21, len);
            let y: Vec<f64> = x.iter().map(|x| c0 + c1 * x + c2 * x * x).collect();
            for d in local_derivatives(&x, &y, Smoothing::default()).unwrap() {
                proptest::prop_assert!((d[2] - 2.0 * c2).abs() < 1e-8);
            }
        }
    }
}
