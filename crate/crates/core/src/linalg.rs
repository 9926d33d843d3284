//! Dense least-squares and linear solves used by the direct and inverse
//! solvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Result of a truncated-SVD least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    pub x: Vec<f64>,
    /// Number of singular values kept.
    pub rank: usize,
    /// `sigma_max / sigma_min` over all singular values (infinite if singular).
    pub condition: f64,
    /// `||A x - b||_2`
    pub residual: f64,
}

/// Minimum-norm least-squares solution of `A x = b`, discarding singular
/// values below `rel_threshold * sigma_max`.
pub fn tsvd_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_threshold: f64) -> Result<LstsqSolution> {
    let (rows, cols) = a.shape();
    if rows != b.len() {
        return Err(Error::InvalidInput(format!(
            "system has {rows} rows but right-hand side has {}",
            b.len()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite entries in linear system".into()));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let cutoff = rel_threshold * smax;
    let mut x = DVector::<f64>::zeros(cols);
    let mut rank = 0;
    for (k, &s) in sv.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            let coef = u.column(k).dot(b) / s;
            x += v_t.row(k).transpose() * coef;
        }
    }
    let residual = (a * &x - b).norm();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    Ok(LstsqSolution {
        x: x.iter().cloned().collect(),
        rank,
        condition,
        residual,
    })
}

/// `sigma_max / sigma_min` of a complex square matrix.
pub fn condition_number(a: &DMatrix<Complex64>) -> f64 {
    let sv = a.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    }
}

/// Partial-pivot LU factorization of a complex square matrix, reusable for
/// several right-hand sides.
pub struct ComplexLu {
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl ComplexLu {
    pub fn new(a: &DMatrix<Complex64>) -> Self {
        Self { lu: a.clone().lu() }
    }

    pub fn solve(&self, b: &DVector<Complex64>) -> Option<DVector<Complex64>> {
        self.lu.solve(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_square_system() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![3.0, 5.0]);
        let s = tsvd_solve(&a, &b, 1e-10).unwrap();
        assert!((s.x[0] - 0.8).abs() < 1e-14 && (s.x[1] - 1.4).abs() < 1e-14);
        assert_eq!(s.rank, 2);
        assert!(s.residual < 1e-14);
    }

    #[test]
    fn overdetermined_line_fit() {
        // y = 1 + 2 t sampled without noise
        let t: Vec<f64> = (0..10).map(|k| k as f64 * 0.1).collect();
        let a = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { t[i] });
        let b = DVector::from_iterator(10, t.iter().map(|t| 1.0 + 2.0 * t));
        let s = tsvd_solve(&a, &b, 1e-10).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let s = tsvd_solve(&a, &b, 1e-10).unwrap();
        assert_eq!(s.rank, 1);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complex_lu_round_trip() {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 1.0),
                Complex64::new(0.0, 2.0),
                Complex64::new(3.0, 0.0),
                Complex64::new(1.0, -1.0),
            ],
        );
        let x = DVector::from_vec(vec![Complex64::new(0.5, -1.0), Complex64::new(2.0, 0.25)]);
        let b = &a * &x;
        let got = ComplexLu::new(&a).solve(&b).unwrap();
        assert!((got - x).norm() < 1e-14);
        assert!(condition_number(&a).is_finite());
    }
}
