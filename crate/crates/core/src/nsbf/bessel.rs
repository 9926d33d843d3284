//! Spherical Bessel functions of the first kind, `j_k(z) = sqrt(pi/(2z)) J_{k+1/2}(z)`,
//! for complex arguments.
//!
//! Orders `0..=kmax` are produced together:
//! * `|z| <= 1`: ascending series for every order;
//! * `kmax <= |z|`: closed forms for `j_0`, `j_1`, then upward recurrence;
//! * otherwise: Miller backward recurrence normalized by `j_0` or `j_1`.

use num_complex::Complex64;

use crate::error::{Error, Result};

type C64 = Complex64;

const MAX_ABS_Z: f64 = 1e5;
const MAX_IM_Z: f64 = 700.0;

/// `j_k(z)` for a single order.
pub fn spherical_j(k: usize, z: C64) -> Result<C64> {
    Ok(spherical_j_upto(k, z)?[k])
}

/// `[j_0(z), ..., j_kmax(z)]`.
pub fn spherical_j_upto(kmax: usize, z: C64) -> Result<Vec<C64>> {
    let r = z.norm();
    if !r.is_finite() || r > MAX_ABS_Z || z.im.abs() > MAX_IM_Z {
        return Err(Error::BesselOverflow {
            order: kmax,
            z: z.to_string(),
        });
    }
    let mut out = vec![C64::new(0.0, 0.0); kmax + 1];
    if r == 0.0 {
        out[0] = C64::new(1.0, 0.0);
        return Ok(out);
    }
    if r <= 1.0 {
        ascending_series(z, &mut out);
    } else if (kmax as f64) <= r {
        upward(z, &mut out);
    } else {
        miller(z, &mut out);
    }
    if out.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::BesselOverflow {
            order: kmax,
            z: z.to_string(),
        });
    }
    Ok(out)
}

/// Real-argument convenience wrapper.
pub fn spherical_j_upto_real(kmax: usize, x: f64) -> Result<Vec<f64>> {
    Ok(spherical_j_upto(kmax, C64::new(x, 0.0))?
        .into_iter()
        .map(|v| v.re)
        .collect())
}

fn j0_j1(z: C64) -> (C64, C64) {
    let (s, c) = (z.sin(), z.cos());
    let j0 = s / z;
    (j0, (j0 - c) / z)
}

/// `j_k(z) = z^k / (2k+1)!! * sum_m (-z^2/2)^m / (m! (2k+3)(2k+5)...(2k+2m+1))`
fn ascending_series(z: C64, out: &mut [C64]) {
    let w = -0.5 * z * z;
    let mut prefactor = C64::new(1.0, 0.0);
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            prefactor *= z / (2 * k + 1) as f64;
        }
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for m in 1..40 {
            term *= w / (m as f64 * (2 * k + 2 * m + 1) as f64);
            sum += term;
            if term.norm() <= 1e-17 * sum.norm() {
                break;
            }
        }
        *slot = prefactor * sum;
    }
}

fn upward(z: C64, out: &mut [C64]) {
    let (j0, j1) = j0_j1(z);
    out[0] = j0;
    if out.len() > 1 {
        out[1] = j1;
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = (2 * n + 1) as f64 / z * out[n] - out[n - 1];
    }
}

fn miller(z: C64, out: &mut [C64]) {
    let kmax = out.len() - 1;
    let m = (kmax as f64).max(z.norm());
    let start = m.ceil() as usize + 20 + (8.0 * m.cbrt()).ceil() as usize;
    let mut next = C64::new(0.0, 0.0);
    let mut cur = C64::new(1e-30, 0.0);
    let mut values = vec![C64::new(0.0, 0.0); start + 1];
    values[start] = cur;
    for n in (1..=start).rev() {
        let prev = (2 * n + 1) as f64 / z * cur - next;
        next = cur;
        cur = prev;
        values[n - 1] = cur;
        if cur.norm() > 1e200 {
            for v in values[n - 1..].iter_mut() {
                *v *= 1e-200;
            }
            cur *= 1e-200;
            next *= 1e-200;
        }
    }
    let (j0, j1) = j0_j1(z);
    let scale = if j0.norm() >= j1.norm() {
        j0 / values[0]
    } else {
        j1 / values[1]
    };
    for (slot, v) in out.iter_mut().zip(values.iter()) {
        *slot = v * scale;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Ascending power series summed term by term in f64 with 30 terms; the
    /// arguments here are small enough that no cancellation occurs.
    fn series_oracle(k: usize, x: f64) -> f64 {
        let mut df = 1.0;
        for i in 0..=k {
            df *= (2 * i + 1) as f64;
        }
        let mut sum = 0.0;
        let mut term = x.powi(k as i32) / df;
        for m in 0..30 {
            if m > 0 {
                term *= -x * x / (2.0 * m as f64 * (2 * k + 2 * m + 1) as f64);
            }
            sum += term;
        }
        sum
    }

    #[test]
    fn low_order_closed_forms() {
        assert!((spherical_j(0, c(1.0, 0.0)).unwrap().re - 0.841_470_984_807_896_5).abs() < 1e-15);
        assert!((spherical_j(1, c(1.0, 0.0)).unwrap().re - 0.301_168_678_939_756_8).abs() < 1e-15);
    }

    #[test]
    fn small_argument_matches_series_oracle() {
        let v = spherical_j(7, c(0.3, 0.0)).unwrap().re;
        let o = series_oracle(7, 0.3);
        assert!(((v - o) / o).abs() < 1e-13, "{v} vs {o}");
        assert!(((v - 1.076_068_491_011_497_4e-10) / v).abs() < 1e-13);
    }

    #[test]
    fn zero_argument() {
        let v = spherical_j_upto(5, c(0.0, 0.0)).unwrap();
        assert_eq!(v[0], c(1.0, 0.0));
        assert!(v[1..].iter().all(|x| *x == c(0.0, 0.0)));
    }

    #[test]
    #[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
    fn reference_values_from_extended_precision() {
        // (order, z, j_k(z)) from mpmath at 50 digits.
        let cases = [
            (5, c(2.5, 0.0), c(0.007_357_638_737_768_936_3, 0.0)),
            (19, c(10.0, 0.0), c(8.896_627_269_427_228_3e-6, 0.0)),
            (19, c(140.0, 14.0), c(-3741.289_162_861_200_4, 280.052_939_008_518_12)),
            (25, c(33.0, 0.1), c(-0.032_679_420_161_021_993, -0.001_068_338_284_548_573_7)),
            (64, c(1.0, 0.0), c(4.687_369_133_915_765_9e-110, 0.0)),
            (64, c(50.0, 0.0), c(7.718_892_642_796_774_1e-6, 0.0)),
            (64, c(70.0, 3.0), c(0.032_418_608_883_373_146, -0.021_097_430_252_256_526)),
            (3, c(1000.0, 0.0), c(0.000_557_409_375_764_559_72, 0.0)),
            (40, c(1000.0, 0.0), c(0.000_975_671_462_413_344_69, 0.0)),
            (64, c(999.0, 0.5), c(0.000_998_733_973_545_017_95, -0.000_243_638_683_526_659_75)),
            (12, c(0.7, 0.2), c(-2.728_746_193_293_910_2e-15, -5.327_621_380_648_368_7e-16)),
            (2, c(1e-5, 0.0), c(6.666_666_666_619_048_7e-12, 0.0)),
            (30, c(30.0, 0.0), c(0.028_050_249_547_161_08, 0.0)),
            (31, c(29.5, 0.1), c(0.015_590_859_810_275_936, 0.000_677_571_315_847_178_27)),
        ];
        for (k, z, want) in cases {
            let got = spherical_j(k, z).unwrap();
            let rel = (got - want).norm() / want.norm();
            assert!(rel < 1e-12, "j_{k}({z}) = {got}, want {want}, rel {rel:e}");
        }
    }

    #[test]
    fn large_argument_within_range() {
        let got = spherical_j(10, c(99_999.5, 0.0)).unwrap().re;
        let want = -5.100_211_515_272_132_7e-6;
        assert!(((got - want) / want).abs() < 1e-9);
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(spherical_j(3, c(10.0, 800.0)), Err(Error::BesselOverflow { .. })));
        assert!(spherical_j(3, c(2e5, 0.0)).is_err());
    }

    proptest::proptest! {
        #[test]
        fn orders_satisfy_three_term_recurrence(re in -200.0f64..200.0, im in -5.0f64..5.0) {
            let z = c(re, im);
            proptest::prop_assume!(z.norm() > 0.5);
            let v = spherical_j_upto(40, z).unwrap();
            for n in 1..40 {
                let lhs = v[n - 1] + v[n + 1];
                let rhs = (2 * n + 1) as f64 / z * v[n];
                let scale = v[n - 1].norm().max(v[n + 1].norm()).max(rhs.norm()).max(1e-300);
                proptest::prop_assert!((lhs - rhs).norm() / scale < 1e-9);
            }
        }

        #[test]
        fn real_argument_gives_real_values(x in 0.0f64..500.0) {
            for v in spherical_j_upto(30, c(x, 0.0)).unwrap() {
                proptest::prop_assert!(v.im.abs() <= 1e-14 * v.re.abs().max(1e-300));
            }
        }
    }
}
