//! Problem instances: star-graph topology, edge potentials and spectral
//! sampling plans.
//!
//! Edge `i` is parametrized by `x in [0, L_i]`, with `x = 0` at the boundary
//! vertex and `x = L_i` at the common vertex. Potentials are stored as samples
//! on a uniform grid that includes both endpoints; closed-form potentials are
//! only used at construction time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 1001;

/// Closed-form potential families, tagged by `kind` with a `params` object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ClosedForm {
    Zero,
    Constant {
        value: f64,
    },
    /// `c0 + c1 x + c2 x^2 + ...`
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `|x - center| + offset`
    AbsShift {
        center: f64,
        offset: f64,
    },
    /// `amplitude * exp(-((x - center) / width)^2)`
    Gaussian {
        center: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `amplitude * sin(frequency x) + offset`
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude * cos(frequency x) + offset`
    Cosine {
        #[serde(default = "one")]
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude * cos(frequency x^2) + offset`
    CosQuadratic {
        #[serde(default = "one")]
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `scale / (x + shift)^power`
    PowerShift {
        shift: f64,
        power: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `amplitude * exp(rate x)`
    Exponential {
        #[serde(default = "one")]
        amplitude: f64,
        rate: f64,
    },
    /// Piecewise quadratic double-well on `[0, 1]`.
    Saddle,
    /// `J_0(frequency x)`
    BesselJ0 {
        frequency: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ClosedForm {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ClosedForm::Zero => 0.0,
            ClosedForm::Constant { value } => *value,
            ClosedForm::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            ClosedForm::AbsShift { center, offset } => (x - center).abs() + offset,
            ClosedForm::Gaussian {
                center,
                width,
                amplitude,
            } => amplitude * (-((x - center) / width).powi(2)).exp(),
            ClosedForm::Sine {
                amplitude,
                frequency,
                offset,
            } => amplitude * (frequency * x).sin() + offset,
            ClosedForm::Cosine {
                amplitude,
                frequency,
                offset,
            } => amplitude * (frequency * x).cos() + offset,
            ClosedForm::CosQuadratic {
                amplitude,
                frequency,
                offset,
            } => amplitude * (frequency * x * x).cos() + offset,
            ClosedForm::PowerShift {
                shift,
                power,
                scale,
            } => scale / (x + shift).powf(*power),
            ClosedForm::Exponential { amplitude, rate } => amplitude * (rate * x).exp(),
            ClosedForm::Saddle => saddle(x),
            ClosedForm::BesselJ0 { frequency } => bessel_j0(frequency * x),
        }
    }
}

fn saddle(x: f64) -> f64 {
    if x < 0.25 {
        -35.2 * x * x + 17.6 * x
    } else if x < 0.75 {
        35.2 * x * x - 35.2 * x + 8.8
    } else {
        -35.2 * x * x + 52.8 * x - 17.6
    }
}

/// `J_0(z) = (1/pi) \int_0^pi cos(z sin t) dt`; the trapezoidal rule is
/// spectrally accurate for this periodic integrand.
fn bessel_j0(z: f64) -> f64 {
    let panels = 64 + 2 * z.abs().ceil() as usize;
    let h = std::f64::consts::PI / panels as f64;
    let mut acc = 0.5 * (1.0 + (z * 0.0f64.sin()).cos());
    for k in 1..panels {
        acc += (z * (k as f64 * h).sin()).cos();
    }
    acc * h / std::f64::consts::PI
}

/// A potential as given by the user: either a closed form or raw samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Samples { samples: Vec<f64> },
    Closed(ClosedForm),
}

/// One edge of a problem instance before materialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub length: f64,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub grid_size: Option<usize>,
}

impl EdgeSpec {
    pub fn closed(length: f64, form: ClosedForm) -> Self {
        Self {
            length,
            potential: PotentialSpec::Closed(form),
            grid_size: None,
        }
    }

    pub fn with_grid(mut self, grid_size: usize) -> Self {
        self.grid_size = Some(grid_size);
        self
    }
}

/// An edge with its potential sampled on a uniform grid of `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    index: usize,
    length: f64,
    samples: Vec<f64>,
}

impl Edge {
    pub fn new(index: usize, length: f64, samples: Vec<f64>) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::NonPositiveLength {
                edge: index,
                length,
            });
        }
        if samples.len() < 2 {
            return Err(Error::InvalidGraph(format!(
                "edge {index}: grid needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        let n = samples.len();
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinitePotential {
                edge: index,
                x: grid_node(length, n, k),
            });
        }
        Ok(Self {
            index,
            length,
            samples,
        })
    }

    pub fn from_closed_form(index: usize, length: f64, form: &ClosedForm, grid_size: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::NonPositiveLength {
                edge: index,
                length,
            });
        }
        let n = grid_size.max(2);
        let samples = (0..n).map(|k| form.eval(grid_node(length, n, k))).collect();
        Self::new(index, length, samples)
    }

    /// 1-based edge index.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn grid_size(&self) -> usize {
        self.samples.len()
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.samples.len() - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        grid_node(self.length, self.samples.len(), k)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.grid_size()).map(|k| self.node(k)).collect()
    }

    /// Piecewise-linear interpolant of the samples.
    pub fn potential_at(&self, x: f64) -> f64 {
        let n = self.samples.len();
        let t = (x / self.spacing()).clamp(0.0, (n - 1) as f64);
        let k = (t.floor() as usize).min(n - 2);
        let w = t - k as f64;
        self.samples[k] * (1.0 - w) + self.samples[k + 1] * w
    }

    /// `\int_0^x q(t) dt` of the piecewise-linear interpolant (exact for it).
    pub fn potential_integral(&self, x: f64) -> f64 {
        let h = self.spacing();
        let x = x.clamp(0.0, self.length);
        let full = ((x / h).floor() as usize).min(self.samples.len() - 1);
        let mut acc = 0.0;
        for k in 0..full {
            acc += 0.5 * h * (self.samples[k] + self.samples[k + 1]);
        }
        let rest = x - full as f64 * h;
        if rest > 0.0 && full + 1 < self.samples.len() {
            let q0 = self.samples[full];
            acc += rest * (q0 + 0.5 * (self.potential_at(x) - q0));
        }
        acc
    }

    /// `\int_0^L |q|`, trapezoidal.
    pub fn potential_l1(&self) -> f64 {
        let h = self.spacing();
        self.samples
            .windows(2)
            .map(|w| 0.5 * h * (w[0].abs() + w[1].abs()))
            .sum()
    }
}

/// Grid node `k` of an `n`-point uniform grid of `[0, length]`.
///
/// Computed as `(length * k) / (n - 1)` so that nodes shared between a grid and
/// its dyadic refinement are bit-identical. The last node is `length` itself.
pub fn grid_node(length: f64, n: usize, k: usize) -> f64 {
    if k + 1 == n {
        return length;
    }
    (length * k as f64) / (n - 1) as f64
}

/// A compact star graph with `M >= 2` edges glued at one common vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct StarGraph {
    edges: Vec<Edge>,
}

impl StarGraph {
    pub fn new(edges: Vec<Edge>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidGraph(format!(
                "a star graph needs at least 2 edges, got {}",
                edges.len()
            )));
        }
        for (pos, e) in edges.iter().enumerate() {
            if e.index != pos + 1 {
                return Err(Error::InvalidGraph(format!(
                    "edge at position {} carries index {}",
                    pos + 1,
                    e.index
                )));
            }
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge by 1-based index.
    pub fn edge(&self, i: usize) -> &Edge {
        &self.edges[i - 1]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.edges.iter().map(Edge::length).collect()
    }

    pub fn successor(&self, i: usize) -> usize {
        successor(i, self.edges.len())
    }
}

/// Cyclic successor on `1..=m`: `i -> i + 1`, `m -> 1`.
pub fn successor(i: usize, m: usize) -> usize {
    if i >= m {
        1
    } else {
        i + 1
    }
}

/// Materializes a list of edge specifications into a [`StarGraph`].
pub fn build_graph(specs: &[EdgeSpec]) -> Result<StarGraph> {
    let edges = specs
        .iter()
        .enumerate()
        .map(|(pos, spec)| {
            let index = pos + 1;
            match &spec.potential {
                PotentialSpec::Closed(form) => Edge::from_closed_form(
                    index,
                    spec.length,
                    form,
                    spec.grid_size.unwrap_or(DEFAULT_GRID_SIZE),
                ),
                PotentialSpec::Samples { samples } => {
                    if let Some(n) = spec.grid_size {
                        if n != samples.len() {
                            return Err(Error::InvalidGraph(format!(
                                "edge {index}: grid_size {n} does not match {} samples",
                                samples.len()
                            )));
                        }
                    }
                    Edge::new(index, spec.length, samples.clone())
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    StarGraph::new(edges)
}

/// The nine-edge graph used as the main worked example.
pub fn example1_specs() -> Vec<EdgeSpec> {
    use std::f64::consts::{E, PI};
    vec![
        EdgeSpec::closed(
            E / 2.0,
            ClosedForm::AbsShift {
                center: 1.0,
                offset: 1.0,
            },
        ),
        EdgeSpec::closed(
            1.0,
            ClosedForm::Gaussian {
                center: 0.5,
                width: 1.0,
                amplitude: 1.0,
            },
        ),
        EdgeSpec::closed(
            PI / 2.0,
            ClosedForm::Sine {
                amplitude: 1.0,
                frequency: 8.0,
                offset: 2.0 * PI / 3.0,
            },
        ),
        EdgeSpec::closed(
            PI / 3.0,
            ClosedForm::CosQuadratic {
                amplitude: 1.0,
                frequency: 9.0,
                offset: 2.0,
            },
        ),
        EdgeSpec::closed(
            E * E / 4.0,
            ClosedForm::PowerShift {
                shift: 0.1,
                power: 1.0,
                scale: 1.0,
            },
        ),
        EdgeSpec::closed(
            1.1,
            ClosedForm::PowerShift {
                shift: 0.1,
                power: 2.0,
                scale: 1.0,
            },
        ),
        EdgeSpec::closed(
            1.2,
            ClosedForm::Exponential {
                amplitude: 1.0,
                rate: 1.0,
            },
        ),
        EdgeSpec::closed(1.0, ClosedForm::Saddle),
        EdgeSpec::closed(1.4, ClosedForm::BesselJ0 { frequency: 9.0 }),
    ]
}

pub fn example1_graph() -> StarGraph {
    build_graph(&example1_specs()).expect("example graph is valid")
}

/// How the spectral points `rho_k` are laid out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingStrategy {
    /// Affine interpolation between `a` and `b`, endpoints included.
    UniformSegment { a: Complex64, b: Complex64 },
    /// `rho_k = 10^{alpha_k} + i delta`, `alpha_k` uniform on `alpha`.
    LogUniform { alpha: (f64, f64), delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSamplingPlan {
    pub strategy: SamplingStrategy,
    pub count: usize,
}

impl SpectralSamplingPlan {
    pub fn uniform(a: Complex64, b: Complex64, count: usize) -> Self {
        Self {
            strategy: SamplingStrategy::UniformSegment { a, b },
            count,
        }
    }

    pub fn log_uniform(alpha: (f64, f64), delta: f64, count: usize) -> Self {
        Self {
            strategy: SamplingStrategy::LogUniform { alpha, delta },
            count,
        }
    }
}

/// Generates the spectral points of a plan; every `rho_k^2` is non-real.
pub fn sample_rho(plan: &SpectralSamplingPlan) -> Result<Vec<Complex64>> {
    let m = plan.count;
    if m == 0 {
        return Err(Error::InvalidPlan("point count must be at least 1".into()));
    }
    let frac = |k: usize| if m == 1 { 0.0 } else { k as f64 / (m - 1) as f64 };
    let points: Vec<Complex64> = match plan.strategy {
        SamplingStrategy::UniformSegment { a, b } => (0..m).map(|k| a + (b - a) * frac(k)).collect(),
        SamplingStrategy::LogUniform { alpha, delta } => (0..m)
            .map(|k| {
                let e = alpha.0 + (alpha.1 - alpha.0) * frac(k);
                Complex64::new(10f64.powf(e), delta)
            })
            .collect(),
    };
    for (k, rho) in points.iter().enumerate() {
        if !(rho.re.is_finite() && rho.im.is_finite()) || (rho * rho).im.abs() <= 1e-12 {
            return Err(Error::InvalidPlan(format!(
                "rho_{} = {} has a real square",
                k + 1,
                rho
            )));
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_has_nine_edges_with_listed_lengths() {
        let g = example1_graph();
        assert_eq!(g.edge_count(), 9);
        let l = g.lengths();
        assert!((l[0] - std::f64::consts::E / 2.0).abs() < 1e-15);
        assert!((l[4] - std::f64::consts::E.powi(2) / 4.0).abs() < 1e-15);
        assert_eq!(l[5], 1.1);
        assert!((g.edge(6).samples()[0] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn zero_potential_pair() {
        let g = build_graph(&[
            EdgeSpec::closed(1.0, ClosedForm::Zero),
            EdgeSpec::closed(1.0, ClosedForm::Zero),
        ])
        .unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(g.edges().iter().all(|e| e.samples().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn rejects_non_positive_length() {
        let err = build_graph(&[
            EdgeSpec::closed(-1.0, ClosedForm::Zero),
            EdgeSpec::closed(1.0, ClosedForm::Zero),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("non-positive length"));
    }

    #[test]
    fn rejects_pole_inside_interval() {
        let err = build_graph(&[
            EdgeSpec::closed(
                1.0,
                ClosedForm::PowerShift {
                    shift: -0.5,
                    power: 1.0,
                    scale: 1.0,
                },
            )
            .with_grid(11),
            EdgeSpec::closed(1.0, ClosedForm::Zero),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::NonFinitePotential { edge: 1, .. }));
    }

    #[test]
    fn single_edge_is_not_a_star() {
        assert!(build_graph(&[EdgeSpec::closed(1.0, ClosedForm::Zero)]).is_err());
    }

    #[test]
    fn successor_is_cyclic_bijection() {
        for m in 2..12 {
            let mut seen = vec![false; m + 1];
            for i in 1..=m {
                let s = successor(i, m);
                assert!((1..=m).contains(&s));
                assert!(!seen[s]);
                seen[s] = true;
            }
            assert_eq!(successor(m, m), 1);
        }
    }

    #[test]
    fn uniform_plan_endpoints() {
        let plan = SpectralSamplingPlan::uniform(Complex64::new(1.0, 0.1), Complex64::new(100.0, 0.1), 190);
        let r = sample_rho(&plan).unwrap();
        assert_eq!(r.len(), 190);
        assert_eq!(r[0], Complex64::new(1.0, 0.1));
        assert!((r[189] - Complex64::new(100.0, 0.1)).norm() < 1e-12);
        let d0 = r[1].re - r[0].re;
        for w in r.windows(2) {
            assert!((w[1].re - w[0].re - d0).abs() < 1e-12);
        }
    }

    #[test]
    fn log_uniform_plan_endpoints() {
        let r = sample_rho(&SpectralSamplingPlan::log_uniform((0.0, 2.0), 0.1, 90)).unwrap();
        assert_eq!(r.len(), 90);
        assert!((r[0] - Complex64::new(1.0, 0.1)).norm() < 1e-14);
        assert!((r[89] - Complex64::new(100.0, 0.1)).norm() < 1e-12);
    }

    #[test]
    fn single_point_plan() {
        let z = Complex64::new(5.0, 1.0);
        assert_eq!(sample_rho(&SpectralSamplingPlan::uniform(z, z, 1)).unwrap(), vec![z]);
    }

    #[test]
    fn real_points_are_rejected() {
        let plan = SpectralSamplingPlan::uniform(Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), 3);
        assert!(sample_rho(&plan).is_err());
        assert!(sample_rho(&SpectralSamplingPlan::log_uniform((0.0, 1.0), 0.0, 4)).is_err());
    }

    #[test]
    fn bessel_j0_reference_values() {
        // Reference values from mpmath at 40 digits.
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j0(2.404_825_557_695_773)).abs() < 1e-14);
        assert!((bessel_j0(12.6) - 0.162_607_271_745_510_6).abs() < 1e-14);
    }

    #[test]
    fn interpolant_integral_matches_closed_form_for_linear() {
        let e = Edge::from_closed_form(1, 2.0, &ClosedForm::Polynomial { coeffs: vec![1.0, 3.0] }, 11).unwrap();
        for &x in &[0.0, 0.33, 1.0, 1.77, 2.0] {
            let exact = x + 1.5 * x * x;
            assert!((e.potential_integral(x) - exact).abs() < 1e-13, "x={x}");
            assert!((e.potential_at(x) - (1.0 + 3.0 * x)).abs() < 1e-13);
        }
    }

    proptest::proptest! {
        #[test]
        fn refined_grid_reproduces_shared_nodes(n in 2usize..200, len in 0.1f64..5.0, shift in 0.05f64..1.0) {
            let form = ClosedForm::PowerShift { shift, power: 2.0, scale: 1.0 };
            let coarse = Edge::from_closed_form(1, len, &form, n).unwrap();
            let fine = Edge::from_closed_form(1, len, &form, 2 * (n - 1) + 1).unwrap();
            for k in 0..n {
                proptest::prop_assert_eq!(coarse.samples()[k], fine.samples()[2 * k]);
            }
        }

        #[test]
        fn grid_ends_exactly_at_the_length(n in 2usize..2000, len in 0.1f64..5.0) {
            proptest::prop_assert_eq!(grid_node(len, n, 0), 0.0);
            proptest::prop_assert_eq!(grid_node(len, n, n - 1), len);
            proptest::prop_assert!(grid_node(len, n, n - 2) < len);
        }

        #[test]
        fn generated_points_have_non_real_squares(m in 1usize..300, lo in -1.0f64..1.0, span in 0.0f64..2.0, delta in 0.01f64..1.0) {
            let r = sample_rho(&SpectralSamplingPlan::log_uniform((lo, lo + span), delta, m)).unwrap();
            proptest::prop_assert_eq!(r.len(), m);
            for z in r {
                proptest::prop_assert!((z * z).im.abs() > 1e-12);
            }
        }
    }
}
