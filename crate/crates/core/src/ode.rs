//! Initial-value integration of `-y'' + q(x) y = rho^2 y` on a single edge.
//!
//! The first-order system `Y' = A(x) Y`, `A = [[0, 1], [q - rho^2, 0]]` is
//! advanced with the fourth-order Magnus method on every cell of the
//! potential grid (where `q` is linear). Each step propagator is the exact
//! exponential of a traceless 2x2 matrix, so the Wronskian is conserved to
//! rounding. Substeps per cell start at `min(h_grid, 1/(4|rho|))` and are
//! doubled until two consecutive refinements agree to the requested
//! tolerance; the resulting mesh is a deterministic function of the inputs.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::roots::Refinement;

type C64 = Complex64;

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // sqrt(3) / 6
const COMMUTATOR_WEIGHT: f64 = 0.144_337_567_297_406_43; // sqrt(3) / 12

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    /// Relative agreement required between consecutive substep doublings.
    pub tolerance: f64,
    /// Multiplies the base substep length; `0.5` halves every step.
    pub step_factor: f64,
    /// Largest admissible `|rho|`.
    pub max_rho: f64,
    /// Doublings allowed per cell before reporting step underflow.
    pub max_doublings: u32,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-13,
            step_factor: 1.0,
            max_rho: 1e4,
            max_doublings: 14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From `x = 0` towards `x = L`.
    Forward,
    /// From `x = L` towards `x = 0`.
    Backward,
}

/// Value and x-derivative of a solution at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionSample {
    pub rho: C64,
    pub x: f64,
    pub value: C64,
    pub derivative: C64,
}

/// Values of the fundamental system `phi` (`phi(0)=1, phi'(0)=0`) and
/// `S` (`S(0)=0, S'(0)=1`) at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fundamental {
    pub phi: C64,
    pub dphi: C64,
    pub s: C64,
    pub ds: C64,
}

impl Fundamental {
    pub fn wronskian(&self) -> C64 {
        self.phi * self.ds - self.dphi * self.s
    }
}

/// 2x2 transfer matrix mapping `(y, y')` at one point to another.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Transfer {
    a: C64,
    b: C64,
    c: C64,
    d: C64,
}

impl Transfer {
    const IDENTITY: Transfer = Transfer {
        a: C64::new(1.0, 0.0),
        b: C64::new(0.0, 0.0),
        c: C64::new(0.0, 0.0),
        d: C64::new(1.0, 0.0),
    };

    /// `self * rhs`
    fn then_after(&self, rhs: &Transfer) -> Transfer {
        Transfer {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    fn apply(&self, y: C64, dy: C64) -> (C64, C64) {
        (self.a * y + self.b * dy, self.c * y + self.d * dy)
    }

    /// Distance in the norm that balances `y` against `y' / w`.
    fn scaled_distance(&self, other: &Transfer, w: f64) -> f64 {
        let d = [
            (self.a - other.a).norm(),
            (self.b - other.b).norm() * w,
            (self.c - other.c).norm() / w,
            (self.d - other.d).norm(),
        ];
        let s = [self.a.norm(), self.b.norm() * w, self.c.norm() / w, self.d.norm()];
        let dmax = d.iter().cloned().fold(0.0, f64::max);
        let smax = s.iter().cloned().fold(1.0, f64::max);
        dmax / smax
    }
}

/// `cosh(sqrt(w))` and `sinh(sqrt(w)) / sqrt(w)`, both entire in `w`.
fn cosh_sinhc(w: C64) -> (C64, C64) {
    if w.norm() < 1e-2 {
        let mut term_c = C64::new(1.0, 0.0);
        let mut term_s = C64::new(1.0, 0.0);
        let mut ch = term_c;
        let mut sh = term_s;
        for k in 1..9 {
            let k = k as f64;
            term_c *= w / ((2.0 * k - 1.0) * (2.0 * k));
            term_s *= w / ((2.0 * k) * (2.0 * k + 1.0));
            ch += term_c;
            sh += term_s;
        }
        (ch, sh)
    } else {
        let s = w.sqrt();
        let e = s.exp();
        let inv = e.inv();
        (0.5 * (e + inv), 0.5 * (e - inv) / s)
    }
}

/// Integrator bound to a set of options.
#[derive(Debug, Clone, Copy, Default)]
pub struct Integrator {
    pub options: OdeOptions,
}

impl Integrator {
    pub fn new(options: OdeOptions) -> Self {
        Self { options }
    }

    fn check_rho(&self, rho: C64) -> Result<()> {
        let abs = rho.norm();
        if !abs.is_finite() || abs > self.options.max_rho {
            return Err(Error::RhoTooLarge {
                abs,
                max: self.options.max_rho,
            });
        }
        Ok(())
    }

    fn magnus_step(edge: &Edge, lambda: C64, x0: f64, h: f64) -> Transfer {
        let q1 = edge.potential_at(x0 + h * (0.5 - GAUSS_OFFSET));
        let q2 = edge.potential_at(x0 + h * (0.5 + GAUSS_OFFSET));
        let cbar = C64::new(0.5 * (q1 + q2), 0.0) - lambda;
        let alpha = C64::new(COMMUTATOR_WEIGHT * h * h * (q1 - q2), 0.0);
        let off_up = C64::new(h, 0.0);
        let off_down = cbar * h;
        let (ch, sh) = cosh_sinhc(alpha * alpha + off_up * off_down);
        Transfer {
            a: ch + sh * alpha,
            b: sh * off_up,
            c: sh * off_down,
            d: ch - sh * alpha,
        }
    }

    fn uniform_steps(edge: &Edge, lambda: C64, x0: f64, len: f64, n: usize) -> Transfer {
        let h = len / n as f64;
        let mut acc = Transfer::IDENTITY;
        for k in 0..n {
            let step = Self::magnus_step(edge, lambda, x0 + k as f64 * h, h);
            acc = step.then_after(&acc);
        }
        acc
    }

    /// Propagator over a sub-interval on which `q` is linear.
    fn cell(&self, edge: &Edge, rho: C64, x0: f64, x1: f64) -> Result<Transfer> {
        let len = x1 - x0;
        if len == 0.0 {
            return Ok(Transfer::IDENTITY);
        }
        let lambda = rho * rho;
        let base = edge.spacing().min(0.25 / rho.norm().max(1e-300)) * self.options.step_factor;
        let mut n = (len.abs() / base).ceil().max(1.0) as usize;
        let w = rho.norm().max(1.0);
        let mut coarse = Self::uniform_steps(edge, lambda, x0, len, n);
        for _ in 0..self.options.max_doublings {
            n *= 2;
            let fine = Self::uniform_steps(edge, lambda, x0, len, n);
            if fine.scaled_distance(&coarse, w) <= self.options.tolerance {
                return Ok(fine);
            }
            coarse = fine;
        }
        Err(Error::StepUnderflow {
            x: x0,
            rho: rho.to_string(),
        })
    }

    /// Propagator from `a` to `b` (either order), walking the potential grid.
    fn propagate(&self, edge: &Edge, rho: C64, a: f64, b: f64) -> Result<Transfer> {
        let h = edge.spacing();
        let last = edge.grid_size() - 1;
        let mut acc = Transfer::IDENTITY;
        let mut x = a;
        if b > a {
            while x < b {
                // cell k with node(k) <= x < node(k + 1)
                let mut k = ((x / h).floor() as usize).min(last - 1);
                if edge.node(k + 1) <= x && k + 1 < last {
                    k += 1;
                }
                if edge.node(k) > x && k > 0 {
                    k -= 1;
                }
                let next = edge.node(k + 1).min(b);
                acc = self.cell(edge, rho, x, next)?.then_after(&acc);
                x = next;
            }
        } else {
            while x > b {
                // cell k with node(k) < x <= node(k + 1)
                let mut k = ((x / h).ceil() as usize).clamp(1, last) - 1;
                if edge.node(k) >= x && k > 0 {
                    k -= 1;
                }
                if edge.node(k + 1) < x && k + 1 < last {
                    k += 1;
                }
                let prev = edge.node(k).max(b);
                acc = self.cell(edge, rho, x, prev)?.then_after(&acc);
                x = prev;
            }
        }
        Ok(acc)
    }

    /// Integrates from `x = 0` (forward) or `x = L` (backward) with initial data
    /// `init = (y, y')`, reporting the solution at each point of `at_x`.
    pub fn solve_ivp(
        &self,
        edge: &Edge,
        rho: C64,
        init: (C64, C64),
        at_x: &[f64],
        direction: Direction,
    ) -> Result<Vec<SolutionSample>> {
        self.check_rho(rho)?;
        let len = edge.length();
        if let Some(&x) = at_x.iter().find(|&&x| !(0.0..=len).contains(&x)) {
            return Err(Error::InvalidInput(format!("x = {x} outside [0, {len}]")));
        }
        let sorted = match direction {
            Direction::Forward => at_x.windows(2).all(|w| w[0] <= w[1]),
            Direction::Backward => at_x.windows(2).all(|w| w[0] >= w[1]) || at_x.windows(2).all(|w| w[0] <= w[1]),
        };
        if !sorted {
            return Err(Error::InvalidInput("evaluation points must be sorted".into()));
        }
        let start = match direction {
            Direction::Forward => 0.0,
            Direction::Backward => len,
        };
        // Visit points in integration order, report in caller order.
        let mut order: Vec<usize> = (0..at_x.len()).collect();
        if direction == Direction::Backward && at_x.windows(2).all(|w| w[0] <= w[1]) {
            order.reverse();
        }
        let mut out = vec![
            SolutionSample {
                rho,
                x: 0.0,
                value: C64::new(0.0, 0.0),
                derivative: C64::new(0.0, 0.0),
            };
            at_x.len()
        ];
        let (mut y, mut dy) = init;
        let mut x = start;
        for idx in order {
            let target = at_x[idx];
            let p = self.propagate(edge, rho, x, target)?;
            (y, dy) = p.apply(y, dy);
            x = target;
            out[idx] = SolutionSample {
                rho,
                x,
                value: y,
                derivative: dy,
            };
        }
        Ok(out)
    }

    /// `phi` and `S` with their derivatives at `x`, from a single sweep.
    pub fn fundamental(&self, edge: &Edge, rho: C64, x: f64) -> Result<Fundamental> {
        self.check_rho(rho)?;
        let p = self.propagate(edge, rho, 0.0, x.clamp(0.0, edge.length()))?;
        Ok(Fundamental {
            phi: p.a,
            dphi: p.c,
            s: p.b,
            ds: p.d,
        })
    }

    /// `phi` and `S` at the common-vertex end `x = L`.
    pub fn endpoint(&self, edge: &Edge, rho: C64) -> Result<Fundamental> {
        self.fundamental(edge, rho, edge.length())
    }

    /// `T(rho, x)` and `T'(rho, x)`, where `T(rho, L) = 0`, `T'(rho, L) = 1`.
    pub fn t_solution(&self, edge: &Edge, rho: C64, x: f64) -> Result<(C64, C64)> {
        self.check_rho(rho)?;
        let p = self.propagate(edge, rho, edge.length(), x.clamp(0.0, edge.length()))?;
        Ok((p.b, p.d))
    }

    pub fn wronskian(&self, edge: &Edge, rho: C64, x: f64) -> Result<C64> {
        Ok(self.fundamental(edge, rho, x)?.wronskian())
    }
}

pub fn solve_ivp(
    edge: &Edge,
    rho: C64,
    init: (C64, C64),
    at_x: &[f64],
    direction: Direction,
) -> Result<Vec<SolutionSample>> {
    Integrator::default().solve_ivp(edge, rho, init, at_x, direction)
}

pub fn phi(edge: &Edge, rho: C64, at_x: &[f64]) -> Result<Vec<SolutionSample>> {
    solve_ivp(edge, rho, (C64::new(1.0, 0.0), C64::new(0.0, 0.0)), at_x, Direction::Forward)
}

pub fn s_solution(edge: &Edge, rho: C64, at_x: &[f64]) -> Result<Vec<SolutionSample>> {
    solve_ivp(edge, rho, (C64::new(0.0, 0.0), C64::new(1.0, 0.0)), at_x, Direction::Forward)
}

pub fn t_solution(edge: &Edge, rho: C64, at_x: &[f64]) -> Result<Vec<SolutionSample>> {
    solve_ivp(edge, rho, (C64::new(0.0, 0.0), C64::new(1.0, 0.0)), at_x, Direction::Backward)
}

/// `phi S' - phi' S` at `x`; identically one for an exact fundamental system.
pub fn wronskian(edge: &Edge, rho: C64, x: f64) -> Result<C64> {
    Integrator::default().wronskian(edge, rho, x)
}

/// Square roots of the Dirichlet-Dirichlet (`S(rho, L) = 0`) and
/// Neumann-Dirichlet (`phi(rho, L) = 0`) eigenvalues on `(0, rho_max]`,
/// computed by scanning and bisection on the integrated solutions.
pub fn reference_spectra(edge: &Edge, rho_max: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let ode = Integrator::default();
    let step = std::f64::consts::PI / (8.0 * edge.length());
    let s_end = |r: f64| ode.endpoint(edge, C64::new(r, 0.0)).map(|f| f.s.re);
    let phi_end = |r: f64| ode.endpoint(edge, C64::new(r, 0.0)).map(|f| f.phi.re);
    let mu = crate::roots::real_roots_with(s_end, 0.0, rho_max, step, 1e-10, Refinement::Illinois)?;
    let nu = crate::roots::real_roots_with(phi_end, 0.0, rho_max, step, 1e-10, Refinement::Illinois)?;
    Ok((mu, nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, example1_graph, ClosedForm, EdgeSpec};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn flat(value: f64, len: f64) -> Edge {
        Edge::from_closed_form(1, len, &ClosedForm::Constant { value }, 101).unwrap()
    }

    #[test]
    fn free_equation_cosine() {
        let e = flat(0.0, 1.0);
        let s = phi(&e, c(2.0, 0.0), &[1.0]).unwrap()[0];
        assert!((s.value - c(2f64.cos(), 0.0)).norm() < 1e-12);
        assert!((s.derivative - c(-2.0 * 2f64.sin(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn constant_potential_closed_form() {
        let e = flat(1.0, 1.0);
        let s = phi(&e, c(2.0, 0.0), &[1.0]).unwrap()[0];
        let k = 3f64.sqrt();
        assert!((s.value.re - k.cos()).abs() < 1e-12);
        assert!((s.value.re - (-0.160_556_538_574_690_5)).abs() < 1e-12);
    }

    #[test]
    fn complex_rho_constant_potential() {
        let e = flat(2.0, 1.3);
        let rho = c(7.0, 0.1);
        let k = (rho * rho - 2.0).sqrt();
        let f = Integrator::default().endpoint(&e, rho).unwrap();
        assert!((f.phi - (k * 1.3).cos()).norm() < 1e-11);
        assert!((f.s - (k * 1.3).sin() / k).norm() < 1e-11);
    }

    #[test]
    fn free_wronskian_is_one() {
        let e = flat(0.0, 1.0);
        let w = wronskian(&e, c(3.0, 0.0), 0.7).unwrap();
        assert!((w - 1.0).norm() < 1e-13);
    }

    #[test]
    fn saddle_wronskian_complex_rho() {
        let g = example1_graph();
        let w = wronskian(g.edge(8), c(10.0, 0.1), 0.5).unwrap();
        assert!((w - 1.0).norm() < 1e-8);
    }

    #[test]
    fn t_solution_initial_point() {
        let g = example1_graph();
        let e = g.edge(3);
        let t = t_solution(e, c(4.0, 0.1), &[e.length()]).unwrap()[0];
        assert_eq!(t.value, c(0.0, 0.0));
        assert_eq!(t.derivative, c(1.0, 0.0));
    }

    #[test]
    fn t_matches_free_closed_form() {
        let e = flat(0.0, 1.0);
        let rho = 2.5;
        let pts = [0.0, 0.3, 0.9];
        let t = t_solution(&e, c(rho, 0.0), &pts).unwrap();
        for s in t {
            assert!((s.value.re - (rho * (s.x - 1.0)).sin() / rho).abs() < 1e-12);
        }
    }

    #[test]
    fn multiple_points_match_single_sweeps() {
        let g = example1_graph();
        let e = g.edge(4);
        let pts = [0.1, 0.5, 0.77, e.length()];
        let rho = c(12.0, 0.1);
        let multi = phi(e, rho, &pts).unwrap();
        for s in multi {
            let single = Integrator::default().fundamental(e, rho, s.x).unwrap();
            assert!((s.value - single.phi).norm() < 1e-10 * single.phi.norm().max(1.0));
        }
    }

    #[test]
    fn real_rho_gives_real_solution() {
        let g = example1_graph();
        for e in g.edges() {
            let f = Integrator::default().endpoint(e, c(17.3, 0.0)).unwrap();
            assert!(f.phi.im.abs() < 1e-10 && f.s.im.abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_rho_beyond_limit() {
        let e = flat(0.0, 1.0);
        let ode = Integrator::new(OdeOptions {
            max_rho: 50.0,
            ..Default::default()
        });
        assert!(matches!(ode.endpoint(&e, c(60.0, 0.0)), Err(Error::RhoTooLarge { .. })));
    }

    #[test]
    fn step_refinement_converges_on_example_edges() {
        let g = example1_graph();
        let coarse = Integrator::default();
        let fine = Integrator::new(OdeOptions {
            step_factor: 0.5,
            ..Default::default()
        });
        for e in g.edges() {
            for &r in &[1.0, 37.0, 100.0] {
                let a = coarse.endpoint(e, c(r, 0.1)).unwrap().phi;
                let b = fine.endpoint(e, c(r, 0.1)).unwrap().phi;
                assert!((a - b).norm() < 1e-9, "edge {} rho {r}: {}", e.index(), (a - b).norm());
            }
        }
    }

    #[test]
    fn dirichlet_ground_state_of_inverse_square_edge() {
        let g = build_graph(&[
            EdgeSpec::closed(
                1.1,
                ClosedForm::PowerShift {
                    shift: 0.1,
                    power: 2.0,
                    scale: 1.0,
                },
            )
            .with_grid(4001),
            EdgeSpec::closed(1.0, ClosedForm::Zero),
        ])
        .unwrap();
        let (mu, _) = reference_spectra(g.edge(1), 4.0).unwrap();
        let lambda = mu[0] * mu[0];
        assert!((lambda - 11.362_070_6).abs() < 1e-5, "lambda_1 = {lambda}");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn wronskian_conserved(edge in 1usize..=9, re in 0.0f64..100.0, im in -1.0f64..1.0, t in 0.0f64..=1.0) {
            let g = example1_graph();
            let e = g.edge(edge);
            let w = wronskian(e, c(re, im), t * e.length()).unwrap();
            proptest::prop_assert!((w - 1.0).norm() < 1e-8);
        }
    }
}
