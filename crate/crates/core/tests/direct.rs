//! Weyl-matrix synthesis against closed forms, step refinement and the
//! structural identities of the matrix.

use num_complex::Complex64 as C;
use proptest::prelude::*;
use starweyl_core::direct::{synthesize_weyl_data, weyl_row, weyl_sample, DirectOptions, MaskPolicy};
use starweyl_core::graph::{example1_graph, ClosedForm, SpectralSamplingPlan};
use starweyl_core::ode::OdeOptions;
use starweyl_core::{build_graph, EdgeSpec};

/// Weyl matrix of a zero-potential star graph, written out directly.
fn free_weyl(lengths: &[f64], rho: C) -> Vec<Vec<C>> {
    let cot_sum: C = lengths.iter().map(|&l| (rho * l).cos() / (rho * l).sin()).sum();
    (0..lengths.len())
        .map(|i| {
            let si = (rho * lengths[i]).sin();
            let c = 1.0 / si / cot_sum;
            (0..lengths.len())
                .map(|j| {
                    if i == j {
                        rho * (c - (rho * lengths[i]).cos()) / si
                    } else {
                        rho * c / (rho * lengths[j]).sin()
                    }
                })
                .collect()
        })
        .collect()
}

#[test]
fn halving_the_step_leaves_rows_unchanged() {
    let g = example1_graph();
    let rho = C::new(5.0, 0.1);
    let coarse = weyl_row(&g, 6, rho, &DirectOptions::default()).unwrap();
    let fine = DirectOptions {
        ode: OdeOptions {
            step_factor: 0.5,
            ..OdeOptions::default()
        },
        ..DirectOptions::default()
    };
    let fine = weyl_row(&g, 6, rho, &fine).unwrap();
    for (a, b) in coarse.values.iter().zip(&fine.values) {
        assert!((a - b).norm() <= 1e-7 * b.norm().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn uniform_plan_gives_two_entries_per_row() {
    let plan = SpectralSamplingPlan::uniform(C::new(1.0, 0.1), C::new(100.0, 0.1), 190);
    let data =
        synthesize_weyl_data(&example1_graph(), &plan, MaskPolicy::DiagPlusSuccessor, &DirectOptions::default())
            .unwrap();
    assert!(data.failures.is_empty());
    assert_eq!(data.samples.len(), 190);
    for (k0, s) in data.samples.iter().enumerate() {
        assert_eq!(s.k, k0 + 1);
        assert_eq!(s.retained(), 18);
        for i in 1..=9 {
            assert!(s.get(i, i).is_some());
            assert!(s.get(i, i % 9 + 1).is_some());
        }
        assert!(s.residual <= 1e-8);
    }
}

#[test]
fn zero_potential_matches_the_closed_form() {
    let lengths = [1.0, 1.3, 0.7];
    let specs: Vec<_> = lengths.iter().map(|&l| EdgeSpec::closed(l, ClosedForm::Zero)).collect();
    let g = build_graph(&specs).unwrap();
    let plan = SpectralSamplingPlan::log_uniform((0.0, 2.0), 0.1, 5);
    let data = synthesize_weyl_data(&g, &plan, MaskPolicy::Full, &DirectOptions::default()).unwrap();
    assert_eq!(data.samples.len(), 5);
    for s in &data.samples {
        let want = free_weyl(&lengths, s.rho);
        for i in 1..=3 {
            for j in 1..=3 {
                let (got, w) = (s.get(i, j).unwrap(), want[i - 1][j - 1]);
                assert!((got - w).norm() <= 1e-9 * w.norm().max(1.0), "rho {} ({i},{j}): {got} vs {w}", s.rho);
            }
        }
    }
}

fn potential() -> impl Strategy<Value = ClosedForm> {
    prop_oneof![
        Just(ClosedForm::Zero),
        (-5.0..5.0f64).prop_map(|value| ClosedForm::Constant { value }),
        prop::collection::vec(-3.0..3.0f64, 1..4).prop_map(|coeffs| ClosedForm::Polynomial { coeffs }),
    ]
}

fn graph() -> impl Strategy<Value = Vec<EdgeSpec>> {
    prop::collection::vec(
        (0.5..1.5f64, potential()).prop_map(|(l, f)| EdgeSpec::closed(l, f).with_grid(200)),
        2..5,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rows_solve_the_system(specs in graph(), re in 0.5..30.0f64, im in 0.05..2.0f64) {
        let g = build_graph(&specs).unwrap();
        let s = weyl_sample(&g, 1, C::new(re, im), MaskPolicy::Full, &DirectOptions::default());
        // near-spectrum points are a legitimate refusal
        if let Ok(s) = s {
            prop_assert!(s.residual <= 1e-8);
            prop_assert!(s.asymmetry() <= 1e-8, "asymmetry {}", s.asymmetry());
        }
    }
}
