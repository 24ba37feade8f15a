//! Structural invariants over randomized inputs.

use num_traits::Zero;
use proptest::prelude::*;
use sofic_core::actions::{count_kernel_points, instantiate_xf, AutomorphismAction, CompactGroupModel, CountMode, IntegerGroupMatrix};
use sofic_core::convergence::{check_lde, check_le, convolve, ConvergenceConfig, Level, ModelMeasure};
use sofic_core::entropy::{max_separated, min_cover, CountingMode};
use sofic_core::group_core::{quotient_sofic, GroupSpec, Quotient};
use sofic_core::linalg::IntMatrix;
use sofic_core::microstates::{
    enumerate_meas_microstates, enumerate_top_microstates, MapWindow, MicrostateSystem, Pseudometric, TestPanel,
};
use sofic_core::numeric::Rational;
use std::sync::Arc;

const BUDGET: u64 = 1 << 20;

fn z3() -> Arc<CompactGroupModel> {
    Arc::new(CompactGroupModel::cyclic(3))
}

fn negation_level(points: Vec<Vec<u32>>) -> (Level, Arc<GroupSpec>) {
    let g = Arc::new(GroupSpec::finite_cyclic(2));
    let s = Arc::new(quotient_sofic(&g, &Quotient::Regular { copies: 2 }, &g.elements().unwrap()).unwrap());
    let act = AutomorphismAction::power_map(g.clone(), z3(), -1).unwrap();
    let mu = ModelMeasure::uniform_on_set(z3(), 4, points).unwrap();
    (Level::new(s, MicrostateSystem::direct(Arc::new(act)), mu).unwrap(), g)
}

fn config(g: &GroupSpec, delta: Rational) -> ConvergenceConfig {
    let model = z3();
    let w =
        MapWindow::new(g.elements().unwrap(), delta, Arc::new(TestPanel::default_for(&model).unwrap()), Arc::new(model.uniform())).unwrap();
    ConvergenceConfig::new(w, Pseudometric::discrete(g.identity()), 0)
}

fn configuration(d: usize) -> impl Strategy<Value = Vec<u32>> {
    proptest::collection::vec(0u32..3, d)
}

/// The nine exactly equivariant configurations of negation on two blocks.
fn exact_pairs() -> Vec<Vec<u32>> {
    (0..9).map(|i| vec![i / 3, (3 - i / 3) % 3, i % 3, (3 - i % 3) % 3]).collect()
}

fn circulant_det(coeffs: &[i64], d: usize) -> i128 {
    let mut m = IntMatrix::zeros(d, d);
    for j in 0..d {
        for (k, &c) in coeffs.iter().enumerate() {
            let col = (j + k) % d;
            m.set(j, col, m.get(j, col) + c);
        }
    }
    sofic_core::linalg::det(&m).to_string().parse().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Restricted to exact microstates: ρ̃ averages squared distances, so a pair
    // (x, y) with y exact can pass the doubled test while x alone fails.
    #[test]
    fn lde_implies_le_implies_lw(idx in proptest::collection::vec(0usize..9, 1..8), k in 0usize..3) {
        let delta = [Rational::new(1, 5), Rational::new(13, 20), Rational::new(1, 1)][k];
        let points = idx.iter().map(|&i| exact_pairs()[i].clone()).collect();
        let (level, g) = negation_level(points);
        let cfg = config(&g, delta);
        let le = check_le(std::slice::from_ref(&level), &cfg).unwrap().remove(0);
        let lde = check_lde(&[level], &cfg).unwrap().remove(0);
        prop_assert!(!le.pass() || le.lw_pass);
        prop_assert!(!lde.pass() || le.pass());
    }

    #[test]
    fn le_verdict_is_monotone_in_delta(points in proptest::collection::vec(configuration(4), 1..8)) {
        let (level, g) = negation_level(points);
        let mut last = (0.0, 0.0);
        for delta in [Rational::new(1, 5), Rational::new(1, 2), Rational::new(13, 20), Rational::new(1, 1)] {
            let r = check_le(std::slice::from_ref(&level), &config(&g, delta)).unwrap().remove(0);
            let now = (r.good_coordinate_fraction, r.map_mass.unwrap().value);
            prop_assert!(now.0 >= last.0 && now.1 >= last.1);
            last = now;
        }
    }

    #[test]
    fn separated_and_cover_counts_sandwich(points in proptest::collection::vec(configuration(4), 1..12), m in 0i64..6) {
        let g = GroupSpec::Integers;
        let rho = Pseudometric::flat_torus(3, 1, g.identity());
        // d = 4: squared distances lie on (1/36)Z, and ε = (2m + 1)/12 keeps ε^2 and (ε/2)^2 off it
        let eps = Rational::new(2 * m + 1, 12);
        let s = min_cover(&points, &eps, &rho, CountingMode::Exact).unwrap().count;
        let n = max_separated(&points, &eps, &rho, CountingMode::Exact).unwrap().count;
        let s2 = min_cover(&points, &(eps / 2), &rho, CountingMode::Exact).unwrap().count;
        prop_assert!(s <= n && n <= s2, "{s} {n} {s2}");
        let greedy = max_separated(&points, &eps, &rho, CountingMode::Greedy).unwrap().count;
        prop_assert!(greedy <= n);
    }

    #[test]
    fn measure_microstates_are_topological_microstates(k in 1usize..4, num in 1i64..8) {
        let g = Arc::new(GroupSpec::finite_cyclic(2));
        let s = Arc::new(quotient_sofic(&g, &Quotient::Regular { copies: k }, &g.elements().unwrap()).unwrap());
        let f = IntegerGroupMatrix::parse_scalar(&g, "2 + t").unwrap();
        let system = MicrostateSystem::algebraic(Arc::new(instantiate_xf(&f, &s, 3, Rational::zero()).unwrap()));
        let model = system.model().clone();
        let delta = Rational::new(num, 8);
        let w = MapWindow::new(g.elements().unwrap(), delta, Arc::new(TestPanel::indicators(&model).unwrap()), Arc::new(model.uniform())).unwrap();
        let rho = Pseudometric::flat_torus(3, 1, g.identity());
        let top = enumerate_top_microstates(&system, &s, &w.f_set, &delta, &rho, BUDGET).unwrap();
        let meas = enumerate_meas_microstates(&system, &s, &w, &rho, BUDGET).unwrap();
        prop_assert!(meas.iter().all(|x| top.contains(x)));
    }

    #[test]
    fn continuous_kernel_count_is_the_determinant(coeffs in proptest::collection::vec(-3i64..4, 1..4), d in 3usize..9) {
        let det = circulant_det(&coeffs, d);
        prop_assume!(det != 0);
        let g = Arc::new(GroupSpec::Integers);
        let s = Arc::new(quotient_sofic(&g, &Quotient::Cyclic { n: d }, &g.ball(coeffs.len())).unwrap());
        let text: Vec<String> = coeffs.iter().enumerate().map(|(k, c)| format!("{c} t^{k}")).collect();
        let f = IntegerGroupMatrix::parse_scalar(&g, &text.join(" + ")).unwrap();
        let kernel = instantiate_xf(&f, &s, 2, Rational::zero()).unwrap();
        let count = count_kernel_points(&kernel, CountMode::ContinuousExact).unwrap();
        prop_assert_eq!(count.to_string(), det.unsigned_abs().to_string());
    }

    #[test]
    fn convolution_with_haar_is_haar(points in proptest::collection::vec(configuration(3), 1..6)) {
        let model = z3();
        let us = ModelMeasure::uniform_on_set(model.clone(), 3, points).unwrap();
        let conv = convolve(&us, &ModelMeasure::haar(model, 3)).unwrap();
        for j in 0..3 {
            let (m, _) = conv.marginal(j).unwrap();
            prop_assert!(m.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-12));
        }
    }
}
