use super::check::{estimate_mass, Level, MassEstimate};
use super::measure::{convolve, ModelMeasure};
use crate::actions::{instantiate_xf, AlgebraicActionModel, CompactGroupModel, IntegerGroupMatrix};
use crate::error::{invalid, Error, Result};
use crate::group_core::SoficApproximation;
use crate::microstates::{MapWindow, Pseudometric};
use crate::numeric::Rational;
use num_traits::{One, Zero};
use serde::Serialize;
use std::sync::Arc;

/// `ν^{⊗d}` for each `d`.
pub fn bernoulli_sequence(model: &Arc<CompactGroupModel>, nu: &[f64], d_list: &[usize]) -> Result<Vec<ModelMeasure>> {
    d_list.iter().map(|&d| ModelMeasure::product(model.clone(), nu.to_vec(), d)).collect()
}

/// Uniform measure on the grid kernel of `f^{(σ)}` at each `σ`, paired with
/// the kernel model. Exact kernels are represented through their Smith form;
/// tolerance kernels must be enumerable within `budget`.
pub fn kernel_uniform_sequence(
    f: &IntegerGroupMatrix,
    sigmas: &[Arc<SoficApproximation>],
    q: u32,
    tol: Rational,
    budget: u64,
) -> Result<Vec<(Arc<AlgebraicActionModel>, ModelMeasure)>> {
    sigmas
        .iter()
        .map(|s| {
            let k = Arc::new(instantiate_xf(f, s, q, tol)?);
            let model = k.coordinate_model().clone();
            let measure = if tol.is_zero() {
                if k.exact_kernel().count().is_one() {
                    ModelMeasure::point_mass(model, vec![0; k.d()])?
                } else {
                    ModelMeasure::kernel_uniform(k.clone())?
                }
            } else {
                let pts = k.enumerate_kernel(budget)?;
                match pts.len() {
                    0 => return invalid("empty kernel"),
                    1 => ModelMeasure::point_mass(model, pts.into_iter().next().expect("one point"))?,
                    _ => ModelMeasure::uniform_on_set(model, k.d(), pts)?,
                }
            };
            Ok((k, measure))
        })
        .collect()
}

/// `u_S * μ` at each level, after checking every `ψ ∈ S` is a topological
/// microstate for `(F, δ, ρ)`.
pub fn separated_convolution_sequence(
    levels: &[Level],
    s_list: &[Vec<Vec<u32>>],
    window: &MapWindow,
    rho: &Pseudometric,
) -> Result<Vec<Level>> {
    if levels.len() != s_list.len() {
        return Err(Error::LengthMismatch { expected: levels.len(), found: s_list.len() });
    }
    levels
        .iter()
        .zip(s_list)
        .map(|(level, s)| {
            let prep = level.system.prepare(&level.sigma, &window.f_set, &window.delta, rho)?;
            for psi in s {
                prep.validate(psi)?;
                if !prep.is_top(psi) {
                    return invalid("separated set contains a non-microstate");
                }
            }
            let us = ModelMeasure::uniform_on_set(level.measure.model().clone(), level.measure.d(), s.clone())?;
            Level::new(level.sigma.clone(), level.system.clone(), convolve(&us, &level.measure)?)
        })
        .collect()
}

/// Probability under `μ` that the translate `ψφ` is a measure microstate.
#[derive(Clone, Debug, Serialize)]
pub struct SurvivalReport {
    pub fraction: MassEstimate,
    pub eps: f64,
    pub pass: bool,
}

pub fn translation_survival(
    psi: &[u32],
    level: &Level,
    window: &MapWindow,
    rho: &Pseudometric,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<SurvivalReport> {
    let prep = level.system.prepare(&level.sigma, &window.f_set, &window.delta, rho)?;
    prep.validate(psi)?;
    if !prep.is_top(psi) {
        return invalid("ψ is not a topological microstate");
    }
    let model = level.measure.model();
    let fraction = estimate_mass(
        &level.measure,
        |phi| {
            let y: Vec<u32> = psi.iter().zip(phi).map(|(&a, &b)| model.mul(a, b)).collect();
            prep.is_top(&y) && window.empirical_ok(&y)
        },
        samples,
        seed,
        &[4],
    );
    Ok(SurvivalReport { pass: fraction.value >= 1.0 - eps, fraction, eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::AutomorphismAction;
    use crate::convergence::check::{check_lde, check_le, check_lw, check_window_quenched, ConvergenceConfig};
    use crate::group_core::{quotient_sofic, GroupSpec, Quotient};
    use crate::microstates::{enumerate_top_microstates, MicrostateSystem, TestPanel};

    fn z3() -> Arc<CompactGroupModel> {
        Arc::new(CompactGroupModel::cyclic(3))
    }

    fn regular(copies: usize) -> (Arc<GroupSpec>, Arc<SoficApproximation>) {
        let g = Arc::new(GroupSpec::finite_cyclic(2));
        let s = Arc::new(quotient_sofic(&g, &Quotient::Regular { copies }, &g.elements().unwrap()).unwrap());
        (g, s)
    }

    fn indicator_window(g: &GroupSpec, model: &CompactGroupModel, delta: Rational) -> MapWindow {
        let panel = Arc::new(TestPanel::indicators(model).unwrap());
        MapWindow::new(g.elements().unwrap(), delta, panel, Arc::new(model.uniform())).unwrap()
    }

    #[test]
    fn kernel_sequence_examples() {
        let (g, s) = regular(1);
        let one = IntegerGroupMatrix::parse_scalar(&g, "1").unwrap();
        let seq = kernel_uniform_sequence(&one, std::slice::from_ref(&s), 3, Rational::zero(), 1000).unwrap();
        assert!(matches!(seq[0].1.kind(), crate::convergence::MeasureKind::PointMass(_)));
        let f = IntegerGroupMatrix::parse_scalar(&g, "2 + t").unwrap();
        let seq = kernel_uniform_sequence(&f, &[s], 3, Rational::zero(), 1000).unwrap();
        assert_eq!(seq[0].1.support_size(), Some(3));
        for v in seq[0].1.marginals().values {
            assert!(v.iter().all(|&w| (w - 1.0 / 3.0).abs() < 1e-15));
        }
        assert_eq!(bernoulli_sequence(&z3(), &[0.5, 0.5, 0.0], &[2, 4]).unwrap().len(), 2);
    }

    #[test]
    fn t_minus_two_tolerance_kernel_baseline() {
        let g = Arc::new(GroupSpec::Integers);
        let s = Arc::new(quotient_sofic(&g, &Quotient::Cyclic { n: 6 }, &g.ball(1)).unwrap());
        let f = IntegerGroupMatrix::parse_scalar(&g, "t - 2").unwrap();
        let seq = kernel_uniform_sequence(&f, &[s], 32, Rational::new(1, 16), 1 << 24).unwrap();
        let size = seq[0].1.support_size().unwrap();
        assert_eq!(
            size,
            num_traits::ToPrimitive::to_u128(
                &crate::actions::count_kernel_points(&seq[0].0, crate::actions::CountMode::GridTolerance { budget: 1 << 24 }).unwrap()
            )
            .unwrap()
        );
        assert!(size > 63);
    }

    #[test]
    fn negation_model_checks() {
        let (g, s) = regular(8);
        let act = Arc::new(AutomorphismAction::power_map(g.clone(), z3(), -1).unwrap());
        let sys = MicrostateSystem::direct(act);
        let rho = Pseudometric::discrete(g.identity());
        let window = indicator_window(&g, &z3(), Rational::new(1, 2));
        let exact = enumerate_top_microstates(&sys, &s, &window.f_set, &Rational::zero(), &rho, 1 << 24).unwrap();
        assert_eq!(exact.len(), 6561);
        let cfg = ConvergenceConfig::new(window.clone(), rho.clone(), 7);
        let good = Level::new(s.clone(), sys.clone(), ModelMeasure::uniform_on_set(z3(), 16, exact.clone()).unwrap()).unwrap();
        let haar = Level::new(s.clone(), sys.clone(), ModelMeasure::haar(z3(), 16)).unwrap();
        let pm = Level::new(s.clone(), sys.clone(), ModelMeasure::point_mass(z3(), vec![0; 16]).unwrap()).unwrap();
        let levels = vec![good, haar, pm];
        let lw = check_lw(&levels, &cfg).unwrap();
        let le = check_le(&levels, &cfg).unwrap();
        assert_eq!(lw.iter().map(|r| r.lw_pass).collect::<Vec<_>>(), vec![true, true, false]);
        assert_eq!(le.iter().map(|r| r.pass()).collect::<Vec<_>>(), vec![true, false, false]);
        assert_eq!(le[2].map_mass.as_ref().unwrap().value, 0.0);
        assert_eq!(lw[2].good_coordinate_fraction, 0.0);
        let lde = check_lde(&levels[..1], &cfg).unwrap();
        assert!(lde[0].pass());
        let w = g.elements().unwrap();
        let q = check_window_quenched(&levels, &w, &cfg).unwrap();
        assert_eq!(q.iter().map(|r| r.pass).collect::<Vec<_>>(), vec![true, false, false]);
        // exactly equivariant uniform measure: window distribution matches Ψ_*μ
        assert!(q[0].annealed_tv < 1e-12);
    }

    #[test]
    fn identity_window_reduces_to_empirical_test() {
        let (g, s) = regular(4);
        let act = Arc::new(AutomorphismAction::power_map(g.clone(), z3(), -1).unwrap());
        let sys = MicrostateSystem::direct(act);
        let rho = Pseudometric::discrete(g.identity());
        let window = indicator_window(&g, &z3(), Rational::new(1, 5));
        let cfg = ConvergenceConfig::new(window.clone(), rho, 2);
        let level = Level::new(s, sys, ModelMeasure::haar(z3(), 8)).unwrap();
        let q = check_window_quenched(std::slice::from_ref(&level), &[g.identity()], &cfg).unwrap();
        let direct = estimate_mass(&level.measure, |x| window.empirical_ok(x), 1, 0, &[]);
        assert!((q[0].quenched_mass.value - direct.value).abs() < 1e-12);
    }

    #[test]
    fn kernel_shift_window_matches_target() {
        let (g, s) = regular(3);
        let f = IntegerGroupMatrix::parse_scalar(&g, "2 + t").unwrap();
        let seq = kernel_uniform_sequence(&f, std::slice::from_ref(&s), 3, Rational::zero(), 1000).unwrap();
        let (k, mu) = seq.into_iter().next().unwrap();
        let sys = MicrostateSystem::algebraic(k);
        let model = sys.model().clone();
        let rho = Pseudometric::flat_torus(3, 1, g.identity());
        let cfg = ConvergenceConfig::new(indicator_window(&g, &model, Rational::new(1, 2)), rho, 1);
        let level = Level::new(s, sys, mu).unwrap();
        let q = check_window_quenched(&[level], &g.elements().unwrap(), &cfg).unwrap();
        assert!(q[0].annealed_tv < 1e-12);
    }

    #[test]
    fn survival_and_separated_convolution() {
        let (g, s) = regular(1);
        let f = IntegerGroupMatrix::parse_scalar(&g, "2 + t").unwrap();
        let (k, mu) = kernel_uniform_sequence(&f, std::slice::from_ref(&s), 3, Rational::zero(), 1000).unwrap().remove(0);
        let sys = MicrostateSystem::algebraic(k);
        let model = sys.model().clone();
        let rho = Pseudometric::flat_torus(3, 1, g.identity());
        let window = MapWindow::new(
            g.elements().unwrap(),
            Rational::from_integer(1),
            Arc::new(TestPanel::indicators(&model).unwrap()),
            Arc::new(model.uniform()),
        )
        .unwrap();
        let level = Level::new(s.clone(), sys.clone(), mu).unwrap();
        let psis = enumerate_top_microstates(&sys, &s, &window.f_set, &window.delta, &rho, 1000).unwrap();
        assert_eq!(psis.len(), 3);
        for psi in &psis {
            let r = translation_survival(psi, &level, &window, &rho, 0.1, 100, 0).unwrap();
            assert!(r.pass && r.fraction.value == 1.0);
        }
        let conv = separated_convolution_sequence(std::slice::from_ref(&level), std::slice::from_ref(&psis), &window, &rho).unwrap();
        assert_eq!(conv[0].measure.support(100).unwrap().len(), 3);
        let id = separated_convolution_sequence(std::slice::from_ref(&level), &[vec![vec![0, 0]]], &window, &rho).unwrap();
        assert_eq!(id[0].measure.support(100), level.measure.support(100));
        assert!(separated_convolution_sequence(&[level], &[vec![vec![1, 0]]], &window, &rho).is_err());
    }
}
