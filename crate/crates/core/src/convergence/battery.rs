use super::check::{check_lde, check_le, check_lw, check_window_quenched, ConvergenceConfig, ConvergenceReport, Level, QuenchedReport};
use super::measure::{convolve, ModelMeasure, EXACT_SUPPORT_LIMIT};
use super::sequences::kernel_uniform_sequence;
use crate::actions::{AutomorphismAction, CompactGroupModel, IntegerGroupMatrix};
use crate::entropy::{max_separated, CountingMode};
use crate::error::Result;
use crate::group_core::{quotient_sofic, GroupElement, GroupSpec, Quotient, SoficApproximation};
use crate::microstates::{enumerate_top_microstates, sample_microstates, MapWindow, MicrostateSystem, Pseudometric, TestPanel};
use crate::numeric::Rational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Systems of the standard battery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// shift of `Z` on `(Z/3)^Z` with the cyclic sofic approximation
    Bernoulli,
    /// `X_f` for `f = 2 + t` over `Z/2` (`X_f ≅ Z/3`), block-regular `σ`
    AlgebraicFinite,
    /// `Z/2` acting on `Z/3` by negation, block-regular `σ`
    Negation,
    /// `Z` acting trivially on `Z/3`, cyclic `σ`
    TrivialAction,
}

/// Measure constructors of the battery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureSpec {
    Haar,
    /// the constant identity configuration (a non-generic point)
    PointMassIdentity,
    KernelUniform,
    /// uniform on exactly equivariant microstates
    ExactMicrostates,
    /// `(1 − 1/d) m_X^{⊗d} + (1/d) δ_e`
    Mixture,
    /// `u_S * μ` with `S` a separated set of microstates and `μ` the
    /// scenario's reference measure
    SeparatedConvolution,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Bernoulli, Scenario::AlgebraicFinite, Scenario::Negation, Scenario::TrivialAction];

    pub fn measures(self) -> &'static [MeasureSpec] {
        use MeasureSpec::*;
        match self {
            Scenario::Bernoulli => &[Haar, PointMassIdentity, Mixture, SeparatedConvolution],
            Scenario::AlgebraicFinite => &[Haar, PointMassIdentity, KernelUniform, SeparatedConvolution],
            Scenario::Negation => &[Haar, PointMassIdentity, ExactMicrostates, SeparatedConvolution],
            Scenario::TrivialAction => &[Haar, PointMassIdentity, SeparatedConvolution],
        }
    }

    /// The measure `u_S` is convolved with.
    fn reference(self) -> MeasureSpec {
        match self {
            Scenario::Bernoulli | Scenario::TrivialAction => MeasureSpec::Haar,
            Scenario::AlgebraicFinite => MeasureSpec::KernelUniform,
            Scenario::Negation => MeasureSpec::ExactMicrostates,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BatteryConfig {
    pub d_list: Vec<usize>,
    pub theta: f64,
    pub kappa: f64,
    pub delta: Rational,
    /// separation scale of the sets `S`
    pub sep_eps: Rational,
    pub samples: Option<usize>,
    pub seed: u64,
    pub scenarios: Vec<Scenario>,
}

impl Default for BatteryConfig {
    fn default() -> BatteryConfig {
        BatteryConfig {
            d_list: vec![16, 32, 64],
            theta: 0.95,
            kappa: 0.95,
            delta: Rational::new(13, 20),
            sep_eps: Rational::new(1, 4),
            samples: None,
            seed: 0,
            scenarios: Scenario::ALL.to_vec(),
        }
    }
}

/// Verdicts of all checkers on one (scenario, measure, d).
#[derive(Clone, Debug, Serialize)]
pub struct BatteryCell {
    pub scenario: Scenario,
    pub measure: MeasureSpec,
    pub d: usize,
    pub lw: ConvergenceReport,
    pub le: ConvergenceReport,
    pub lde: ConvergenceReport,
    pub quenched: QuenchedReport,
    pub expected_lw: Option<bool>,
    pub expected_le: Option<bool>,
    pub expected_lde: Option<bool>,
}

impl BatteryCell {
    pub fn expectations_met(&self) -> bool {
        let ok = |e: Option<bool>, r: &ConvergenceReport| e.is_none_or(|e| e == r.pass());
        ok(self.expected_lw, &self.lw) && ok(self.expected_le, &self.le) && ok(self.expected_lde, &self.lde)
    }

    /// lde ⇒ le ⇒ lw*.
    pub fn implications_hold(&self) -> bool {
        (!self.lde.pass() || self.le.pass()) && (!self.le.pass() || self.lw.pass())
    }

    pub fn quenched_agrees(&self) -> bool {
        self.quenched.pass == self.le.pass()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BatteryRun {
    pub cells: Vec<BatteryCell>,
    pub expectation_failures: usize,
    pub implication_violations: usize,
    pub quenched_agreement: f64,
    /// (scenario, d) pairs not run, with the reason
    pub skipped: Vec<String>,
}

struct Setup {
    sigma: Arc<SoficApproximation>,
    system: MicrostateSystem,
    rho: Pseudometric,
    window: MapWindow,
    quench: Vec<GroupElement>,
}

fn default_window(f_set: Vec<GroupElement>, model: &CompactGroupModel, delta: Rational) -> Result<MapWindow> {
    MapWindow::new(f_set, delta, Arc::new(TestPanel::default_for(model)?), Arc::new(model.uniform()))
}

fn setup(scenario: Scenario, d: usize, delta: Rational) -> Result<std::result::Result<Setup, String>> {
    let z3 = Arc::new(CompactGroupModel::cyclic(3));
    let integers = || -> Result<(Arc<GroupSpec>, Arc<SoficApproximation>, Vec<GroupElement>)> {
        let g = Arc::new(GroupSpec::Integers);
        let s = Arc::new(quotient_sofic(&g, &Quotient::Cyclic { n: d }, &g.ball(1))?);
        let f = vec![g.identity(), g.parse_word("t")?];
        Ok((g, s, f))
    };
    let z2 = || -> Result<(Arc<GroupSpec>, Arc<SoficApproximation>, Vec<GroupElement>)> {
        let g = Arc::new(GroupSpec::finite_cyclic(2));
        let f = g.elements().expect("finite");
        let s = Arc::new(quotient_sofic(&g, &Quotient::Regular { copies: d / 2 }, &f)?);
        Ok((g, s, f))
    };
    if matches!(scenario, Scenario::AlgebraicFinite | Scenario::Negation) && !d.is_multiple_of(2) {
        return Ok(Err("odd d for a block-regular approximation of Z/2".into()));
    }
    if scenario == Scenario::Negation && 3u128.pow(d as u32 / 2) > EXACT_SUPPORT_LIMIT {
        return Ok(Err(format!("3^{} exact microstates exceed the exact support limit", d / 2)));
    }
    Ok(Ok(match scenario {
        Scenario::Bernoulli => {
            let (g, sigma, f) = integers()?;
            Setup {
                system: MicrostateSystem::bernoulli(g.clone(), z3.clone()),
                rho: Pseudometric::discrete(g.identity()),
                window: default_window(f.clone(), &z3, delta)?,
                quench: f,
                sigma,
            }
        }
        Scenario::AlgebraicFinite => {
            let (g, sigma, f) = z2()?;
            let poly = IntegerGroupMatrix::parse_scalar(&g, "2 + t")?;
            let (kernel, _) = kernel_uniform_sequence(&poly, std::slice::from_ref(&sigma), 3, Rational::zero(), 0)?.remove(0);
            let system = MicrostateSystem::algebraic(kernel);
            let model = system.model().clone();
            Setup {
                system,
                rho: Pseudometric::flat_torus(3, 1, g.identity()),
                window: default_window(f.clone(), &model, delta)?,
                quench: f,
                sigma,
            }
        }
        Scenario::Negation => {
            let (g, sigma, f) = z2()?;
            let act = AutomorphismAction::power_map(g.clone(), z3.clone(), -1)?;
            Setup {
                system: MicrostateSystem::direct(Arc::new(act)),
                rho: Pseudometric::discrete(g.identity()),
                window: default_window(f.clone(), &z3, delta)?,
                quench: f,
                sigma,
            }
        }
        Scenario::TrivialAction => {
            let (g, sigma, f) = integers()?;
            let act = AutomorphismAction::trivial(g.clone(), z3.clone())?;
            Setup {
                system: MicrostateSystem::direct(Arc::new(act)),
                rho: Pseudometric::discrete(g.identity()),
                window: default_window(f.clone(), &z3, delta)?,
                quench: f,
                sigma,
            }
        }
    }))
}

fn build_measure(spec: MeasureSpec, scenario: Scenario, s: &Setup, cfg: &BatteryConfig) -> Result<ModelMeasure> {
    let model = s.system.model().clone();
    let d = s.sigma.d();
    Ok(match spec {
        MeasureSpec::Haar => ModelMeasure::haar(model, d),
        MeasureSpec::PointMassIdentity => ModelMeasure::point_mass(model.clone(), vec![model.identity(); d])?,
        MeasureSpec::KernelUniform => {
            let k = s.system.kernel().expect("algebraic scenario");
            ModelMeasure::kernel_uniform(k.clone())?
        }
        MeasureSpec::ExactMicrostates => {
            let pts = enumerate_top_microstates(&s.system, &s.sigma, &s.window.f_set, &Rational::zero(), &s.rho, u64::MAX)?;
            ModelMeasure::uniform_on_set(model, d, pts)?
        }
        MeasureSpec::Mixture => {
            let w = 1.0 / d as f64;
            ModelMeasure::mixture(vec![
                (1.0 - w, ModelMeasure::haar(model.clone(), d)),
                (w, ModelMeasure::point_mass(model.clone(), vec![model.identity(); d])?),
            ])?
        }
        MeasureSpec::SeparatedConvolution => {
            let base = build_measure(scenario.reference(), scenario, s, cfg)?;
            let top = MapWindow::topological(s.window.f_set.clone(), s.window.delta, model.size() as usize);
            let candidates = sample_microstates(&s.system, &s.sigma, &top, &s.rho, 64, cfg.seed ^ 0x5e9)?;
            let set: Vec<Vec<u32>> = if candidates.is_empty() {
                vec![vec![model.identity(); d]]
            } else {
                let r = max_separated(&candidates, &cfg.sep_eps, &s.rho, CountingMode::Greedy)?;
                r.indices.iter().map(|&i| candidates[i].clone()).collect()
            };
            let us = ModelMeasure::uniform_on_set(model, d, set)?;
            convolve(&us, &base)?
        }
    })
}

/// Runs every checker on every (scenario, measure, d) cell.
pub fn run_battery(cfg: &BatteryConfig) -> Result<BatteryRun> {
    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for &scenario in &cfg.scenarios {
        for &d in &cfg.d_list {
            let s = match setup(scenario, d, cfg.delta)? {
                Ok(s) => s,
                Err(reason) => {
                    skipped.push(format!("{scenario:?} d={d}: {reason}"));
                    continue;
                }
            };
            let check_cfg = ConvergenceConfig {
                theta: cfg.theta,
                kappa: cfg.kappa,
                samples: cfg.samples,
                ..ConvergenceConfig::new(s.window.clone(), s.rho.clone(), cfg.seed)
            };
            let mut reference_lde: Option<bool> = None;
            for &spec in scenario.measures() {
                let measure = build_measure(spec, scenario, &s, cfg)?;
                let level = [Level::new(s.sigma.clone(), s.system.clone(), measure)?];
                let lw = check_lw(&level, &check_cfg)?.remove(0);
                let le = check_le(&level, &check_cfg)?.remove(0);
                let lde = check_lde(&level, &check_cfg)?.remove(0);
                let quenched = check_window_quenched(&level, &s.quench, &check_cfg)?.remove(0);
                if spec == scenario.reference() {
                    reference_lde = Some(lde.pass());
                }
                let (expected_lw, expected_le, expected_lde) = match (scenario, spec) {
                    (Scenario::Bernoulli, MeasureSpec::Haar) => (Some(true), Some(true), Some(true)),
                    (_, MeasureSpec::PointMassIdentity) => (None, Some(false), None),
                    (Scenario::AlgebraicFinite, MeasureSpec::KernelUniform) => (None, Some(true), Some(true)),
                    (_, MeasureSpec::SeparatedConvolution) if reference_lde == Some(true) => (None, None, Some(true)),
                    _ => (None, None, None),
                };
                cells.push(BatteryCell { scenario, measure: spec, d, lw, le, lde, quenched, expected_lw, expected_le, expected_lde });
            }
        }
    }
    let expectation_failures = cells.iter().filter(|c| !c.expectations_met()).count();
    let implication_violations = cells.iter().filter(|c| !c.implications_hold()).count();
    let quenched_agreement =
        if cells.is_empty() { 1.0 } else { cells.iter().filter(|c| c.quenched_agrees()).count() as f64 / cells.len() as f64 };
    Ok(BatteryRun { cells, expectation_failures, implication_violations, quenched_agreement, skipped })
}
