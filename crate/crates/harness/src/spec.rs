//! Experiment specifications: the TOML schema and its validation.

use serde::{Deserialize, Serialize};
use sofic_core::actions::{AutomorphismAction, CompactGroupModel, IntegerGroupMatrix};
use sofic_core::convergence::Scenario;
use sofic_core::entropy::CountingMode;
use sofic_core::group_core::{FiniteGroup, GroupElement, GroupSpec, Perturbation, Quotient, SoficRecipe};
use sofic_core::numeric::{parse_rational, Rational};
use sofic_core::oracles::LaurentPolynomial;
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SoficQuality,
    EntropyCurve,
    EqualityCheck,
    ConvergenceBattery,
    OraclePanel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: String,
    pub kind: Kind,
    pub d_list: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sofic: Option<SoficBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<BatteryBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "family", rename_all = "kebab-case")]
pub enum GroupBlock {
    Integers,
    Lattice2,
    Free { rank: usize },
    Cyclic { n: usize },
    Symmetric3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuotientFamily {
    Cyclic,
    Torus2,
    Regular,
    RandomPermutations,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoficBlock {
    pub quotient: QuotientFamily,
    /// word-length ball radius of the support (infinite groups)
    #[serde(default = "one")]
    pub support_radius: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb_rate: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "kebab-case")]
pub enum ActionBlock {
    /// `X_f` on the grid `(1/q)Z/Z` with sup-norm tolerance `tol`
    Algebraic {
        f: String,
        q: u32,
        #[serde(default = "zero_text")]
        tol: String,
    },
    /// shift on `(Z/base)^G`
    Bernoulli { base: u32 },
    /// every generator acts on `Z/base` by `x ↦ power·x`
    Automorphism { base: u32, power: i64 },
}

fn zero_text() -> String {
    "0".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PanelKind {
    Indicators,
    Empty,
    Fourier,
    /// indicators plus characters on cyclic models, Fourier pairs on tori
    Default,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowBlock {
    /// words; defaults to the sofic support
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_set: Option<Vec<String>>,
    pub delta: String,
    #[serde(default = "indicators")]
    pub panel: PanelKind,
    #[serde(default = "one_u32")]
    pub fourier_max: u32,
}

fn indicators() -> PanelKind {
    PanelKind::Indicators
}

fn one_u32() -> u32 {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorKind {
    Identity,
    Trivial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Enumerate,
    Sample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyBlock {
    pub eps: String,
    #[serde(default = "auto")]
    pub mode: CountingMode,
    #[serde(default = "identity")]
    pub factor: FactorKind,
    #[serde(default = "enumerate")]
    pub source: SourceKind,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// absolute tolerance of equality checks
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn auto() -> CountingMode {
    CountingMode::Auto
}

fn identity() -> FactorKind {
    FactorKind::Identity
}

fn enumerate() -> SourceKind {
    SourceKind::Enumerate
}

fn default_budget() -> u64 {
    1 << 24
}

fn default_samples() -> usize {
    1000
}

fn default_tolerance() -> f64 {
    1e-9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryBlock {
    #[serde(default = "point_95")]
    pub theta: f64,
    #[serde(default = "point_95")]
    pub kappa: f64,
    #[serde(default = "battery_delta")]
    pub delta: String,
    #[serde(default = "quarter")]
    pub sep_eps: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default = "all_scenarios")]
    pub scenarios: Vec<Scenario>,
}

fn point_95() -> f64 {
    0.95
}

fn battery_delta() -> String {
    "13/20".into()
}

fn quarter() -> String {
    "1/4".into()
}

fn all_scenarios() -> Vec<Scenario> {
    Scenario::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    pub polynomials: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub plot: bool,
}

impl Default for OutputBlock {
    fn default() -> OutputBlock {
        OutputBlock { dir: default_dir(), plot: false }
    }
}

fn default_dir() -> PathBuf {
    "results".into()
}

/// Spec rejected before any computation.
#[derive(Debug, thiserror::Error)]
#[error("invalid spec: {0}")]
pub struct ValidationError(pub String);

fn reject<T>(msg: impl Into<String>) -> Result<T, ValidationError> {
    Err(ValidationError(msg.into()))
}

fn rational(field: &str, s: &str) -> Result<Rational, ValidationError> {
    parse_rational(s).map_err(|e| ValidationError(format!("{field}: {e}")))
}

/// System parameters resolved from the spec.
#[derive(Clone, Debug)]
pub enum ActionPlan {
    Algebraic { f: IntegerGroupMatrix, q: u32, tol: Rational },
    Bernoulli { base: Arc<CompactGroupModel> },
    Automorphism { action: Arc<AutomorphismAction> },
}

/// Validated spec with parsed parameters.
#[derive(Clone, Debug)]
pub struct Plan {
    pub spec: ExperimentSpec,
    pub group: Option<Arc<GroupSpec>>,
    /// sofic recipe per `(d, seed)` cell, `d`-major
    pub recipes: Vec<SoficRecipe>,
    pub action: Option<ActionPlan>,
    pub f_set: Vec<GroupElement>,
    pub delta: Rational,
    pub eps: Rational,
    pub battery_delta: Rational,
    pub sep_eps: Rational,
    pub polynomials: Vec<LaurentPolynomial>,
}

fn build_group(block: &GroupBlock) -> Result<GroupSpec, ValidationError> {
    Ok(match block {
        GroupBlock::Integers => GroupSpec::Integers,
        GroupBlock::Lattice2 => GroupSpec::IntegerLattice2,
        GroupBlock::Free { rank } if *rank >= 1 => GroupSpec::Free { rank: *rank },
        GroupBlock::Free { .. } => return reject("free group rank must be positive"),
        GroupBlock::Cyclic { n } if *n >= 1 => GroupSpec::finite_cyclic(*n),
        GroupBlock::Cyclic { .. } => return reject("cyclic group order must be positive"),
        GroupBlock::Symmetric3 => GroupSpec::Finite(FiniteGroup::symmetric3()),
    })
}

fn quotient(family: QuotientFamily, group: &GroupSpec, d: usize, seed: u64) -> Result<Quotient, ValidationError> {
    match (family, group) {
        (QuotientFamily::Cyclic, GroupSpec::Integers) => Ok(Quotient::Cyclic { n: d }),
        (QuotientFamily::Torus2, GroupSpec::IntegerLattice2) => {
            let q = (d as f64).sqrt().round() as usize;
            if q * q != d {
                return reject(format!("torus2 needs a square d, got {d}"));
            }
            Ok(Quotient::Torus2 { q1: q, q2: q })
        }
        (QuotientFamily::Regular, GroupSpec::Finite(fg)) => {
            if !d.is_multiple_of(fg.order) {
                return reject(format!("regular approximation needs d divisible by |G| = {}, got {d}", fg.order));
            }
            Ok(Quotient::Regular { copies: d / fg.order })
        }
        (QuotientFamily::RandomPermutations, GroupSpec::Free { .. }) => Ok(Quotient::RandomPermutations { d, seed }),
        (f, g) => reject(format!("quotient family {f:?} does not apply to {}", g.name())),
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<ExperimentSpec, ValidationError> {
        toml::from_str(text).map_err(|e| ValidationError(e.to_string()))
    }

    /// Checks every parameter and reference; nothing is computed or written.
    pub fn validate(&self) -> Result<Plan, ValidationError> {
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return reject(format!("id `{}` must be non-empty and use [A-Za-z0-9_-]", self.id));
        }
        if self.d_list.is_empty() || self.d_list.contains(&0) {
            return reject("d_list must be non-empty with positive entries");
        }
        if self.seeds.is_empty() {
            return reject("seeds must be non-empty");
        }
        let mut plan = Plan {
            spec: self.clone(),
            group: None,
            recipes: vec![],
            action: None,
            f_set: vec![],
            delta: Rational::from_integer(0),
            eps: Rational::from_integer(0),
            battery_delta: Rational::new(13, 20),
            sep_eps: Rational::new(1, 4),
            polynomials: vec![],
        };
        match self.kind {
            Kind::ConvergenceBattery => {
                let b = self.battery.clone().unwrap_or_else(|| toml::from_str("").expect("defaults"));
                for (name, v) in [("theta", b.theta), ("kappa", b.kappa)] {
                    if !(v > 0.0 && v <= 1.0) {
                        return reject(format!("battery.{name} must lie in (0, 1]"));
                    }
                }
                if b.scenarios.is_empty() {
                    return reject("battery.scenarios must be non-empty");
                }
                plan.battery_delta = rational("battery.delta", &b.delta)?;
                plan.sep_eps = rational("battery.sep_eps", &b.sep_eps)?;
                if plan.battery_delta <= Rational::from_integer(0) || plan.sep_eps <= Rational::from_integer(0) {
                    return reject("battery.delta and battery.sep_eps must be positive");
                }
                return Ok(plan);
            }
            Kind::OraclePanel => {
                let o = self.oracle.as_ref().map_or_else(|| reject("oracle-panel needs an [oracle] block"), Ok)?;
                if o.polynomials.is_empty() {
                    return reject("oracle.polynomials must be non-empty");
                }
                for p in &o.polynomials {
                    let lp = LaurentPolynomial::parse(p).map_err(|e| ValidationError(format!("oracle polynomial `{p}`: {e}")))?;
                    if lp.is_zero() {
                        return reject(format!("oracle polynomial `{p}` is zero"));
                    }
                    plan.polynomials.push(lp);
                }
                return Ok(plan);
            }
            _ => {}
        }
        let group = Arc::new(build_group(self.group.as_ref().map_or_else(|| reject("missing [group] block"), Ok)?)?);
        plan.group = Some(group.clone());
        let sofic = self.sofic.as_ref().map_or_else(|| reject("missing [sofic] block"), Ok)?;
        let support: Vec<GroupElement> = group.elements().unwrap_or_else(|| group.ball(sofic.support_radius));
        if let Some(rate) = sofic.perturb_rate {
            if !(0.0..=1.0).contains(&rate) {
                return reject("sofic.perturb_rate must lie in [0, 1]");
            }
        }
        for &d in &self.d_list {
            for &seed in &self.seeds {
                plan.recipes.push(SoficRecipe {
                    group: (*group).clone(),
                    quotient: quotient(sofic.quotient, &group, d, seed)?,
                    support: support.clone(),
                    perturbation: sofic.perturb_rate.map(|rate| Perturbation { rate, seed }),
                });
            }
        }
        let in_support: BTreeSet<&GroupElement> = support.iter().collect();
        let window = self.window.as_ref();
        plan.f_set = match window.and_then(|w| w.f_set.as_ref()) {
            Some(words) => words
                .iter()
                .map(|w| {
                    let g = group.parse_word(w).map_err(|e| ValidationError(format!("window.f_set `{w}`: {e}")))?;
                    if !in_support.contains(&g) {
                        return reject(format!("window.f_set element `{w}` is outside the sofic support"));
                    }
                    Ok(g)
                })
                .collect::<Result<_, _>>()?,
            None => support.clone(),
        };
        if self.kind == Kind::SoficQuality {
            return Ok(plan);
        }
        let w = window.map_or_else(|| reject("missing [window] block"), Ok)?;
        plan.delta = rational("window.delta", &w.delta)?;
        if plan.delta < Rational::from_integer(0) {
            return reject("window.delta must be non-negative");
        }
        let e = self.entropy.as_ref().map_or_else(|| reject("missing [entropy] block"), Ok)?;
        plan.eps = rational("entropy.eps", &e.eps)?;
        if plan.eps <= Rational::from_integer(0) {
            return reject("entropy.eps must be positive");
        }
        if e.tolerance.is_nan() || e.tolerance < 0.0 {
            return reject("entropy.tolerance must be non-negative");
        }
        plan.action = Some(match self.action.as_ref().map_or_else(|| reject("missing [action] block"), Ok)? {
            ActionBlock::Algebraic { f, q, tol } => {
                let m = IntegerGroupMatrix::parse_scalar(&group, f).map_err(|e| ValidationError(format!("action.f `{f}`: {e}")))?;
                for g in m.support() {
                    if !in_support.contains(&g) {
                        return reject(format!("action.f uses `{}` outside the sofic support", group.format(&g)));
                    }
                }
                if *q < 2 {
                    return reject("action.q must be at least 2");
                }
                let tol = rational("action.tol", tol)?;
                if tol < Rational::from_integer(0) {
                    return reject("action.tol must be non-negative");
                }
                ActionPlan::Algebraic { f: m, q: *q, tol }
            }
            ActionBlock::Bernoulli { base } if *base >= 1 => ActionPlan::Bernoulli { base: Arc::new(CompactGroupModel::cyclic(*base)) },
            ActionBlock::Automorphism { base, power } if *base >= 1 => {
                let a = AutomorphismAction::power_map(group.clone(), Arc::new(CompactGroupModel::cyclic(*base)), *power)
                    .map_err(|e| ValidationError(format!("action: {e}")))?;
                ActionPlan::Automorphism { action: Arc::new(a) }
            }
            _ => return reject("action.base must be positive"),
        });
        if self.kind == Kind::EqualityCheck && (!group.is_finite() || !matches!(plan.action, Some(ActionPlan::Algebraic { .. }))) {
            return reject(
                "equality-check compares against the Fuglede-Kadison determinant: it needs a finite group and an algebraic action",
            );
        }
        Ok(plan)
    }
}
