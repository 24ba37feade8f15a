use super::measure::{ModelMeasure, EXACT_SUPPORT_LIMIT};
use crate::actions::regular_window_marginal;
use crate::error::{invalid, Error, Result};
use crate::group_core::{GroupElement, SoficApproximation};
use crate::microstates::{psi_window, Dynamics, MapWindow, MicrostateSystem, Pseudometric};
use crate::numeric::{format_rational, to_f64};
use crate::rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// One element `(σ_i, μ_i)` of a sequence, with the system it is tested in.
#[derive(Clone, Debug)]
pub struct Level {
    pub sigma: Arc<SoficApproximation>,
    pub system: MicrostateSystem,
    pub measure: ModelMeasure,
}

impl Level {
    pub fn new(sigma: Arc<SoficApproximation>, system: MicrostateSystem, measure: ModelMeasure) -> Result<Level> {
        if measure.d() != sigma.d() {
            return Err(Error::LengthMismatch { expected: sigma.d(), found: measure.d() });
        }
        if measure.model() != system.model() {
            return invalid("measure and system use different models");
        }
        Ok(Level { sigma, system, measure })
    }

    /// `(σ, μ ⊗ μ)` in the diagonal system on `X × X`.
    pub fn doubled(&self) -> Result<Level> {
        Level::new(self.sigma.clone(), self.system.doubled()?, ModelMeasure::tensor(&self.measure, &self.measure)?)
    }
}

/// Window `(F, L, δ, μ)`, metric and finite-scale thresholds.
#[derive(Clone, Debug)]
pub struct ConvergenceConfig {
    pub window: MapWindow,
    pub rho: Pseudometric,
    /// required fraction of good coordinates
    pub theta: f64,
    /// required microstate mass
    pub kappa: f64,
    /// Monte Carlo sample count; default `max(10^4, 100 d)`
    pub samples: Option<usize>,
    pub seed: u64,
}

impl ConvergenceConfig {
    pub fn new(window: MapWindow, rho: Pseudometric, seed: u64) -> ConvergenceConfig {
        ConvergenceConfig { window, rho, theta: 0.95, kappa: 0.95, samples: None, seed }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("θ", self.theta), ("κ", self.kappa)] {
            if !(v > 0.0 && v < 1.0) {
                return invalid(format!("{name} = {v} must lie in (0, 1)"));
            }
        }
        if self.samples == Some(0) {
            return invalid("sample budget must be at least 1");
        }
        Ok(())
    }

    pub fn sample_count(&self, d: usize) -> usize {
        self.samples.unwrap_or((100 * d).max(10_000))
    }

    /// The same thresholds on `X × X` with `μ ⊗ μ`, the tensor panel and `ρ̃`.
    pub fn doubled(&self, model_size: u32) -> Result<ConvergenceConfig> {
        Ok(ConvergenceConfig {
            window: self.window.doubled()?,
            rho: Pseudometric::product(&self.rho, &self.rho, model_size),
            ..self.clone()
        })
    }
}

/// Probability of an event, computed exactly or by Monte Carlo.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassEstimate {
    pub value: f64,
    pub std_error: f64,
    pub method: String,
    pub samples: usize,
}

/// `μ({x : test(x)})`: exact summation when the support has at most
/// [`EXACT_SUPPORT_LIMIT`] points, otherwise `samples` draws with one random
/// stream per draw.
pub fn estimate_mass<T: Fn(&[u32]) -> bool + Sync>(
    measure: &ModelMeasure,
    test: T,
    samples: usize,
    seed: u64,
    stream: &[u64],
) -> MassEstimate {
    if let Some(support) = measure.support(EXACT_SUPPORT_LIMIT) {
        let hits: Vec<bool> = support.par_iter().map(|(x, _)| test(x)).collect();
        let value: f64 = support.iter().zip(&hits).filter(|(_, &h)| h).fold(0.0, |acc, ((_, w), _)| acc + w);
        return MassEstimate { value: value.min(1.0), std_error: 0.0, method: "exact".into(), samples: support.len() };
    }
    let hits: usize = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut path = stream.to_vec();
            path.push(i as u64);
            test(&measure.sample(&mut rng::stream(seed, &path))) as usize
        })
        .sum();
    let p = hits as f64 / samples as f64;
    MassEstimate { value: p, std_error: (p * (1.0 - p) / samples as f64).sqrt(), method: "monte-carlo".into(), samples }
}

/// Statistics of one level under one checker.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub check: String,
    pub level: usize,
    pub d: usize,
    pub measure: String,
    /// `min_{f ∈ L}` of the fraction of `j` with `|∫f d(E_j)_*μ_i − ∫f dμ| < δ`
    pub good_coordinate_fraction: f64,
    pub marginals_exact: bool,
    pub lw_pass: bool,
    pub map_mass: Option<MassEstimate>,
    pub le_pass: Option<bool>,
    pub theta: f64,
    pub kappa: f64,
    pub delta: String,
    pub seed: u64,
}

impl ConvergenceReport {
    /// Verdict of the checker that produced the report.
    pub fn pass(&self) -> bool {
        self.le_pass.unwrap_or(self.lw_pass)
    }
}

fn good_fraction(measure: &ModelMeasure, window: &MapWindow) -> (f64, bool) {
    let m = measure.marginals();
    let delta = to_f64(&window.delta);
    let fraction = window
        .panel
        .functions
        .iter()
        .zip(window.target_integrals())
        .map(|(f, &target)| {
            let good = m.values.iter().filter(|v| (f.integrate(v) - target).abs() < delta).count();
            good as f64 / m.values.len().max(1) as f64
        })
        .fold(1.0, f64::min);
    (fraction, m.exact)
}

fn lw_report(check: &str, index: usize, level: &Level, cfg: &ConvergenceConfig) -> ConvergenceReport {
    let (fraction, exact) = good_fraction(&level.measure, &cfg.window);
    ConvergenceReport {
        check: check.into(),
        level: index,
        d: level.measure.d(),
        measure: level.measure.describe(),
        good_coordinate_fraction: fraction,
        marginals_exact: exact,
        lw_pass: fraction >= cfg.theta,
        map_mass: None,
        le_pass: None,
        theta: cfg.theta,
        kappa: cfg.kappa,
        delta: format_rational(&cfg.window.delta),
        seed: cfg.seed,
    }
}

/// Local weak* convergence: coordinate marginals close to `μ` on most `j`.
pub fn check_lw(levels: &[Level], cfg: &ConvergenceConfig) -> Result<Vec<ConvergenceReport>> {
    cfg.validate()?;
    Ok(levels.iter().enumerate().map(|(i, l)| lw_report("lw*", i, l, cfg)).collect())
}

fn le_reports(check: &str, levels: &[Level], cfg: &ConvergenceConfig, stream: u64) -> Result<Vec<ConvergenceReport>> {
    cfg.validate()?;
    levels
        .iter()
        .enumerate()
        .map(|(i, level)| {
            let mut report = lw_report(check, i, level, cfg);
            let prep = level.system.prepare(&level.sigma, &cfg.window.f_set, &cfg.window.delta, &cfg.rho)?;
            let mass = estimate_mass(
                &level.measure,
                |x| prep.is_top(x) && cfg.window.empirical_ok(x),
                cfg.sample_count(level.measure.d()),
                cfg.seed,
                &[stream, i as u64],
            );
            report.le_pass = Some(report.lw_pass && mass.value >= cfg.kappa);
            report.map_mass = Some(mass);
            Ok(report)
        })
        .collect()
}

/// Local and empirical convergence: lw* plus `μ_i(Map_μ(ρ, F, L, δ, σ_i)) ≥ κ`.
pub fn check_le(levels: &[Level], cfg: &ConvergenceConfig) -> Result<Vec<ConvergenceReport>> {
    le_reports("le", levels, cfg, 0)
}

/// Local and doubly empirical convergence: `μ_i ⊗ μ_i → μ ⊗ μ` in le on
/// `X × X` with the metric `ρ̃`.
pub fn check_lde(levels: &[Level], cfg: &ConvergenceConfig) -> Result<Vec<ConvergenceReport>> {
    let Some(first) = levels.first() else { return Ok(vec![]) };
    let doubled_cfg = cfg.doubled(first.system.model().size() as u32)?;
    let doubled = levels.iter().map(Level::doubled).collect::<Result<Vec<_>>>()?;
    le_reports("lde", &doubled, &doubled_cfg, 1)
}

/// Distribution of `Ψ(p)|_W` (automorphism actions) or of the `W`-window of
/// the shift-invariant measure (Bernoulli and `X_f` systems).
pub fn window_target(system: &MicrostateSystem, target: &[f64], window: &[GroupElement]) -> Result<Vec<(Vec<u32>, f64)>> {
    let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    match system.dynamics() {
        Dynamics::Automorphisms(action) => {
            for (p, &w) in target.iter().enumerate().filter(|(_, &w)| w > 0.0) {
                *acc.entry(psi_window(action, p as u32, window)?).or_insert(0.0) += w;
            }
        }
        Dynamics::Shift { kernel: None } => {
            let atoms: Vec<(u32, f64)> = target.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(p, &w)| (p as u32, w)).collect();
            let total = atoms.len().checked_pow(window.len() as u32).filter(|&t| t as u128 <= EXACT_SUPPORT_LIMIT);
            let total = total.ok_or_else(|| Error::BudgetExceeded {
                required: format!("{}^{}", atoms.len(), window.len()),
                budget: EXACT_SUPPORT_LIMIT as u64,
            })?;
            for c in 0..total {
                let mut r = c;
                let mut tuple = Vec::with_capacity(window.len());
                let mut w = 1.0;
                for _ in window {
                    let (p, pw) = atoms[r % atoms.len()];
                    r /= atoms.len();
                    tuple.push(p);
                    w *= pw;
                }
                *acc.entry(tuple).or_insert(0.0) += w;
            }
        }
        Dynamics::Shift { kernel: Some(k) } => return regular_window_marginal(k.f(), system.group(), k.q(), window),
    }
    Ok(acc.into_iter().collect())
}

/// Quenched window statistics at one level.
#[derive(Clone, Debug, Serialize)]
pub struct QuenchedReport {
    pub level: usize,
    pub d: usize,
    pub measure: String,
    pub window: Vec<String>,
    /// `μ_i`-mass of microstates whose lifted window distribution is `δ`-close
    pub quenched_mass: MassEstimate,
    /// total variation between the averaged window distribution and the target
    pub annealed_tv: f64,
    pub good_coordinate_fraction: f64,
    pub lw_pass: bool,
    pub pass: bool,
    pub theta: f64,
    pub kappa: f64,
    pub delta: String,
}

/// Compares the `W`-window empirical distribution of `φ_x(j)(g) =
/// x(σ(g)^{-1} j)` with the target window distribution.
///
/// The statistic is the largest deviation over the test functions `f ∘ π_g`
/// (`f ∈ L`, `g ∈ W`) and, when `|W| ≥ 2`, the indicator of the target's
/// support. With `W = {e}` this is exactly the empirical test of `Map_μ`.
pub fn check_window_quenched(levels: &[Level], window: &[GroupElement], cfg: &ConvergenceConfig) -> Result<Vec<QuenchedReport>> {
    cfg.validate()?;
    let delta = to_f64(&cfg.window.delta);
    levels
        .iter()
        .enumerate()
        .map(|(i, level)| {
            let target = window_target(&level.system, &cfg.window.target, window)?;
            let perms = window.iter().map(|g| level.sigma.perm_inverse(g).cloned()).collect::<Result<Vec<_>>>()?;
            let coord_integrals: Vec<Vec<f64>> = cfg
                .window
                .panel
                .functions
                .iter()
                .map(|f| (0..window.len()).map(|k| target.iter().map(|(t, w)| w * f.values[t[k] as usize]).sum()).collect())
                .collect();
            let support: HashSet<&Vec<u32>> = target.iter().filter(|(_, w)| *w > 0.0).map(|(t, _)| t).collect();
            let d = level.measure.d();
            let lift = |x: &[u32]| -> Vec<Vec<u32>> { (0..d).map(|j| perms.iter().map(|p| x[p.apply(j)]).collect()).collect() };
            let statistic = |x: &[u32]| -> f64 {
                let tuples = lift(x);
                let mut worst: f64 = 0.0;
                for (f, integrals) in cfg.window.panel.functions.iter().zip(&coord_integrals) {
                    for (k, &target) in integrals.iter().enumerate() {
                        let mean = tuples.iter().map(|t| f.values[t[k] as usize]).sum::<f64>() / d as f64;
                        worst = worst.max((mean - target).abs());
                    }
                }
                if window.len() >= 2 {
                    let inside = tuples.iter().filter(|t| support.contains(t)).count();
                    worst = worst.max(1.0 - inside as f64 / d as f64);
                }
                worst
            };
            let quenched_mass = estimate_mass(&level.measure, |x| statistic(x) < delta, cfg.sample_count(d), cfg.seed, &[2, i as u64]);
            let annealed_tv = annealed_tv(level, &target, &lift, cfg, i);
            let (fraction, _) = good_fraction(&level.measure, &cfg.window);
            let lw_pass = fraction >= cfg.theta;
            Ok(QuenchedReport {
                level: i,
                d,
                measure: level.measure.describe(),
                window: window.iter().map(|g| level.system.group().format(g)).collect(),
                pass: lw_pass && quenched_mass.value >= cfg.kappa,
                quenched_mass,
                annealed_tv,
                good_coordinate_fraction: fraction,
                lw_pass,
                theta: cfg.theta,
                kappa: cfg.kappa,
                delta: format_rational(&cfg.window.delta),
            })
        })
        .collect()
}

fn annealed_tv<L: Fn(&[u32]) -> Vec<Vec<u32>> + Sync>(
    level: &Level,
    target: &[(Vec<u32>, f64)],
    lift: &L,
    cfg: &ConvergenceConfig,
    i: usize,
) -> f64 {
    let d = level.measure.d() as f64;
    let weighted: Vec<(Vec<u32>, f64)> = match level.measure.support(EXACT_SUPPORT_LIMIT) {
        Some(s) => s,
        None => {
            let n = cfg.sample_count(level.measure.d()).min(2_000);
            (0..n).map(|k| (level.measure.sample(&mut rng::stream(cfg.seed, &[3, i as u64, k as u64])), 1.0 / n as f64)).collect()
        }
    };
    let parts: Vec<HashMap<Vec<u32>, f64>> = weighted
        .par_iter()
        .map(|(x, w)| {
            let mut h = HashMap::new();
            for t in lift(x) {
                *h.entry(t).or_insert(0.0) += w / d;
            }
            h
        })
        .collect();
    let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for h in parts {
        let mut sorted: Vec<_> = h.into_iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        for (t, w) in sorted {
            *acc.entry(t).or_insert(0.0) += w;
        }
    }
    for (t, w) in target {
        *acc.entry(t.clone()).or_insert(0.0) -= w;
    }
    0.5 * acc.values().map(|v| v.abs()).sum::<f64>()
}

/// Whether a statistic improves (weakly) along the sequence.
pub fn monotone_nondecreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - 1e-12)
}

/// Appends records to a JSONL file, one object per line.
pub fn append_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    for r in records {
        writeln!(file, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}
