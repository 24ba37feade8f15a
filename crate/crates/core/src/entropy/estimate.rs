use super::counting::{max_separated, s_eps_delta, CountingMode, CoverCount};
use super::factor::FactorMap;
use crate::actions::AlgebraicActionModel;
use crate::convergence::{ConvergenceReport, Level};
use crate::error::{Error, Result};
use crate::group_core::SoficApproximation;
use crate::linalg::det;
use crate::microstates::{
    enumerate_meas_microstates, enumerate_top_microstates, sample_microstates, MapWindow, MicrostateSystem, Pseudometric,
};
use crate::numeric::{format_rational, ln_abs_bigint, Nats, Rational};
use num_traits::Zero;
use serde::Serialize;

/// Where the microstate set comes from.
#[derive(Clone, Debug)]
pub enum MicrostateSource {
    /// exhaustive (kernel route for algebraic systems)
    Enumerate { budget: u64 },
    /// randomized search; counts are then lower bounds
    Sample { n: usize, seed: u64 },
}

/// Entropy value with the parameters and counts that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyEstimate {
    pub value: Nats,
    pub method: String,
    pub d: usize,
    pub eps: Option<String>,
    pub delta: Option<String>,
    pub f_set: Vec<String>,
    pub panel: Option<String>,
    pub factor: String,
    /// size of the microstate set before projection
    pub microstates: Option<usize>,
    pub count: String,
    /// whether `count` is exact rather than a bound
    pub exact: bool,
}

/// Parameters shared by the two entropies in the presence.
#[derive(Clone, Debug)]
pub struct PresenceParams {
    /// `F`, `δ` and, for the measure version, `L` and `μ`
    pub window: MapWindow,
    pub eps: Rational,
    pub rho_x: Pseudometric,
    /// defaults to the quotient metric of `ρ_X`
    pub rho_y: Option<Pseudometric>,
    pub source: MicrostateSource,
    pub mode: CountingMode,
}

fn presence(
    system: &MicrostateSystem,
    sigma: &SoficApproximation,
    factor: &FactorMap,
    params: &PresenceParams,
    measure: bool,
) -> Result<EntropyEstimate> {
    let w = &params.window;
    let microstates = match (&params.source, measure) {
        (MicrostateSource::Enumerate { budget }, false) => {
            enumerate_top_microstates(system, sigma, &w.f_set, &w.delta, &params.rho_x, *budget)?
        }
        (MicrostateSource::Enumerate { budget }, true) => enumerate_meas_microstates(system, sigma, w, &params.rho_x, *budget)?,
        (MicrostateSource::Sample { n, seed }, false) => {
            let top = MapWindow::topological(w.f_set.clone(), w.delta, system.model().size() as usize);
            sample_microstates(system, sigma, &top, &params.rho_x, *n, *seed)?
        }
        (MicrostateSource::Sample { n, seed }, true) => sample_microstates(system, sigma, w, &params.rho_x, *n, *seed)?,
    };
    let enumerated = matches!(params.source, MicrostateSource::Enumerate { .. });
    let rho_y = match &params.rho_y {
        Some(r) => r.clone(),
        None => factor.target_metric(&params.rho_x, system.model())?,
    };
    let mut images: Vec<Vec<u32>> = microstates.iter().map(|x| factor.project(x)).collect();
    images.sort();
    images.dedup();
    let (count, exact) = if images.is_empty() {
        (0, enumerated)
    } else {
        let r = max_separated(&images, &params.eps, &rho_y, params.mode)?;
        (r.count, r.exact && enumerated)
    };
    let d = sigma.d();
    let value = if count == 0 { Nats::NEG_INFINITY } else { Nats((count as f64).ln() / d as f64) };
    Ok(EntropyEstimate {
        value,
        method: "separated-count".into(),
        d,
        eps: Some(format_rational(&params.eps)),
        delta: Some(format_rational(&w.delta)),
        f_set: w.f_set.iter().map(|g| system.group().format(g)).collect(),
        panel: measure.then(|| w.panel.name.clone()),
        factor: factor.name().into(),
        microstates: Some(microstates.len()),
        count: count.to_string(),
        exact,
    })
}

/// `(1/d) ln N_ε(π ∘ Map(ρ_X, F, δ, σ), ρ_{Y,2})`.
pub fn h_top_presence(
    system: &MicrostateSystem,
    sigma: &SoficApproximation,
    factor: &FactorMap,
    params: &PresenceParams,
) -> Result<EntropyEstimate> {
    presence(system, sigma, factor, params, false)
}

/// `(1/d) ln N_ε(π ∘ Map_μ(ρ_X, F, L, δ, σ), ρ_{Y,2})`.
pub fn h_meas_presence(
    system: &MicrostateSystem,
    sigma: &SoficApproximation,
    factor: &FactorMap,
    params: &PresenceParams,
) -> Result<EntropyEstimate> {
    presence(system, sigma, factor, params, true)
}

/// `(1/d) ln |det f^{(σ)}|`, the number of points of the continuous kernel.
pub fn kernel_determinant_entropy(kernel: &AlgebraicActionModel) -> Result<EntropyEstimate> {
    let a = kernel.dense();
    if a.rows != a.cols {
        return Err(Error::Unsupported("kernel determinant needs a square matrix".into()));
    }
    let det = det(&a);
    if det.is_zero() {
        return Err(Error::Singular);
    }
    let d = kernel.d();
    Ok(EntropyEstimate {
        value: Nats(ln_abs_bigint(&det) / d as f64),
        method: "kernel-determinant".into(),
        d,
        eps: None,
        delta: None,
        f_set: vec![],
        panel: None,
        factor: "identity".into(),
        microstates: None,
        count: num_traits::Signed::abs(&det).to_string(),
        exact: true,
    })
}

/// A candidate sequence for the lde entropy with its lde reports.
#[derive(Clone, Debug)]
pub struct CandidateSequence {
    pub name: String,
    pub levels: Vec<Level>,
    pub lde: Vec<ConvergenceReport>,
}

impl CandidateSequence {
    /// Passes when the largest level passes the lde check.
    pub fn passed(&self) -> bool {
        self.lde.last().is_some_and(ConvergenceReport::pass)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LdeLevel {
    pub d: usize,
    pub cover: CoverCount,
    pub value: Nats,
}

#[derive(Clone, Debug, Serialize)]
pub struct LdeSequence {
    pub name: String,
    pub levels: Vec<LdeLevel>,
    /// value at the largest level
    pub value: Nats,
}

#[derive(Clone, Debug, Serialize)]
pub struct LdeEstimate {
    pub value: Nats,
    pub best: Option<String>,
    pub eps: String,
    pub delta: String,
    pub sequences: Vec<LdeSequence>,
    /// sequences excluded for failing the lde check
    pub excluded: Vec<String>,
}

/// Largest `(1/d) ln S_{ε,δ}(μ_i)` growth over the sequences that pass the
/// lde check; `-inf` when none does.
pub fn h_lde(
    family: &[CandidateSequence],
    eps: &Rational,
    delta: &Rational,
    rho: &Pseudometric,
    mode: CountingMode,
    seed: u64,
) -> Result<LdeEstimate> {
    let mut sequences = Vec::new();
    let mut excluded = Vec::new();
    for seq in family {
        if !seq.passed() {
            excluded.push(seq.name.clone());
            continue;
        }
        let levels = seq
            .levels
            .iter()
            .map(|l| {
                let cover = s_eps_delta(&l.measure, eps, delta, rho, mode, seed)?;
                let d = l.measure.d();
                Ok(LdeLevel { d, value: Nats((cover.count as f64).ln() / d as f64), cover })
            })
            .collect::<Result<Vec<_>>>()?;
        let value = levels.last().map_or(Nats::NEG_INFINITY, |l| l.value);
        sequences.push(LdeSequence { name: seq.name.clone(), levels, value });
    }
    let best = sequences.iter().max_by(|a, b| a.value.0.partial_cmp(&b.value.0).expect("not nan"));
    Ok(LdeEstimate {
        value: best.map_or(Nats::NEG_INFINITY, |s| s.value),
        best: best.map(|s| s.name.clone()),
        eps: format_rational(eps),
        delta: format_rational(delta),
        excluded,
        sequences,
    })
}
