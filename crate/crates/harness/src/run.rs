//! Experiment pipelines and result persistence.

use crate::plot;
use crate::spec::{ActionPlan, ExperimentSpec, FactorKind, Kind, PanelKind, Plan, SourceKind};
use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use sofic_core::actions::{instantiate_xf, AlgebraicActionModel, CompactGroupModel, IntegerGroupMatrix};
use sofic_core::convergence::{run_battery, BatteryCell, BatteryConfig};
use sofic_core::entropy::{
    h_meas_presence, h_top_presence, kernel_determinant_entropy, EntropyEstimate, FactorMap, MicrostateSource, PresenceParams,
};
use sofic_core::group_core::{sofic_defects, GroupSpec, SoficApproximation, SoficCache, SoficRecipe};
use sofic_core::microstates::{MapWindow, MicrostateSystem, Pseudometric, TestPanel};
use sofic_core::oracles::{circulant_log_det_dft, fk_det_finite, mahler_measure};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

/// One line of the results JSONL.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub experiment: String,
    pub kind: Kind,
    pub d: usize,
    pub seed: u64,
    /// numbers, booleans, or the strings `"-inf"` / `"singular"`
    pub stats: BTreeMap<String, Value>,
    pub methods: BTreeMap<String, String>,
    pub artifacts: BTreeMap<String, String>,
    /// spec that recomputes exactly this record
    pub cell_spec: ExperimentSpec,
    pub wall_clock_ms: f64,
}

/// Paths written by a run.
#[derive(Debug)]
pub struct RunOutput {
    pub jsonl: PathBuf,
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
    pub records: Vec<ResultRecord>,
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or_else(|| Value::String(if v < 0.0 { "-inf".into() } else { "inf".into() }), Value::Number)
}

fn spec_hash(spec: &ExperimentSpec) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(spec).expect("serializable")))
}

fn cell_spec(spec: &ExperimentSpec, d: usize, seed: u64) -> ExperimentSpec {
    ExperimentSpec { d_list: vec![d], seeds: vec![seed], ..spec.clone() }
}

struct Cell {
    d: usize,
    seed: u64,
    recipe: Option<SoficRecipe>,
}

struct Partial {
    stats: BTreeMap<String, Value>,
    methods: BTreeMap<String, String>,
    artifacts: BTreeMap<String, String>,
}

impl Partial {
    fn new() -> Partial {
        Partial { stats: BTreeMap::new(), methods: BTreeMap::new(), artifacts: BTreeMap::new() }
    }

    fn estimate(&mut self, name: &str, e: &EntropyEstimate) {
        self.stats.insert(name.into(), num(e.value.0));
        self.stats.insert(format!("{name}_count"), Value::String(e.count.clone()));
        self.stats.insert(format!("{name}_exact"), Value::Bool(e.exact));
        self.methods.insert(name.into(), e.method.clone());
    }
}

fn build_system(
    plan: &Plan,
    sigma: &Arc<SoficApproximation>,
) -> Result<(MicrostateSystem, Pseudometric, Option<Arc<AlgebraicActionModel>>)> {
    let group = plan.group.as_ref().expect("validated");
    let witness = group.identity();
    Ok(match plan.action.as_ref().expect("validated") {
        ActionPlan::Algebraic { f, q, tol } => {
            let kernel = Arc::new(instantiate_xf(f, sigma, *q, *tol)?);
            let rho = Pseudometric::flat_torus(*q, f.cols as u32, witness);
            (MicrostateSystem::algebraic(kernel.clone()), rho, Some(kernel))
        }
        ActionPlan::Bernoulli { base } => (MicrostateSystem::bernoulli(group.clone(), base.clone()), Pseudometric::discrete(witness), None),
        ActionPlan::Automorphism { action } => (MicrostateSystem::direct(action.clone()), Pseudometric::discrete(witness), None),
    })
}

fn build_window(plan: &Plan, model: &CompactGroupModel) -> Result<MapWindow> {
    let w = plan.spec.window.as_ref().expect("validated");
    let panel = match w.panel {
        PanelKind::Empty => return Ok(MapWindow::topological(plan.f_set.clone(), plan.delta, model.size() as usize)),
        PanelKind::Indicators => TestPanel::indicators(model)?,
        PanelKind::Fourier => TestPanel::fourier(model, w.fourier_max)?,
        PanelKind::Default => TestPanel::default_for(model)?,
    };
    Ok(MapWindow::new(plan.f_set.clone(), plan.delta, Arc::new(panel), Arc::new(model.uniform()))?)
}

fn entropy_cell(plan: &Plan, sigma: &Arc<SoficApproximation>, seed: u64, out: &mut Partial) -> Result<()> {
    let e = plan.spec.entropy.as_ref().expect("validated");
    let (system, rho, kernel) = build_system(plan, sigma)?;
    let model = system.model().clone();
    let window = build_window(plan, &model)?;
    let factor = match e.factor {
        FactorKind::Identity => FactorMap::identity(&model)?,
        FactorKind::Trivial => FactorMap::trivial(&model)?,
    };
    let source = match e.source {
        SourceKind::Enumerate => MicrostateSource::Enumerate { budget: e.budget },
        SourceKind::Sample => MicrostateSource::Sample { n: e.samples, seed },
    };
    let params = PresenceParams { window, eps: plan.eps, rho_x: rho, rho_y: None, source, mode: e.mode };
    out.estimate("h_top", &h_top_presence(&system, sigma, &factor, &params)?);
    out.estimate("h_meas", &h_meas_presence(&system, sigma, &factor, &params)?);
    if let Some(k) = &kernel {
        if *k.tol().numer() == 0 {
            match kernel_determinant_entropy(k) {
                Ok(h) => out.estimate("kernel_det", &h),
                Err(sofic_core::Error::Singular) => {
                    out.stats.insert("kernel_det".into(), Value::String("singular".into()));
                }
                Err(sofic_core::Error::Unsupported(_)) => {}
                Err(err) => return Err(err.into()),
            }
        }
    }
    out.methods.insert("factor".into(), factor.name().into());
    Ok(())
}

fn equality_cell(plan: &Plan, sigma: &Arc<SoficApproximation>, seed: u64, out: &mut Partial) -> Result<()> {
    entropy_cell(plan, sigma, seed, out)?;
    let group: &Arc<GroupSpec> = plan.group.as_ref().expect("validated");
    let Some(ActionPlan::Algebraic { f, .. }) = &plan.action else { unreachable!("validated") };
    let fk = fk_det_finite(f, group)?;
    let tol = plan.spec.entropy.as_ref().expect("validated").tolerance;
    out.stats.insert("fk_det".into(), num(fk.value));
    out.methods.insert("fk_det".into(), fk.method);
    let mut all = true;
    for name in ["h_top", "h_meas"] {
        let v = out.stats[name].as_f64().unwrap_or(f64::NEG_INFINITY);
        let err = (v - fk.value).abs();
        out.stats.insert(format!("{name}_abs_error"), num(err));
        all &= err <= tol;
    }
    out.stats.insert("equal".into(), Value::Bool(all));
    out.stats.insert("tolerance".into(), num(tol));
    Ok(())
}

fn quality_cell(plan: &Plan, sigma: &SoficApproximation, out: &mut Partial) -> Result<()> {
    let q = sofic_defects(sigma, &plan.f_set)?;
    for (k, v) in
        [("max_pair_defect", q.max_pair), ("mean_pair_defect", q.mean_pair), ("max_fixed", q.max_fixed), ("mean_fixed", q.mean_fixed)]
    {
        out.stats.insert(k.into(), num(v));
    }
    Ok(())
}

fn oracle_cell(plan: &Plan, d: usize, out: &mut Partial) -> Result<()> {
    let group = Arc::new(GroupSpec::finite_cyclic(d));
    for (text, p) in plan.spec.oracle.as_ref().expect("validated").polynomials.iter().zip(&plan.polynomials) {
        let f = IntegerGroupMatrix::scalar(p.to_cyclic_ring(d));
        let fk = match fk_det_finite(&f, &group) {
            Ok(r) => num(r.value),
            Err(sofic_core::Error::Singular) => Value::String("singular".into()),
            Err(e) => return Err(e.into()),
        };
        out.stats.insert(format!("{text}: fk_det"), fk);
        out.stats.insert(format!("{text}: dft"), num(circulant_log_det_dft(p, d)));
        let m = mahler_measure(p)?;
        out.stats.insert(format!("{text}: mahler"), num(m.value));
        out.stats.insert(format!("{text}: mahler_error_bound"), num(m.error_bound));
        out.methods.insert(format!("{text}: mahler"), m.method);
    }
    Ok(())
}

fn battery_records(plan: &Plan, seed: u64) -> Result<Vec<ResultRecord>> {
    let spec = &plan.spec;
    let b = spec.battery.clone().unwrap_or_else(|| toml::from_str("").expect("defaults"));
    let cfg = BatteryConfig {
        d_list: spec.d_list.clone(),
        theta: b.theta,
        kappa: b.kappa,
        delta: plan.battery_delta,
        sep_eps: plan.sep_eps,
        samples: b.samples,
        seed,
        scenarios: b.scenarios.clone(),
    };
    let start = Instant::now();
    let run = run_battery(&cfg)?;
    let per_cell = start.elapsed().as_secs_f64() * 1e3 / run.cells.len().max(1) as f64;
    let hash = spec_hash(spec);
    Ok(run
        .cells
        .iter()
        .map(|c: &BatteryCell| {
            let mut stats = BTreeMap::new();
            stats.insert("lw_fraction".into(), num(c.lw.good_coordinate_fraction));
            stats.insert("lw_pass".into(), Value::Bool(c.lw.pass()));
            for (name, r) in [("le", &c.le), ("lde", &c.lde)] {
                if let Some(m) = &r.map_mass {
                    stats.insert(format!("{name}_mass"), num(m.value));
                }
                stats.insert(format!("{name}_pass"), Value::Bool(r.pass()));
            }
            stats.insert("quenched_mass".into(), num(c.quenched.quenched_mass.value));
            stats.insert("annealed_tv".into(), num(c.quenched.annealed_tv));
            stats.insert("quenched_pass".into(), Value::Bool(c.quenched.pass));
            stats.insert("expectations_met".into(), Value::Bool(c.expectations_met()));
            stats.insert("implications_hold".into(), Value::Bool(c.implications_hold()));
            let mut methods = BTreeMap::new();
            methods.insert("scenario".into(), serde_json::to_value(c.scenario).expect("enum").as_str().expect("string").to_string());
            methods.insert("measure".into(), serde_json::to_value(c.measure).expect("enum").as_str().expect("string").to_string());
            methods.insert("le_mass".into(), c.le.map_mass.as_ref().map_or("-".into(), |m| m.method.clone()));
            let mut cell = cell_spec(spec, c.d, seed);
            let mut bb = b.clone();
            bb.scenarios = vec![c.scenario];
            cell.battery = Some(bb);
            ResultRecord {
                schema_version: SCHEMA_VERSION,
                experiment: spec.id.clone(),
                kind: spec.kind,
                d: c.d,
                seed,
                stats,
                methods,
                artifacts: BTreeMap::from([("spec_sha256".to_string(), hash.clone())]),
                cell_spec: cell,
                wall_clock_ms: per_cell,
            }
        })
        .collect())
}

/// Computes every record of a validated plan, ordered by `(d, seed)`.
pub fn compute(plan: &Plan, cache: &SoficCache) -> Result<Vec<ResultRecord>> {
    let spec = &plan.spec;
    if spec.kind == Kind::ConvergenceBattery {
        let mut out = Vec::new();
        for &seed in &spec.seeds {
            out.extend(battery_records(plan, seed)?);
        }
        out.sort_by_key(|r| (r.d, r.seed));
        return Ok(out);
    }
    let mut cells = Vec::new();
    let mut recipes = plan.recipes.iter();
    for &d in &spec.d_list {
        for &seed in &spec.seeds {
            cells.push(Cell { d, seed, recipe: recipes.next().cloned() });
        }
    }
    let hash = spec_hash(spec);
    cells
        .par_iter()
        .map(|cell| {
            let start = Instant::now();
            let mut out = Partial::new();
            out.artifacts.insert("spec_sha256".into(), hash.clone());
            match &cell.recipe {
                Some(recipe) => {
                    let sigma = Arc::new(cache.get_or_build(recipe)?);
                    out.artifacts.insert("sigma_sha256".into(), sigma.content_hash());
                    out.artifacts.insert("sigma_cache_key".into(), recipe.key());
                    match spec.kind {
                        Kind::SoficQuality => quality_cell(plan, &sigma, &mut out)?,
                        Kind::EntropyCurve => entropy_cell(plan, &sigma, cell.seed, &mut out)?,
                        Kind::EqualityCheck => equality_cell(plan, &sigma, cell.seed, &mut out)?,
                        Kind::ConvergenceBattery | Kind::OraclePanel => unreachable!("no sofic recipe"),
                    }
                }
                None => oracle_cell(plan, cell.d, &mut out)?,
            }
            Ok(ResultRecord {
                schema_version: SCHEMA_VERSION,
                experiment: spec.id.clone(),
                kind: spec.kind,
                d: cell.d,
                seed: cell.seed,
                stats: out.stats,
                methods: out.methods,
                artifacts: out.artifacts,
                cell_spec: cell_spec(spec, cell.d, cell.seed),
                wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Summary table: one row per record, one column per statistic.
pub fn write_csv(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let stat_keys: BTreeSet<&String> = records.iter().flat_map(|r| r.stats.keys()).collect();
    let method_keys: BTreeSet<&String> = records.iter().flat_map(|r| r.methods.keys()).collect();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["experiment".to_string(), "kind".into(), "d".into(), "seed".into()];
    header.extend(stat_keys.iter().map(|k| k.to_string()));
    header.extend(method_keys.iter().map(|k| format!("method:{k}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.experiment.clone(), csv_cell(&serde_json::to_value(r.kind)?), r.d.to_string(), r.seed.to_string()];
        row.extend(stat_keys.iter().map(|k| r.stats.get(*k).map_or_else(String::new, csv_cell)));
        row.extend(method_keys.iter().map(|k| r.methods.get(*k).cloned().unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn append_jsonl(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

/// Validates, computes, then writes outputs; nothing is written unless every
/// cell succeeds.
pub fn run(spec_path: &Path, cache: &SoficCache) -> Result<RunOutput> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let plan = ExperimentSpec::parse(&text)?.validate()?;
    let records = compute(&plan, cache)?;
    let spec = &plan.spec;
    let dir = match spec_path.parent() {
        Some(p) if spec.output.dir.is_relative() => p.join(&spec.output.dir),
        _ => spec.output.dir.clone(),
    };
    fs::create_dir_all(&dir)?;
    let jsonl = dir.join(format!("{}.jsonl", spec.id));
    let csv = dir.join(format!("{}.csv", spec.id));
    append_jsonl(&jsonl, &records)?;
    write_csv(&csv, &records)?;
    let svg = if spec.output.plot {
        let p = dir.join(format!("{}.svg", spec.id));
        fs::write(&p, plot::render(&records))?;
        Some(p)
    } else {
        None
    };
    Ok(RunOutput { jsonl, csv, svg, records })
}
