use crate::actions::CompactGroupModel;
use crate::error::{invalid, Error, Result};
use crate::group_core::GroupElement;
use crate::numeric::{format_rational, Rational};
use sha2::{Digest, Sha256};
use std::sync::Arc;

/// Continuous function on a model, tabulated on its points.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub name: String,
    pub values: Vec<f64>,
}

impl TestFunction {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn integrate(&self, weights: &[f64]) -> f64 {
        self.values.iter().zip(weights).map(|(f, w)| f * w).sum()
    }
}

/// Finite list of test functions (the set `L`).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TestPanel {
    pub name: String,
    pub functions: Vec<TestFunction>,
}

impl TestPanel {
    pub fn empty() -> TestPanel {
        TestPanel { name: "empty".into(), functions: vec![] }
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    /// Indicators of single points.
    pub fn indicators(model: &CompactGroupModel) -> Result<TestPanel> {
        let n = model.size();
        if n > 4096 {
            return Err(Error::Unsupported(format!("indicator panel on {} points", n)));
        }
        let functions = (0..n as usize)
            .map(|p| {
                let mut values = vec![0.0; n as usize];
                values[p] = 1.0;
                TestFunction { name: format!("1[{}]", model.label(p as u32)), values }
            })
            .collect();
        Ok(TestPanel { name: "indicators".into(), functions })
    }

    /// Indicators plus the real and imaginary parts of the additive
    /// characters on cyclic models; frequency-one Fourier pairs on torus grids;
    /// indicators on other finite groups.
    pub fn default_for(model: &CompactGroupModel) -> Result<TestPanel> {
        match model {
            CompactGroupModel::TorusGrid { .. } => TestPanel::fourier(model, 1),
            CompactGroupModel::Finite(f) if f.name.starts_with("Z/") && f.order > 1 => {
                let mut panel = TestPanel::indicators(model)?;
                panel.functions.extend(TestPanel::fourier(model, f.order / 2)?.functions);
                panel.name = "default".into();
                Ok(panel)
            }
            CompactGroupModel::Finite(_) => TestPanel::indicators(model),
        }
    }

    /// `cos`/`sin` of `2π k·x` for frequency vectors with at most two nonzero
    /// entries in `[-max_freq, max_freq]`, one per `±k` pair. Cyclic models
    /// count as a one-site torus.
    pub fn fourier(model: &CompactGroupModel, max_freq: u32) -> Result<TestPanel> {
        let (q, sites) = match model {
            CompactGroupModel::TorusGrid { q, sites } => (*q, *sites as usize),
            CompactGroupModel::Finite(f) if f.name.starts_with("Z/") => (f.order, 1),
            CompactGroupModel::Finite(_) => return invalid("Fourier panel needs a torus grid or cyclic model"),
        };
        if model.size() > 1 << 20 {
            return Err(Error::Unsupported("Fourier panel on more than 2^20 points".into()));
        }
        let k = max_freq as i64;
        let mut freqs: Vec<Vec<i64>> = vec![];
        for s1 in 0..sites {
            for a in 1..=k {
                let mut v = vec![0; sites];
                v[s1] = a;
                freqs.push(v);
            }
            for s2 in s1 + 1..sites {
                for a in 1..=k {
                    for b in -k..=k {
                        if b != 0 {
                            let mut v = vec![0; sites];
                            v[s1] = a;
                            v[s2] = b;
                            freqs.push(v);
                        }
                    }
                }
            }
        }
        let n = model.size() as u32;
        let coords: Vec<Vec<u32>> = (0..n).map(|p| model.coords(p)).collect();
        let mut functions = vec![];
        for f in freqs {
            let phase: Vec<f64> = coords
                .iter()
                .map(|c| {
                    let dot: i64 = c.iter().zip(&f).map(|(&x, &k)| x as i64 * k).sum();
                    std::f64::consts::TAU * dot.rem_euclid(q as i64) as f64 / q as f64
                })
                .collect();
            functions.push(TestFunction { name: format!("cos{f:?}"), values: phase.iter().map(|t| t.cos()).collect() });
            // sin vanishes identically when 2k ≡ 0 (mod q)
            if f.iter().any(|&k| (2 * k).rem_euclid(q as i64) != 0) {
                functions.push(TestFunction { name: format!("sin{f:?}"), values: phase.iter().map(|t| t.sin()).collect() });
            }
        }
        Ok(TestPanel { name: format!("fourier(max_freq={max_freq})"), functions })
    }

    /// Products `f ⊗ g` for `f ∈ self ∪ {1}`, `g ∈ other ∪ {1}`, except `1 ⊗ 1`,
    /// on the product model (pair `(a, b)` is `a + split b`).
    pub fn tensor(&self, other: &TestPanel, split: usize, other_size: usize) -> TestPanel {
        let one_a = TestFunction { name: "1".into(), values: vec![1.0; split] };
        let one_b = TestFunction { name: "1".into(), values: vec![1.0; other_size] };
        let left: Vec<&TestFunction> = std::iter::once(&one_a).chain(&self.functions).collect();
        let right: Vec<&TestFunction> = std::iter::once(&one_b).chain(&other.functions).collect();
        let mut functions = vec![];
        for (i, f) in left.iter().enumerate() {
            for (j, g) in right.iter().enumerate() {
                if i == 0 && j == 0 {
                    continue;
                }
                let values = (0..split * other_size).map(|p| f.values[p % split] * g.values[p / split]).collect();
                functions.push(TestFunction { name: format!("{}⊗{}", f.name, g.name), values });
            }
        }
        TestPanel { name: format!("{}⊗{}", self.name, other.name), functions }
    }

    pub fn integrals(&self, weights: &[f64]) -> Vec<f64> {
        self.functions.iter().map(|f| f.integrate(weights)).collect()
    }

    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.functions {
            h.update(f.name.as_bytes());
            for v in &f.values {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Parameters `(F, L, δ)` and the target measure `μ` of a microstate space.
#[derive(Clone, Debug)]
pub struct MapWindow {
    pub f_set: Vec<GroupElement>,
    pub delta: Rational,
    pub panel: Arc<TestPanel>,
    /// `μ` as weights over model points
    pub target: Arc<Vec<f64>>,
    integrals: Vec<f64>,
}

impl MapWindow {
    pub fn new(f_set: Vec<GroupElement>, delta: Rational, panel: Arc<TestPanel>, target: Arc<Vec<f64>>) -> Result<MapWindow> {
        if delta <= Rational::from_integer(0) {
            return invalid(format!("δ = {} must be positive", format_rational(&delta)));
        }
        if panel.functions.iter().any(|f| f.values.len() != target.len()) {
            return Err(Error::LengthMismatch {
                expected: target.len(),
                found: panel.functions.iter().map(|f| f.values.len()).find(|&l| l != target.len()).unwrap_or(0),
            });
        }
        let mass: f64 = target.iter().sum();
        if (mass - 1.0).abs() > 1e-9 || target.iter().any(|&w| w < 0.0) {
            return invalid(format!("target measure has mass {mass}"));
        }
        let integrals = panel.integrals(&target);
        Ok(MapWindow { f_set, delta, panel, target, integrals })
    }

    /// Window with no test functions (topological microstates).
    pub fn topological(f_set: Vec<GroupElement>, delta: Rational, model_size: usize) -> MapWindow {
        let target = Arc::new(vec![1.0 / model_size as f64; model_size]);
        MapWindow { f_set, delta, panel: Arc::new(TestPanel::empty()), integrals: vec![], target }
    }

    pub fn with_delta(&self, delta: Rational) -> Result<MapWindow> {
        MapWindow::new(self.f_set.clone(), delta, self.panel.clone(), self.target.clone())
    }

    pub fn with_panel(&self, panel: Arc<TestPanel>) -> Result<MapWindow> {
        MapWindow::new(self.f_set.clone(), self.delta, panel, self.target.clone())
    }

    pub fn target_integrals(&self) -> &[f64] {
        &self.integrals
    }

    /// Same `F` and `δ` on `X × X`, with the tensor panel and `μ ⊗ μ`.
    pub fn doubled(&self) -> Result<MapWindow> {
        let n = self.target.len();
        let panel = Arc::new(self.panel.tensor(&self.panel, n, n));
        let target: Vec<f64> = (0..n * n).map(|p| self.target[p % n] * self.target[p / n]).collect();
        MapWindow::new(self.f_set.clone(), self.delta, panel, Arc::new(target))
    }

    /// Largest deviation `|(1/d) Σ_j f(x_j) − ∫ f dμ|` over the panel.
    pub fn max_deviation(&self, x: &[u32]) -> f64 {
        let d = x.len() as f64;
        self.panel
            .functions
            .iter()
            .zip(&self.integrals)
            .map(|(f, &target)| (x.iter().map(|&p| f.values[p as usize]).sum::<f64>() / d - target).abs())
            .fold(0.0, f64::max)
    }

    /// Empirical test: every deviation is below `δ` (floating point).
    pub fn empirical_ok(&self, x: &[u32]) -> bool {
        self.panel.is_empty() || self.max_deviation(x) < *self.delta.numer() as f64 / *self.delta.denom() as f64
    }

    /// Same test for a distribution given as weights over points.
    pub fn distribution_deviation(&self, weights: &[f64]) -> f64 {
        self.panel.functions.iter().zip(&self.integrals).map(|(f, &t)| (f.integrate(weights) - t).abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_panel_on_small_torus() {
        let m = CompactGroupModel::torus_grid(3, 1).unwrap();
        let p = TestPanel::fourier(&m, 1).unwrap();
        assert_eq!(p.len(), 2);
        let u = m.uniform();
        assert!(p.integrals(&u).iter().all(|v| v.abs() < 1e-12));
        let m2 = CompactGroupModel::torus_grid(4, 2).unwrap();
        // single-site: (1,0),(0,1); two-site: (1,±1); sin of frequency 2 on Z/4 omitted
        let p2 = TestPanel::fourier(&m2, 1).unwrap();
        assert_eq!(p2.len(), 8);
    }

    #[test]
    fn tensor_panel_contains_marginals() {
        let m = CompactGroupModel::cyclic(3);
        let ind = TestPanel::indicators(&m).unwrap();
        let t = ind.tensor(&ind, 3, 3);
        assert_eq!(t.len(), 15);
        // 1[1] ⊗ 1 evaluated at the pair (1, 2) = 1 + 3*2
        let f = t.functions.iter().find(|f| f.name == "1[1]⊗1").unwrap();
        assert_eq!(f.values[7], 1.0);
    }

    #[test]
    fn window_checks_target_mass() {
        let m = CompactGroupModel::cyclic(3);
        let ind = Arc::new(TestPanel::indicators(&m).unwrap());
        assert!(MapWindow::new(vec![], Rational::new(1, 2), ind.clone(), Arc::new(vec![0.5, 0.2, 0.2])).is_err());
        let w = MapWindow::new(vec![], Rational::new(1, 2), ind, Arc::new(m.uniform())).unwrap();
        assert!(w.empirical_ok(&[0, 1, 2]));
        assert!(!w.empirical_ok(&[0, 0, 0]));
        assert!(w.doubled().unwrap().empirical_ok(&[0, 4, 8, 1, 5, 6, 2, 3, 7]));
    }
}
