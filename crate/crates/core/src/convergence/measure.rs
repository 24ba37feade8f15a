use crate::actions::{AlgebraicActionModel, CompactGroupModel};
use crate::error::{invalid, Error, Result};
use crate::linalg::KernelParam;
use num_traits::{ToPrimitive, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

/// Supports with at most this many points are handled exactly.
pub const EXACT_SUPPORT_LIMIT: u128 = 1_000_000;

/// Finitely supported weighted measure on `X^d`.
#[derive(Clone)]
pub struct WeightedSupport {
    points: Vec<Vec<u32>>,
    weights: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl WeightedSupport {
    /// Merges repeated points and sorts lexicographically.
    fn new(points: Vec<Vec<u32>>, weights: Vec<f64>) -> Result<WeightedSupport> {
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch { expected: points.len(), found: weights.len() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return invalid("weights must be finite and non-negative");
        }
        let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (p, w) in points.into_iter().zip(weights) {
            if w > 0.0 {
                *acc.entry(p).or_insert(0.0) += w;
            }
        }
        let total: f64 = acc.values().sum();
        if acc.is_empty() || (total - 1.0).abs() > 1e-9 {
            return invalid(format!("measure has total mass {total}"));
        }
        let (points, weights): (Vec<_>, Vec<_>) = acc.into_iter().unzip();
        let sampler = WeightedIndex::new(&weights).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(WeightedSupport { points, weights, sampler })
    }

    pub fn points(&self) -> &[Vec<u32>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Representations of probability measures on `X^d`.
#[derive(Clone)]
pub enum MeasureKind {
    /// `ν^{⊗d}`
    Product(Arc<Vec<f64>>),
    UniformOnSet(Arc<Vec<Vec<u32>>>),
    Weighted(Arc<WeightedSupport>),
    /// Empirical stand-in for a measure too large to represent; marginals
    /// computed from it are flagged as estimates.
    SampleBased {
        support: Arc<WeightedSupport>,
        seed: u64,
    },
    PointMass(Arc<Vec<u32>>),
    /// Haar measure of the exact grid kernel, sampled through its Smith form.
    KernelUniform {
        kernel: Arc<AlgebraicActionModel>,
        param: Arc<KernelParam>,
    },
    Convolution(Box<ModelMeasure>, Box<ModelMeasure>),
    Mixture(Vec<(f64, ModelMeasure)>),
    /// `μ ⊗ ν` on `(X × Y)^d`; the pair `(a, b)` is the point `a + |X| b`.
    Tensor(Box<ModelMeasure>, Box<ModelMeasure>),
}

/// A probability measure on `X_model^d`.
#[derive(Clone)]
pub struct ModelMeasure {
    model: Arc<CompactGroupModel>,
    d: usize,
    kind: MeasureKind,
}

impl fmt::Debug for ModelMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelMeasure({}, d={})", self.describe(), self.d)
    }
}

/// Per-coordinate marginals, with a flag for sample-based estimates.
#[derive(Clone, Debug)]
pub struct Marginals {
    pub values: Vec<Vec<f64>>,
    pub exact: bool,
}

fn check_point(model: &CompactGroupModel, d: usize, x: &[u32]) -> Result<()> {
    if x.len() != d {
        return Err(Error::LengthMismatch { expected: d, found: x.len() });
    }
    if let Some(p) = x.iter().find(|&&p| p as u64 >= model.size()) {
        return invalid(format!("point {p} outside {}", model.name()));
    }
    Ok(())
}

impl ModelMeasure {
    pub fn product(model: Arc<CompactGroupModel>, nu: Vec<f64>, d: usize) -> Result<ModelMeasure> {
        if nu.len() as u64 != model.size() {
            return Err(Error::LengthMismatch { expected: model.size() as usize, found: nu.len() });
        }
        let total: f64 = nu.iter().sum();
        if (total - 1.0).abs() > 1e-9 || nu.iter().any(|&w| w < 0.0) {
            return invalid(format!("per-site measure has total mass {total}"));
        }
        Ok(ModelMeasure { model, d, kind: MeasureKind::Product(Arc::new(nu)) })
    }

    /// `m_X^{⊗d}`.
    pub fn haar(model: Arc<CompactGroupModel>, d: usize) -> ModelMeasure {
        let nu = model.uniform();
        ModelMeasure { model, d, kind: MeasureKind::Product(Arc::new(nu)) }
    }

    pub fn uniform_on_set(model: Arc<CompactGroupModel>, d: usize, mut points: Vec<Vec<u32>>) -> Result<ModelMeasure> {
        if points.is_empty() {
            return invalid("uniform measure on an empty set");
        }
        for x in &points {
            check_point(&model, d, x)?;
        }
        points.sort();
        points.dedup();
        Ok(ModelMeasure { model, d, kind: MeasureKind::UniformOnSet(Arc::new(points)) })
    }

    pub fn weighted(model: Arc<CompactGroupModel>, d: usize, points: Vec<Vec<u32>>, weights: Vec<f64>) -> Result<ModelMeasure> {
        for x in &points {
            check_point(&model, d, x)?;
        }
        Ok(ModelMeasure { model, d, kind: MeasureKind::Weighted(Arc::new(WeightedSupport::new(points, weights)?)) })
    }

    pub fn sample_based(
        model: Arc<CompactGroupModel>,
        d: usize,
        points: Vec<Vec<u32>>,
        weights: Vec<f64>,
        seed: u64,
    ) -> Result<ModelMeasure> {
        for x in &points {
            check_point(&model, d, x)?;
        }
        Ok(ModelMeasure { model, d, kind: MeasureKind::SampleBased { support: Arc::new(WeightedSupport::new(points, weights)?), seed } })
    }

    pub fn point_mass(model: Arc<CompactGroupModel>, x: Vec<u32>) -> Result<ModelMeasure> {
        let d = x.len();
        check_point(&model, d, &x)?;
        Ok(ModelMeasure { model, d, kind: MeasureKind::PointMass(Arc::new(x)) })
    }

    /// Haar measure on the exact (zero tolerance) grid kernel.
    pub fn kernel_uniform(kernel: Arc<AlgebraicActionModel>) -> Result<ModelMeasure> {
        if !kernel.tol().is_zero() {
            return invalid("kernel Haar measure needs zero tolerance");
        }
        let param = Arc::new(kernel.exact_kernel());
        Ok(ModelMeasure { model: kernel.coordinate_model().clone(), d: kernel.d(), kind: MeasureKind::KernelUniform { kernel, param } })
    }

    pub fn mixture(parts: Vec<(f64, ModelMeasure)>) -> Result<ModelMeasure> {
        let Some(first) = parts.first() else { return invalid("empty mixture") };
        let (model, d) = (first.1.model.clone(), first.1.d);
        if parts.iter().any(|(_, m)| m.model != model || m.d != d) {
            return invalid("mixture components live on different spaces");
        }
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if (total - 1.0).abs() > 1e-9 || parts.iter().any(|p| p.0 < 0.0) {
            return invalid(format!("mixture weights sum to {total}"));
        }
        Ok(ModelMeasure { model, d, kind: MeasureKind::Mixture(parts) })
    }

    pub fn tensor(left: &ModelMeasure, right: &ModelMeasure) -> Result<ModelMeasure> {
        if left.d != right.d {
            return Err(Error::LengthMismatch { expected: left.d, found: right.d });
        }
        Ok(ModelMeasure {
            model: Arc::new(left.model.product(&right.model)?),
            d: left.d,
            kind: MeasureKind::Tensor(Box::new(left.clone()), Box::new(right.clone())),
        })
    }

    pub fn model(&self) -> &Arc<CompactGroupModel> {
        &self.model
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            MeasureKind::Product(nu) if self.is_haar_product() => format!("Product(m_X, |X|={})", nu.len()),
            MeasureKind::Product(_) => "Product(ν)".into(),
            MeasureKind::UniformOnSet(s) => format!("UniformOnSet({} points)", s.len()),
            MeasureKind::Weighted(s) => format!("Weighted({} points)", s.points.len()),
            MeasureKind::SampleBased { support, seed } => format!("SampleBased({} points, seed {seed})", support.points.len()),
            MeasureKind::PointMass(_) => "PointMass".into(),
            MeasureKind::KernelUniform { param, .. } => format!("KernelUniform({} points)", param.count()),
            MeasureKind::Convolution(a, b) => format!("({}) * ({})", a.describe(), b.describe()),
            MeasureKind::Mixture(parts) => {
                let inner: Vec<String> = parts.iter().map(|(w, m)| format!("{w}·{}", m.describe())).collect();
                format!("Mixture[{}]", inner.join(" + "))
            }
            MeasureKind::Tensor(a, b) => format!("({}) ⊗ ({})", a.describe(), b.describe()),
        }
    }

    pub fn is_haar_product(&self) -> bool {
        match &self.kind {
            MeasureKind::Product(nu) => nu.iter().all(|&w| w == nu[0]),
            _ => false,
        }
    }

    /// Total mass (1 up to rounding for every variant).
    pub fn mass(&self) -> f64 {
        match &self.kind {
            MeasureKind::Product(nu) => nu.iter().sum::<f64>().powi(self.d as i32),
            MeasureKind::UniformOnSet(_) | MeasureKind::PointMass(_) | MeasureKind::KernelUniform { .. } => 1.0,
            MeasureKind::Weighted(s) | MeasureKind::SampleBased { support: s, .. } => s.weights.iter().sum(),
            MeasureKind::Convolution(a, b) | MeasureKind::Tensor(a, b) => a.mass() * b.mass(),
            MeasureKind::Mixture(parts) => parts.iter().map(|(w, m)| w * m.mass()).sum(),
        }
    }

    /// Number of support points of the representation, if it fits in `u128`.
    pub fn support_size(&self) -> Option<u128> {
        match &self.kind {
            MeasureKind::Product(nu) => (nu.iter().filter(|&&w| w > 0.0).count() as u128).checked_pow(self.d as u32),
            MeasureKind::UniformOnSet(s) => Some(s.len() as u128),
            MeasureKind::Weighted(s) | MeasureKind::SampleBased { support: s, .. } => Some(s.points.len() as u128),
            MeasureKind::PointMass(_) => Some(1),
            MeasureKind::KernelUniform { param, .. } => param.count().to_u128(),
            MeasureKind::Convolution(a, b) | MeasureKind::Tensor(a, b) => a.support_size()?.checked_mul(b.support_size()?),
            MeasureKind::Mixture(parts) => parts.iter().try_fold(0u128, |acc, (_, m)| acc.checked_add(m.support_size()?)),
        }
    }

    /// The measure as a sorted weighted point list, when its representation
    /// has at most `limit` points.
    pub fn support(&self, limit: u128) -> Option<Vec<(Vec<u32>, f64)>> {
        if self.support_size()? > limit {
            return None;
        }
        let list: Vec<(Vec<u32>, f64)> = match &self.kind {
            MeasureKind::Product(nu) => {
                let atoms: Vec<(u32, f64)> = nu.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(p, &w)| (p as u32, w)).collect();
                let total = atoms.len().pow(self.d as u32);
                let mut out = Vec::with_capacity(total);
                let mut digits = vec![0usize; self.d];
                for _ in 0..total {
                    out.push((digits.iter().map(|&k| atoms[k].0).collect(), digits.iter().map(|&k| atoms[k].1).product()));
                    for k in digits.iter_mut().rev() {
                        *k += 1;
                        if *k < atoms.len() {
                            break;
                        }
                        *k = 0;
                    }
                }
                out
            }
            MeasureKind::UniformOnSet(s) => {
                let w = 1.0 / s.len() as f64;
                s.iter().map(|x| (x.clone(), w)).collect()
            }
            MeasureKind::Weighted(s) | MeasureKind::SampleBased { support: s, .. } => {
                s.points.iter().cloned().zip(s.weights.iter().copied()).collect()
            }
            MeasureKind::PointMass(x) => vec![(x.to_vec(), 1.0)],
            MeasureKind::KernelUniform { kernel, param } => {
                let pts = param.enumerate();
                let w = 1.0 / pts.len() as f64;
                pts.iter().map(|v| (kernel.point_from_vars(v), w)).collect()
            }
            MeasureKind::Convolution(a, b) => {
                let (sa, sb) = (a.support(limit)?, b.support(limit)?);
                let mut pairs = Vec::with_capacity(sa.len() * sb.len());
                for (x, wx) in &sa {
                    for (y, wy) in &sb {
                        pairs.push((self.multiply(x, y), wx * wy));
                    }
                }
                pairs
            }
            MeasureKind::Mixture(parts) => {
                let mut all = vec![];
                for (w, m) in parts {
                    all.extend(m.support(limit)?.into_iter().map(|(x, v)| (x, v * w)));
                }
                all
            }
            MeasureKind::Tensor(a, b) => {
                let (sa, sb) = (a.support(limit)?, b.support(limit)?);
                let n = a.model.size() as u32;
                let mut pairs = Vec::with_capacity(sa.len() * sb.len());
                for (x, wx) in &sa {
                    for (y, wy) in &sb {
                        pairs.push((x.iter().zip(y).map(|(&p, &q)| p + n * q).collect(), wx * wy));
                    }
                }
                pairs
            }
        };
        let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (x, w) in list {
            *acc.entry(x).or_insert(0.0) += w;
        }
        Some(acc.into_iter().collect())
    }

    fn multiply(&self, x: &[u32], y: &[u32]) -> Vec<u32> {
        x.iter().zip(y).map(|(&a, &b)| self.model.mul(a, b)).collect()
    }

    /// One draw from the measure.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<u32> {
        match &self.kind {
            MeasureKind::Product(nu) => {
                let dist = WeightedIndex::new(nu.iter()).expect("validated weights");
                (0..self.d).map(|_| dist.sample(rng) as u32).collect()
            }
            MeasureKind::UniformOnSet(s) => s[rng.gen_range(0..s.len())].clone(),
            MeasureKind::Weighted(s) | MeasureKind::SampleBased { support: s, .. } => s.points[s.sampler.sample(rng)].clone(),
            MeasureKind::PointMass(x) => x.to_vec(),
            MeasureKind::KernelUniform { kernel, param } => kernel.sample_exact_kernel(param, rng),
            MeasureKind::Convolution(a, b) => {
                let (x, y) = (a.sample(rng), b.sample(rng));
                self.multiply(&x, &y)
            }
            MeasureKind::Mixture(parts) => {
                let mut u: f64 = rng.gen();
                for (w, m) in parts {
                    if u < *w {
                        return m.sample(rng);
                    }
                    u -= w;
                }
                parts.last().expect("nonempty").1.sample(rng)
            }
            MeasureKind::Tensor(a, b) => {
                let n = a.model.size() as u32;
                let (x, y) = (a.sample(rng), b.sample(rng));
                x.iter().zip(&y).map(|(&p, &q)| p + n * q).collect()
            }
        }
    }

    /// Marginals `(E_j)_* μ` for every coordinate `j`.
    pub fn marginals(&self) -> Marginals {
        let n = self.model.size() as usize;
        let d = self.d;
        match &self.kind {
            MeasureKind::Product(nu) => Marginals { values: vec![nu.to_vec(); d], exact: true },
            MeasureKind::UniformOnSet(s) => {
                let w = 1.0 / s.len() as f64;
                let mut m = vec![vec![0.0; n]; d];
                for x in s.iter() {
                    for (j, &p) in x.iter().enumerate() {
                        m[j][p as usize] += w;
                    }
                }
                Marginals { values: m, exact: true }
            }
            MeasureKind::Weighted(s) | MeasureKind::SampleBased { support: s, .. } => {
                let mut m = vec![vec![0.0; n]; d];
                for (x, &w) in s.points.iter().zip(&s.weights) {
                    for (j, &p) in x.iter().enumerate() {
                        m[j][p as usize] += w;
                    }
                }
                Marginals { values: m, exact: matches!(self.kind, MeasureKind::Weighted(_)) }
            }
            MeasureKind::PointMass(x) => {
                let values = x
                    .iter()
                    .map(|&p| {
                        let mut v = vec![0.0; n];
                        v[p as usize] = 1.0;
                        v
                    })
                    .collect();
                Marginals { values, exact: true }
            }
            MeasureKind::KernelUniform { kernel, param } => Marginals { values: kernel_marginals(kernel, param), exact: true },
            MeasureKind::Convolution(a, b) => {
                let (ma, mb) = (a.marginals(), b.marginals());
                let values = ma
                    .values
                    .iter()
                    .zip(&mb.values)
                    .map(|(u, v)| {
                        let mut c = vec![0.0; n];
                        for (p, &wu) in u.iter().enumerate().filter(|(_, &w)| w > 0.0) {
                            for (r, &wv) in v.iter().enumerate().filter(|(_, &w)| w > 0.0) {
                                c[self.model.mul(p as u32, r as u32) as usize] += wu * wv;
                            }
                        }
                        c
                    })
                    .collect();
                Marginals { values, exact: ma.exact && mb.exact }
            }
            MeasureKind::Mixture(parts) => {
                let mut values = vec![vec![0.0; n]; d];
                let mut exact = true;
                for (w, m) in parts {
                    let mm = m.marginals();
                    exact &= mm.exact;
                    for (acc, v) in values.iter_mut().zip(&mm.values) {
                        for (a, b) in acc.iter_mut().zip(v) {
                            *a += w * b;
                        }
                    }
                }
                Marginals { values, exact }
            }
            MeasureKind::Tensor(a, b) => {
                let (ma, mb) = (a.marginals(), b.marginals());
                let na = a.model.size() as usize;
                let values = ma.values.iter().zip(&mb.values).map(|(u, v)| (0..n).map(|p| u[p % na] * v[p / na]).collect()).collect();
                Marginals { values, exact: ma.exact && mb.exact }
            }
        }
    }

    /// `(E_j)_* μ` for one coordinate.
    pub fn marginal(&self, j: usize) -> Result<(Vec<f64>, bool)> {
        if j >= self.d {
            return invalid(format!("coordinate {j} out of range for d = {}", self.d));
        }
        let m = self.marginals();
        Ok((m.values[j].clone(), m.exact))
    }

    /// Whether every support point lies in the exact kernel (checked only on
    /// representable supports).
    fn supported_in_kernel(&self, kernel: &AlgebraicActionModel) -> bool {
        match self.support(EXACT_SUPPORT_LIMIT) {
            Some(s) => s.iter().all(|(x, _)| kernel.contains(x)),
            None => false,
        }
    }

    fn is_identity_point_mass(&self) -> bool {
        let e = self.model.identity();
        matches!(&self.kind, MeasureKind::PointMass(x) if x.iter().all(|&p| p == e))
    }
}

/// Marginals of the kernel Haar measure: coordinate `j` is uniform on the
/// subgroup generated by the `j`-th coordinates of the kernel generators.
fn kernel_marginals(kernel: &AlgebraicActionModel, param: &KernelParam) -> Vec<Vec<f64>> {
    let model = kernel.coordinate_model();
    let gens: Vec<Vec<u32>> = (0..param.choices.len())
        .filter(|&i| param.choices[i] > 1)
        .map(|i| {
            let mut digits = vec![0u64; param.choices.len()];
            digits[i] = 1;
            kernel.point_from_vars(&param.point(&digits))
        })
        .collect();
    let n = model.size() as usize;
    (0..kernel.d())
        .map(|j| {
            let mut seen: HashSet<u32> = HashSet::from([model.identity()]);
            let mut frontier = vec![model.identity()];
            while let Some(p) = frontier.pop() {
                for g in &gens {
                    let r = model.mul(p, g[j]);
                    if seen.insert(r) {
                        frontier.push(r);
                    }
                }
            }
            let w = 1.0 / seen.len() as f64;
            let mut v = vec![0.0; n];
            for p in seen {
                v[p as usize] = w;
            }
            v
        })
        .collect()
}

/// `ν * μ = p_*(ν ⊗ μ)` for the pointwise product `p`.
///
/// Exact when the product support is representable; Haar and kernel-Haar
/// factors absorb anything supported inside them; otherwise a lazy node.
pub fn convolve(nu: &ModelMeasure, mu: &ModelMeasure) -> Result<ModelMeasure> {
    if nu.model != mu.model {
        return invalid("convolution of measures on different models");
    }
    if nu.d != mu.d {
        return Err(Error::LengthMismatch { expected: nu.d, found: mu.d });
    }
    if nu.is_haar_product() {
        return Ok(nu.clone());
    }
    if mu.is_haar_product() {
        return Ok(mu.clone());
    }
    if nu.is_identity_point_mass() {
        return Ok(mu.clone());
    }
    if mu.is_identity_point_mass() {
        return Ok(nu.clone());
    }
    if let MeasureKind::Mixture(parts) = &mu.kind {
        let parts = parts.iter().map(|(w, m)| Ok((*w, convolve(nu, m)?))).collect::<Result<Vec<_>>>()?;
        return ModelMeasure::mixture(parts);
    }
    if let MeasureKind::Mixture(parts) = &nu.kind {
        let parts = parts.iter().map(|(w, m)| Ok((*w, convolve(m, mu)?))).collect::<Result<Vec<_>>>()?;
        return ModelMeasure::mixture(parts);
    }
    if let MeasureKind::KernelUniform { kernel, .. } = &mu.kind {
        if nu.supported_in_kernel(kernel) {
            return Ok(mu.clone());
        }
    }
    if let MeasureKind::KernelUniform { kernel, .. } = &nu.kind {
        if mu.supported_in_kernel(kernel) {
            return Ok(nu.clone());
        }
    }
    let lazy =
        ModelMeasure { model: nu.model.clone(), d: nu.d, kind: MeasureKind::Convolution(Box::new(nu.clone()), Box::new(mu.clone())) };
    match lazy.support(EXACT_SUPPORT_LIMIT) {
        Some(s) => {
            let (points, weights) = s.into_iter().unzip();
            ModelMeasure::weighted(nu.model.clone(), nu.d, points, weights)
        }
        None => Ok(lazy),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{instantiate_xf, IntegerGroupMatrix};
    use crate::group_core::{quotient_sofic, GroupSpec, Quotient};
    use crate::numeric::Rational;
    use proptest::prelude::*;

    fn z3() -> Arc<CompactGroupModel> {
        Arc::new(CompactGroupModel::cyclic(3))
    }

    fn table(m: &ModelMeasure) -> Vec<(Vec<u32>, f64)> {
        m.support(1 << 20).unwrap()
    }

    fn close(a: &[(Vec<u32>, f64)], b: &[(Vec<u32>, f64)]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() < 1e-12)
    }

    fn kernel_2_plus_t(copies: usize) -> Arc<AlgebraicActionModel> {
        let g = Arc::new(GroupSpec::finite_cyclic(2));
        let s = Arc::new(quotient_sofic(&g, &Quotient::Regular { copies }, &g.elements().unwrap()).unwrap());
        let f = IntegerGroupMatrix::parse_scalar(&g, "2 + t").unwrap();
        Arc::new(instantiate_xf(&f, &s, 3, Rational::zero()).unwrap())
    }

    #[test]
    fn marginals_of_basic_variants() {
        let h = ModelMeasure::haar(z3(), 4);
        assert!(h.marginals().values.iter().all(|v| v == &vec![1.0 / 3.0; 3]));
        let pm = ModelMeasure::point_mass(z3(), vec![0, 2]).unwrap();
        assert_eq!(pm.marginal(1).unwrap().0, vec![0.0, 0.0, 1.0]);
        assert!(pm.marginal(2).is_err());
        let set = ModelMeasure::uniform_on_set(z3(), 2, vec![vec![0, 0], vec![1, 2], vec![2, 1]]).unwrap();
        for v in set.marginals().values {
            assert!(v.iter().all(|&w| (w - 1.0 / 3.0).abs() < 1e-15));
        }
        assert!(ModelMeasure::uniform_on_set(z3(), 2, vec![]).is_err());
    }

    #[test]
    fn small_convolution_by_hand() {
        let a = ModelMeasure::uniform_on_set(z3(), 1, vec![vec![0]]).unwrap();
        let b = ModelMeasure::uniform_on_set(z3(), 1, vec![vec![0], vec![1]]).unwrap();
        let c = convolve(&a, &b).unwrap();
        assert_eq!(c.marginal(0).unwrap().0, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn haar_and_identity() {
        let h = ModelMeasure::haar(z3(), 5);
        let s = ModelMeasure::uniform_on_set(z3(), 5, vec![vec![1, 2, 0, 0, 1], vec![2, 2, 2, 1, 0]]).unwrap();
        assert!(convolve(&s, &h).unwrap().is_haar_product());
        assert!(convolve(&h, &s).unwrap().is_haar_product());
        let e = ModelMeasure::point_mass(z3(), vec![0; 5]).unwrap();
        assert!(close(&table(&convolve(&e, &s).unwrap()), &table(&s)));
        // Haar absorption checked exactly on the table
        let h2 = ModelMeasure::haar(z3(), 2);
        let pm = ModelMeasure::point_mass(z3(), vec![1, 2]).unwrap();
        let lazy = ModelMeasure { model: z3(), d: 2, kind: MeasureKind::Convolution(Box::new(pm), Box::new(h2.clone())) };
        assert!(close(&table(&lazy), &table(&h2)));
    }

    #[test]
    fn kernel_measure_marginals_and_absorption() {
        let k = kernel_2_plus_t(3);
        let ku = ModelMeasure::kernel_uniform(k.clone()).unwrap();
        assert_eq!(ku.support_size(), Some(27));
        let m = ku.marginals();
        assert!(m.exact && m.values.iter().all(|v| v.iter().all(|&w| (w - 1.0 / 3.0).abs() < 1e-15)));
        let pts: Vec<Vec<u32>> = table(&ku).into_iter().map(|p| p.0).collect();
        let s = ModelMeasure::uniform_on_set(ku.model().clone(), 6, pts[..4].to_vec()).unwrap();
        let c = convolve(&s, &ku).unwrap();
        assert!(matches!(c.kind(), MeasureKind::KernelUniform { .. }));
        // exact route agrees with absorption
        let exact = ModelMeasure::uniform_on_set(ku.model().clone(), 6, pts.clone()).unwrap();
        assert!(close(&table(&convolve(&s, &exact).unwrap()), &table(&exact)));
    }

    #[test]
    fn mixtures_and_tensors() {
        let h = ModelMeasure::haar(z3(), 3);
        let pm = ModelMeasure::point_mass(z3(), vec![0, 0, 0]).unwrap();
        let mix = ModelMeasure::mixture(vec![(2.0 / 3.0, h.clone()), (1.0 / 3.0, pm.clone())]).unwrap();
        assert!((mix.mass() - 1.0).abs() < 1e-12);
        let m0 = mix.marginal(0).unwrap().0;
        assert!((m0[0] - (2.0 / 9.0 + 1.0 / 3.0)).abs() < 1e-15);
        let t = ModelMeasure::tensor(&pm, &h).unwrap();
        assert_eq!(t.model().size(), 9);
        let tm = t.marginal(1).unwrap().0;
        assert!((tm[0] - 1.0 / 3.0).abs() < 1e-15 && (tm[3] - 1.0 / 3.0).abs() < 1e-15 && tm[1] == 0.0);
        assert!((table(&t).iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_reproducible_and_in_support() {
        let k = kernel_2_plus_t(4);
        let ku = ModelMeasure::kernel_uniform(k.clone()).unwrap();
        let mut r1 = crate::rng::stream(3, &[1]);
        let mut r2 = crate::rng::stream(3, &[1]);
        for _ in 0..50 {
            let x = ku.sample(&mut r1);
            assert_eq!(x, ku.sample(&mut r2));
            assert!(k.contains(&x));
        }
    }

    fn arb_set(d: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
        proptest::collection::vec(proptest::collection::vec(0u32..3, d), 1..4)
    }

    proptest! {
        #[test]
        fn convolution_is_associative(a in arb_set(3), b in arb_set(3), c in arb_set(3)) {
            let m = |s: Vec<Vec<u32>>| ModelMeasure::uniform_on_set(z3(), 3, s).unwrap();
            let (a, b, c) = (m(a), m(b), m(c));
            let left = convolve(&convolve(&a, &b).unwrap(), &c).unwrap();
            let right = convolve(&a, &convolve(&b, &c).unwrap()).unwrap();
            prop_assert!(close(&table(&left), &table(&right)));
        }

        #[test]
        fn marginal_of_convolution(a in arb_set(3), b in arb_set(3), j in 0usize..3) {
            let m = |s: Vec<Vec<u32>>| ModelMeasure::uniform_on_set(z3(), 3, s).unwrap();
            let (a, b) = (m(a), m(b));
            let c = convolve(&a, &b).unwrap().marginal(j).unwrap().0;
            let (ma, mb) = (a.marginal(j).unwrap().0, b.marginal(j).unwrap().0);
            for r in 0..3 {
                let expect: f64 = (0..3).map(|p| ma[p] * mb[(r + 3 - p) % 3]).sum();
                prop_assert!((c[r] - expect).abs() < 1e-12);
            }
        }

        #[test]
        fn masses_are_one(a in arb_set(4), w in 0.0f64..1.0) {
            let s = ModelMeasure::uniform_on_set(z3(), 4, a).unwrap();
            let mix = ModelMeasure::mixture(vec![(w, s.clone()), (1.0 - w, ModelMeasure::haar(z3(), 4))]).unwrap();
            prop_assert!((mix.mass() - 1.0).abs() < 1e-9);
            let t: f64 = table(&s).iter().map(|p| p.1).sum();
            prop_assert!((t - 1.0).abs() < 1e-9);
        }
    }
}
