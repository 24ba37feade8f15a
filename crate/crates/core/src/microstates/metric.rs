use crate::actions::{AutomorphismAction, CompactGroupModel};
use crate::error::{invalid, Error, Result};
use crate::group_core::GroupElement;
use crate::numeric::{Rational, SqBound};
use std::sync::Arc;

/// Continuous pseudometric on a compact group model.
///
/// Discrete, flat-torus and product metrics are evaluated exactly: squared
/// distances are integers over a fixed `scale`, so thresholds compare without
/// rounding. Averaged metrics fall back to floating point unless they are a
/// single unit weight.
#[derive(Clone, Debug)]
pub struct Pseudometric {
    kind: MetricKind,
    /// group elements whose translates separate points (`{e}` for a metric)
    pub generating_witness: Vec<GroupElement>,
}

#[derive(Clone, Debug)]
enum MetricKind {
    Discrete,
    FlatTorus {
        q: u32,
        sites: u32,
    },
    /// `ρ̃((a,b),(a',b'))² = (ρ_1(a,a')² + ρ_2(b,b')²)/2`; pair `(a,b)` is `a + split b`
    Product {
        left: Box<Pseudometric>,
        right: Box<Pseudometric>,
        split: u32,
    },
    /// `Σ_g a_g ρ(g x, g y)`; `tables[k]` is the action of the `k`-th weighted element
    Averaged {
        parent: Box<Pseudometric>,
        weights: Vec<(GroupElement, f64)>,
        tables: Vec<Vec<u32>>,
    },
    /// explicit `n × n` distance table
    Table {
        n: u32,
        dist: Arc<Vec<f64>>,
    },
}

impl Pseudometric {
    pub fn discrete(witness: GroupElement) -> Pseudometric {
        Pseudometric { kind: MetricKind::Discrete, generating_witness: vec![witness] }
    }

    pub fn flat_torus(q: u32, sites: u32, witness: GroupElement) -> Pseudometric {
        Pseudometric { kind: MetricKind::FlatTorus { q, sites }, generating_witness: vec![witness] }
    }

    /// Discrete metric on finite models, flat metric on torus grids.
    pub fn default_for(model: &CompactGroupModel, identity: GroupElement) -> Pseudometric {
        match model {
            CompactGroupModel::Finite(_) => Pseudometric::discrete(identity),
            CompactGroupModel::TorusGrid { q, sites } => Pseudometric::flat_torus(*q, *sites, identity),
        }
    }

    /// Metric for `X × Y` used by the doubling check.
    pub fn product(left: &Pseudometric, right: &Pseudometric, split: u32) -> Pseudometric {
        // a flat torus on 2n sites is not the same metric: keep the explicit product
        Pseudometric {
            kind: MetricKind::Product { left: Box::new(left.clone()), right: Box::new(right.clone()), split },
            generating_witness: left.generating_witness.clone(),
        }
    }

    /// Metric given by an explicit symmetric table `dist[a n + b]`.
    pub fn table(n: u32, dist: Vec<f64>, witness: GroupElement) -> Result<Pseudometric> {
        if dist.len() != (n as usize) * (n as usize) {
            return Err(Error::LengthMismatch { expected: (n as usize).pow(2), found: dist.len() });
        }
        if dist.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("distance table entries must be finite and non-negative");
        }
        Ok(Pseudometric { kind: MetricKind::Table { n, dist: Arc::new(dist) }, generating_witness: vec![witness] })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, MetricKind::Discrete)
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            MetricKind::Discrete => "discrete".into(),
            MetricKind::FlatTorus { q, sites } => format!("flat-torus(q={q}, sites={sites})"),
            MetricKind::Product { left, right, .. } => format!("product({}, {})", left.describe(), right.describe()),
            MetricKind::Averaged { parent, weights, .. } => format!("averaged({}, {} weights)", parent.describe(), weights.len()),
            MetricKind::Table { n, .. } => format!("table({n} points)"),
        }
    }

    /// Squared distances are `sq_num / scale` when this is `Some(scale)`.
    pub fn exact_scale(&self) -> Option<u64> {
        match &self.kind {
            MetricKind::Discrete => Some(1),
            MetricKind::FlatTorus { q, .. } => Some(*q as u64 * *q as u64),
            MetricKind::Product { left, right, .. } => Some(2 * left.exact_scale()? * right.exact_scale()?),
            MetricKind::Averaged { parent, weights, .. } if is_unit_weight(weights) => parent.exact_scale(),
            MetricKind::Averaged { .. } | MetricKind::Table { .. } => None,
        }
    }

    /// Numerator of the squared distance (exact metrics only).
    #[inline]
    pub fn sq_num(&self, a: u32, b: u32) -> u64 {
        match &self.kind {
            MetricKind::Discrete => (a != b) as u64,
            MetricKind::FlatTorus { q, sites } => {
                let (mut a, mut b, mut s) = (a, b, 0u64);
                for _ in 0..*sites {
                    let diff = (a % q).abs_diff(b % q);
                    let m = diff.min(q - diff) as u64;
                    s += m * m;
                    a /= q;
                    b /= q;
                }
                s
            }
            MetricKind::Product { left, right, split } => {
                let (a1, a2) = (a % split, a / split);
                let (b1, b2) = (b % split, b / split);
                let (s1, s2) = (left.exact_scale().expect("exact"), right.exact_scale().expect("exact"));
                left.sq_num(a1, b1) * s2 + right.sq_num(a2, b2) * s1
            }
            MetricKind::Averaged { parent, tables, .. } => {
                let t = &tables[0];
                parent.sq_num(t[a as usize], t[b as usize])
            }
            MetricKind::Table { .. } => panic!("table metrics are not exact"),
        }
    }

    pub fn dist(&self, a: u32, b: u32) -> f64 {
        match &self.kind {
            MetricKind::Averaged { parent, weights, tables } if !is_unit_weight(weights) => {
                weights.iter().zip(tables).map(|((_, w), t)| w * parent.dist(t[a as usize], t[b as usize])).sum()
            }
            MetricKind::Table { n, dist } => dist[(a * n + b) as usize],
            _ => (self.sq_num(a, b) as f64 / self.exact_scale().expect("exact") as f64).sqrt(),
        }
    }

    pub fn dist_sq(&self, a: u32, b: u32) -> f64 {
        match self.exact_scale() {
            Some(s) => self.sq_num(a, b) as f64 / s as f64,
            None => self.dist(a, b).powi(2),
        }
    }

    /// Smallest positive `sq_num` between two points, when known in closed form.
    pub fn min_positive_sq_num(&self) -> Option<u64> {
        match &self.kind {
            MetricKind::Discrete | MetricKind::FlatTorus { .. } => Some(1),
            MetricKind::Product { left, right, .. } => {
                let (s1, s2) = (left.exact_scale()?, right.exact_scale()?);
                Some((left.min_positive_sq_num()? * s2).min(right.min_positive_sq_num()? * s1))
            }
            MetricKind::Averaged { parent, weights, .. } if is_unit_weight(weights) => parent.min_positive_sq_num(),
            MetricKind::Averaged { .. } | MetricKind::Table { .. } => None,
        }
    }

    /// Whether distinct points always have positive distance.
    pub fn separates_points(&self) -> bool {
        match &self.kind {
            MetricKind::Discrete | MetricKind::FlatTorus { .. } => true,
            MetricKind::Product { left, right, .. } => left.separates_points() && right.separates_points(),
            MetricKind::Averaged { parent, .. } => parent.separates_points(),
            MetricKind::Table { n, dist } => (0..*n).all(|a| (0..*n).all(|b| a == b || dist[(a * n + b) as usize] > 0.0)),
        }
    }

    pub fn diameter(&self, model: &CompactGroupModel) -> f64 {
        let n = model.size().min(512) as u32;
        (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| self.dist(a, b)).fold(0.0, f64::max)
    }

    /// Symmetry, zero diagonal and triangle inequality on (up to 64) points.
    pub fn check_axioms(&self, model: &CompactGroupModel) -> Result<()> {
        let n = model.size().min(64) as u32;
        for a in 0..n {
            if self.dist(a, a) != 0.0 {
                return invalid(format!("{}: ρ(x, x) ≠ 0", self.describe()));
            }
            for b in 0..n {
                let ab = self.dist(a, b);
                if (ab - self.dist(b, a)).abs() > 1e-12 {
                    return invalid(format!("{}: not symmetric", self.describe()));
                }
                for c in 0..n {
                    if ab > self.dist(a, c) + self.dist(c, b) + 1e-12 {
                        return invalid(format!("{}: triangle inequality fails", self.describe()));
                    }
                }
            }
        }
        Ok(())
    }
}

fn is_unit_weight(w: &[(GroupElement, f64)]) -> bool {
    w.len() == 1 && w[0].1 == 1.0
}

/// `ρ̃(x, y) = Σ_g a_g ρ(g x, g y)` over a finite weight vector.
pub fn metric_average(rho: &Pseudometric, weights: &[(GroupElement, f64)], action: &AutomorphismAction) -> Result<Pseudometric> {
    if weights.is_empty() || weights.iter().any(|(_, w)| *w <= 0.0 || !w.is_finite()) {
        return invalid("averaging weights must be positive and finite");
    }
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-12 {
        return invalid(format!("averaging weights sum to {total}"));
    }
    let tables = weights.iter().map(|(g, _)| action.table(g)).collect::<Result<Vec<_>>>()?;
    Ok(Pseudometric {
        kind: MetricKind::Averaged { parent: Box::new(rho.clone()), weights: weights.to_vec(), tables },
        generating_witness: rho.generating_witness.clone(),
    })
}

/// Accumulated `Σ ρ(a_j, b_j)²`, exact where the metric allows.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum SqSum {
    Exact(u128),
    Float(f64),
}

impl SqSum {
    pub fn zero(rho: &Pseudometric) -> SqSum {
        if rho.exact_scale().is_some() {
            SqSum::Exact(0)
        } else {
            SqSum::Float(0.0)
        }
    }

    #[inline]
    pub fn add(&mut self, rho: &Pseudometric, a: u32, b: u32) {
        match self {
            SqSum::Exact(s) => *s += rho.sq_num(a, b) as u128,
            SqSum::Float(s) => *s += rho.dist_sq(a, b),
        }
    }

    #[inline]
    pub fn add_sum(&mut self, other: SqSum) {
        match (self, other) {
            (SqSum::Exact(s), SqSum::Exact(o)) => *s += o,
            (SqSum::Float(s), SqSum::Float(o)) => *s += o,
            _ => panic!("mixed exact and floating sums"),
        }
    }

    #[inline]
    pub fn sub_sum(&mut self, other: SqSum) {
        match (self, other) {
            (SqSum::Exact(s), SqSum::Exact(o)) => *s -= o,
            (SqSum::Float(s), SqSum::Float(o)) => *s -= o,
            _ => panic!("mixed exact and floating sums"),
        }
    }

    /// `ρ_2 = sqrt(sum / d)`
    pub fn rho2(&self, rho: &Pseudometric, d: usize) -> f64 {
        match self {
            SqSum::Exact(s) => (*s as f64 / (rho.exact_scale().expect("exact") as f64 * d as f64)).sqrt(),
            SqSum::Float(s) => (s / d as f64).sqrt(),
        }
    }
}

/// Threshold `ρ_2 < r` (or `> r`) for sums over `d` coordinates.
#[derive(Clone, Copy, Debug)]
pub struct Gauge {
    exact: Option<SqBound>,
    limit: f64,
}

impl Gauge {
    pub fn new(rho: &Pseudometric, r: &Rational, d: usize) -> Gauge {
        let rf = *r.numer() as f64 / *r.denom() as f64;
        Gauge { exact: rho.exact_scale().map(|s| SqBound::new(r, s, d)), limit: rf * rf * d as f64 }
    }

    #[inline]
    pub fn below(&self, s: SqSum) -> bool {
        match (s, &self.exact) {
            (SqSum::Exact(v), Some(b)) => b.below(v),
            (SqSum::Float(v), _) => v < self.limit,
            _ => panic!("exact sum against inexact gauge"),
        }
    }

    #[inline]
    pub fn above(&self, s: SqSum) -> bool {
        match (s, &self.exact) {
            (SqSum::Exact(v), Some(b)) => b.above(v),
            (SqSum::Float(v), _) => v > self.limit,
            _ => panic!("exact sum against inexact gauge"),
        }
    }
}

/// `ρ_2(x, y) = sqrt((1/d) Σ_j ρ(x_j, y_j)²)`.
pub fn rho2(rho: &Pseudometric, x: &[u32], y: &[u32]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: y.len() });
    }
    Ok(rho2_sum(rho, x, y).rho2(rho, x.len().max(1)))
}

pub fn rho2_sum(rho: &Pseudometric, x: &[u32], y: &[u32]) -> SqSum {
    let mut s = SqSum::zero(rho);
    for (&a, &b) in x.iter().zip(y) {
        s.add(rho, a, b);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_core::GroupSpec;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn e() -> GroupElement {
        GroupSpec::Integers.identity()
    }

    #[test]
    fn torus_distances() {
        let r = Pseudometric::flat_torus(8, 2, e());
        let m = CompactGroupModel::torus_grid(8, 2).unwrap();
        // (1, 7) vs (0, 0): wrap-around distances 1 and 1
        let a = m.from_coords(&[1, 7]);
        assert_eq!(r.sq_num(a, 0), 2);
        assert!((r.dist(a, 0) - (2f64).sqrt() / 8.0).abs() < 1e-15);
        r.check_axioms(&m).unwrap();
    }

    #[test]
    fn rho2_examples() {
        let r = Pseudometric::discrete(e());
        assert!((rho2(&r, &[0, 1, 2, 0], &[0, 1, 2, 0]).unwrap()).abs() < 1e-15);
        assert!((rho2(&r, &[0, 1, 2, 0], &[1, 1, 2, 0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(rho2(&r, &[0, 1], &[0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn unit_average_is_the_parent() {
        let g = Arc::new(GroupSpec::finite_cyclic(2));
        let model = Arc::new(CompactGroupModel::cyclic(5));
        let act = AutomorphismAction::power_map(g.clone(), model.clone(), -1).unwrap();
        let r = Pseudometric::discrete(g.identity());
        let avg = metric_average(&r, &[(g.identity(), 1.0)], &act).unwrap();
        assert_eq!(avg.exact_scale(), r.exact_scale());
        for a in 0..5 {
            for b in 0..5 {
                assert_eq!(avg.sq_num(a, b), r.sq_num(a, b));
            }
        }
        // uniform weights over a finite group give an invariant metric
        let t = g.parse_word("t").unwrap();
        let torus = Arc::new(CompactGroupModel::cyclic(7));
        let act = AutomorphismAction::power_map(g.clone(), torus.clone(), -1).unwrap();
        let lee = Pseudometric::flat_torus(7, 1, g.identity());
        let avg = metric_average(&lee, &[(g.identity(), 0.5), (t.clone(), 0.5)], &act).unwrap();
        avg.check_axioms(&torus).unwrap();
        let tab = act.table(&t).unwrap();
        for a in 0..7 {
            for b in 0..7 {
                assert!((avg.dist(tab[a as usize], tab[b as usize]) - avg.dist(a, b)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gauge_is_strict_and_exact() {
        let r = Pseudometric::discrete(e());
        let g = Gauge::new(&r, &Rational::new(1, 2), 4);
        // ρ_2 = 1/2 exactly is not below 1/2
        assert!(!g.below(rho2_sum(&r, &[0, 1, 2, 0], &[1, 1, 2, 0])));
        assert!(g.below(rho2_sum(&r, &[0, 1, 2, 0], &[0, 1, 2, 0])));
    }

    proptest! {
        #[test]
        fn rho2_is_a_pseudometric(x in proptest::collection::vec(0u32..9, 6), y in proptest::collection::vec(0u32..9, 6),
                                  z in proptest::collection::vec(0u32..9, 6)) {
            let r = Pseudometric::flat_torus(9, 1, e());
            let (xy, yz, xz) = (rho2(&r, &x, &y).unwrap(), rho2(&r, &y, &z).unwrap(), rho2(&r, &x, &z).unwrap());
            prop_assert!(xz <= xy + yz + 1e-12);
            prop_assert!((xy - rho2(&r, &y, &x).unwrap()).abs() < 1e-15);
            prop_assert_eq!(rho2(&r, &x, &x).unwrap(), 0.0);
        }

        #[test]
        fn product_metric_is_mean_of_squares(a in 0u32..9, b in 0u32..9) {
            let d = Pseudometric::discrete(e());
            let p = Pseudometric::product(&d, &d, 3);
            let (a1, a2, b1, b2) = (a % 3, a / 3, b % 3, b / 3);
            let expect = ((d.dist_sq(a1, b1) + d.dist_sq(a2, b2)) / 2.0).sqrt();
            prop_assert!((p.dist(a, b) - expect).abs() < 1e-15);
        }
    }
}
