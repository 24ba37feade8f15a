use super::group::{GroupElement, GroupSpec};
use crate::error::{invalid, Error, Result};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::sync::Arc;

/// Permutation of `{0, ..., d-1}` in one-line notation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permutation(pub Vec<u32>);

impl Permutation {
    pub fn identity(d: usize) -> Permutation {
        Permutation((0..d as u32).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn apply(&self, j: usize) -> usize {
        self.0[j] as usize
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation(other.0.iter().map(|&j| self.0[j as usize]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u32; self.0.len()];
        for (j, &p) in self.0.iter().enumerate() {
            inv[p as usize] = j as u32;
        }
        Permutation(inv)
    }

    pub fn is_valid(&self) -> bool {
        let mut seen = vec![false; self.0.len()];
        self.0.iter().all(|&p| (p as usize) < seen.len() && !std::mem::replace(&mut seen[p as usize], true))
    }

    pub fn fixed_fraction(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().enumerate().filter(|(j, &p)| *j == p as usize).count() as f64 / self.0.len() as f64
    }
}

/// Finite quotient families that induce sofic approximations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Quotient {
    /// Z -> Z/n
    Cyclic { n: usize },
    /// Z^2 -> Z/q1 x Z/q2
    Torus2 { q1: usize, q2: usize },
    /// finite G acting on `copies` disjoint copies of itself by left multiplication
    Regular { copies: usize },
    /// free group: independent uniform permutations for the generators
    RandomPermutations { d: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    QuotientInduced,
    Perturbed,
    Custom,
}

/// A map from a finite support `F ⊆ G` (containing `e`) to `Sym(d)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "SoficRepr", try_from = "SoficRepr")]
pub struct SoficApproximation {
    group: Arc<GroupSpec>,
    d: usize,
    elements: Vec<GroupElement>,
    perms: Vec<Permutation>,
    inverses: Vec<Permutation>,
    index: HashMap<GroupElement, usize>,
    provenance: Provenance,
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct SoficRepr {
    group: GroupSpec,
    d: usize,
    provenance: Provenance,
    seed: Option<u64>,
    table: Vec<(GroupElement, Permutation)>,
}

impl From<SoficApproximation> for SoficRepr {
    fn from(s: SoficApproximation) -> SoficRepr {
        SoficRepr {
            group: (*s.group).clone(),
            d: s.d,
            provenance: s.provenance,
            seed: s.seed,
            table: s.elements.into_iter().zip(s.perms).collect(),
        }
    }
}

impl TryFrom<SoficRepr> for SoficApproximation {
    type Error = Error;

    fn try_from(r: SoficRepr) -> Result<SoficApproximation> {
        SoficApproximation::new(Arc::new(r.group), r.d, r.table, r.provenance, r.seed)
    }
}

impl SoficApproximation {
    pub fn new(
        group: Arc<GroupSpec>,
        d: usize,
        mut table: Vec<(GroupElement, Permutation)>,
        provenance: Provenance,
        seed: Option<u64>,
    ) -> Result<SoficApproximation> {
        if d == 0 {
            return invalid("sofic approximation needs d >= 1");
        }
        table.sort_by(|a, b| a.0.cmp(&b.0));
        if table.windows(2).any(|w| w[0].0 == w[1].0) {
            return invalid("duplicate element in sofic table");
        }
        if !table.iter().any(|(g, _)| group.is_identity(g)) {
            return invalid("support must contain the identity");
        }
        for (g, p) in &table {
            if !group.belongs(g) {
                return Err(Error::InvalidParameter(format!("{g:?} is not an element of {}", group.name())));
            }
            if p.len() != d || !p.is_valid() {
                return Err(Error::InvalidParameter(format!("image of `{}` is not a permutation of {d} points", group.format(g))));
            }
        }
        let (elements, perms): (Vec<_>, Vec<_>) = table.into_iter().unzip();
        let inverses = perms.iter().map(Permutation::inverse).collect();
        let index = elements.iter().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        Ok(SoficApproximation { group, d, elements, perms, inverses, index, provenance, seed })
    }

    pub fn group(&self) -> &Arc<GroupSpec> {
        &self.group
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn support(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.index.contains_key(g)
    }

    fn idx(&self, g: &GroupElement) -> Result<usize> {
        self.index.get(g).copied().ok_or_else(|| Error::OutsideSupport(self.group.format(g)))
    }

    /// `σ(g)`
    pub fn perm(&self, g: &GroupElement) -> Result<&Permutation> {
        Ok(&self.perms[self.idx(g)?])
    }

    /// `σ(g)^{-1}`
    pub fn perm_inverse(&self, g: &GroupElement) -> Result<&Permutation> {
        Ok(&self.inverses[self.idx(g)?])
    }

    pub fn entries(&self) -> impl Iterator<Item = (&GroupElement, &Permutation)> {
        self.elements.iter().zip(&self.perms)
    }

    /// Checks that every element of `f` lies in the support.
    pub fn check_support(&self, f: &[GroupElement]) -> Result<()> {
        f.iter().try_for_each(|g| self.idx(g).map(|_| ()))
    }

    /// Content hash (hex SHA-256 of the canonical JSON form).
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("serializable");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Builds the sofic approximation induced by a finite quotient.
pub fn quotient_sofic(group: &Arc<GroupSpec>, quotient: &Quotient, support: &[GroupElement]) -> Result<SoficApproximation> {
    group.validate()?;
    for g in support {
        if !group.belongs(g) {
            return Err(Error::InvalidParameter(format!("{g:?} is not an element of {}", group.name())));
        }
    }
    let perm_of: Box<dyn Fn(&GroupElement) -> Permutation> = match (&**group, quotient) {
        (GroupSpec::Integers, Quotient::Cyclic { n }) => {
            let n = *n;
            if n == 0 {
                return invalid("cyclic quotient needs n >= 1");
            }
            Box::new(move |g| {
                let GroupElement::Abelian(v) = g else { unreachable!() };
                let s = v[0].rem_euclid(n as i64) as usize;
                Permutation((0..n).map(|j| ((j + s) % n) as u32).collect())
            })
        }
        (GroupSpec::IntegerLattice2, Quotient::Torus2 { q1, q2 }) => {
            let (q1, q2) = (*q1, *q2);
            if q1 == 0 || q2 == 0 {
                return invalid("torus quotient needs positive sides");
            }
            Box::new(move |g| {
                let GroupElement::Abelian(v) = g else { unreachable!() };
                let (s1, s2) = (v[0].rem_euclid(q1 as i64) as usize, v[1].rem_euclid(q2 as i64) as usize);
                Permutation(
                    (0..q1 * q2)
                        .map(|j| {
                            let (j1, j2) = (j % q1, j / q1);
                            ((j1 + s1) % q1 + q1 * ((j2 + s2) % q2)) as u32
                        })
                        .collect(),
                )
            })
        }
        (GroupSpec::Finite(fg), Quotient::Regular { copies }) => {
            if *copies == 0 {
                return invalid("regular quotient needs at least one copy");
            }
            let (fg, copies) = (fg.clone(), *copies);
            Box::new(move |g| {
                let GroupElement::Finite(e) = g else { unreachable!() };
                let n = fg.order;
                Permutation((0..copies * n).map(|j| ((j / n) * n + fg.mul(*e, (j % n) as u32) as usize) as u32).collect())
            })
        }
        (GroupSpec::Free { rank }, Quotient::RandomPermutations { d, seed }) => {
            if *d == 0 {
                return invalid("random permutation model needs d >= 1");
            }
            let gens: Vec<Permutation> = (0..*rank)
                .map(|k| {
                    let mut r = rng::stream(*seed, &[k as u64]);
                    let mut p: Vec<u32> = (0..*d as u32).collect();
                    p.shuffle(&mut r);
                    Permutation(p)
                })
                .collect();
            let d = *d;
            Box::new(move |g| {
                let GroupElement::Free(w) = g else { unreachable!() };
                w.iter().fold(Permutation::identity(d), |acc, &l| {
                    let p = &gens[(l.unsigned_abs() - 1) as usize];
                    if l > 0 {
                        acc.compose(p)
                    } else {
                        acc.compose(&p.inverse())
                    }
                })
            })
        }
        (g, q) => {
            return Err(Error::UnknownQuotient(format!("{q:?} is not available for {}", g.name())));
        }
    };
    let d = perm_of(&group.identity()).len();
    let table = support.iter().map(|g| (g.clone(), perm_of(g))).collect();
    let (provenance, seed) = match quotient {
        // a homomorphism from the free group, not a quotient map
        Quotient::RandomPermutations { seed, .. } => (Provenance::Custom, Some(*seed)),
        _ => (Provenance::QuotientInduced, None),
    };
    SoficApproximation::new(group.clone(), d, table, provenance, seed)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairDefect {
    pub g: String,
    pub h: String,
    pub fraction: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElementDefect {
    pub g: String,
    pub fraction: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SoficDefects {
    /// `|{j : σ(g)σ(h)j ≠ σ(gh)j}| / d` over pairs with `gh` in the support
    pub pairs: Vec<PairDefect>,
    /// fixed-point fraction of `σ(g)` for `g ≠ e`
    pub fixed: Vec<ElementDefect>,
    /// `|{j : σ(g^{-1})j ≠ σ(g)^{-1}j}| / d` where `g^{-1}` is in the support
    pub inverses: Vec<ElementDefect>,
    pub max_pair: f64,
    pub mean_pair: f64,
    pub max_fixed: f64,
    pub mean_fixed: f64,
}

pub fn sofic_defects(sigma: &SoficApproximation, f: &[GroupElement]) -> Result<SoficDefects> {
    sigma.check_support(f)?;
    let grp = sigma.group();
    let d = sigma.d() as f64;
    let mut pairs = vec![];
    for g in f {
        for h in f {
            let gh = grp.multiply(g, h);
            if let Ok(pgh) = sigma.perm(&gh) {
                let (pg, ph) = (sigma.perm(g)?, sigma.perm(h)?);
                let bad = (0..sigma.d()).filter(|&j| pg.apply(ph.apply(j)) != pgh.apply(j)).count();
                pairs.push(PairDefect { g: grp.format(g), h: grp.format(h), fraction: bad as f64 / d });
            }
        }
    }
    let mut fixed = vec![];
    let mut inverses = vec![];
    for g in f {
        if !grp.is_identity(g) {
            fixed.push(ElementDefect { g: grp.format(g), fraction: sigma.perm(g)?.fixed_fraction() });
        }
        if let Ok(pinv) = sigma.perm(&grp.inverse(g)) {
            let inv = sigma.perm_inverse(g)?;
            let bad = (0..sigma.d()).filter(|&j| pinv.apply(j) != inv.apply(j)).count();
            inverses.push(ElementDefect { g: grp.format(g), fraction: bad as f64 / d });
        }
    }
    let stats = |v: &mut dyn Iterator<Item = f64>| {
        let (mut mx, mut sum, mut n) = (0.0f64, 0.0, 0usize);
        for x in v {
            mx = mx.max(x);
            sum += x;
            n += 1;
        }
        (mx, if n == 0 { 0.0 } else { sum / n as f64 })
    };
    let (max_pair, mean_pair) = stats(&mut pairs.iter().map(|p| p.fraction));
    let (max_fixed, mean_fixed) = stats(&mut fixed.iter().map(|p| p.fraction));
    Ok(SoficDefects { pairs, fixed, inverses, max_pair, mean_pair, max_fixed, mean_fixed })
}

/// Composes each `σ(g)`, `g ≠ e`, with `⌈rate·d⌉` seeded random transpositions.
/// `σ(e)` is left as the identity.
pub fn perturb(sigma: &SoficApproximation, rate: f64, seed: u64) -> Result<SoficApproximation> {
    if !(0.0..=1.0).contains(&rate) || rate.is_nan() {
        return invalid(format!("perturbation rate {rate} outside [0, 1]"));
    }
    let d = sigma.d();
    let k = (rate * d as f64).ceil() as usize;
    let table = sigma
        .entries()
        .enumerate()
        .map(|(i, (g, p))| {
            let mut p = p.clone();
            if !sigma.group().is_identity(g) && d > 1 {
                let mut r = rng::stream(seed, &[i as u64]);
                for _ in 0..k {
                    let a = r.gen_range(0..d);
                    let b = r.gen_range(0..d);
                    // p ∘ (a b)
                    p.0.swap(a, b);
                }
            }
            (g.clone(), p)
        })
        .collect();
    SoficApproximation::new(sigma.group().clone(), d, table, Provenance::Perturbed, Some(seed))
}
