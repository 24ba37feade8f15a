use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// A finite group with an explicit table; point 0 is the identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteModel {
    pub name: String,
    pub order: u32,
    mul: Vec<u32>,
    inv: Vec<u32>,
    pub labels: Vec<String>,
}

/// Computational model of a compact group `X`. Points are `u32` indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CompactGroupModel {
    Finite(FiniteModel),
    /// `(Z/q)^sites` viewed as the grid `((1/q)Z/Z)^sites` inside the torus;
    /// point `p` has site coordinates `(p / q^s) mod q`.
    TorusGrid {
        q: u32,
        sites: u32,
    },
}

impl FiniteModel {
    pub fn cyclic(n: u32) -> FiniteModel {
        assert!(n >= 1);
        FiniteModel {
            name: format!("Z/{n}"),
            order: n,
            mul: (0..n).flat_map(|a| (0..n).map(move |b| (a + b) % n)).collect(),
            inv: (0..n).map(|a| (n - a) % n).collect(),
            labels: (0..n).map(|a| a.to_string()).collect(),
        }
    }

    /// Builds a model from a multiplication table, validating the group axioms.
    pub fn from_table(name: &str, order: u32, mul: Vec<u32>, labels: Vec<String>) -> Result<FiniteModel> {
        let n = order as usize;
        if n == 0 || mul.len() != n * n || labels.len() != n || mul.iter().any(|&x| x >= order) {
            return invalid(format!("model `{name}`: malformed table"));
        }
        let m = |a: usize, b: usize| mul[a * n + b] as usize;
        if (0..n).any(|a| m(0, a) != a || m(a, 0) != a) {
            return invalid(format!("model `{name}`: point 0 is not the identity"));
        }
        let mut inv = vec![0u32; n];
        for (a, slot) in inv.iter_mut().enumerate() {
            *slot = (0..n).find(|&b| m(a, b) == 0).ok_or_else(|| Error::InvalidParameter(format!("model `{name}`: no inverse")))? as u32;
        }
        if n <= 256 {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        if m(m(a, b), c) != m(a, m(b, c)) {
                            return invalid(format!("model `{name}`: not associative"));
                        }
                    }
                }
            }
        }
        Ok(FiniteModel { name: name.to_string(), order, mul, inv, labels })
    }

    /// Finite subgroup of `(Z/q)^k` given by its elements (vectors of residues);
    /// the zero vector must be present.
    /// Returns the model and the residue vector of each point index.
    pub fn from_residue_vectors(name: &str, q: u32, points: &[Vec<u32>]) -> Result<(FiniteModel, Vec<Vec<u32>>)> {
        let k = points.first().map_or(0, |p| p.len());
        let zero = vec![0u32; k];
        let mut pts: Vec<Vec<u32>> = points.to_vec();
        pts.sort();
        pts.dedup();
        let zpos = pts.iter().position(|p| *p == zero).ok_or_else(|| Error::InvalidParameter("subgroup lacks zero".into()))?;
        pts.swap(0, zpos);
        pts[1..].sort();
        let index: HashMap<&Vec<u32>, u32> = pts.iter().enumerate().map(|(i, p)| (p, i as u32)).collect();
        let n = pts.len();
        let mut mul = vec![0u32; n * n];
        for a in 0..n {
            for b in 0..n {
                let s: Vec<u32> = pts[a].iter().zip(&pts[b]).map(|(x, y)| (x + y) % q).collect();
                mul[a * n + b] = *index.get(&s).ok_or_else(|| Error::InvalidParameter("point set is not closed under addition".into()))?;
            }
        }
        let inv = (0..n)
            .map(|a| {
                let s: Vec<u32> = pts[a].iter().map(|x| (q - x) % q).collect();
                index[&s]
            })
            .collect();
        let labels = pts.iter().map(|p| format!("{p:?}/{q}")).collect();
        Ok((FiniteModel { name: name.to_string(), order: n as u32, mul, inv, labels }, pts))
    }
}

impl CompactGroupModel {
    pub fn cyclic(n: u32) -> CompactGroupModel {
        CompactGroupModel::Finite(FiniteModel::cyclic(n))
    }

    pub fn torus_grid(q: u32, sites: u32) -> Result<CompactGroupModel> {
        if q < 2 || sites == 0 {
            return invalid("torus grid needs q >= 2 and at least one site");
        }
        if (q as u64).checked_pow(sites).is_none_or(|s| s > u32::MAX as u64) {
            return invalid(format!("torus grid {q}^{sites} does not fit 32-bit point indices"));
        }
        Ok(CompactGroupModel::TorusGrid { q, sites })
    }

    pub fn name(&self) -> String {
        match self {
            CompactGroupModel::Finite(f) => f.name.clone(),
            CompactGroupModel::TorusGrid { q, sites } => format!("T_{q}^{sites}"),
        }
    }

    pub fn size(&self) -> u64 {
        match self {
            CompactGroupModel::Finite(f) => f.order as u64,
            CompactGroupModel::TorusGrid { q, sites } => (*q as u64).pow(*sites),
        }
    }

    pub fn identity(&self) -> u32 {
        0
    }

    pub fn is_abelian(&self) -> bool {
        match self {
            CompactGroupModel::Finite(f) => {
                let n = f.order as usize;
                (0..n).all(|a| (0..n).all(|b| f.mul[a * n + b] == f.mul[b * n + a]))
            }
            CompactGroupModel::TorusGrid { .. } => true,
        }
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        match self {
            CompactGroupModel::Finite(f) => f.mul[a as usize * f.order as usize + b as usize],
            CompactGroupModel::TorusGrid { q, sites } => {
                let (mut a, mut b, mut out, mut base) = (a, b, 0u32, 1u32);
                for s in 0..*sites {
                    out += ((a % q + b % q) % q) * base;
                    a /= q;
                    b /= q;
                    if s + 1 < *sites {
                        base *= q;
                    }
                }
                out
            }
        }
    }

    #[inline]
    pub fn inv(&self, a: u32) -> u32 {
        match self {
            CompactGroupModel::Finite(f) => f.inv[a as usize],
            CompactGroupModel::TorusGrid { q, sites } => {
                let (mut a, mut out, mut base) = (a, 0u32, 1u32);
                for s in 0..*sites {
                    out += ((q - a % q) % q) * base;
                    a /= q;
                    if s + 1 < *sites {
                        base *= q;
                    }
                }
                out
            }
        }
    }

    /// Site coordinates of a torus-grid point.
    pub fn coords(&self, p: u32) -> Vec<u32> {
        match self {
            CompactGroupModel::TorusGrid { q, sites } => {
                let mut p = p;
                (0..*sites)
                    .map(|_| {
                        let c = p % q;
                        p /= q;
                        c
                    })
                    .collect()
            }
            CompactGroupModel::Finite(_) => vec![p],
        }
    }

    pub fn from_coords(&self, c: &[u32]) -> u32 {
        match self {
            CompactGroupModel::TorusGrid { q, .. } => c.iter().rev().fold(0u32, |acc, &x| acc * q + x),
            CompactGroupModel::Finite(_) => c[0],
        }
    }

    pub fn label(&self, p: u32) -> String {
        match self {
            CompactGroupModel::Finite(f) => f.labels[p as usize].clone(),
            CompactGroupModel::TorusGrid { q, .. } => {
                let c = self.coords(p);
                format!("{c:?}/{q}")
            }
        }
    }

    /// Haar measure as weights over points.
    pub fn uniform(&self) -> Vec<f64> {
        let n = self.size() as usize;
        vec![1.0 / n as f64; n]
    }

    /// `X × Y`; the pair `(a, b)` is the point `a + |X| b`.
    pub fn product(&self, other: &CompactGroupModel) -> Result<CompactGroupModel> {
        match (self, other) {
            (CompactGroupModel::TorusGrid { q, sites }, CompactGroupModel::TorusGrid { q: q2, sites: s2 }) if q == q2 => {
                CompactGroupModel::torus_grid(*q, sites + s2)
            }
            _ => {
                let (na, nb) = (self.size(), other.size());
                if na * nb > 1 << 16 {
                    return Err(Error::Unsupported(format!("product model {} x {} too large", self.name(), other.name())));
                }
                let n = (na * nb) as u32;
                let split = |p: u32| (p % na as u32, p / na as u32);
                let mut mul = vec![0u32; (n as usize) * (n as usize)];
                for p in 0..n {
                    let (a1, b1) = split(p);
                    for r in 0..n {
                        let (a2, b2) = split(r);
                        mul[p as usize * n as usize + r as usize] = self.mul(a1, a2) + na as u32 * other.mul(b1, b2);
                    }
                }
                let labels = (0..n).map(|p| format!("({},{})", self.label(split(p).0), other.label(split(p).1))).collect();
                let name = format!("{}x{}", self.name(), other.name());
                Ok(CompactGroupModel::Finite(FiniteModel::from_table(&name, n, mul, labels)?))
            }
        }
    }

    /// Checks the group axioms exhaustively on small models.
    pub fn check_axioms(&self) -> Result<()> {
        let n = self.size();
        if n > 4096 {
            return Ok(());
        }
        let n = n as u32;
        for a in 0..n {
            if self.mul(a, 0) != a || self.mul(0, a) != a || self.mul(a, self.inv(a)) != 0 {
                return invalid(format!("{}: identity or inverse axiom fails at {a}", self.name()));
            }
        }
        if n <= 256 {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)) {
                            return invalid(format!("{}: not associative", self.name()));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
