use crate::actions::{AutomorphismAction, CompactGroupModel, FiniteModel};
use crate::error::{invalid, Error, Result};
use crate::microstates::Pseudometric;
use std::sync::Arc;

/// Coordinatewise factor map `π: X → Y = X/N`.
#[derive(Clone, Debug)]
pub struct FactorMap {
    name: String,
    target: Arc<CompactGroupModel>,
    projection: Arc<Vec<u32>>,
    kind: FactorKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum FactorKind {
    Identity,
    Trivial,
    Quotient,
}

const TABLE_LIMIT: u64 = 1 << 22;

impl FactorMap {
    pub fn identity(model: &Arc<CompactGroupModel>) -> Result<FactorMap> {
        if model.size() > TABLE_LIMIT {
            return Err(Error::Unsupported(format!("model {} too large for a projection table", model.name())));
        }
        Ok(FactorMap {
            name: "identity".into(),
            target: model.clone(),
            projection: Arc::new((0..model.size() as u32).collect()),
            kind: FactorKind::Identity,
        })
    }

    /// Factor onto the one-point group.
    pub fn trivial(model: &Arc<CompactGroupModel>) -> Result<FactorMap> {
        if model.size() > TABLE_LIMIT {
            return Err(Error::Unsupported(format!("model {} too large for a projection table", model.name())));
        }
        Ok(FactorMap {
            name: "trivial".into(),
            target: Arc::new(CompactGroupModel::cyclic(1)),
            projection: Arc::new(vec![0; model.size() as usize]),
            kind: FactorKind::Trivial,
        })
    }

    /// `X → X/N` for a normal subgroup `N`, which must also be invariant under
    /// `action` when one is given.
    pub fn quotient(model: &Arc<CompactGroupModel>, subgroup: &[u32], action: Option<&AutomorphismAction>) -> Result<FactorMap> {
        let n = model.size();
        if n > 4096 {
            return Err(Error::Unsupported(format!("quotients of {} are not tabulated", model.name())));
        }
        let mut member = vec![false; n as usize];
        for &s in subgroup {
            if s as u64 >= n {
                return invalid(format!("subgroup element {s} outside the model"));
            }
            member[s as usize] = true;
        }
        let elems: Vec<u32> = (0..n as u32).filter(|&x| member[x as usize]).collect();
        if !member[model.identity() as usize] {
            return invalid("subgroup must contain the identity");
        }
        for &a in &elems {
            for &b in &elems {
                if !member[model.mul(a, b) as usize] {
                    return invalid("subgroup is not closed under multiplication");
                }
            }
        }
        for x in 0..n as u32 {
            for &s in &elems {
                if !member[model.mul(model.mul(x, s), model.inv(x)) as usize] {
                    return invalid("subgroup is not normal");
                }
            }
        }
        if let Some(a) = action {
            if a.model() != model {
                return invalid("action lives on a different model");
            }
            if a.generator_maps().iter().any(|m| elems.iter().any(|&s| !member[m[s as usize] as usize])) {
                return invalid("subgroup is not invariant under the action");
            }
        }
        // canonical coset representative: smallest element of x N
        let mut label = vec![u32::MAX; n as usize];
        let mut reps = Vec::new();
        for x in 0..n as u32 {
            if label[x as usize] == u32::MAX {
                for &s in &elems {
                    label[model.mul(x, s) as usize] = reps.len() as u32;
                }
                reps.push(x);
            }
        }
        let m = reps.len() as u32;
        let mul: Vec<u32> =
            reps.iter().flat_map(|&a| reps.iter().map(move |&b| (a, b))).map(|(a, b)| label[model.mul(a, b) as usize]).collect();
        let name = format!("{}/N(|N|={})", model.name(), elems.len());
        let labels = reps.iter().map(|&r| format!("{}N", model.label(r))).collect();
        let target = Arc::new(CompactGroupModel::Finite(FiniteModel::from_table(&name, m, mul, labels)?));
        Ok(FactorMap { name, target, projection: Arc::new(label), kind: FactorKind::Quotient })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn target(&self) -> &Arc<CompactGroupModel> {
        &self.target
    }

    pub fn projection(&self) -> &[u32] {
        &self.projection
    }

    pub fn is_identity(&self) -> bool {
        self.kind == FactorKind::Identity
    }

    pub fn project(&self, x: &[u32]) -> Vec<u32> {
        x.iter().map(|&p| self.projection[p as usize]).collect()
    }

    /// Action of `G` on `Y` induced through `π`.
    pub fn induced_action(&self, action: &AutomorphismAction) -> Result<AutomorphismAction> {
        let m = self.target.size() as usize;
        let mut reps = vec![u32::MAX; m];
        for (x, &y) in self.projection.iter().enumerate().rev() {
            reps[y as usize] = x as u32;
        }
        let maps =
            action.generator_maps().iter().map(|map| reps.iter().map(|&r| self.projection[map[r as usize] as usize]).collect()).collect();
        AutomorphismAction::new(action.group().clone(), self.target.clone(), maps)
    }

    /// Surjective homomorphism, equivariant for `action` when given.
    pub fn verify(&self, source: &CompactGroupModel, action: Option<&AutomorphismAction>) -> Result<()> {
        let n = source.size() as u32;
        let mut hit = vec![false; self.target.size() as usize];
        for x in 0..n {
            hit[self.projection[x as usize] as usize] = true;
        }
        if hit.iter().any(|h| !h) {
            return invalid("factor map is not surjective");
        }
        let limit = n.min(256);
        for a in 0..limit {
            for b in 0..limit {
                let (pa, pb) = (self.projection[a as usize], self.projection[b as usize]);
                if self.projection[source.mul(a, b) as usize] != self.target.mul(pa, pb) {
                    return invalid("factor map is not a homomorphism");
                }
            }
        }
        if let Some(a) = action {
            let induced = self.induced_action(a)?;
            for (m, my) in a.generator_maps().iter().zip(induced.generator_maps()) {
                if (0..n).any(|x| self.projection[m[x as usize] as usize] != my[self.projection[x as usize] as usize]) {
                    return invalid("factor map is not equivariant");
                }
            }
        }
        Ok(())
    }

    /// Quotient metric `ρ_Y(a, b) = min ρ_X(x, y)` over the two fibers.
    pub fn target_metric(&self, rho_x: &Pseudometric, source: &CompactGroupModel) -> Result<Pseudometric> {
        let witness = rho_x.generating_witness[0].clone();
        match self.kind {
            FactorKind::Identity => Ok(rho_x.clone()),
            FactorKind::Trivial => Ok(Pseudometric::discrete(witness)),
            FactorKind::Quotient if rho_x.is_discrete() => Ok(Pseudometric::discrete(witness)),
            FactorKind::Quotient => {
                let m = self.target.size() as usize;
                let mut table = vec![f64::INFINITY; m * m];
                let n = source.size() as u32;
                for x in 0..n {
                    for y in 0..n {
                        let k = self.projection[x as usize] as usize * m + self.projection[y as usize] as usize;
                        table[k] = table[k].min(rho_x.dist(x, y));
                    }
                }
                Pseudometric::table(m as u32, table, witness)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_core::GroupSpec;

    #[test]
    fn quotient_of_z6_by_z3() {
        let g = Arc::new(GroupSpec::Integers);
        let x = Arc::new(CompactGroupModel::cyclic(6));
        let act = AutomorphismAction::power_map(g.clone(), x.clone(), -1).unwrap();
        let f = FactorMap::quotient(&x, &[0, 2, 4], Some(&act)).unwrap();
        assert_eq!(f.target().size(), 2);
        assert_eq!(f.project(&[0, 1, 2, 3, 4, 5]), vec![0, 1, 0, 1, 0, 1]);
        f.verify(&x, Some(&act)).unwrap();
        assert!(FactorMap::quotient(&x, &[0, 1], None).is_err());
        let flat = Pseudometric::flat_torus(6, 1, g.identity());
        let rho_y = f.target_metric(&flat, &x).unwrap();
        assert!((rho_y.dist(0, 1) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(rho_y.dist(1, 1), 0.0);
    }

    #[test]
    fn non_invariant_subgroup_rejected() {
        // Z/2 × Z/2 as T_2^2 with the swap automorphism; N = first factor
        let g = Arc::new(GroupSpec::Integers);
        let x = Arc::new(CompactGroupModel::torus_grid(2, 2).unwrap());
        let act = AutomorphismAction::new(g, x.clone(), vec![vec![0, 2, 1, 3]]).unwrap();
        assert!(FactorMap::quotient(&x, &[0, 1], Some(&act)).is_err());
        let diag = FactorMap::quotient(&x, &[0, 3], Some(&act)).unwrap();
        diag.verify(&x, Some(&act)).unwrap();
    }

    #[test]
    fn trivial_and_identity() {
        let x = Arc::new(CompactGroupModel::cyclic(4));
        let t = FactorMap::trivial(&x).unwrap();
        assert_eq!(t.project(&[3, 1]), vec![0, 0]);
        t.verify(&x, None).unwrap();
        let i = FactorMap::identity(&x).unwrap();
        assert_eq!(i.project(&[3, 1]), vec![3, 1]);
        assert!(i.is_identity());
    }
}
