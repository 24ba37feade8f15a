use super::model::CompactGroupModel;
use crate::error::{invalid, Error, Result};
use crate::group_core::{GroupElement, GroupSpec};
use crate::rng;
use rand::Rng;
use std::collections::HashMap;
use std::sync::Arc;

/// Action of `G` on a compact group model by automorphisms, given by the
/// images of the generators as point permutations.
#[derive(Clone, Debug)]
pub struct AutomorphismAction {
    group: Arc<GroupSpec>,
    model: Arc<CompactGroupModel>,
    generator_maps: Vec<Vec<u32>>,
    inverse_maps: Vec<Vec<u32>>,
}

fn invert(map: &[u32]) -> Vec<u32> {
    let mut inv = vec![0u32; map.len()];
    for (p, &m) in map.iter().enumerate() {
        inv[m as usize] = p as u32;
    }
    inv
}

impl AutomorphismAction {
    pub fn new(group: Arc<GroupSpec>, model: Arc<CompactGroupModel>, generator_maps: Vec<Vec<u32>>) -> Result<AutomorphismAction> {
        let names = group.generator_names();
        if generator_maps.len() != names.len() {
            return Err(Error::LengthMismatch { expected: names.len(), found: generator_maps.len() });
        }
        let n = model.size();
        if n > 1 << 24 {
            return Err(Error::Unsupported(format!("model {} too large for explicit action tables", model.name())));
        }
        for (name, map) in names.iter().zip(&generator_maps) {
            let mut seen = vec![false; n as usize];
            if map.len() != n as usize || map.iter().any(|&m| m as u64 >= n || std::mem::replace(&mut seen[m as usize], true)) {
                return invalid(format!("generator `{name}` does not act by a bijection"));
            }
            if map[0] != 0 {
                return invalid(format!("generator `{name}` does not fix the identity"));
            }
            let hom = |a: u32, b: u32| map[model.mul(a, b) as usize] == model.mul(map[a as usize], map[b as usize]);
            let ok = if n <= 256 {
                (0..n as u32).all(|a| (0..n as u32).all(|b| hom(a, b)))
            } else {
                let mut r = rng::stream(0xA17, &[]);
                (0..20_000).all(|_| hom(r.gen_range(0..n as u32), r.gen_range(0..n as u32)))
            };
            if !ok {
                return invalid(format!("generator `{name}` is not a homomorphism"));
            }
        }
        let inverse_maps = generator_maps.iter().map(|m| invert(m)).collect();
        let action = AutomorphismAction { group, model, generator_maps, inverse_maps };
        action.check_relations()?;
        Ok(action)
    }

    fn check_relations(&self) -> Result<()> {
        match &*self.group {
            GroupSpec::Integers | GroupSpec::Free { .. } => Ok(()),
            GroupSpec::IntegerLattice2 => {
                let (a, b) = (&self.generator_maps[0], &self.generator_maps[1]);
                if (0..a.len()).all(|p| a[b[p] as usize] == b[a[p] as usize]) {
                    Ok(())
                } else {
                    invalid("relation a b = b a fails")
                }
            }
            GroupSpec::Finite(fg) => {
                // every element gets a table from a shortest word; the action is
                // well defined iff T(s h) = T(s) T(h) for all generators s
                let tables: HashMap<u32, Vec<u32>> =
                    (0..fg.order as u32).map(|e| (e, self.table(&GroupElement::Finite(e)).expect("member"))).collect();
                for (k, (name, s)) in fg.generators.iter().enumerate() {
                    for h in 0..fg.order as u32 {
                        let lhs = &tables[&fg.mul(*s, h)];
                        let rhs = &tables[&h];
                        if (0..lhs.len()).any(|p| lhs[p] != self.generator_maps[k][rhs[p] as usize]) {
                            return invalid(format!("a defining relation involving `{name}` does not act as the identity"));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn trivial(group: Arc<GroupSpec>, model: Arc<CompactGroupModel>) -> Result<AutomorphismAction> {
        let id: Vec<u32> = (0..model.size() as u32).collect();
        let maps = vec![id; group.generator_names().len()];
        AutomorphismAction::new(group, model, maps)
    }

    /// Every generator acts by `x ↦ x^k` (abelian models).
    pub fn power_map(group: Arc<GroupSpec>, model: Arc<CompactGroupModel>, k: i64) -> Result<AutomorphismAction> {
        let n = model.size() as u32;
        let pow = |p: u32| {
            let base = if k < 0 { model.inv(p) } else { p };
            (0..k.unsigned_abs()).fold(0u32, |acc, _| model.mul(acc, base))
        };
        let map: Vec<u32> = (0..n).map(pow).collect();
        let maps = vec![map; group.generator_names().len()];
        AutomorphismAction::new(group, model, maps)
    }

    pub fn group(&self) -> &Arc<GroupSpec> {
        &self.group
    }

    pub fn model(&self) -> &Arc<CompactGroupModel> {
        &self.model
    }

    pub fn generator_maps(&self) -> &[Vec<u32>] {
        &self.generator_maps
    }

    /// Point table of `x ↦ g·x`.
    pub fn table(&self, g: &GroupElement) -> Result<Vec<u32>> {
        if !self.group.belongs(g) {
            return Err(Error::InvalidParameter(format!("{g:?} is not an element of {}", self.group.name())));
        }
        let letters = self.group.word(g);
        let n = self.model.size() as u32;
        Ok((0..n)
            .map(|p| {
                letters.iter().rev().fold(p, |x, &l| {
                    let k = (l.unsigned_abs() - 1) as usize;
                    if l > 0 {
                        self.generator_maps[k][x as usize]
                    } else {
                        self.inverse_maps[k][x as usize]
                    }
                })
            })
            .collect())
    }

    pub fn act(&self, g: &GroupElement, p: u32) -> Result<u32> {
        if p as u64 >= self.model.size() {
            return invalid(format!("point {p} outside model {}", self.model.name()));
        }
        Ok(self.table(g)?[p as usize])
    }

    /// Diagonal action on `X × X`.
    pub fn doubled(&self) -> Result<AutomorphismAction> {
        let model = Arc::new(self.model.product(&self.model)?);
        let n = self.model.size() as u32;
        let maps =
            self.generator_maps.iter().map(|m| (0..n * n).map(|p| m[(p % n) as usize] + n * m[(p / n) as usize]).collect()).collect();
        AutomorphismAction::new(self.group.clone(), model, maps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negation_on_z3() {
        let g = Arc::new(GroupSpec::Integers);
        let x = Arc::new(CompactGroupModel::cyclic(3));
        let a = AutomorphismAction::power_map(g.clone(), x, -1).unwrap();
        assert_eq!(a.act(&g.parse_word("t").unwrap(), 1).unwrap(), 2);
        assert_eq!(a.act(&g.parse_word("t^2").unwrap(), 1).unwrap(), 1);
        assert_eq!(a.act(&g.parse_word("t^-3").unwrap(), 1).unwrap(), 2);
    }

    #[test]
    fn rejects_non_homomorphism_and_broken_relations() {
        let g = Arc::new(GroupSpec::Integers);
        let x = Arc::new(CompactGroupModel::cyclic(3));
        assert!(AutomorphismAction::new(g, x.clone(), vec![vec![0, 2, 0]]).is_err());
        assert!(AutomorphismAction::new(Arc::new(GroupSpec::Integers), x.clone(), vec![vec![1, 2, 0]]).is_err());
        // Z/2 cannot act on Z/5 by x -> 2x since 2*2 = 4 != 1 mod 5
        let z2 = Arc::new(GroupSpec::finite_cyclic(2));
        let x5 = Arc::new(CompactGroupModel::cyclic(5));
        let err = AutomorphismAction::power_map(z2.clone(), x5.clone(), 2).unwrap_err();
        assert!(err.to_string().contains("relation"));
        AutomorphismAction::power_map(z2, x5, -1).unwrap();
    }

    #[test]
    fn lattice_relation_checked() {
        let g = Arc::new(GroupSpec::IntegerLattice2);
        let x = Arc::new(CompactGroupModel::cyclic(5));
        AutomorphismAction::new(g.clone(), x.clone(), vec![vec![0, 2, 4, 1, 3], vec![0, 4, 3, 2, 1]]).unwrap();
    }

    #[test]
    fn doubled_action_is_diagonal() {
        let g = Arc::new(GroupSpec::finite_cyclic(2));
        let x = Arc::new(CompactGroupModel::cyclic(3));
        let a = AutomorphismAction::power_map(g.clone(), x, -1).unwrap();
        let dbl = a.doubled().unwrap();
        let t = g.parse_word("t").unwrap();
        // (1, 2) -> (2, 1)
        assert_eq!(dbl.act(&t, 1 + 3 * 2).unwrap(), 2 + 3);
    }
}
