use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

/// A finitely generated group from one of the supported families.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GroupSpec {
    /// Z with generator `t`.
    Integers,
    /// Z^2 with generators `a`, `b`.
    IntegerLattice2,
    /// Free group on `rank` generators `a`, `b`, `c`, ...
    Free {
        rank: usize,
    },
    Finite(FiniteGroup),
}

/// Finite group given by its multiplication table; element 0 is the identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteGroup {
    pub name: String,
    pub order: usize,
    pub generators: Vec<(String, u32)>,
    /// `table[g * order + h] = g h`
    pub table: Vec<u32>,
}

/// Group element in canonical form for its family.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupElement {
    /// exponent vector in Z or Z^2
    Abelian(Vec<i64>),
    /// index into a finite group's table
    Finite(u32),
    /// freely reduced word; letter `k+1` is generator `k`, `-(k+1)` its inverse
    Free(Vec<i32>),
}

impl FiniteGroup {
    pub fn cyclic(n: usize) -> FiniteGroup {
        assert!(n >= 1, "cyclic group of order 0");
        let table = (0..n).flat_map(|g| (0..n).map(move |h| ((g + h) % n) as u32)).collect();
        let generators = if n > 1 { vec![("t".to_string(), 1)] } else { vec![] };
        FiniteGroup { name: format!("Z/{n}"), order: n, generators, table }
    }

    /// Closure of a set of permutations (one-line notation) under composition.
    pub fn from_permutations(name: &str, gens: &[(&str, Vec<u32>)]) -> Result<FiniteGroup> {
        let n = gens.first().map_or(0, |g| g.1.len());
        for (g, p) in gens {
            let mut seen = vec![false; n];
            if p.len() != n || p.iter().any(|&x| (x as usize) >= n || std::mem::replace(&mut seen[x as usize], true)) {
                return Err(Error::InvalidParameter(format!("generator `{g}` is not a permutation of {n} points")));
            }
        }
        let id: Vec<u32> = (0..n as u32).collect();
        let mut elems = vec![id.clone()];
        let mut index: HashMap<Vec<u32>, usize> = HashMap::from([(id, 0)]);
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for (_, p) in gens {
                let c: Vec<u32> = elems[i].iter().map(|&x| p[x as usize]).collect();
                if !index.contains_key(&c) {
                    index.insert(c.clone(), elems.len());
                    queue.push_back(elems.len());
                    elems.push(c);
                }
            }
        }
        let order = elems.len();
        let mut table = vec![0u32; order * order];
        for (g, pg) in elems.iter().enumerate() {
            for (h, ph) in elems.iter().enumerate() {
                // (g h)(x) = g(h(x))
                let c: Vec<u32> = ph.iter().map(|&x| pg[x as usize]).collect();
                table[g * order + h] = index[&c] as u32;
            }
        }
        let generators = gens.iter().map(|(g, p)| (g.to_string(), index[p] as u32)).collect();
        Ok(FiniteGroup { name: name.to_string(), order, generators, table })
    }

    /// Symmetric group on three letters with generators `s = (0 1)`, `r = (0 1 2)`.
    pub fn symmetric3() -> FiniteGroup {
        FiniteGroup::from_permutations("S3", &[("s", vec![1, 0, 2]), ("r", vec![1, 2, 0])]).expect("valid generators")
    }

    pub fn from_table(name: &str, table: Vec<u32>, generators: Vec<(String, u32)>) -> Result<FiniteGroup> {
        let order = (table.len() as f64).sqrt().round() as usize;
        let g = FiniteGroup { name: name.to_string(), order, generators, table };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.order;
        let bad = |m: &str| Err(Error::InvalidParameter(format!("group `{}`: {m}", self.name)));
        if n == 0 || self.table.len() != n * n || self.table.iter().any(|&x| x as usize >= n) {
            return bad("table has the wrong shape");
        }
        if (0..n).any(|g| self.mul(0, g as u32) != g as u32 || self.mul(g as u32, 0) != g as u32) {
            return bad("element 0 is not the identity");
        }
        for g in 0..n as u32 {
            if !(0..n as u32).any(|h| self.mul(g, h) == 0) {
                return bad("an element has no inverse");
            }
        }
        if n <= 128 {
            for a in 0..n as u32 {
                for b in 0..n as u32 {
                    for c in 0..n as u32 {
                        if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)) {
                            return bad("multiplication is not associative");
                        }
                    }
                }
            }
        }
        if self.generators.iter().any(|(_, e)| *e as usize >= n) {
            return bad("generator index out of range");
        }
        if self.ball(n).len() != n {
            return bad("generators do not generate the group");
        }
        Ok(())
    }

    pub fn mul(&self, g: u32, h: u32) -> u32 {
        self.table[g as usize * self.order + h as usize]
    }

    pub fn inv(&self, g: u32) -> u32 {
        (0..self.order as u32).find(|&h| self.mul(g, h) == 0).expect("validated group")
    }

    /// Elements within word distance `r` of the identity, with a shortest word each.
    fn ball_words(&self, r: usize) -> Vec<(u32, Vec<i32>)> {
        let mut dist: HashMap<u32, Vec<i32>> = HashMap::from([(0, vec![])]);
        let mut out = vec![(0u32, vec![])];
        let mut frontier = vec![0u32];
        for _ in 0..r {
            let mut next = vec![];
            for &g in &frontier {
                let w = dist[&g].clone();
                for (k, (_, s)) in self.generators.iter().enumerate() {
                    for (letter, el) in [((k + 1) as i32, *s), (-((k + 1) as i32), self.inv(*s))] {
                        let h = self.mul(g, el);
                        if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(h) {
                            let mut w2 = w.clone();
                            w2.push(letter);
                            e.insert(w2.clone());
                            out.push((h, w2));
                            next.push(h);
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        out
    }

    fn ball(&self, r: usize) -> Vec<u32> {
        self.ball_words(r).into_iter().map(|(g, _)| g).collect()
    }

    pub fn shortest_word(&self, g: u32) -> Vec<i32> {
        self.ball_words(self.order).into_iter().find(|(h, _)| *h == g).map(|(_, w)| w).expect("generators generate the group")
    }
}

const FREE_NAMES: &str = "abcdefghijklmnopqrstuvwxyz";

impl GroupSpec {
    pub fn finite_cyclic(n: usize) -> GroupSpec {
        GroupSpec::Finite(FiniteGroup::cyclic(n))
    }

    pub fn name(&self) -> String {
        match self {
            GroupSpec::Integers => "Z".into(),
            GroupSpec::IntegerLattice2 => "Z^2".into(),
            GroupSpec::Free { rank } => format!("F{rank}"),
            GroupSpec::Finite(g) => g.name.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GroupSpec::Free { rank } if *rank == 0 || *rank > FREE_NAMES.len() => {
                Err(Error::InvalidParameter(format!("free group rank {rank} unsupported")))
            }
            GroupSpec::Finite(g) => g.validate(),
            _ => Ok(()),
        }
    }

    pub fn generator_names(&self) -> Vec<String> {
        match self {
            GroupSpec::Integers => vec!["t".into()],
            GroupSpec::IntegerLattice2 => vec!["a".into(), "b".into()],
            GroupSpec::Free { rank } => FREE_NAMES.chars().take(*rank).map(String::from).collect(),
            GroupSpec::Finite(g) => g.generators.iter().map(|(n, _)| n.clone()).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, GroupSpec::Finite(_))
    }

    pub fn order(&self) -> Option<usize> {
        match self {
            GroupSpec::Finite(g) => Some(g.order),
            _ => None,
        }
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            GroupSpec::Integers => GroupElement::Abelian(vec![0]),
            GroupSpec::IntegerLattice2 => GroupElement::Abelian(vec![0, 0]),
            GroupSpec::Free { .. } => GroupElement::Free(vec![]),
            GroupSpec::Finite(_) => GroupElement::Finite(0),
        }
    }

    pub fn is_identity(&self, g: &GroupElement) -> bool {
        *g == self.identity()
    }

    /// Element for a single generator letter (`k+1` or `-(k+1)`).
    pub fn letter(&self, l: i32) -> GroupElement {
        let k = (l.unsigned_abs() - 1) as usize;
        let s = l.signum() as i64;
        match self {
            GroupSpec::Integers => GroupElement::Abelian(vec![s]),
            GroupSpec::IntegerLattice2 => {
                let mut v = vec![0, 0];
                v[k] = s;
                GroupElement::Abelian(v)
            }
            GroupSpec::Free { .. } => GroupElement::Free(vec![l]),
            GroupSpec::Finite(g) => {
                let e = g.generators[k].1;
                GroupElement::Finite(if s > 0 { e } else { g.inv(e) })
            }
        }
    }

    pub fn generators(&self) -> Vec<GroupElement> {
        (1..=self.generator_names().len() as i32).map(|l| self.letter(l)).collect()
    }

    pub fn from_letters(&self, letters: &[i32]) -> GroupElement {
        letters.iter().fold(self.identity(), |acc, &l| self.multiply(&acc, &self.letter(l)))
    }

    /// A word in the generators representing `g` (letters as in `letter`).
    pub fn word(&self, g: &GroupElement) -> Vec<i32> {
        match (self, g) {
            (GroupSpec::Integers | GroupSpec::IntegerLattice2, GroupElement::Abelian(v)) => v
                .iter()
                .enumerate()
                .flat_map(|(k, &e)| std::iter::repeat_n((k as i32 + 1) * e.signum() as i32, e.unsigned_abs() as usize))
                .collect(),
            (GroupSpec::Free { .. }, GroupElement::Free(w)) => w.clone(),
            (GroupSpec::Finite(fg), GroupElement::Finite(e)) => fg.shortest_word(*e),
            _ => panic!("element {g:?} does not belong to {}", self.name()),
        }
    }

    pub fn belongs(&self, g: &GroupElement) -> bool {
        match (self, g) {
            (GroupSpec::Integers, GroupElement::Abelian(v)) => v.len() == 1,
            (GroupSpec::IntegerLattice2, GroupElement::Abelian(v)) => v.len() == 2,
            (GroupSpec::Free { rank }, GroupElement::Free(w)) => {
                w.iter().all(|&l| l != 0 && l.unsigned_abs() as usize <= *rank) && w.windows(2).all(|p| p[0] != -p[1])
            }
            (GroupSpec::Finite(fg), GroupElement::Finite(e)) => (*e as usize) < fg.order,
            _ => false,
        }
    }

    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        match (self, a, b) {
            (_, GroupElement::Abelian(x), GroupElement::Abelian(y)) => GroupElement::Abelian(x.iter().zip(y).map(|(p, q)| p + q).collect()),
            (GroupSpec::Finite(g), GroupElement::Finite(x), GroupElement::Finite(y)) => GroupElement::Finite(g.mul(*x, *y)),
            (_, GroupElement::Free(x), GroupElement::Free(y)) => {
                let mut w = x.clone();
                for &l in y {
                    if w.last() == Some(&-l) {
                        w.pop();
                    } else {
                        w.push(l);
                    }
                }
                GroupElement::Free(w)
            }
            _ => panic!("cannot multiply {a:?} and {b:?} in {}", self.name()),
        }
    }

    pub fn inverse(&self, a: &GroupElement) -> GroupElement {
        match (self, a) {
            (_, GroupElement::Abelian(x)) => GroupElement::Abelian(x.iter().map(|v| -v).collect()),
            (GroupSpec::Finite(g), GroupElement::Finite(x)) => GroupElement::Finite(g.inv(*x)),
            (_, GroupElement::Free(w)) => GroupElement::Free(w.iter().rev().map(|l| -l).collect()),
            _ => panic!("cannot invert {a:?} in {}", self.name()),
        }
    }

    /// Parses words like `t^-1`, `a b^2 a^-1`, `e`.
    pub fn parse_word(&self, s: &str) -> Result<GroupElement> {
        let names = self.generator_names();
        let mut letters = vec![];
        for tok in s.split(|c: char| c.is_whitespace() || c == '*' || c == '.').filter(|t| !t.is_empty()) {
            let (name, exp) = match tok.split_once('^') {
                Some((n, e)) => {
                    let e: i64 =
                        e.trim_matches(|c| c == '(' || c == ')').parse().map_err(|_| Error::Parse(format!("bad exponent in `{tok}`")))?;
                    (n, e)
                }
                None => (tok, 1),
            };
            if name == "e" || name == "1" {
                continue;
            }
            let k = names.iter().position(|n| n == name).ok_or_else(|| Error::UnknownGenerator(name.to_string()))?;
            let l = (k + 1) as i32 * exp.signum() as i32;
            letters.extend(std::iter::repeat_n(l, exp.unsigned_abs() as usize));
        }
        Ok(self.from_letters(&letters))
    }

    pub fn format(&self, g: &GroupElement) -> String {
        let names = self.generator_names();
        let letters = self.word(g);
        if letters.is_empty() {
            return "e".into();
        }
        let mut out = String::new();
        let mut i = 0;
        while i < letters.len() {
            let l = letters[i];
            let mut run = 1;
            while i + run < letters.len() && letters[i + run] == l {
                run += 1;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(&names[(l.unsigned_abs() - 1) as usize]);
            let e = run as i64 * l.signum() as i64;
            if e != 1 {
                let _ = write!(out, "^{e}");
            }
            i += run;
        }
        out
    }

    /// All elements of word length at most `r`, sorted.
    pub fn ball(&self, r: usize) -> Vec<GroupElement> {
        let mut set = BTreeSet::new();
        match self {
            GroupSpec::Integers => {
                for i in -(r as i64)..=r as i64 {
                    set.insert(GroupElement::Abelian(vec![i]));
                }
            }
            GroupSpec::IntegerLattice2 => {
                let r = r as i64;
                for i in -r..=r {
                    for j in -r..=r {
                        if i.abs() + j.abs() <= r {
                            set.insert(GroupElement::Abelian(vec![i, j]));
                        }
                    }
                }
            }
            GroupSpec::Free { rank } => {
                let mut layer = vec![vec![]];
                set.insert(GroupElement::Free(vec![]));
                for _ in 0..r {
                    let mut next = vec![];
                    for w in &layer {
                        for k in 1..=*rank as i32 {
                            for l in [k, -k] {
                                let w: &Vec<i32> = w;
                                if w.last() != Some(&-l) {
                                    let mut w2 = w.clone();
                                    w2.push(l);
                                    set.insert(GroupElement::Free(w2.clone()));
                                    next.push(w2);
                                }
                            }
                        }
                    }
                    layer = next;
                }
            }
            GroupSpec::Finite(g) => {
                for e in g.ball(r) {
                    set.insert(GroupElement::Finite(e));
                }
            }
        }
        set.into_iter().collect()
    }

    /// All elements of a finite group.
    pub fn elements(&self) -> Option<Vec<GroupElement>> {
        self.order().map(|n| (0..n as u32).map(GroupElement::Finite).collect())
    }
}
