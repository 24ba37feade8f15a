use crate::error::{Error, Result};
use crate::group_core::{GroupElement, GroupSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Element of the integral group ring `Z[G]` (finitely supported).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct GroupRingElement {
    terms: BTreeMap<GroupElement, i64>,
}

impl GroupRingElement {
    pub fn from_terms(terms: impl IntoIterator<Item = (GroupElement, i64)>) -> GroupRingElement {
        let mut map = BTreeMap::new();
        for (g, c) in terms {
            *map.entry(g).or_insert(0) += c;
        }
        map.retain(|_, c| *c != 0);
        GroupRingElement { terms: map }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&GroupElement, i64)> {
        self.terms.iter().map(|(g, c)| (g, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Parses `2 + t`, `t^2 - t - 1`, `3 a b^-1 - 2`, `-t^-1 + 3`.
    pub fn parse(group: &GroupSpec, s: &str) -> Result<GroupRingElement> {
        let mut terms = vec![];
        let mut cur = String::new();
        let mut sign = 1i64;
        let mut prev = ' ';
        let flush = |cur: &mut String, sign: i64, terms: &mut Vec<(GroupElement, i64)>| -> Result<()> {
            let t = cur.trim();
            if t.is_empty() {
                cur.clear();
                return Ok(());
            }
            let digits: String = t.chars().take_while(|c| c.is_ascii_digit()).collect();
            let rest = t[digits.len()..].trim().trim_start_matches('*').trim();
            let coeff: i64 =
                if digits.is_empty() { 1 } else { digits.parse().map_err(|_| Error::Parse(format!("bad coefficient in `{t}`")))? };
            let g = if rest.is_empty() { group.identity() } else { group.parse_word(rest)? };
            terms.push((g, sign * coeff));
            cur.clear();
            Ok(())
        };
        for c in s.chars() {
            if (c == '+' || c == '-') && prev != '^' {
                if !cur.trim().is_empty() {
                    flush(&mut cur, sign, &mut terms)?;
                    sign = 1;
                }
                if c == '-' {
                    sign = -sign;
                }
            } else {
                cur.push(c);
            }
            if !c.is_whitespace() {
                prev = c;
            }
        }
        if prev == '+' || prev == '-' {
            return Err(Error::Parse(format!("dangling sign in `{s}`")));
        }
        flush(&mut cur, sign, &mut terms)?;
        if terms.is_empty() && !s.trim().is_empty() && s.trim() != "0" {
            return Err(Error::Parse(format!("empty expression `{s}`")));
        }
        Ok(GroupRingElement::from_terms(terms))
    }

    pub fn format(&self, group: &GroupSpec) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (g, c)) in self.terms.iter().enumerate() {
            let word = if group.is_identity(g) { String::new() } else { group.format(g) };
            let (sign, mag) = if *c < 0 { ("-", -c) } else { ("+", *c) };
            if i == 0 {
                if sign == "-" {
                    out.push('-');
                }
            } else {
                out.push_str(&format!(" {sign} "));
            }
            match (mag, word.is_empty()) {
                (_, true) => out.push_str(&mag.to_string()),
                (1, false) => out.push_str(&word),
                (_, false) => out.push_str(&format!("{mag} {word}")),
            }
        }
        out
    }
}

/// An `m × n` matrix over `Z[G]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerGroupMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<GroupRingElement>,
}

/// Text form of a matrix entry: an expression or a list of (word, coefficient) pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntryText {
    Expr(String),
    Pairs(Vec<(String, i64)>),
}

/// Serialized form: a list of rows of entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixText(pub Vec<Vec<EntryText>>);

impl IntegerGroupMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<GroupRingElement>) -> Result<IntegerGroupMatrix> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::InvalidParameter(format!("matrix {rows}x{cols} with {} entries", entries.len())));
        }
        Ok(IntegerGroupMatrix { rows, cols, entries })
    }

    pub fn scalar(f: GroupRingElement) -> IntegerGroupMatrix {
        IntegerGroupMatrix { rows: 1, cols: 1, entries: vec![f] }
    }

    /// Single-entry matrix parsed from an expression.
    pub fn parse_scalar(group: &GroupSpec, s: &str) -> Result<IntegerGroupMatrix> {
        Ok(IntegerGroupMatrix::scalar(GroupRingElement::parse(group, s)?))
    }

    pub fn from_text(group: &GroupSpec, text: &MatrixText) -> Result<IntegerGroupMatrix> {
        let rows = text.0.len();
        let cols = text.0.first().map_or(0, |r| r.len());
        if text.0.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse("matrix rows have different lengths".into()));
        }
        let mut entries = vec![];
        for row in &text.0 {
            for e in row {
                entries.push(match e {
                    EntryText::Expr(s) => GroupRingElement::parse(group, s)?,
                    EntryText::Pairs(p) => GroupRingElement::from_terms(
                        p.iter().map(|(w, c)| group.parse_word(w).map(|g| (g, *c))).collect::<Result<Vec<_>>>()?,
                    ),
                });
            }
        }
        IntegerGroupMatrix::new(rows, cols, entries)
    }

    pub fn to_text(&self, group: &GroupSpec) -> MatrixText {
        MatrixText(
            (0..self.rows)
                .map(|i| {
                    (0..self.cols)
                        .map(|j| EntryText::Pairs(self.entry(i, j).terms().map(|(g, c)| (group.format(g), c)).collect()))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn entry(&self, i: usize, j: usize) -> &GroupRingElement {
        &self.entries[i * self.cols + j]
    }

    /// Group elements with a nonzero coefficient somewhere.
    pub fn support(&self) -> Vec<GroupElement> {
        let mut v: Vec<GroupElement> = self.entries.iter().flat_map(|e| e.terms.keys().cloned()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// `diag(self, other)`
    pub fn block_diag(&self, other: &IntegerGroupMatrix) -> IntegerGroupMatrix {
        let (rows, cols) = (self.rows + other.rows, self.cols + other.cols);
        let mut entries = vec![GroupRingElement::default(); rows * cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                entries[i * cols + j] = self.entry(i, j).clone();
            }
        }
        for i in 0..other.rows {
            for j in 0..other.cols {
                entries[(self.rows + i) * cols + self.cols + j] = other.entry(i, j).clone();
            }
        }
        IntegerGroupMatrix { rows, cols, entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_laurent_expressions() {
        let z = GroupSpec::Integers;
        let f = GroupRingElement::parse(&z, "t^2 - t - 1").unwrap();
        let coeffs: Vec<(i64, i64)> = f.terms().map(|(g, c)| (if let GroupElement::Abelian(v) = g { v[0] } else { 0 }, c)).collect();
        assert_eq!(coeffs, vec![(0, -1), (1, -1), (2, 1)]);
        let g = GroupRingElement::parse(&z, "-t^-1 + 3").unwrap();
        assert_eq!(g.format(&z), "-t^-1 + 3");
        assert_eq!(GroupRingElement::parse(&z, "2 + t").unwrap().format(&z), "2 + t");
        assert_eq!(GroupRingElement::parse(&z, "2*t - 2 t").unwrap(), GroupRingElement::default());
        assert!(GroupRingElement::parse(&z, "2 + s").is_err());
        assert!(GroupRingElement::parse(&z, "t -").is_err());
    }

    #[test]
    fn text_roundtrip() {
        let g = GroupSpec::Free { rank: 2 };
        let text: MatrixText = serde_json::from_str(r#"[["3 - a b^-1", [["b", 2], ["e", -1]]]]"#).unwrap();
        let m = IntegerGroupMatrix::from_text(&g, &text).unwrap();
        assert_eq!((m.rows, m.cols), (1, 2));
        let back = IntegerGroupMatrix::from_text(&g, &m.to_text(&g)).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.support().len(), 3);
    }
}
