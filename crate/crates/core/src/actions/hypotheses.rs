use super::ring::IntegerGroupMatrix;
use crate::error::Result;
use crate::group_core::{quotient_sofic, GroupElement, GroupSpec, Quotient};
use crate::linalg::{self, IntMatrix};
use crate::numeric::Rational;
use crate::oracles::LaurentPolynomial;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    /// `None` when not decidable by the available method
    pub value: Option<bool>,
    pub method: String,
}

impl Verdict {
    fn known(v: bool, method: &str) -> Verdict {
        Verdict { value: Some(v), method: method.into() }
    }

    fn unknown(method: &str) -> Verdict {
        Verdict { value: None, method: method.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub lambda_injective: Verdict,
    pub lambda_dense_image: Verdict,
    pub homoclinic_dense_surrogate: Option<bool>,
}

/// Decides injectivity and dense image of `λ(f)` where a finite-scale method
/// exists: exact rank for finite `G`; the determinant polynomial for `G = Z`.
pub fn verify_hypotheses(f: &IntegerGroupMatrix, group: &Arc<GroupSpec>) -> Result<HypothesisReport> {
    match &**group {
        GroupSpec::Finite(fg) => {
            let elements = group.elements().expect("finite");
            let sigma = Arc::new(quotient_sofic(group, &Quotient::Regular { copies: 1 }, &elements)?);
            let a = super::algebraic::instantiate_xf(f, &sigma, 2, Rational::zero())?.dense();
            let r = linalg::rank(&a);
            Ok(HypothesisReport {
                lambda_injective: Verdict::known(r == f.cols * fg.order, "exact rank of the regular representation"),
                lambda_dense_image: Verdict::known(r == f.rows * fg.order, "exact rank of the regular representation"),
                homoclinic_dense_surrogate: Some(true),
            })
        }
        GroupSpec::Integers if f.rows == f.cols => {
            let nonzero = symbol_det_nonzero(f, group);
            let method = "determinant of the symbol in Z[t, t^-1]";
            let homoclinic = if f.rows == 1 && nonzero {
                let p = LaurentPolynomial::from_ring_element(f.entry(0, 0))?;
                Some(!p.has_root_on_unit_circle())
            } else {
                None
            };
            Ok(HypothesisReport {
                lambda_injective: Verdict::known(nonzero, method),
                lambda_dense_image: Verdict::known(nonzero, method),
                homoclinic_dense_surrogate: homoclinic,
            })
        }
        _ => Ok(HypothesisReport {
            lambda_injective: Verdict::unknown("no finite-scale decision procedure"),
            lambda_dense_image: Verdict::unknown("no finite-scale decision procedure"),
            homoclinic_dense_surrogate: None,
        }),
    }
}

/// Whether `det f(t)` is a nonzero Laurent polynomial, by evaluating
/// `t^K det f(t)` at more integer points than its degree.
fn symbol_det_nonzero(f: &IntegerGroupMatrix, group: &GroupSpec) -> bool {
    let n = f.rows;
    let exps = |e: &super::ring::GroupRingElement| -> Vec<(i64, i64)> {
        e.terms()
            .map(|(g, c)| match g {
                GroupElement::Abelian(v) => (v[0], c),
                _ => unreachable!("element of Z"),
            })
            .collect()
    };
    let _ = group;
    let ranges: Vec<(i64, i64)> = (0..n)
        .map(|i| {
            let row: Vec<i64> = (0..n).flat_map(|j| exps(f.entry(i, j))).map(|x| x.0).collect();
            (row.iter().copied().min().unwrap_or(0), row.iter().copied().max().unwrap_or(0))
        })
        .collect();
    let shift = -ranges.iter().map(|r| r.0).min().unwrap_or(0).min(0);
    // every row scaled by t^shift has exponents in [0, max + shift]
    let degree: i64 = ranges.iter().map(|r| r.1 + shift).sum();
    (2..degree + 4).any(|z| {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut v = num_bigint::BigInt::zero();
                for (e, c) in exps(f.entry(i, j)) {
                    v += num_bigint::BigInt::from(c) * num_bigint::BigInt::from(z).pow((e + shift) as u32);
                }
                m.set(i, j, v);
            }
        }
        !linalg::det(&m).is_zero()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group_core::FiniteGroup;

    #[test]
    fn finite_group_ranks() {
        let g = Arc::new(GroupSpec::finite_cyclic(2));
        let ok = verify_hypotheses(&IntegerGroupMatrix::parse_scalar(&g, "2 + t").unwrap(), &g).unwrap();
        assert_eq!(ok.lambda_injective.value, Some(true));
        assert_eq!(ok.lambda_dense_image.value, Some(true));
        let bad = verify_hypotheses(&IntegerGroupMatrix::parse_scalar(&g, "1 + t").unwrap(), &g).unwrap();
        assert_eq!(bad.lambda_injective.value, Some(false));
        let s3 = Arc::new(GroupSpec::Finite(FiniteGroup::symmetric3()));
        let r = verify_hypotheses(&IntegerGroupMatrix::parse_scalar(&s3, "1 - s").unwrap(), &s3).unwrap();
        assert_eq!(r.lambda_injective.value, Some(false));
    }

    #[test]
    fn integer_symbols() {
        let g = Arc::new(GroupSpec::Integers);
        let r = verify_hypotheses(&IntegerGroupMatrix::parse_scalar(&g, "t - 2").unwrap(), &g).unwrap();
        assert_eq!(r.lambda_injective.value, Some(true));
        assert_eq!(r.homoclinic_dense_surrogate, Some(true));
        let r = verify_hypotheses(&IntegerGroupMatrix::parse_scalar(&g, "t - 1").unwrap(), &g).unwrap();
        assert_eq!(r.homoclinic_dense_surrogate, Some(false));
        // [[t, 1], [t^2, t]] has determinant 0
        let text: super::super::ring::MatrixText = serde_json::from_str(r#"[["t", "1"], ["t^2", "t"]]"#).unwrap();
        let m = IntegerGroupMatrix::from_text(&g, &text).unwrap();
        assert_eq!(verify_hypotheses(&m, &g).unwrap().lambda_injective.value, Some(false));
        let text: super::super::ring::MatrixText = serde_json::from_str(r#"[["t^-1", "1"], ["1", "t"]]"#).unwrap();
        let m = IntegerGroupMatrix::from_text(&g, &text).unwrap();
        assert_eq!(verify_hypotheses(&m, &g).unwrap().lambda_injective.value, Some(false));
        let f2 = Arc::new(GroupSpec::Free { rank: 2 });
        let r = verify_hypotheses(&IntegerGroupMatrix::parse_scalar(&f2, "3 - a").unwrap(), &f2).unwrap();
        assert_eq!(r.lambda_injective.value, None);
    }
}
