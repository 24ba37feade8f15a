use crate::actions::GroupRingElement;
use crate::error::{Error, Result};
use crate::group_core::{GroupElement, GroupSpec};
use num_complex::Complex64;

/// Integer Laurent polynomial `Σ c_k t^(low + k)`, trimmed at both ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaurentPolynomial {
    low: i64,
    coeffs: Vec<i64>,
}

impl LaurentPolynomial {
    pub fn new(low: i64, coeffs: Vec<i64>) -> LaurentPolynomial {
        let mut p = LaurentPolynomial { low, coeffs };
        while p.coeffs.last() == Some(&0) {
            p.coeffs.pop();
        }
        let lead = p.coeffs.iter().take_while(|&&c| c == 0).count();
        p.coeffs.drain(..lead);
        p.low += lead as i64;
        if p.coeffs.is_empty() {
            p.low = 0;
        }
        p
    }

    pub fn parse(s: &str) -> Result<LaurentPolynomial> {
        LaurentPolynomial::from_ring_element(&GroupRingElement::parse(&GroupSpec::Integers, s)?)
    }

    pub fn from_ring_element(f: &GroupRingElement) -> Result<LaurentPolynomial> {
        let terms: Vec<(i64, i64)> = f
            .terms()
            .map(|(g, c)| match g {
                GroupElement::Abelian(v) if v.len() == 1 => Ok((v[0], c)),
                _ => Err(Error::InvalidParameter("not an element of Z[Z]".into())),
            })
            .collect::<Result<_>>()?;
        let Some(low) = terms.iter().map(|t| t.0).min() else { return Ok(LaurentPolynomial::new(0, vec![])) };
        let high = terms.iter().map(|t| t.0).max().expect("nonempty");
        let mut coeffs = vec![0i64; (high - low + 1) as usize];
        for (e, c) in terms {
            coeffs[(e - low) as usize] += c;
        }
        Ok(LaurentPolynomial::new(low, coeffs))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the polynomial part `t^{-low} f`.
    pub fn span(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn low(&self) -> i64 {
        self.low
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn leading(&self) -> i64 {
        *self.coeffs.last().unwrap_or(&0)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let poly = self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c as f64);
        poly * z.powi(self.low as i32)
    }

    /// Terms `(exponent, coefficient)` reduced into `Z[Z/N]`.
    pub fn reduce_mod(&self, n: usize) -> Vec<(usize, i64)> {
        let mut acc = vec![0i64; n];
        for (k, &c) in self.coeffs.iter().enumerate() {
            acc[(self.low + k as i64).rem_euclid(n as i64) as usize] += c;
        }
        acc.into_iter().enumerate().filter(|(_, c)| *c != 0).collect()
    }

    /// Ring element over `Z/N` with generator `t`.
    pub fn to_cyclic_ring(&self, n: usize) -> GroupRingElement {
        GroupRingElement::from_terms(self.reduce_mod(n).into_iter().map(|(e, c)| (GroupElement::Finite(e as u32), c)))
    }

    /// Roots of `t^{-low} f` (Aberth–Ehrlich iteration, Newton polish).
    /// Returns `None` when the iteration does not converge.
    pub fn roots(&self) -> Option<Vec<Complex64>> {
        let deg = self.span();
        if deg == 0 {
            return Some(vec![]);
        }
        let a: Vec<Complex64> = self.coeffs.iter().map(|&c| Complex64::new(c as f64, 0.0)).collect();
        let p = |z: Complex64| a.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
        let dp = |z: Complex64| a.iter().enumerate().skip(1).rev().fold(Complex64::new(0.0, 0.0), |acc, (k, &c)| acc * z + c * k as f64);
        let lead = a[deg].norm();
        let r0 = (a[0].norm() / lead).powf(1.0 / deg as f64).max(1e-3);
        let mut z: Vec<Complex64> =
            (0..deg).map(|k| Complex64::from_polar(r0, std::f64::consts::TAU * k as f64 / deg as f64 + 0.4)).collect();
        let mut converged = false;
        for _ in 0..2000 {
            let mut max_step = 0.0f64;
            for k in 0..deg {
                let pk = p(z[k]);
                let dk = dp(z[k]);
                if pk.norm() == 0.0 {
                    continue;
                }
                let w = pk / dk;
                let s: Complex64 = (0..deg).filter(|&j| j != k).map(|j| Complex64::new(1.0, 0.0) / (z[k] - z[j])).sum();
                let step = w / (Complex64::new(1.0, 0.0) - w * s);
                if step.is_finite() {
                    z[k] -= step;
                    max_step = max_step.max(step.norm() / z[k].norm().max(1.0));
                }
            }
            if max_step < 1e-15 {
                converged = true;
                break;
            }
        }
        for zk in z.iter_mut() {
            for _ in 0..3 {
                let step = p(*zk) / dp(*zk);
                if step.is_finite() {
                    *zk -= step;
                }
            }
        }
        if !converged || z.iter().any(|r| !r.is_finite()) {
            return None;
        }
        Some(z)
    }

    pub fn has_root_on_unit_circle(&self) -> bool {
        match self.roots() {
            Some(r) => r.iter().any(|z| (z.norm() - 1.0).abs() < 1e-9),
            None => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_trim() {
        let p = LaurentPolynomial::parse("t^2 - t - 1").unwrap();
        assert_eq!((p.low(), p.coeffs().to_vec()), (0, vec![-1, -1, 1]));
        let q = LaurentPolynomial::parse("t^-1 + 3 t^2").unwrap();
        assert_eq!((q.low(), q.coeffs().to_vec()), (-1, vec![1, 0, 0, 3]));
        assert_eq!(q.reduce_mod(3), vec![(2, 4)]);
        assert_eq!(q.reduce_mod(4), vec![(2, 3), (3, 1)]);
    }

    #[test]
    fn golden_ratio_roots() {
        let p = LaurentPolynomial::parse("t^2 - t - 1").unwrap();
        let mut r: Vec<f64> = p.roots().unwrap().iter().map(|z| z.re).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((r[1] - phi).abs() < 1e-13 && (r[0] + 1.0 / phi).abs() < 1e-13);
        assert!(!p.has_root_on_unit_circle());
        assert!(LaurentPolynomial::parse("t^3 - 1").unwrap().has_root_on_unit_circle());
    }
}
