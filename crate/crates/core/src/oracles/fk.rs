use super::poly::LaurentPolynomial;
use super::OracleResult;
use crate::actions::{instantiate_xf, IntegerGroupMatrix};
use crate::error::{Error, Result};
use crate::group_core::{quotient_sofic, GroupSpec, Quotient};
use crate::linalg;
use crate::numeric::{ln_abs_bigint, Rational};
use num_complex::Complex64;
use num_traits::Zero;
use std::sync::Arc;

/// `log det_FK λ(f) = (1/|G|) log |det λ(f)|` for a finite group, from an
/// exact integer determinant. A singular `λ(f)` is reported as `Error::Singular`.
pub fn fk_det_finite(f: &IntegerGroupMatrix, group: &Arc<GroupSpec>) -> Result<OracleResult> {
    let order = group.order().ok_or_else(|| Error::Unsupported("Fuglede-Kadison determinant needs a finite group".into()))?;
    if f.rows != f.cols {
        return Err(Error::Unsupported("Fuglede-Kadison determinant needs a square matrix".into()));
    }
    let sigma = Arc::new(quotient_sofic(group, &Quotient::Regular { copies: 1 }, &group.elements().expect("finite"))?);
    let det = linalg::det(&instantiate_xf(f, &sigma, 2, Rational::zero())?.dense());
    if det.is_zero() {
        return Err(Error::Singular);
    }
    let value = ln_abs_bigint(&det) / order as f64;
    Ok(OracleResult { value, error_bound: 4.0 * f64::EPSILON * value.abs().max(1.0), method: "exact-determinant".into() })
}

/// `(1/N) Σ_j log|f(ω^j)|`, `ω = e^{2πi/N}`: the circulant determinant by DFT.
pub fn circulant_log_det_dft(f: &LaurentPolynomial, n: usize) -> f64 {
    (0..n).map(|j| f.eval(Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / n as f64)).norm().ln()).sum::<f64>() / n as f64
}
