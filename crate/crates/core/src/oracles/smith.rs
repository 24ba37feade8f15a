use crate::error::{Error, Result};
use crate::linalg::{self, IntMatrix};
use num_bigint::BigUint;
use num_traits::{Signed, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelMode {
    /// kernel of `A` on the torus `(R/Z)^n`
    Continuous,
    /// kernel of `A` on `(Z/q)^n`
    Modulus(u64),
}

/// Kernel size from the Smith normal form.
pub fn smith_kernel_count(a: &IntMatrix, mode: KernelMode) -> Result<BigUint> {
    let s = linalg::smith(a);
    match mode {
        KernelMode::Continuous => {
            if !a.is_square() || s.diagonal.iter().any(|v| v.is_zero()) {
                return Err(Error::Unsupported("continuous kernel is infinite".into()));
            }
            Ok(s.diagonal.iter().fold(BigUint::from(1u32), |acc, v| acc * v.abs().to_biguint().expect("positive")))
        }
        KernelMode::Modulus(q) => {
            if q == 0 {
                return Err(Error::InvalidParameter("modulus must be positive".into()));
            }
            Ok(linalg::kernel_count_mod(&s, a.cols, q))
        }
    }
}
