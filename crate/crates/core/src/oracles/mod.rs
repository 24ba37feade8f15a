//! Independent reference computations: Mahler measures, Fuglede–Kadison
//! determinants for finite groups, Smith normal form kernel counts, and
//! brute-force microstate entropy on tiny instances.

mod brute;
mod fk;
mod mahler;
mod poly;
mod smith;

use serde::{Deserialize, Serialize};

pub use brute::{brute_entropy, BruteEntropy, BRUTE_BUDGET};
pub use fk::{circulant_log_det_dft, fk_det_finite};
pub use mahler::{circle_log_integral, mahler_measure};
pub use poly::LaurentPolynomial;
pub use smith::{smith_kernel_count, KernelMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub error_bound: f64,
    pub method: String,
}
