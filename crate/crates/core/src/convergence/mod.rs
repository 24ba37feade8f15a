//! Representable measures on `X^d`, the candidate sequences, and checkers
//! for local weak*, local-and-empirical and doubly empirical convergence,
//! including the quenched window cross-check.

mod battery;
mod check;
mod measure;
mod sequences;

pub use battery::{run_battery, BatteryCell, BatteryConfig, BatteryRun, MeasureSpec, Scenario};
pub use check::{
    append_jsonl, check_lde, check_le, check_lw, check_window_quenched, estimate_mass, monotone_nondecreasing, window_target,
    ConvergenceConfig, ConvergenceReport, Level, MassEstimate, QuenchedReport,
};
pub use measure::{convolve, Marginals, MeasureKind, ModelMeasure, WeightedSupport, EXACT_SUPPORT_LIMIT};
pub use sequences::{bernoulli_sequence, kernel_uniform_sequence, separated_convolution_sequence, translation_survival, SurvivalReport};
