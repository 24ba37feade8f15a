//! The pseudometric `ρ_2`, topological microstates `Map(ρ, F, δ, σ)` and
//! measure microstates `Map_μ(ρ, F, L, δ, σ)`, with enumeration, sampling and
//! export.

mod export;
mod metric;
mod panel;
mod system;

pub use export::{export_microstates, import_microstates, MicrostateLabel, MicrostateManifest};
pub use metric::{metric_average, rho2, rho2_sum, Gauge, Pseudometric, SqSum};
pub use panel::{MapWindow, TestFunction, TestPanel};
pub use system::{
    empirical_pushforward, enumerate_meas_microstates, enumerate_top_microstates, kernel_size, psi_window, sample_microstates, shift_lift,
    Dynamics, MicrostateSystem, Prepared,
};
