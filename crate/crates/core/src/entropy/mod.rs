//! Separated and covering counts, entropy in the presence (topological and
//! measure), the kernel-determinant shortcut and lde model-measure entropy.

mod counting;
mod estimate;
mod factor;
mod grid;

pub use crate::microstates::metric_average;
pub use counting::{max_separated, min_cover, s_eps_delta, CountResult, CountingMode, CoverCount, EXACT_COUNT_LIMIT};
pub use estimate::{
    h_lde, h_meas_presence, h_top_presence, kernel_determinant_entropy, CandidateSequence, EntropyEstimate, LdeEstimate, LdeLevel,
    LdeSequence, MicrostateSource, PresenceParams,
};
pub use factor::FactorMap;
pub use grid::{EntropyGrid, GridManifest};
