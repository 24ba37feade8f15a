//! Finitely generated groups, sofic approximations, and their cache.

mod cache;
mod group;
mod sofic;

pub use cache::{CacheEntrySummary, Perturbation, SoficCache, SoficRecipe, CACHE_DIR_ENV};
pub use group::{FiniteGroup, GroupElement, GroupSpec};
pub use sofic::{
    perturb, quotient_sofic, sofic_defects, ElementDefect, PairDefect, Permutation, Provenance, Quotient, SoficApproximation, SoficDefects,
};
