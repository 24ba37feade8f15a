//! Actions of groups on compact groups: explicit automorphism actions on
//! finite models, and the algebraic actions `X_f` for integral matrices.

mod algebraic;
mod automorphism;
mod hypotheses;
mod model;
mod ring;

pub use algebraic::{
    count_kernel_points, instantiate_xf, regular_window_marginal, xf_finite_model, AlgebraicActionModel, CountMode, FiniteXf,
};
pub use automorphism::AutomorphismAction;
pub use hypotheses::{verify_hypotheses, HypothesisReport, Verdict};
pub use model::{CompactGroupModel, FiniteModel};
pub use ring::{EntryText, GroupRingElement, IntegerGroupMatrix, MatrixText};
