pub mod canon;
pub mod certify;
pub mod document;
pub mod error;
pub mod fixtures;
pub mod numlin;
pub mod reduce;
pub mod state;
pub mod vectors;

pub use certify::{
    bsa_decompose, certify_by_subsets, kernel_witness_bound, separability_check,
    spectral_ball_check, BsaResult, Config, Diagnostics, Method, Reason, Status, Verdict,
};
pub use error::{Error, Result};
pub use fixtures::{Family, GeneratorSpec};
pub use numlin::{CMatrix, CVector, Tolerances, C64};
pub use state::{BipartiteState, Decomposition, Isometries, ProductVector, Side, Term};
pub use vectors::{enumerate_eligible, EligibleSet};
