//! Finite-sample Agler decompositions for preordered families of test functions.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernel;
pub mod linalg;
pub mod opmodel;
pub mod pick;
pub mod preorder;
pub mod realize;
pub mod sampling;
pub mod testfn;
pub mod wire;

pub use error::{Error, Result};
pub use kernel::{HermitianKernel, PointSample};
pub use linalg::{CMat, CVec, C64};
pub use preorder::{Classification, MultiIndex, Preordering};
pub use realize::{
    AglerCertificate, Colligation, DecomposeOutcome, Decomposition, DefectData, FunctionSample, SolverParams, Status,
    Witness,
};
