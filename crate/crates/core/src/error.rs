use thiserror::Error;

use crate::eigen::EigenResult;
use crate::nehari::BranchSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: expected {expected} interior nodes, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("non-finite sample at x = {x}")]
    NonFinite { x: f64 },

    #[error("point x = {0} is not strictly inside (-1, 1)")]
    OutsideDomain(f64),

    #[error("operation undefined for the zero function")]
    ZeroFunction,

    #[error("no critical scaling: {0}")]
    NoCriticalScaling(String),

    #[error("branch empty: {0}")]
    BranchEmpty(String),

    #[error("eigen solver did not converge after {iterations} iterations")]
    EigenNotConverged { iterations: usize, best: Box<EigenResult> },

    #[error("branch minimization did not converge after {iterations} iterations")]
    BranchNotConverged { iterations: usize, best: Box<BranchSolution> },

    #[error("iterates left the bounded region: {0}")]
    Unbounded(String),

    #[error("no witness direction: {0}")]
    NoWitness(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("oracle failure: {0}")]
    Oracle(String),
}
