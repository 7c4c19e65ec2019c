//! Numerical laboratory for the nonlocal Dirichlet problem
//!
//! ```text
//! -L_K u = λ |u|^{p-2} u + b(x) |u|^{β-2} u   in Ω = (-1, 1),   u = 0 outside Ω,
//! ```
//!
//! where `L_K` is the fractional p-Laplacian generated by the model kernel
//! `K(z) = θ |z|^{-(1+pα)}` and `b` is a sign-changing weight.
//!
//! Solutions are located on the Nehari manifold through the fibering maps
//! `t ↦ J_λ(t u)`: each admissible direction has a closed-form critical scaling,
//! and minimization over directions produces the branch minimizers on `N⁺` and
//! `N⁻`.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: the uniform grid and piecewise-linear functions,
//! * [`kernel`]: interaction rules for the Gagliardo energy and the exterior weight,
//! * [`energy`]: the functionals `‖u‖^p`, `E_λ`, `B`, `J_λ`, `J_λ⁺` and their gradients,
//! * [`eigen`]: the principal eigenpair and the eigenvalue on `{b > 0}`,
//! * [`fiber`]: fibering maps, sign cases and projection on the Nehari manifold,
//! * [`nehari`]: branch minimization and the nonexistence witnesses,
//! * [`oracle`]: independent validators,
//! * [`experiment`]: the sweeps behind the command-line front-end.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod eigen;
pub mod energy;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod fiber;
pub mod grid;
pub mod kernel;
pub mod nehari;
pub mod oracle;
pub mod quadrature;

pub use eigen::{principal_eigenpair, subdomain_eigen, EigenOptions, EigenResult};
pub use energy::{BWeight, Calibration, EnergyReport, Problem, ProblemParams, Regime, Sign};
pub use error::{Error, Result};
pub use exec::Execution;
pub use fiber::{Branch, FiberDiagnosis, FiberMap};
pub use grid::{Grid, GridFunction};
pub use kernel::{KernelSpec, WeightTable};
pub use nehari::{BranchSolution, NehariOptions};
