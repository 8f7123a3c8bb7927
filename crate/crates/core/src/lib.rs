//! tractorlab: an exact symbolic engine for conformal tractor calculus on
//! conformally flat space.
//!
//! Everything is computed over exact rational arithmetic: sparse multivariate
//! polynomials and their fraction field, dense weighted tensor fields on flat
//! reference coordinates, the standard (rank n+2) tractor bundle with its
//! metric, connection and Thomas-D operator, half and full prolongations of
//! conformal Killing vectors and rank-2 conformal Killing tensors, the
//! Killing-scale criteria that decide when a conformal scale turns a
//! conformal Killing object into an honest Killing one, and exact
//! linear-algebra solvers that compute the dimensions of the relevant
//! solution spaces.
//!
//! Conventions used throughout:
//! * The conformal class is represented by the flat reference metric with
//!   components `delta_ab`; a *scale* `sigma` (weight-1 density) selects the
//!   metric `sigma^{-2} * g_ref`.  Components of all fields are stored in the
//!   reference trivialisation, so polynomial data stays polynomial.
//! * A weight-w covector transforms with `Upsilon_a = -d_a sigma / sigma`;
//!   see [`conformal`] for the rescaling calculus.
//! * Tractor slot values are ordered `0 = Y`, `1..=n = Z`, `n+1 = X`.

pub mod arith;
pub mod cli;
pub mod conformal;
pub mod error;
pub mod killing;
pub mod projective;
pub mod prolong;
pub mod report;
pub mod solve;
pub mod tensor;
pub mod tractor;

pub use arith::{parse_poly, Poly, Rational, Scalar};
pub use conformal::ScaleSpec;
pub use error::{Error, Result};
pub use killing::{ScaleVerdict, VerdictKind};
pub use projective::{conf_to_proj, proj_to_conf, project_to_iperp, ProjectiveTractorField};
pub use prolong::{ProlongationLevel, ProlongationRecord};
pub use report::{RunReport, SuiteSelect};
pub use solve::{Basis, BasisReport, RationalMatrix};
pub use tensor::{Variance, WeightedTensorField};
pub use tractor::{
    d_identities_check, is_einstein_scale, scale_tractor, CheckStatus, IdentityOutcome,
    MixedField, ScaleTractor,
};
