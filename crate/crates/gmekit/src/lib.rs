//! Numerical toolkit for multipartite entanglement on small qudit systems:
//! partition coarsening, pure- and mixed-state entanglement measures with
//! genuine (delta-gated) variants, convex-roof extensions, and monogamy audits.

#![forbid(unsafe_code)]

pub mod error;
pub mod fixtures;
pub mod functionals;
pub mod genuine;
pub mod measure;
pub mod partition;
pub mod roof;
pub mod state;

pub use error::{Error, Result};
