//! Query-specific evolutionary entity networks from observation panels.
//!
//! The pipeline: a Winsorized Gaussian copula transform turns discrete entity
//! counts into Gaussianized values, a kernel-weighted covariance localizes the
//! second moment along an evolving dimension (time, rating, citations, ...),
//! and an L1-penalized precision estimate at each timestamp yields a sparse
//! conditional-dependence network. A synthetic benchmark harness and a
//! text-corpus front end (BM25 retrieval, dictionary entity linking, and the
//! gamma(n) document cutoff) complete the toolkit.

pub mod corpus;
pub mod error;
pub mod evolve;
pub mod glasso;
pub mod linalg;
pub mod nonparanormal;
pub mod normal;
pub mod panel;
pub mod synthbench;

pub use error::{Error, Result};
pub use glasso::{CovarianceMatrix, PrecisionEstimate, SolverOptions};
pub use panel::ObservationPanel;
