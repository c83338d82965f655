//! Role extraction for directed graphs through Neighbourhood Pattern
//! Similarity (NPS) matrices.
//!
//! The crate is organised around the pipeline
//!
//! ```text
//! RoleModel --sample--> Digraph --NPS--> S_k --dominant subspace--> K-means --> Assignment
//! ```
//!
//! together with the deterministic counterparts built from the expected
//! adjacency `M = E[A]` (the `T_k` matrices) and a diagnostics harness that
//! evaluates the spectral-gap and misclassification bounds on concrete
//! instances.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`sbm`] | block model, sampling, expected and ideal adjacency, file formats |
//! | [`nps`] | the `Γ_W` operator, `S_k`/`T_k` recurrences, β policies, Kronecker oracle |
//! | [`spectral`] | dominant subspaces (low-rank NPS iteration), eigenvalue windows, rank estimation, principal angles |
//! | [`clustering`] | K-means with restarts, misclassification error, end-to-end extraction |
//! | [`diagnostics`] | bound checks and random-matrix experiments |
//! | [`experiments`] | data behind the figure reproductions |
//!
//! Monte Carlo loops fan out through [`par::Exec`]; with the `parallel`
//! feature (default) they run on rayon, otherwise sequentially. Results are
//! identical either way because every trial draws from its own RNG substream.

pub mod clustering;
pub mod diagnostics;
mod error;
pub mod experiments;
pub mod linalg;
pub mod nps;
pub mod par;
pub mod rng;
pub mod sbm;
pub mod spectral;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
