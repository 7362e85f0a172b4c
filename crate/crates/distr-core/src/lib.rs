//! Joint dimensionality reduction and clustering by Gromov-Wasserstein projection.
//!
//! The core idea: represent a dataset as a weighted similarity graph
//! `(C_X, h_X)` and search for a much smaller graph `(C_Z(Z), h_Z)` — a set of
//! `n` low-dimensional *prototypes* with learned masses — that is as close as
//! possible in the Gromov-Wasserstein sense. The optimal coupling `T` between
//! the two graphs is simultaneously a soft cluster assignment, so one
//! optimization problem yields both an embedding and a clustering.
//!
//! The crate is organized bottom-up:
//!
//! - [`numkit`] — dense symmetric eigendecomposition (cyclic Jacobi), Sinkhorn
//!   scaling, pairwise squared distances.
//! - [`affinity`] — similarity graph builders: linear Gram, MDS Gram,
//!   symmetrized entropic affinity, scalar-normalized Student kernel.
//! - [`loss`] — decomposable inner losses (L2, KL) and the exact quadruple-sum
//!   GW objective used as a test oracle.
//! - [`srgw`] — semi-relaxed GW solvers (conditional gradient, KL mirror
//!   descent), reduced objective/gradient with dense and low-rank paths, the
//!   closed-form barycenter step and the srGW divergence.
//! - [`engine`] — the block-coordinate-descent loop alternating coupling and
//!   embedding updates.
//! - [`pipelines`] — sequential baselines: k-means, spectral clustering,
//!   DR-then-cluster and cluster-then-DR.
//! - [`metrics`] — homogeneity, mass-weighted silhouette and the combined
//!   score.
//!
//! With the default `parallel` feature the row-level inner loops run on
//! rayon; disabling it yields a dependency-free sequential build with
//! identical results.

pub mod affinity;
pub mod engine;
mod error;
pub mod loss;
pub mod metrics;
pub mod numkit;
mod par;
pub mod pipelines;
pub mod srgw;

pub use error::{Error, Result};

pub use affinity::{SimilarityGraph, SimilarityKind};
pub use engine::{distr_fit, DistrConfig, DistrResult};
pub use loss::DecomposableLoss;
pub use srgw::{Coupling, SolverConfig, SolverKind};
