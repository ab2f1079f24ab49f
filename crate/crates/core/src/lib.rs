//! Similarity-aware virtual user-item interactions for multimodal recommendation.
//!
//! The crate builds item-item top-k neighbor tables from frozen modality
//! embeddings, expands each user's real interactions into virtual ones,
//! weights the virtual interactions by how much better than chance they cover
//! the real ones, and merges everything into an augmented interaction matrix
//! that any graph recommender can consume in place of the original.
//!
//! A small LightGCN-style reference recommender and a ranking evaluation
//! harness are included so the augmentation can be validated end to end.

pub mod augment;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod pipeline;
pub mod recsys;
pub mod rng;
pub mod simgraph;
pub mod stats;
pub mod virtual_graph;

pub use error::{Error, Result};
pub use matrix::{InteractionMatrix, MatrixKind};
