//! Reference multimodal graph recommender.
//!
//! Per modality, user and item embeddings are propagated over the (possibly
//! augmented) weighted bipartite graph, summed across layers, and scored by
//! dot product; scores add up across modalities. Training minimizes the BPR
//! loss with Adam and early-stops on validation Recall@10.

mod adam;
mod bpr;
mod checkpoint;
mod graph;
mod model;
mod sampler;
mod table;
mod train;

pub use adam::Adam;
pub use bpr::{bpr_loss, log_sigmoid, Gradients};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use graph::{aggregate, propagate, propagate_layers, LayerTables, Normalization, PropagationGraph};
pub use model::{EmbeddingModel, ItemInit, ModalityModel, ModalitySource, Scorer};
pub use sampler::{sample_triplets, Triplet, TripletBatch, TripletSampler};
pub use table::Table;
pub use train::{train, BprSource, EpochLog, TrainConfig, TrainOutcome};
