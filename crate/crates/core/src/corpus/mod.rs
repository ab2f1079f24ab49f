//! Datasets: ingestion, synthetic generation, splitting and perturbation.

mod io;
mod perturb;
mod split;
mod synth;

use std::collections::BTreeMap;

pub use io::{
    load_dataset, load_dataset_dir, read_embeddings, read_id_map, read_interactions, save_dataset_dir,
    write_embeddings, write_interactions, EMBEDDING_EXTENSION, EMBEDDING_MAGIC, INTERACTIONS_FILE,
};
pub use perturb::{
    error_level_probability, inject_information_error, inject_representation_noise, noise_level_variance,
    perturb_dataset,
};
pub use split::{split_dataset, split_interactions, SplitBundle, SplitRatios};
pub use synth::{generate_synthetic, SynthConfig};

use crate::error::{invalid, Result};
use crate::matrix::{InteractionMatrix, MatrixKind};

/// Frozen item features for one modality, `item_count × dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityEmbeddings {
    pub modality: String,
    dim: usize,
    data: Vec<f32>,
}

impl ModalityEmbeddings {
    pub fn new(modality: impl Into<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        let modality = modality.into();
        if dim == 0 {
            return Err(invalid!("modality {modality}: dim must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(invalid!(
                "modality {modality}: {} values is not a whole number of rows of length {dim}",
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid!(
                "modality {modality}: non-finite value at row {}, column {}",
                pos / dim,
                pos % dim
            ));
        }
        Ok(ModalityEmbeddings { modality, dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn item_count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, item: usize) -> &[f32] {
        &self.data[item * self.dim..(item + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.dim {
            self.data.swap(a * self.dim + c, b * self.dim + c);
        }
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }
}

/// Users, items, observed interactions, and one embedding table per modality.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub user_count: usize,
    pub item_count: usize,
    pub interactions: Vec<(u32, u32)>,
    /// Keyed by modality name; iteration order is the canonical modality order.
    pub modalities: BTreeMap<String, ModalityEmbeddings>,
}

impl Dataset {
    pub fn new(
        user_count: usize,
        item_count: usize,
        interactions: Vec<(u32, u32)>,
        modalities: BTreeMap<String, ModalityEmbeddings>,
    ) -> Result<Self> {
        let ds = Dataset {
            user_count,
            item_count,
            interactions,
            modalities,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_count == 0 || self.item_count == 0 {
            return Err(invalid!("user and item counts must be positive"));
        }
        if self.modalities.is_empty() {
            return Err(invalid!("dataset has no modalities"));
        }
        let mut seen = std::collections::HashSet::with_capacity(self.interactions.len());
        for &(u, i) in &self.interactions {
            if u as usize >= self.user_count || i as usize >= self.item_count {
                return Err(invalid!(
                    "interaction ({u}, {i}) out of range for {} users, {} items",
                    self.user_count,
                    self.item_count
                ));
            }
            if !seen.insert((u, i)) {
                return Err(invalid!("duplicate interaction ({u}, {i})"));
            }
        }
        for (name, emb) in &self.modalities {
            if name != &emb.modality {
                return Err(invalid!(
                    "modality key {name} does not match table name {}",
                    emb.modality
                ));
            }
            if emb.item_count() != self.item_count {
                return Err(invalid!(
                    "modality {name} has {} rows, expected {}",
                    emb.item_count(),
                    self.item_count
                ));
            }
        }
        Ok(())
    }

    pub fn interaction_matrix(&self) -> InteractionMatrix {
        InteractionMatrix::from_pairs(
            self.user_count,
            self.item_count,
            MatrixKind::Real,
            self.interactions.iter().copied(),
        )
        .expect("validated dataset indices are in range")
    }

    pub fn modality_names(&self) -> Vec<String> {
        self.modalities.keys().cloned().collect()
    }

    pub fn embeddings(&self) -> Vec<&ModalityEmbeddings> {
        self.modalities.values().collect()
    }
}
