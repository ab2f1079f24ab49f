use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use super::graph::{aggregate, propagate_layers, LayerTables, PropagationGraph};
use super::table::{dot, Table};
use crate::corpus::ModalityEmbeddings;
use crate::error::{invalid, Error, Result};
use crate::rng;

/// How item tables are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ItemInit {
    /// Modality features through a seeded random orthonormal projection,
    /// truncated (or zero-padded) to the training dimension.
    #[default]
    Features,
    /// Same scaled-uniform initialization as the user tables.
    Random,
}

impl FromStr for ItemInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "features" => Ok(ItemInit::Features),
            "random" => Ok(ItemInit::Random),
            _ => Err(invalid!("unknown item init {s:?}, expected features or random")),
        }
    }
}

impl fmt::Display for ItemInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ItemInit::Features => "features",
            ItemInit::Random => "random",
        })
    }
}

/// What a modality branch is initialized from.
#[derive(Debug, Clone, Copy)]
pub enum ModalitySource<'a> {
    Features(&'a ModalityEmbeddings),
    /// Branch with random item tables; no features are read.
    Named(&'a str),
}

impl ModalitySource<'_> {
    pub fn name(&self) -> &str {
        match self {
            ModalitySource::Features(e) => &e.modality,
            ModalitySource::Named(n) => n,
        }
    }
}

/// One modality's trainable layer-0 tables and the aggregated tables used
/// for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityModel {
    pub name: String,
    pub base: LayerTables,
    pub aggregated: LayerTables,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub user_count: usize,
    pub item_count: usize,
    pub dim: usize,
    pub layers: usize,
    pub modalities: Vec<ModalityModel>,
}

/// Anything that can score all items for a user.
pub trait Scorer: Sync {
    fn user_count(&self) -> usize;
    fn item_count(&self) -> usize;
    fn score_user(&self, user: usize, out: &mut [f64]);
}

impl EmbeddingModel {
    pub fn init(
        user_count: usize,
        item_count: usize,
        sources: &[ModalitySource<'_>],
        dim: usize,
        layers: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut modalities = Vec::with_capacity(sources.len());
        for (index, source) in sources.iter().enumerate() {
            let mut r = rng::stream(rng::derive(seed, 0x1417), index as u64);
            let users = Table::xavier_uniform(user_count, dim, &mut r);
            let items = match source {
                ModalitySource::Features(emb) => {
                    if emb.item_count() != item_count {
                        return Err(Error::ShapeMismatch(format!(
                            "modality {} has {} items, model has {item_count}",
                            emb.modality,
                            emb.item_count()
                        )));
                    }
                    project_features(emb, dim, &mut r)
                }
                ModalitySource::Named(_) => Table::xavier_uniform(item_count, dim, &mut r),
            };
            let base = LayerTables { users, items };
            modalities.push(ModalityModel {
                name: source.name().to_string(),
                aggregated: base.clone(),
                base,
            });
        }
        Ok(EmbeddingModel {
            user_count,
            item_count,
            dim,
            layers,
            modalities,
        })
    }

    /// Recomputes the aggregated tables from the current layer-0 tables.
    pub fn refresh(&mut self, graph: &PropagationGraph) -> Result<()> {
        for m in &mut self.modalities {
            m.aggregated = aggregate(&propagate_layers(graph, &m.base, self.layers)?);
        }
        Ok(())
    }

    /// Sum over modalities of aggregated user·item dot products.
    pub fn score(&self, user: usize, item: usize) -> f64 {
        let mut s = 0.0;
        for m in &self.modalities {
            s += dot(m.aggregated.users.row(user), m.aggregated.items.row(item));
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        self.modalities.iter().all(|m| {
            m.base.users.is_finite()
                && m.base.items.is_finite()
                && m.aggregated.users.is_finite()
                && m.aggregated.items.is_finite()
        })
    }

    /// Trainable buffers in a fixed order: per modality, users then items.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.modalities
            .iter_mut()
            .flat_map(|m| [m.base.users.as_mut_slice(), m.base.items.as_mut_slice()])
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.modalities
            .iter()
            .map(|m| m.base.users.as_slice().len() + m.base.items.as_slice().len())
            .sum()
    }
}

impl Scorer for EmbeddingModel {
    fn user_count(&self) -> usize {
        self.user_count
    }

    fn item_count(&self) -> usize {
        self.item_count
    }

    fn score_user(&self, user: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for m in &self.modalities {
            let u = m.aggregated.users.row(user);
            for (i, slot) in out.iter_mut().enumerate() {
                *slot += dot(u, m.aggregated.items.row(i));
            }
        }
    }
}

/// Rows of `emb` times the first `dim` columns of a random orthonormal basis.
fn project_features(emb: &ModalityEmbeddings, dim: usize, r: &mut impl Rng) -> Table {
    let source_dim = emb.dim();
    let kept = dim.min(source_dim);
    // Column-major basis: column c is basis[c * source_dim..].
    let mut basis: Vec<f64> = (0..kept * source_dim).map(|_| r.sample(StandardNormal)).collect();
    for c in 0..kept {
        for p in 0..c {
            let (done, rest) = basis.split_at_mut(c * source_dim);
            let prev = &done[p * source_dim..(p + 1) * source_dim];
            let col = &mut rest[..source_dim];
            let proj = dot(prev, col);
            for (x, y) in col.iter_mut().zip(prev) {
                *x -= proj * y;
            }
        }
        let col = &mut basis[c * source_dim..(c + 1) * source_dim];
        let norm = dot(col, col).sqrt();
        col.iter_mut().for_each(|x| *x /= norm);
    }
    let mut out = Table::zeros(emb.item_count(), dim);
    for item in 0..emb.item_count() {
        let feature: Vec<f64> = emb.row(item).iter().map(|&v| v as f64).collect();
        let row = out.row_mut(item);
        for c in 0..kept {
            row[c] = dot(&feature, &basis[c * source_dim..(c + 1) * source_dim]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{InteractionMatrix, MatrixKind};
    use crate::recsys::graph::Normalization;

    #[test]
    fn projection_preserves_geometry_when_not_truncated() {
        let emb = ModalityEmbeddings::new("v", 3, vec![1.0, 0.0, 0.0, 0.6, 0.8, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let model = EmbeddingModel::init(2, 3, &[ModalitySource::Features(&emb)], 3, 1, 5).unwrap();
        let items = &model.modalities[0].base.items;
        // Orthonormal map keeps dot products.
        assert!((dot(items.row(0), items.row(1)) - 0.6).abs() < 1e-7);
        assert!(dot(items.row(0), items.row(2)).abs() < 1e-9);
        assert!((dot(items.row(1), items.row(1)) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn padding_and_truncation() {
        let emb = ModalityEmbeddings::new("v", 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let wide = EmbeddingModel::init(1, 2, &[ModalitySource::Features(&emb)], 4, 0, 1).unwrap();
        assert_eq!(&wide.modalities[0].base.items.row(0)[2..], &[0.0, 0.0]);
        let narrow = EmbeddingModel::init(1, 2, &[ModalitySource::Features(&emb)], 1, 0, 1).unwrap();
        assert_eq!(narrow.modalities[0].base.items.dim(), 1);
    }

    #[test]
    fn scoring_sums_modalities() {
        let mut model =
            EmbeddingModel::init(1, 1, &[ModalitySource::Named("a"), ModalitySource::Named("b")], 2, 0, 0).unwrap();
        model.modalities[0].aggregated.users = Table::from_vec(1, 2, vec![1.0, 0.0]);
        model.modalities[0].aggregated.items = Table::from_vec(1, 2, vec![0.3, 7.0]);
        model.modalities[1].aggregated.users = Table::from_vec(1, 2, vec![0.0, 1.0]);
        model.modalities[1].aggregated.items = Table::from_vec(1, 2, vec![5.0, -0.1]);
        assert!((model.score(0, 0) - 0.2).abs() < 1e-12);
        let mut out = [0.0];
        model.score_user(0, &mut out);
        assert_eq!(out[0], model.score(0, 0));

        model.modalities[1].aggregated.items = Table::from_vec(1, 2, vec![1.0, 0.0]);
        model.modalities[0].aggregated.items = Table::from_vec(1, 2, vec![0.0, 1.0]);
        assert_eq!(model.score(0, 0), 0.0);
    }

    #[test]
    fn refresh_with_no_layers_copies_base() {
        let adj = InteractionMatrix::from_pairs(2, 2, MatrixKind::Real, [(0, 0), (1, 1)]).unwrap();
        let g = PropagationGraph::new(&adj, Normalization::Paper);
        let mut model = EmbeddingModel::init(2, 2, &[ModalitySource::Named("a")], 3, 0, 0).unwrap();
        model.refresh(&g).unwrap();
        assert_eq!(model.modalities[0].aggregated, model.modalities[0].base);
    }
}
