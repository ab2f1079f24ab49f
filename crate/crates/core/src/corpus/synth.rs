//! Seeded synthetic datasets in which modality similarity predicts preference.
//!
//! Items belong to clusters. Each item also has a latent offset shared by all
//! of its modalities; a modality embedding is its cluster center plus the
//! projected offset plus modality-specific noise, scaled by `affinity_noise`
//! and normalized to unit length. Users favor one or two clusters and, within
//! each, items whose latent offset lies near a personal taste point. Items that
//! are close in embedding space are therefore co-consumed, which is the
//! structure virtual interactions exploit.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, ModalityEmbeddings};
use crate::error::{invalid, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub user_count: usize,
    pub item_count: usize,
    pub cluster_count: usize,
    pub interactions_per_user: usize,
    /// Embedding dimension per modality name.
    pub dims: BTreeMap<String, usize>,
    pub affinity_noise: f64,
    pub seed: u64,
    /// Dimension of the latent item offsets shared across modalities.
    pub latent_dim: usize,
    /// Fraction of the perturbation variance that is shared across modalities.
    pub shared_fraction: f64,
    /// Probability mass a user puts on their preferred clusters.
    pub preferred_mass: f64,
    /// Width of the within-cluster taste kernel in latent space.
    pub taste_bandwidth: f64,
}

impl SynthConfig {
    pub fn new(
        user_count: usize,
        item_count: usize,
        cluster_count: usize,
        interactions_per_user: usize,
        dims: BTreeMap<String, usize>,
        affinity_noise: f64,
        seed: u64,
    ) -> Self {
        SynthConfig {
            user_count,
            item_count,
            cluster_count,
            interactions_per_user,
            dims,
            affinity_noise,
            seed,
            latent_dim: 8,
            shared_fraction: 0.7,
            preferred_mass: 0.9,
            taste_bandwidth: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.user_count == 0 || self.item_count == 0 {
            return Err(invalid!("user_count and item_count must be positive"));
        }
        if self.cluster_count == 0 || self.cluster_count > self.item_count {
            return Err(invalid!(
                "cluster_count {} must be in 1..={}",
                self.cluster_count,
                self.item_count
            ));
        }
        if self.interactions_per_user == 0 || self.interactions_per_user > self.item_count {
            return Err(invalid!(
                "interactions_per_user {} must be in 1..={}",
                self.interactions_per_user,
                self.item_count
            ));
        }
        if self.dims.is_empty() || self.dims.values().any(|&d| d == 0) {
            return Err(invalid!("need at least one modality, all dims positive"));
        }
        if !(self.affinity_noise >= 0.0 && self.affinity_noise.is_finite()) {
            return Err(invalid!("affinity_noise must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.shared_fraction) || !(0.0..1.0).contains(&self.preferred_mass) {
            return Err(invalid!("shared_fraction must be in [0,1] and preferred_mass in [0,1)"));
        }
        if self.taste_bandwidth.is_nan() || self.taste_bandwidth <= 0.0 || self.latent_dim == 0 {
            return Err(invalid!("taste_bandwidth and latent_dim must be positive"));
        }
        Ok(())
    }
}

const STREAM_ITEMS: u64 = 1;
const STREAM_MODALITY: u64 = 2;
const STREAM_USER: u64 = 3;

pub fn generate_synthetic(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let n_items = config.item_count;
    let q = config.latent_dim;

    let mut item_rng = rng::stream(rng::derive(config.seed, STREAM_ITEMS), 0);
    let mut order: Vec<usize> = (0..n_items).collect();
    order.shuffle(&mut item_rng);
    let mut cluster_of = vec![0usize; n_items];
    for (pos, &item) in order.iter().enumerate() {
        cluster_of[item] = pos % config.cluster_count;
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); config.cluster_count];
    for (item, &c) in cluster_of.iter().enumerate() {
        members[c].push(item);
    }
    let latent_scale = 1.0 / (q as f64).sqrt();
    let latent: Vec<f64> = (0..n_items * q)
        .map(|_| item_rng.sample::<f64, _>(StandardNormal) * latent_scale)
        .collect();

    let mut modalities = BTreeMap::new();
    for (m_index, (name, &dim)) in config.dims.iter().enumerate() {
        let mut r = rng::stream(rng::derive(config.seed, STREAM_MODALITY), m_index as u64);
        let coord_scale = 1.0 / (dim as f64).sqrt();
        let centers: Vec<f64> = (0..config.cluster_count * dim)
            .map(|_| r.sample::<f64, _>(StandardNormal) * coord_scale)
            .collect();
        let mixing: Vec<f64> = (0..dim * q)
            .map(|_| r.sample::<f64, _>(StandardNormal) * coord_scale)
            .collect();
        let shared = config.shared_fraction.sqrt();
        let own = (1.0 - config.shared_fraction).sqrt();
        let mut data = Vec::with_capacity(n_items * dim);
        let mut row = vec![0.0f64; dim];
        for item in 0..n_items {
            let c = cluster_of[item];
            let xi = &latent[item * q..(item + 1) * q];
            for (d, slot) in row.iter_mut().enumerate() {
                let projected: f64 = mixing[d * q..(d + 1) * q].iter().zip(xi).map(|(a, b)| a * b).sum();
                let noise = r.sample::<f64, _>(StandardNormal) * coord_scale;
                *slot = centers[c * dim + d] + config.affinity_noise * (shared * projected + own * noise);
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            data.extend(row.iter().map(|v| (v * inv) as f32));
        }
        modalities.insert(name.clone(), ModalityEmbeddings::new(name.clone(), dim, data)?);
    }

    let background = (1.0 - config.preferred_mass) / n_items as f64;
    let two_sigma_sq = 2.0 * config.taste_bandwidth * config.taste_bandwidth;
    let mut interactions = Vec::with_capacity(config.user_count * config.interactions_per_user);
    let mut weights = vec![0.0f64; n_items];
    for user in 0..config.user_count {
        let mut r = rng::stream(rng::derive(config.seed, STREAM_USER), user as u64);
        let preferred_count = if config.cluster_count > 1 && r.random_bool(0.5) {
            2
        } else {
            1
        };
        let mut clusters: Vec<usize> = (0..config.cluster_count).collect();
        clusters.shuffle(&mut r);
        clusters.truncate(preferred_count);

        weights.iter_mut().for_each(|w| *w = background);
        for &c in &clusters {
            let anchor = members[c][r.random_range(0..members[c].len())];
            let taste = &latent[anchor * q..(anchor + 1) * q];
            let kernel: Vec<f64> = members[c]
                .iter()
                .map(|&i| {
                    let d2: f64 = latent[i * q..(i + 1) * q]
                        .iter()
                        .zip(taste)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (-d2 / two_sigma_sq).exp()
                })
                .collect();
            let total: f64 = kernel.iter().sum();
            let mass = config.preferred_mass / preferred_count as f64;
            for (&i, k) in members[c].iter().zip(&kernel) {
                weights[i] += mass * k / total;
            }
        }

        let mut chosen = Vec::with_capacity(config.interactions_per_user);
        let mut remaining: f64 = weights.iter().sum();
        for _ in 0..config.interactions_per_user {
            let mut target = r.random::<f64>() * remaining;
            let mut pick = None;
            for (i, &w) in weights.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
            let i = pick.expect("positive background mass keeps every item available");
            remaining -= weights[i];
            weights[i] = 0.0;
            chosen.push(i as u32);
        }
        chosen.sort_unstable();
        interactions.extend(chosen.into_iter().map(|i| (user as u32, i)));
    }

    Dataset::new(config.user_count, n_items, interactions, modalities)
}
