use rand::Rng;

use crate::error::{invalid, Result};
use crate::matrix::InteractionMatrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub user: u32,
    pub pos: u32,
    pub neg: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TripletBatch(pub Vec<Triplet>);

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Triplet> {
        self.0.iter()
    }
}

/// Draws positives uniformly from the stored entries of `positives` and
/// negatives uniformly from the items the same user has no entry for.
pub struct TripletSampler<'a> {
    positives: &'a InteractionMatrix,
    entry_users: Vec<u32>,
    entry_items: Vec<u32>,
}

impl<'a> TripletSampler<'a> {
    pub fn new(positives: &'a InteractionMatrix) -> Result<Self> {
        if positives.nnz() == 0 {
            return Err(invalid!("no positive interactions to sample from"));
        }
        if let Some(u) = (0..positives.user_count()).find(|&u| positives.row_len(u) == positives.item_count()) {
            return Err(invalid!("user {u} interacted with every item; no negative exists"));
        }
        let (entry_users, entry_items) = positives.pairs().unzip();
        Ok(TripletSampler {
            positives,
            entry_users,
            entry_items,
        })
    }

    pub fn sample(&self, batch_size: usize, rng: &mut impl Rng) -> TripletBatch {
        let items = self.positives.item_count() as u32;
        let triplets = (0..batch_size)
            .map(|_| {
                let e = rng.random_range(0..self.entry_users.len());
                let (user, pos) = (self.entry_users[e], self.entry_items[e]);
                let neg = loop {
                    let j = rng.random_range(0..items);
                    if !self.positives.contains(user as usize, j) {
                        break j;
                    }
                };
                Triplet { user, pos, neg }
            })
            .collect();
        TripletBatch(triplets)
    }
}

pub fn sample_triplets(positives: &InteractionMatrix, batch_size: usize, seed: u64) -> Result<TripletBatch> {
    Ok(TripletSampler::new(positives)?.sample(batch_size, &mut rng::stream(seed, 0)))
}
