use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{invalid, Result};
use crate::matrix::{InteractionMatrix, MatrixKind};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid!(
                "split ratios ({}, {}, {}) must be in [0,1] and sum to 1",
                self.train,
                self.validation,
                self.test
            ));
        }
        Ok(())
    }

    /// `(train, validation, test)` counts for a user with `n` interactions.
    ///
    /// Users with fewer than 3 interactions keep everything in train. Otherwise
    /// each non-zero held-out ratio gets at least one interaction and train
    /// keeps at least one.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        if n < 3 {
            return (n, 0, 0);
        }
        let held = |ratio: f64| -> usize {
            if ratio <= 0.0 {
                0
            } else {
                ((n as f64 * ratio).round() as usize).max(1)
            }
        };
        let mut test = held(self.test);
        let mut val = held(self.validation);
        while val + test > n - 1 {
            if val >= test && val > 0 {
                val -= 1;
            } else {
                test -= 1;
            }
        }
        (n - val - test, val, test)
    }
}

/// Train / validation / test partition of a dataset's interactions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitBundle {
    pub train: InteractionMatrix,
    /// Sorted by `(user, item)`.
    pub validation: Vec<(u32, u32)>,
    /// Sorted by `(user, item)`.
    pub test: Vec<(u32, u32)>,
    pub seed: u64,
}

impl SplitBundle {
    pub fn user_count(&self) -> usize {
        self.train.user_count()
    }

    pub fn item_count(&self) -> usize {
        self.train.item_count()
    }
}

/// Per-user shuffled split. Each user's items are shuffled with its own
/// random stream, so the result depends only on the dataset and `seed`.
pub fn split_dataset(dataset: &Dataset, ratios: SplitRatios, seed: u64) -> Result<SplitBundle> {
    split_interactions(
        dataset.user_count,
        dataset.item_count,
        &dataset.interactions,
        ratios,
        seed,
    )
}

/// [`split_dataset`] on bare interactions, for callers that never load
/// modality features.
pub fn split_interactions(
    user_count: usize,
    item_count: usize,
    interactions: &[(u32, u32)],
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitBundle> {
    ratios.validate()?;
    let mut per_user: Vec<Vec<u32>> = vec![Vec::new(); user_count];
    for &(u, i) in interactions {
        if u as usize >= user_count || i as usize >= item_count {
            return Err(invalid!(
                "interaction ({u}, {i}) out of range for {user_count} users, {item_count} items"
            ));
        }
        per_user[u as usize].push(i);
    }
    let mut train_rows = Vec::with_capacity(user_count);
    let mut validation = Vec::new();
    let mut test = Vec::new();
    for (u, items) in per_user.iter_mut().enumerate() {
        // Canonical order first so the split ignores file order.
        items.sort_unstable();
        if items.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid!("duplicate interaction for user {u}"));
        }
        let mut r = rng::stream(seed, u as u64);
        items.shuffle(&mut r);
        let (n_train, n_val, _) = ratios.counts(items.len());
        let mut train: Vec<u32> = items[..n_train].to_vec();
        train.sort_unstable();
        train_rows.push(train);
        validation.extend(items[n_train..n_train + n_val].iter().map(|&i| (u as u32, i)));
        test.extend(items[n_train + n_val..].iter().map(|&i| (u as u32, i)));
    }
    validation.sort_unstable();
    test.sort_unstable();
    Ok(SplitBundle {
        train: InteractionMatrix::from_binary_rows(user_count, item_count, MatrixKind::Real, train_rows),
        validation,
        test,
        seed,
    })
}
