use rand::seq::SliceRandom;

use crate::corpus::SplitBundle;
use crate::error::{invalid, Result};
use crate::matrix::InteractionMatrix;
use crate::rng;

/// Item cold-start protocol: a random item subset loses every training
/// interaction while its features stay available.
#[derive(Debug, Clone, PartialEq)]
pub struct ColdStartSplit {
    /// Training matrix without held-out items; validation without them too.
    pub split: SplitBundle,
    /// Sorted held-out items.
    pub held_out: Vec<u32>,
    /// Every interaction with a held-out item, sorted by `(user, item)`.
    /// With no held-out items this is the ordinary test set.
    pub targets: Vec<(u32, u32)>,
}

impl ColdStartSplit {
    pub fn is_held_out(&self, item: u32) -> bool {
        self.held_out.binary_search(&item).is_ok()
    }
}

/// Holds out `round(fraction · |I|)` items chosen with `seed`.
pub fn cold_start_split(split: &SplitBundle, fraction: f64, seed: u64) -> Result<ColdStartSplit> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(invalid!("holdout fraction {fraction} must be in [0, 1)"));
    }
    let item_count = split.item_count();
    let count = (fraction * item_count as f64).round() as usize;
    if count == 0 {
        return Ok(ColdStartSplit {
            split: split.clone(),
            held_out: Vec::new(),
            targets: split.test.clone(),
        });
    }
    let mut items: Vec<u32> = (0..item_count as u32).collect();
    items.shuffle(&mut rng::stream(seed, 0));
    let mut held_out = items[..count].to_vec();
    held_out.sort_unstable();
    let cold = |i: u32| held_out.binary_search(&i).is_ok();

    let mut targets: Vec<(u32, u32)> = split
        .train
        .pairs()
        .chain(split.validation.iter().copied())
        .chain(split.test.iter().copied())
        .filter(|&(_, i)| cold(i))
        .collect();
    targets.sort_unstable();
    let train = InteractionMatrix::from_pairs(
        split.user_count(),
        item_count,
        split.train.kind(),
        split.train.pairs().filter(|&(_, i)| !cold(i)),
    )?;
    let validation = split.validation.iter().copied().filter(|&(_, i)| !cold(i)).collect();
    let test = split.test.iter().copied().filter(|&(_, i)| !cold(i)).collect();
    Ok(ColdStartSplit {
        split: SplitBundle {
            train,
            validation,
            test,
            seed: split.seed,
        },
        held_out,
        targets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::MatrixKind;

    fn bundle() -> SplitBundle {
        let train = InteractionMatrix::from_pairs(2, 10, MatrixKind::Real, (0..10).map(|i| (i % 2, i))).unwrap();
        SplitBundle {
            train,
            validation: vec![(0, 1)],
            test: vec![(0, 3), (1, 4)],
            seed: 0,
        }
    }

    #[test]
    fn zero_holdout_is_plain_split() {
        let c = cold_start_split(&bundle(), 0.0, 1).unwrap();
        assert!(c.held_out.is_empty());
        assert_eq!(c.targets, bundle().test);
        assert_eq!(c.split, bundle());
    }

    #[test]
    fn held_out_items_lose_training_edges() {
        let c = cold_start_split(&bundle(), 0.3, 4).unwrap();
        assert_eq!(c.held_out.len(), 3);
        for &i in &c.held_out {
            assert!(c.split.train.pairs().all(|(_, j)| j != i));
            assert!(c.targets.iter().any(|&(_, j)| j == i));
        }
        assert!(c.targets.iter().all(|&(_, i)| c.is_held_out(i)));
        assert_eq!(
            c.split.train.nnz() + c.targets.len(),
            10 + 3 - c.split.validation.len() - c.split.test.len()
        );
    }

    #[test]
    fn rejects_bad_fraction() {
        assert!(cold_start_split(&bundle(), 1.0, 0).is_err());
        assert!(cold_start_split(&bundle(), -0.1, 0).is_err());
    }
}
