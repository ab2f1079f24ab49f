//! Representation noise and information-error perturbations.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, ModalityEmbeddings};
use crate::error::{invalid, Result};
use crate::rng;

/// Gaussian noise variance for levels 0 (none) through 3.
pub fn noise_level_variance(level: u8) -> Result<f64> {
    match level {
        0 => Ok(0.0),
        1 => Ok(1e-6),
        2 => Ok(1e-5),
        3 => Ok(1e-4),
        _ => Err(invalid!("noise level {level} not in 0..=3")),
    }
}

/// Item-exchange probability for levels 0 (none) through 3.
pub fn error_level_probability(level: u8) -> Result<f64> {
    match level {
        0 => Ok(0.0),
        1 => Ok(0.01),
        2 => Ok(0.03),
        3 => Ok(0.05),
        _ => Err(invalid!("error level {level} not in 0..=3")),
    }
}

/// Copy of `embeddings` with i.i.d. `N(0, variance)` noise on every entry.
pub fn inject_representation_noise(
    embeddings: &ModalityEmbeddings,
    variance: f64,
    seed: u64,
) -> Result<ModalityEmbeddings> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(invalid!("noise variance {variance} must be finite and non-negative"));
    }
    let mut out = embeddings.clone();
    if variance == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite positive std dev");
    let mut r = rng::stream(seed, 0);
    for v in out.data_mut() {
        *v = (*v as f64 + normal.sample(&mut r)) as f32;
    }
    Ok(out)
}

/// Marks each item with probability `exchange_probability`, pairs the marked
/// items by a random matching (one left over when the count is odd), and swaps
/// all modality rows within each pair.
pub fn inject_information_error(dataset: &Dataset, exchange_probability: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&exchange_probability) {
        return Err(invalid!("exchange probability {exchange_probability} not in [0,1]"));
    }
    let mut out = dataset.clone();
    if exchange_probability == 0.0 {
        return Ok(out);
    }
    let mut r = rng::stream(seed, 0);
    let mut marked: Vec<usize> = (0..dataset.item_count)
        .filter(|_| r.random_bool(exchange_probability))
        .collect();
    marked.shuffle(&mut r);
    for pair in marked.chunks_exact(2) {
        for emb in out.modalities.values_mut() {
            emb.swap_rows(pair[0], pair[1]);
        }
    }
    Ok(out)
}

/// Applies noise (per-modality seeds) then information error at the given levels.
pub fn perturb_dataset(dataset: &Dataset, noise_level: u8, error_level: u8, seed: u64) -> Result<Dataset> {
    let variance = noise_level_variance(noise_level)?;
    let probability = error_level_probability(error_level)?;
    let mut out = dataset.clone();
    if variance > 0.0 {
        for (index, emb) in out.modalities.values_mut().enumerate() {
            *emb = inject_representation_noise(emb, variance, rng::derive(seed, 0x4E01 + index as u64))?;
        }
    }
    inject_information_error(&out, probability, rng::derive(seed, 0xE770))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn table(rows: usize, dim: usize) -> ModalityEmbeddings {
        let data = (0..rows * dim).map(|v| v as f32 / (rows * dim) as f32).collect();
        ModalityEmbeddings::new("v", dim, data).unwrap()
    }

    fn two_modality(items: usize) -> Dataset {
        let a = ModalityEmbeddings::new("a", 2, (0..items * 2).map(|v| v as f32).collect()).unwrap();
        let b = ModalityEmbeddings::new("b", 1, (0..items).map(|v| -(v as f32)).collect()).unwrap();
        Dataset::new(
            1,
            items,
            vec![(0, 0)],
            BTreeMap::from([("a".into(), a), ("b".into(), b)]),
        )
        .unwrap()
    }

    #[test]
    fn zero_variance_is_identity() {
        let t = table(10, 4);
        assert_eq!(inject_representation_noise(&t, 0.0, 5).unwrap(), t);
        assert!(inject_representation_noise(&t, -1.0, 5).is_err());
    }

    #[test]
    fn small_variance_bounded_and_original_untouched() {
        let t = table(1000, 100);
        let before = t.clone();
        let noisy = inject_representation_noise(&t, 1e-6, 11).unwrap();
        assert_eq!(t, before);
        let max = t
            .as_slice()
            .iter()
            .zip(noisy.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max < 0.01, "{max}");
        assert!(max > 0.0);
    }

    #[test]
    fn levels() {
        assert_eq!(noise_level_variance(1).unwrap(), 1e-6);
        assert_eq!(noise_level_variance(2).unwrap(), 1e-5);
        assert_eq!(noise_level_variance(3).unwrap(), 1e-4);
        assert_eq!(error_level_probability(1).unwrap(), 0.01);
        assert_eq!(error_level_probability(2).unwrap(), 0.03);
        assert_eq!(error_level_probability(3).unwrap(), 0.05);
        assert!(noise_level_variance(4).is_err());
    }

    #[test]
    fn forced_swap_of_two_items() {
        let ds = two_modality(2);
        let out = inject_information_error(&ds, 1.0, 0).unwrap();
        for name in ["a", "b"] {
            assert_eq!(out.modalities[name].row(0), ds.modalities[name].row(1));
            assert_eq!(out.modalities[name].row(1), ds.modalities[name].row(0));
        }
        assert_eq!(inject_information_error(&ds, 0.0, 0).unwrap(), ds);
    }

    #[test]
    fn error_preserves_row_multiset() {
        let ds = two_modality(101);
        let out = inject_information_error(&ds, 0.3, 77).unwrap();
        assert_ne!(out, ds);
        for name in ["a", "b"] {
            let rows = |d: &Dataset| {
                let mut v: Vec<Vec<u32>> = (0..101)
                    .map(|i| d.modalities[name].row(i).iter().map(|f| f.to_bits()).collect())
                    .collect();
                v.sort();
                v
            };
            assert_eq!(rows(&ds), rows(&out));
        }
        // Rows move together across modalities.
        for i in 0..101 {
            let a0 = out.modalities["a"].row(i)[0];
            assert_eq!(out.modalities["b"].row(i)[0], -(a0 / 2.0));
        }
    }
}
