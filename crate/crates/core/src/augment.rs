//! Merging real and virtual interactions into the augmented matrix, and its
//! on-disk format.
//!
//! Overlay:     `R̄ = Confine(R + λ Σ_m w_m R_m)`
//! Synergistic: `R̄ = Confine(R + λ w_s R_s)`
//!
//! Arithmetic is f64; the file stores f32 weights.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::matrix::{InteractionMatrix, MatrixKind};

pub const AUGMENTED_MAGIC: &[u8; 8] = b"VIMMAUG1";
const HEADER_LEN: usize = 8 + 1 + 4 + 4 + 8;
const RECORD_LEN: usize = 12;

/// Confined weights below this are not stored.
pub const STORAGE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    Overlay,
    Synergistic,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overlay" => Ok(Strategy::Overlay),
            "synergistic" => Ok(Strategy::Synergistic),
            _ => Err(invalid!("unknown strategy {s:?}, expected overlay or synergistic")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Overlay => "overlay",
            Strategy::Synergistic => "synergistic",
        })
    }
}

/// Component ablations: `NoRefine` sets every weight to 1, `NoConfine` skips
/// the clamp so weights may exceed 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ablation {
    #[default]
    None,
    NoRefine,
    NoConfine,
}

impl Ablation {
    pub fn refine(self) -> bool {
        self != Ablation::NoRefine
    }

    pub fn confine(self) -> bool {
        self != Ablation::NoConfine
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Ablation::None),
            "no-refine" => Ok(Ablation::NoRefine),
            "no-confine" => Ok(Ablation::NoConfine),
            _ => Err(invalid!(
                "unknown ablation {s:?}, expected none, no-refine or no-confine"
            )),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::None => "none",
            Ablation::NoRefine => "no-refine",
            Ablation::NoConfine => "no-confine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub strategy: Strategy,
    pub lambda: f64,
    pub k: usize,
    pub ablation: Ablation,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            strategy: Strategy::Overlay,
            lambda: 1e-2,
            k: 10,
            ablation: Ablation::None,
        }
    }
}

pub fn confine(weight: f64) -> f64 {
    weight.clamp(0.0, 1.0)
}

/// `Confine(R + λ Σ w_m R_m)` entrywise. `virtuals` pairs each virtual matrix
/// with its weight; contributions are summed in the given order.
pub fn overlay_augment(
    real: &InteractionMatrix,
    virtuals: &[(&InteractionMatrix, f64)],
    lambda: f64,
    apply_confine: bool,
) -> Result<InteractionMatrix> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid!("lambda {lambda} must be finite and non-negative"));
    }
    for (m, w) in virtuals {
        m.ensure_shape(real.user_count(), real.item_count(), "virtual matrix")?;
        if !(*w >= 0.0 && w.is_finite()) {
            return Err(invalid!("virtual weight {w} must be finite and non-negative"));
        }
    }
    let rows: Vec<Vec<(u32, f64)>> = (0..real.user_count())
        .into_par_iter()
        .map(|u| {
            // (item, source order, contribution); source 0 is R.
            let mut parts: Vec<(u32, usize, f64)> = real
                .row_items(u)
                .iter()
                .zip(real.row_weights(u))
                .map(|(&i, &w)| (i, 0, w))
                .collect();
            for (src, (m, w)) in virtuals.iter().enumerate() {
                let scaled = lambda * w;
                parts.extend(
                    m.row_items(u)
                        .iter()
                        .zip(m.row_weights(u))
                        .map(|(&i, &v)| (i, src + 1, scaled * v)),
                );
            }
            parts.sort_unstable_by_key(|&(i, src, _)| (i, src));
            let mut row: Vec<(u32, f64)> = Vec::with_capacity(parts.len());
            for (i, _, x) in parts {
                match row.last_mut() {
                    Some((j, acc)) if *j == i => *acc += x,
                    _ => row.push((i, x)),
                }
            }
            row.retain_mut(|(_, w)| {
                if apply_confine {
                    *w = confine(*w);
                }
                *w >= STORAGE_EPSILON
            });
            row
        })
        .collect();
    InteractionMatrix::from_sorted_entries(
        real.user_count(),
        real.item_count(),
        MatrixKind::Augmented,
        rows.into_iter()
            .enumerate()
            .flat_map(|(u, row)| row.into_iter().map(move |(i, w)| (u as u32, i, w))),
    )
}

/// `Confine(R + λ w_s R_s)`.
pub fn synergistic_augment(
    real: &InteractionMatrix,
    virtual_synergistic: &InteractionMatrix,
    weight: f64,
    lambda: f64,
    apply_confine: bool,
) -> Result<InteractionMatrix> {
    overlay_augment(real, &[(virtual_synergistic, weight)], lambda, apply_confine)
}

/// Writes the canonical `VIMMAUG1` encoding: records sorted by `(user, item)`,
/// weights rounded to f32.
pub fn encode_augmented(matrix: &InteractionMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + matrix.nnz() * RECORD_LEN);
    out.extend_from_slice(AUGMENTED_MAGIC);
    out.push(matrix.kind().tag());
    out.extend_from_slice(&(matrix.user_count() as u32).to_le_bytes());
    out.extend_from_slice(&(matrix.item_count() as u32).to_le_bytes());
    out.extend_from_slice(&(matrix.nnz() as u64).to_le_bytes());
    for (u, i, w) in matrix.iter() {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&i.to_le_bytes());
        out.extend_from_slice(&(w as f32).to_le_bytes());
    }
    out
}

pub fn save_augmented(matrix: &InteractionMatrix, path: &Path) -> Result<()> {
    fs::write(path, encode_augmented(matrix)).map_err(|e| Error::io(path, e))
}

pub fn load_augmented(path: &Path) -> Result<InteractionMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_augmented(&bytes, path)
}

pub fn decode_augmented(bytes: &[u8], path: &Path) -> Result<InteractionMatrix> {
    let corrupt = |offset: usize, msg: String| Error::format_offset(path, offset as u64, msg);
    if bytes.len() < HEADER_LEN {
        return Err(corrupt(bytes.len(), "truncated header".into()));
    }
    if &bytes[..8] != AUGMENTED_MAGIC {
        return Err(corrupt(0, "bad magic, expected VIMMAUG1".into()));
    }
    let kind = MatrixKind::from_tag(bytes[8]).ok_or_else(|| corrupt(8, format!("unknown kind tag {}", bytes[8])))?;
    let user_count = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let item_count = u32::from_le_bytes(bytes[13..17].try_into().unwrap()) as usize;
    let nnz = u64::from_le_bytes(bytes[17..25].try_into().unwrap());
    let expected = (nnz as u128) * RECORD_LEN as u128 + HEADER_LEN as u128;
    if bytes.len() as u128 != expected {
        return Err(corrupt(
            bytes.len().min(expected as usize),
            format!(
                "file is {} bytes, header declares {nnz} records ({expected} bytes)",
                bytes.len()
            ),
        ));
    }
    let mut entries = Vec::with_capacity(nnz as usize);
    let mut prev: Option<(u32, u32)> = None;
    for (n, rec) in bytes[HEADER_LEN..].chunks_exact(RECORD_LEN).enumerate() {
        let offset = HEADER_LEN + n * RECORD_LEN;
        let u = u32::from_le_bytes(rec[0..4].try_into().unwrap());
        let i = u32::from_le_bytes(rec[4..8].try_into().unwrap());
        let w = f32::from_le_bytes(rec[8..12].try_into().unwrap()) as f64;
        if u as usize >= user_count || i as usize >= item_count {
            return Err(corrupt(offset, format!("record ({u}, {i}) out of range")));
        }
        if prev.is_some_and(|p| (u, i) <= p) {
            return Err(corrupt(offset, format!("unsorted record ({u}, {i})")));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(corrupt(offset, format!("record ({u}, {i}) has weight {w}")));
        }
        prev = Some((u, i));
        entries.push((u, i, w));
    }
    InteractionMatrix::from_sorted_entries(user_count, item_count, kind, entries)
        .map_err(|e| corrupt(HEADER_LEN, e.to_string()))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn real() -> InteractionMatrix {
        InteractionMatrix::from_pairs(2, 4, MatrixKind::Real, [(0, 0), (1, 1)]).unwrap()
    }

    fn virt(pairs: &[(u32, u32)]) -> InteractionMatrix {
        InteractionMatrix::from_pairs(2, 4, MatrixKind::VirtualModality, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn confine_examples() {
        assert_eq!(confine(1.3), 1.0);
        assert_eq!(confine(0.5), 0.5);
        assert_eq!(confine(-0.2), 0.0);
    }

    proptest! {
        #[test]
        fn confine_idempotent(x in -1e6f64..1e6) {
            prop_assert_eq!(confine(confine(x)), confine(x));
        }
    }

    #[test]
    fn zero_lambda_is_identity() {
        let v = virt(&[(0, 1), (1, 2)]);
        let out = overlay_augment(&real(), &[(&v, 3.0)], 0.0, true).unwrap();
        assert_eq!(out.pairs().collect::<Vec<_>>(), real().pairs().collect::<Vec<_>>());
        assert!(out.iter().all(|(_, _, w)| w == 1.0));
        assert_eq!(out.kind(), MatrixKind::Augmented);
    }

    #[test]
    fn real_edges_clamp_to_one_and_overlaps_accumulate() {
        let v = virt(&[(0, 0), (0, 2)]);
        let t = virt(&[(0, 0), (0, 2)]);
        let out = overlay_augment(&real(), &[(&v, 2.0), (&t, 3.0)], 0.01, true).unwrap();
        assert_eq!(out.get(0, 0), 1.0);
        assert!((out.get(0, 2) - 0.05).abs() < 1e-15);

        let loose = overlay_augment(&real(), &[(&v, 2.0), (&t, 3.0)], 0.01, false).unwrap();
        assert!((loose.get(0, 0) - 1.05).abs() < 1e-12);
    }

    #[test]
    fn synergistic_is_single_matrix_overlay() {
        let s = virt(&[(0, 3), (1, 1)]);
        let a = synergistic_augment(&real(), &s, 4.0, 0.1, true).unwrap();
        let b = overlay_augment(&real(), &[(&s, 4.0)], 0.1, true).unwrap();
        assert_eq!(a, b);
        assert!((a.get(0, 3) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let v = virt(&[(0, 1)]);
        assert!(overlay_augment(&real(), &[(&v, -1.0)], 0.1, true).is_err());
        assert!(overlay_augment(&real(), &[(&v, 1.0)], -0.1, true).is_err());
        let wrong = InteractionMatrix::from_pairs(3, 4, MatrixKind::VirtualModality, [(0, 1)]).unwrap();
        assert!(matches!(
            overlay_augment(&real(), &[(&wrong, 1.0)], 0.1, true),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn tiny_weights_are_dropped() {
        let v = virt(&[(0, 3)]);
        let out = overlay_augment(&real(), &[(&v, 1e-6)], 1e-4, true).unwrap();
        assert!(!out.contains(0, 3));
    }

    #[test]
    fn file_round_trip_and_canonical_bytes() {
        let v = virt(&[(0, 2), (1, 3)]);
        let m = overlay_augment(&real(), &[(&v, 1.7)], 0.013, true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("aug.bin");
        save_augmented(&m, &p).unwrap();
        let first = fs::read(&p).unwrap();
        save_augmented(&m, &p).unwrap();
        assert_eq!(first, fs::read(&p).unwrap());
        assert_eq!(first.len(), HEADER_LEN + 4 * RECORD_LEN);
        let back = load_augmented(&p).unwrap();
        assert_eq!(back, m.rounded_to_f32());
        assert_eq!(encode_augmented(&back), first);
    }

    #[test]
    fn corrupt_files() {
        let m = overlay_augment(&real(), &[], 0.0, true).unwrap();
        let bytes = encode_augmented(&m);
        let p = Path::new("mem");
        assert!(decode_augmented(&bytes[..bytes.len() - 1], p).is_err());
        assert!(decode_augmented(&bytes[..10], p).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(decode_augmented(&bad_magic, p).is_err());
        // Swap the two records so they are out of order.
        let mut unsorted = bytes.clone();
        let (a, b) = (HEADER_LEN, HEADER_LEN + RECORD_LEN);
        let first: Vec<u8> = unsorted[a..b].to_vec();
        unsorted.copy_within(b..b + RECORD_LEN, a);
        unsorted[b..b + RECORD_LEN].copy_from_slice(&first);
        let err = decode_augmented(&unsorted, p).unwrap_err();
        assert!(err.to_string().contains("unsorted"), "{err}");
    }
}
