//! Brute-force top-k: materialize each item's full similarity row, sort it,
//! keep the head. Quadratic in memory per row and `O(|I|² d)` overall; used
//! as the oracle for the blocked path.

use std::cmp::Ordering;

use super::{check_item_counts, cosine_similarity, NeighborTable, TableSource};
use crate::corpus::ModalityEmbeddings;
use crate::error::{invalid, Result};

fn select(item_count: usize, k: usize, score: impl Fn(usize, usize) -> f64) -> Vec<Vec<(f64, u32)>> {
    let width = k.min(item_count.saturating_sub(1));
    (0..item_count)
        .map(|i| {
            let mut row: Vec<(f64, u32)> = (0..item_count)
                .filter(|&j| j != i)
                .map(|j| (score(i, j), j as u32))
                .collect();
            row.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
            row.truncate(width);
            row
        })
        .collect()
}

pub fn topk_modality(embeddings: &ModalityEmbeddings, k: usize) -> Result<NeighborTable> {
    if k == 0 {
        return Err(invalid!("k must be at least 1"));
    }
    let n = embeddings.item_count();
    let rows = select(n, k, |i, j| {
        cosine_similarity(embeddings.row(i), embeddings.row(j)).expect("rows share a dimension")
    });
    Ok(NeighborTable::from_rows(
        TableSource::Modality(embeddings.modality.clone()),
        k,
        n,
        rows,
    ))
}

pub fn topk_synergistic(modalities: &[&ModalityEmbeddings], k: usize) -> Result<NeighborTable> {
    if k == 0 {
        return Err(invalid!("k must be at least 1"));
    }
    let n = check_item_counts(modalities)?;
    let rows = select(n, k, |i, j| {
        let mut s = 0.0f64;
        for m in modalities {
            s += cosine_similarity(m.row(i), m.row(j)).expect("rows share a dimension");
        }
        s
    });
    Ok(NeighborTable::from_rows(TableSource::Synergistic, k, n, rows))
}
