//! Virtual user-item interactions: every item among the top-k neighbors of
//! something a user really interacted with becomes a virtual interaction.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{InteractionMatrix, MatrixKind};
use crate::simgraph::{NeighborTable, TableSource};

/// Binary virtual matrix: `(u, j)` is set iff some real `(u, i)` has `j` among
/// `i`'s neighbors. Entries that coincide with real interactions are kept.
pub fn build_virtual(train: &InteractionMatrix, table: &NeighborTable) -> Result<InteractionMatrix> {
    if table.item_count() != train.item_count() {
        return Err(Error::ShapeMismatch(format!(
            "neighbor table covers {} items, interaction matrix has {}",
            table.item_count(),
            train.item_count()
        )));
    }
    let kind = match table.source() {
        TableSource::Modality(_) => MatrixKind::VirtualModality,
        TableSource::Synergistic => MatrixKind::VirtualSynergistic,
    };
    let rows: Vec<Vec<u32>> = (0..train.user_count())
        .into_par_iter()
        .map(|u| {
            let mut row: Vec<u32> = train
                .row_items(u)
                .iter()
                .flat_map(|&i| table.neighbors(i as usize).iter().copied())
                .collect();
            row.sort_unstable();
            row.dedup();
            row
        })
        .collect();
    Ok(InteractionMatrix::from_binary_rows(
        train.user_count(),
        train.item_count(),
        kind,
        rows,
    ))
}

/// Checks `1 <= |virtual| <= k·|train|` (the lower bound only when the train
/// matrix is non-empty and neighbor lists are non-empty).
pub fn virtual_size_bounds_check(
    train: &InteractionMatrix,
    virtual_matrix: &InteractionMatrix,
    k: usize,
) -> Result<bool> {
    let real = train.nnz();
    let size = virtual_matrix.nnz();
    let upper = k.saturating_mul(real);
    let needs_entry = real > 0 && k > 0 && train.item_count() > 1;
    if size > upper || (needs_entry && size == 0) {
        return Err(Error::Invariant(format!(
            "virtual matrix has {size} entries; expected between 1 and k·|R+| = {k}·{real} = {upper}"
        )));
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ModalityEmbeddings;
    use crate::simgraph::topk_modality;

    fn table_from(dim: usize, data: Vec<f32>, k: usize) -> NeighborTable {
        topk_modality(&ModalityEmbeddings::new("v", dim, data).unwrap(), k).unwrap()
    }

    #[test]
    fn single_seed_expansion() {
        // item 0 is closest to 1 and 2, far from 3.
        let t = table_from(2, vec![1.0, 0.0, 0.9, 0.1, 0.9, -0.1, -1.0, 0.0], 2);
        assert_eq!(t.neighbors(0), &[1, 2]);
        let train = InteractionMatrix::from_pairs(1, 4, MatrixKind::Real, [(0, 0)]).unwrap();
        let v = build_virtual(&train, &t).unwrap();
        assert_eq!(v.pairs().collect::<Vec<_>>(), vec![(0, 1), (0, 2)]);
        assert_eq!(v.kind(), MatrixKind::VirtualModality);
        assert!(virtual_size_bounds_check(&train, &v, 2).unwrap());
    }

    #[test]
    fn shared_neighbor_collapses() {
        let t = table_from(1, vec![1.0, 1.0, 1.0], 1);
        // neighbors: 0 -> 1, 1 -> 0, 2 -> 0
        let train = InteractionMatrix::from_pairs(1, 3, MatrixKind::Real, [(0, 1), (0, 2)]).unwrap();
        let v = build_virtual(&train, &t).unwrap();
        assert_eq!(v.pairs().collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn no_overlap_extreme() {
        // Pairs of identical items: each item's single neighbor is its twin.
        let data = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let t = table_from(2, data, 1);
        let train = InteractionMatrix::from_pairs(2, 4, MatrixKind::Real, [(0, 0), (1, 2)]).unwrap();
        let v = build_virtual(&train, &t).unwrap();
        assert_eq!(v.nnz(), train.nnz());
    }

    #[test]
    fn bounds_violation_reports_counts() {
        let train = InteractionMatrix::from_pairs(1, 5, MatrixKind::Real, [(0, 0)]).unwrap();
        let big = InteractionMatrix::from_pairs(1, 5, MatrixKind::VirtualModality, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let err = virtual_size_bounds_check(&train, &big, 2).unwrap_err();
        assert!(err.to_string().contains("3 entries"), "{err}");
    }

    #[test]
    fn item_count_mismatch() {
        let t = table_from(1, vec![1.0, 1.0, 1.0], 1);
        let train = InteractionMatrix::from_pairs(1, 4, MatrixKind::Real, [(0, 1)]).unwrap();
        assert!(matches!(build_virtual(&train, &t), Err(Error::ShapeMismatch(_))));
    }
}
