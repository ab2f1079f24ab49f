//! Sparse user × item interaction matrix with per-entry weights.

use std::fmt;

use crate::error::{invalid, Error, Result};

/// What a matrix represents. Serialized as a one-byte tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixKind {
    Real,
    VirtualModality,
    VirtualSynergistic,
    Augmented,
}

impl MatrixKind {
    pub fn tag(self) -> u8 {
        match self {
            MatrixKind::Real => 0,
            MatrixKind::VirtualModality => 1,
            MatrixKind::VirtualSynergistic => 2,
            MatrixKind::Augmented => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => MatrixKind::Real,
            1 => MatrixKind::VirtualModality,
            2 => MatrixKind::VirtualSynergistic,
            3 => MatrixKind::Augmented,
            _ => return None,
        })
    }

    /// Real and virtual matrices are binary: every stored weight is exactly 1.
    pub fn is_binary(self) -> bool {
        !matches!(self, MatrixKind::Augmented)
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatrixKind::Real => "real",
            MatrixKind::VirtualModality => "virtual-modality",
            MatrixKind::VirtualSynergistic => "virtual-synergistic",
            MatrixKind::Augmented => "augmented",
        })
    }
}

/// Row-compressed sparse matrix. Rows are users, columns items; each row's
/// items are strictly increasing. Zero weights are never stored.
///
/// Augmented matrices normally hold weights in `(0, 1]`; the no-confine
/// ablation lets weights exceed 1, so only positivity is enforced here.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    user_count: usize,
    item_count: usize,
    kind: MatrixKind,
    indptr: Vec<usize>,
    items: Vec<u32>,
    weights: Vec<f64>,
}

impl InteractionMatrix {
    pub fn empty(user_count: usize, item_count: usize, kind: MatrixKind) -> Self {
        InteractionMatrix {
            user_count,
            item_count,
            kind,
            indptr: vec![0; user_count + 1],
            items: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Binary matrix from `(user, item)` pairs. Duplicates collapse.
    pub fn from_pairs(
        user_count: usize,
        item_count: usize,
        kind: MatrixKind,
        pairs: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); user_count];
        for (u, i) in pairs {
            check_index(u, i, user_count, item_count)?;
            rows[u as usize].push(i);
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        Ok(Self::from_binary_rows(user_count, item_count, kind, rows))
    }

    /// Binary matrix from per-user item lists that are already sorted and
    /// deduplicated.
    pub(crate) fn from_binary_rows(
        user_count: usize,
        item_count: usize,
        kind: MatrixKind,
        rows: Vec<Vec<u32>>,
    ) -> Self {
        debug_assert_eq!(rows.len(), user_count);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indptr = Vec::with_capacity(user_count + 1);
        let mut items = Vec::with_capacity(nnz);
        indptr.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0] < w[1]));
            items.extend(row);
            indptr.push(items.len());
        }
        InteractionMatrix {
            user_count,
            item_count,
            kind,
            indptr,
            weights: vec![1.0; items.len()],
            items,
        }
    }

    /// Weighted matrix from `(user, item, weight)` entries sorted by
    /// `(user, item)` with no duplicates. Entries with weight 0 are skipped.
    pub fn from_sorted_entries(
        user_count: usize,
        item_count: usize,
        kind: MatrixKind,
        entries: impl IntoIterator<Item = (u32, u32, f64)>,
    ) -> Result<Self> {
        let mut indptr = vec![0usize; user_count + 1];
        let mut items = Vec::new();
        let mut weights = Vec::new();
        let mut prev: Option<(u32, u32)> = None;
        for (u, i, w) in entries {
            check_index(u, i, user_count, item_count)?;
            if let Some(p) = prev {
                if (u, i) <= p {
                    return Err(Error::Invariant(format!(
                        "entries not strictly sorted: ({}, {}) after ({}, {})",
                        u, i, p.0, p.1
                    )));
                }
            }
            prev = Some((u, i));
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Invariant(format!(
                    "weight {w} at ({u}, {i}) is not a finite non-negative number"
                )));
            }
            if w == 0.0 {
                continue;
            }
            if kind.is_binary() && w != 1.0 {
                return Err(Error::Invariant(format!(
                    "{kind} matrix entry ({u}, {i}) has weight {w}, expected 1"
                )));
            }
            indptr[u as usize + 1] += 1;
            items.push(i);
            weights.push(w);
        }
        for u in 0..user_count {
            indptr[u + 1] += indptr[u];
        }
        Ok(InteractionMatrix {
            user_count,
            item_count,
            kind,
            indptr,
            items,
            weights,
        })
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.user_count, self.item_count)
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: MatrixKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn nnz(&self) -> usize {
        self.items.len()
    }

    pub fn density(&self) -> f64 {
        if self.user_count == 0 || self.item_count == 0 {
            return 0.0;
        }
        self.nnz() as f64 / (self.user_count as f64 * self.item_count as f64)
    }

    pub fn row_items(&self, user: usize) -> &[u32] {
        &self.items[self.indptr[user]..self.indptr[user + 1]]
    }

    pub fn row_weights(&self, user: usize) -> &[f64] {
        &self.weights[self.indptr[user]..self.indptr[user + 1]]
    }

    pub fn row_len(&self, user: usize) -> usize {
        self.indptr[user + 1] - self.indptr[user]
    }

    pub fn get(&self, user: usize, item: u32) -> f64 {
        let row = self.row_items(user);
        match row.binary_search(&item) {
            Ok(pos) => self.row_weights(user)[pos],
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, user: usize, item: u32) -> bool {
        self.row_items(user).binary_search(&item).is_ok()
    }

    /// All stored entries in `(user, item)` order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.user_count).flat_map(move |u| {
            self.row_items(u)
                .iter()
                .zip(self.row_weights(u))
                .map(move |(&i, &w)| (u as u32, i, w))
        })
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.iter().map(|(u, i, _)| (u, i))
    }

    /// Number of positions stored in both matrices.
    pub fn intersection_count(&self, other: &InteractionMatrix) -> usize {
        (0..self.user_count.min(other.user_count))
            .map(|u| sorted_intersection_len(self.row_items(u), other.row_items(u)))
            .sum()
    }

    /// Sum of edge weights per user.
    pub fn user_weight_sums(&self) -> Vec<f64> {
        (0..self.user_count).map(|u| self.row_weights(u).iter().sum()).collect()
    }

    /// Sum of edge weights per item, accumulated in user order.
    pub fn item_weight_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.item_count];
        for (_, i, w) in self.iter() {
            sums[i as usize] += w;
        }
        sums
    }

    /// Number of stored entries per item.
    pub fn item_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.item_count];
        for &i in &self.items {
            counts[i as usize] += 1;
        }
        counts
    }

    /// Weights rounded through `f32`, as they are after a save/load cycle.
    pub fn rounded_to_f32(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.weights {
            *w = *w as f32 as f64;
        }
        out
    }

    pub fn ensure_shape(&self, user_count: usize, item_count: usize, what: &str) -> Result<()> {
        if self.shape() != (user_count, item_count) {
            return Err(Error::ShapeMismatch(format!(
                "{what} is {}×{}, expected {user_count}×{item_count}",
                self.user_count, self.item_count
            )));
        }
        Ok(())
    }
}

fn check_index(u: u32, i: u32, user_count: usize, item_count: usize) -> Result<()> {
    if u as usize >= user_count || i as usize >= item_count {
        return Err(invalid!(
            "entry ({u}, {i}) out of range for {user_count}×{item_count} matrix"
        ));
    }
    Ok(())
}

pub(crate) fn sorted_intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut x, mut y, mut n) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                x += 1;
                y += 1;
            }
        }
    }
    n
}
