//! Item-item cosine similarity and exact top-k neighbor tables.
//!
//! Two paths produce the same tables: [`topk_modality`] / [`topk_synergistic`]
//! scan row blocks in parallel against column tiles and keep a k-slot selection
//! buffer per item, never materializing the `|I|×|I|` matrix; the
//! [`reference`] module builds full similarity rows and sorts them. Both
//! evaluate every pair score with the same floating-point expression, so their
//! tables agree bit for bit.

mod dump;
pub mod reference;

use std::fmt;

use rayon::prelude::*;

pub use dump::{read_table_dump, write_table_dump};

use crate::corpus::ModalityEmbeddings;
use crate::error::{invalid, Error, Result};

/// Which similarity a table was ranked by.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TableSource {
    Modality(String),
    /// Sum of per-modality cosines.
    Synergistic,
}

impl fmt::Display for TableSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableSource::Modality(m) => write!(f, "modality:{m}"),
            TableSource::Synergistic => f.write_str("synergistic"),
        }
    }
}

/// Per-item neighbor lists of equal width `min(k, |I|-1)`, sorted by score
/// descending then neighbor index ascending. An item never lists itself.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    source: TableSource,
    k: usize,
    width: usize,
    item_count: usize,
    neighbors: Vec<u32>,
    scores: Vec<f64>,
}

impl NeighborTable {
    pub(crate) fn from_rows(source: TableSource, k: usize, item_count: usize, rows: Vec<Vec<(f64, u32)>>) -> Self {
        let width = k.min(item_count.saturating_sub(1));
        let mut neighbors = Vec::with_capacity(item_count * width);
        let mut scores = Vec::with_capacity(item_count * width);
        for row in rows {
            debug_assert_eq!(row.len(), width);
            for (s, j) in row {
                neighbors.push(j);
                scores.push(s);
            }
        }
        NeighborTable {
            source,
            k,
            width,
            item_count,
            neighbors,
            scores,
        }
    }

    pub fn source(&self) -> &TableSource {
        &self.source
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Entries per item, `min(k, |I|-1)`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn neighbors(&self, item: usize) -> &[u32] {
        &self.neighbors[item * self.width..(item + 1) * self.width]
    }

    pub fn scores(&self, item: usize) -> &[f64] {
        &self.scores[item * self.width..(item + 1) * self.width]
    }

    pub fn entries(&self, item: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.neighbors(item)
            .iter()
            .copied()
            .zip(self.scores(item).iter().copied())
    }

    /// The table for a smaller `k`: exact top-k lists with a fixed tie-break
    /// are prefixes of each other.
    pub fn truncated(&self, k: usize) -> Result<NeighborTable> {
        if k == 0 || k > self.k {
            return Err(invalid!("cannot truncate a k={} table to k={k}", self.k));
        }
        let width = k.min(self.item_count.saturating_sub(1));
        let mut neighbors = Vec::with_capacity(self.item_count * width);
        let mut scores = Vec::with_capacity(self.item_count * width);
        for i in 0..self.item_count {
            neighbors.extend_from_slice(&self.neighbors(i)[..width]);
            scores.extend_from_slice(&self.scores(i)[..width]);
        }
        Ok(NeighborTable {
            source: self.source.clone(),
            k,
            width,
            item_count: self.item_count,
            neighbors,
            scores,
        })
    }

    /// Checks ordering, self-exclusion and score range.
    pub fn validate(&self, modality_count: usize) -> Result<()> {
        let bound = match self.source {
            TableSource::Modality(_) => 1.0,
            TableSource::Synergistic => modality_count as f64,
        } + 1e-9;
        for i in 0..self.item_count {
            let row: Vec<(u32, f64)> = self.entries(i).collect();
            for (pos, &(j, s)) in row.iter().enumerate() {
                if j as usize == i || j as usize >= self.item_count {
                    return Err(Error::Invariant(format!("item {i} lists invalid neighbor {j}")));
                }
                if !s.is_finite() || s.abs() > bound {
                    return Err(Error::Invariant(format!(
                        "item {i} neighbor {j} score {s} out of range"
                    )));
                }
                if pos > 0 && !ranks_before(row[pos - 1].1, row[pos - 1].0, s, j) {
                    return Err(Error::Invariant(format!(
                        "item {i} list is not sorted at rank {}",
                        pos + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// True when candidate `(sa, ja)` ranks strictly ahead of `(sb, jb)`.
#[inline]
pub(crate) fn ranks_before(sa: f64, ja: u32, sb: f64, jb: u32) -> bool {
    sa > sb || (sa == sb && ja < jb)
}

/// Cosine similarity in 64-bit arithmetic; 0 when either vector has zero norm.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid!("cosine of vectors with lengths {} and {}", a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Tile sizes and parallelism for the blocked path. Results do not depend on
/// any of these.
#[derive(Debug, Clone, Copy)]
pub struct BlockConfig {
    pub row_block: usize,
    pub col_block: usize,
}

impl Default for BlockConfig {
    fn default() -> Self {
        BlockConfig {
            row_block: 32,
            col_block: 256,
        }
    }
}

/// One modality widened to f64 with precomputed row norms.
struct Prepared {
    dim: usize,
    rows: Vec<f64>,
    norms: Vec<f64>,
}

impl Prepared {
    fn new(emb: &ModalityEmbeddings) -> Self {
        let dim = emb.dim();
        let rows: Vec<f64> = emb.as_slice().iter().map(|&v| v as f64).collect();
        let norms = rows
            .chunks_exact(dim)
            .map(|r| {
                let mut s = 0.0f64;
                for &x in r {
                    s += x * x;
                }
                s.sqrt()
            })
            .collect();
        Prepared { dim, rows, norms }
    }

    /// Same expression as [`cosine_similarity`].
    #[inline]
    fn cosine(&self, i: usize, j: usize) -> f64 {
        let (ni, nj) = (self.norms[i], self.norms[j]);
        if ni == 0.0 || nj == 0.0 {
            return 0.0;
        }
        let a = &self.rows[i * self.dim..(i + 1) * self.dim];
        let b = &self.rows[j * self.dim..(j + 1) * self.dim];
        let mut dot = 0.0f64;
        for (x, y) in a.iter().zip(b) {
            dot += x * y;
        }
        dot / (ni * nj)
    }
}

/// Fixed-capacity buffer holding the best `cap` candidates seen so far.
pub(crate) struct TopK {
    cap: usize,
    best: Vec<(f64, u32)>,
}

impl TopK {
    pub(crate) fn new(cap: usize) -> Self {
        TopK {
            cap,
            best: Vec::with_capacity(cap + 1),
        }
    }

    #[inline]
    pub(crate) fn offer(&mut self, score: f64, item: u32) {
        if self.cap == 0 {
            return;
        }
        if self.best.len() == self.cap {
            let &(ws, wj) = self.best.last().unwrap();
            if !ranks_before(score, item, ws, wj) {
                return;
            }
            self.best.pop();
        }
        let pos = self.best.partition_point(|&(s, j)| ranks_before(s, j, score, item));
        self.best.insert(pos, (score, item));
    }

    pub(crate) fn into_sorted(self) -> Vec<(f64, u32)> {
        self.best
    }
}

fn blocked_topk(
    item_count: usize,
    k: usize,
    blocks: BlockConfig,
    score: impl Fn(usize, usize) -> f64 + Sync,
) -> Vec<Vec<(f64, u32)>> {
    let width = k.min(item_count.saturating_sub(1));
    let row_block = blocks.row_block.max(1);
    let col_block = blocks.col_block.max(1);
    let starts: Vec<usize> = (0..item_count).step_by(row_block).collect();
    starts
        .par_iter()
        .flat_map_iter(|&start| {
            let end = (start + row_block).min(item_count);
            let mut buffers: Vec<TopK> = (start..end).map(|_| TopK::new(width)).collect();
            for tile in (0..item_count).step_by(col_block) {
                let tile_end = (tile + col_block).min(item_count);
                for (i, buf) in (start..end).zip(buffers.iter_mut()) {
                    for j in tile..tile_end {
                        if j != i {
                            buf.offer(score(i, j), j as u32);
                        }
                    }
                }
            }
            buffers.into_iter().map(TopK::into_sorted)
        })
        .collect()
}

/// Exact top-k neighbors of every item under cosine similarity in one modality.
pub fn topk_modality(embeddings: &ModalityEmbeddings, k: usize) -> Result<NeighborTable> {
    topk_modality_with(embeddings, k, BlockConfig::default())
}

pub fn topk_modality_with(embeddings: &ModalityEmbeddings, k: usize, blocks: BlockConfig) -> Result<NeighborTable> {
    if k == 0 {
        return Err(invalid!("k must be at least 1"));
    }
    let prepared = Prepared::new(embeddings);
    let n = embeddings.item_count();
    let rows = blocked_topk(n, k, blocks, |i, j| prepared.cosine(i, j));
    Ok(NeighborTable::from_rows(
        TableSource::Modality(embeddings.modality.clone()),
        k,
        n,
        rows,
    ))
}

/// Exact top-k neighbors under the unweighted sum of per-modality cosines.
pub fn topk_synergistic(modalities: &[&ModalityEmbeddings], k: usize) -> Result<NeighborTable> {
    topk_synergistic_with(modalities, k, BlockConfig::default())
}

pub fn topk_synergistic_with(
    modalities: &[&ModalityEmbeddings],
    k: usize,
    blocks: BlockConfig,
) -> Result<NeighborTable> {
    if k == 0 {
        return Err(invalid!("k must be at least 1"));
    }
    let n = check_item_counts(modalities)?;
    let prepared: Vec<Prepared> = modalities.iter().map(|m| Prepared::new(m)).collect();
    let rows = blocked_topk(n, k, blocks, |i, j| {
        let mut s = 0.0f64;
        for p in &prepared {
            s += p.cosine(i, j);
        }
        s
    });
    Ok(NeighborTable::from_rows(TableSource::Synergistic, k, n, rows))
}

pub(crate) fn check_item_counts(modalities: &[&ModalityEmbeddings]) -> Result<usize> {
    let first = modalities
        .first()
        .ok_or_else(|| invalid!("synergistic similarity needs at least one modality"))?;
    let n = first.item_count();
    for m in modalities {
        if m.item_count() != n {
            return Err(Error::ShapeMismatch(format!(
                "modality {} has {} items, modality {} has {n}",
                m.modality,
                m.item_count(),
                first.modality
            )));
        }
    }
    Ok(n)
}
