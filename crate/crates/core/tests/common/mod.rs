//! Independent brute-force oracles and random instance generators shared by
//! the integration tests and the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vimm_core::corpus::ModalityEmbeddings;
use vimm_core::recsys::{LayerTables, Normalization, Table};
use vimm_core::simgraph::NeighborTable;
use vimm_core::{InteractionMatrix, MatrixKind};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian-ish rows with some exact duplicates and zero rows so that ties
/// and degenerate cosines occur.
pub fn random_embeddings(r: &mut impl Rng, name: &str, items: usize, dim: usize) -> ModalityEmbeddings {
    let mut data = Vec::with_capacity(items * dim);
    for i in 0..items {
        let roll: f64 = r.random();
        if i > 0 && roll < 0.1 {
            let src = r.random_range(0..i);
            let row: Vec<f32> = data[src * dim..(src + 1) * dim].to_vec();
            data.extend(row);
        } else if roll < 0.13 {
            data.extend(std::iter::repeat_n(0.0f32, dim));
        } else {
            data.extend((0..dim).map(|_| r.random_range(-1.0f32..1.0)));
        }
    }
    ModalityEmbeddings::new(name, dim, data).unwrap()
}

pub fn random_modalities(r: &mut impl Rng, items: usize) -> Vec<ModalityEmbeddings> {
    let count = r.random_range(1..=3);
    (0..count)
        .map(|m| {
            let dim = r.random_range(1..=64);
            random_embeddings(r, &format!("m{m}"), items, dim)
        })
        .collect()
}

pub fn random_binary(r: &mut impl Rng, users: usize, items: usize, density: f64) -> InteractionMatrix {
    let pairs: Vec<(u32, u32)> = (0..users as u32)
        .flat_map(|u| (0..items as u32).map(move |i| (u, i)))
        .filter(|_| r.random::<f64>() < density)
        .collect();
    InteractionMatrix::from_pairs(users, items, MatrixKind::Real, pairs).unwrap()
}

/// Cosine in f64, 0 when either side is the zero vector.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// All `(score, neighbor)` pairs of `item` under the summed cosine.
pub fn all_scores(modalities: &[&ModalityEmbeddings], item: usize) -> Vec<(f64, u32)> {
    let n = modalities[0].item_count();
    (0..n)
        .filter(|&j| j != item)
        .map(|j| {
            let s = modalities.iter().map(|m| cosine(m.row(item), m.row(j))).sum();
            (s, j as u32)
        })
        .collect()
}

/// Checks that `table` is a valid top-k table for the summed cosine:
/// right width, no self, sorted, scores match the oracle, and nothing left
/// out beats anything kept.
pub fn check_topk(table: &NeighborTable, modalities: &[&ModalityEmbeddings], k: usize) -> Result<(), String> {
    let n = modalities[0].item_count();
    let width = k.min(n.saturating_sub(1));
    for i in 0..n {
        let got: Vec<(u32, f64)> = table.entries(i).collect();
        if got.len() != width {
            return Err(format!("item {i}: {} neighbors, expected {width}", got.len()));
        }
        let scores = all_scores(modalities, i);
        for &(j, s) in &got {
            if j as usize == i {
                return Err(format!("item {i} lists itself"));
            }
            let want = scores.iter().find(|&&(_, jj)| jj == j).unwrap().0;
            if (want - s).abs() > 1e-9 {
                return Err(format!("item {i} neighbor {j}: score {s} vs oracle {want}"));
            }
        }
        for w in got.windows(2) {
            if w[0].1 < w[1].1 || (w[0].1 == w[1].1 && w[0].0 > w[1].0) {
                return Err(format!("item {i}: list not sorted"));
            }
        }
        if let Some(&(_, floor)) = got.last() {
            let kept: BTreeSet<u32> = got.iter().map(|e| e.0).collect();
            if let Some(&(s, j)) = scores.iter().find(|&&(s, j)| !kept.contains(&j) && s > floor + 1e-9) {
                return Err(format!("item {i}: left out {j} with score {s} above {floor}"));
            }
        }
    }
    Ok(())
}

/// Triple loop: for each user, each real item, each neighbor.
pub fn triple_loop_virtual(real: &InteractionMatrix, table: &NeighborTable) -> BTreeSet<(u32, u32)> {
    let mut out = BTreeSet::new();
    for u in 0..real.user_count() {
        for &i in real.row_items(u) {
            for &j in table.neighbors(i as usize) {
                out.insert((u as u32, j));
            }
        }
    }
    out
}

pub fn dense(m: &InteractionMatrix) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; m.item_count()]; m.user_count()];
    for (u, i, w) in m.iter() {
        d[u as usize][i as usize] = w;
    }
    d
}

/// `clip(R + λ Σ w_m V_m)` on dense matrices.
pub fn dense_augment(
    real: &InteractionMatrix,
    virtuals: &[(&InteractionMatrix, f64)],
    lambda: f64,
    clip: bool,
) -> Vec<Vec<f64>> {
    let mut d = dense(real);
    for (v, w) in virtuals {
        for (u, row) in dense(v).iter().enumerate() {
            for (i, x) in row.iter().enumerate() {
                d[u][i] += lambda * w * x;
            }
        }
    }
    if clip {
        for row in &mut d {
            for x in row {
                *x = x.clamp(0.0, 1.0);
            }
        }
    }
    d
}

/// The `(U+I)²` normalized adjacency of the bipartite graph.
pub fn dense_operator(adj: &InteractionMatrix, norm: Normalization) -> Vec<Vec<f64>> {
    let (nu, ni) = adj.shape();
    let d = dense(adj);
    let du: Vec<f64> = d.iter().map(|r| r.iter().sum()).collect();
    let di: Vec<f64> = (0..ni).map(|i| d.iter().map(|r| r[i]).sum()).collect();
    let n = nu + ni;
    let mut a = vec![vec![0.0; n]; n];
    for u in 0..nu {
        for i in 0..ni {
            if d[u][i] == 0.0 {
                continue;
            }
            let c = match norm {
                Normalization::Paper => d[u][i] / (du[u] * di[i]),
                Normalization::Sqrt => d[u][i] / (du[u] * di[i]).sqrt(),
            };
            a[u][nu + i] = c;
            a[nu + i][u] = c;
        }
    }
    a
}

/// Stacks user and item rows into one `(U+I) × d` matrix.
pub fn stack(t: &LayerTables) -> Vec<Vec<f64>> {
    (0..t.users.rows())
        .map(|r| t.users.row(r).to_vec())
        .chain((0..t.items.rows()).map(|r| t.items.row(r).to_vec()))
        .collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|c| row.iter().zip(b).map(|(x, brow)| x * brow[c]).sum())
                .collect()
        })
        .collect()
}

pub fn random_tables(r: &mut impl Rng, users: usize, items: usize, dim: usize) -> LayerTables {
    let mut t = |rows: usize| Table::from_vec(rows, dim, (0..rows * dim).map(|_| r.random_range(-1.0..1.0)).collect());
    LayerTables {
        users: t(users),
        items: t(items),
    }
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}
