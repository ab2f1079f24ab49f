//! Weighted bipartite propagation.
//!
//! One layer computes
//!
//! ```text
//! e_u' = (1/d_u) Σ_j w_uj (1/d_j) e_j      e_i' = (1/d_i) Σ_v w_vi (1/d_v) e_v
//! ```
//!
//! with weighted degrees `d = Σ w`, or `1/sqrt(d_u d_j)` under
//! [`Normalization::Sqrt`]. Zero-degree nodes receive the zero vector.
//! Both directions share one coefficient per edge, so the operator is
//! symmetric and its transpose is itself.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::table::{axpy, Table};
use crate::error::{invalid, Error, Result};
use crate::matrix::InteractionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `w / (d_u · d_j)`.
    #[default]
    Paper,
    /// `w / sqrt(d_u · d_j)`.
    Sqrt,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Normalization::Paper),
            "sqrt" => Ok(Normalization::Sqrt),
            _ => Err(invalid!("unknown normalization {s:?}, expected paper or sqrt")),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Paper => "paper",
            Normalization::Sqrt => "sqrt",
        })
    }
}

/// Normalized edge coefficients stored in both orientations.
#[derive(Debug, Clone)]
pub struct PropagationGraph {
    user_count: usize,
    item_count: usize,
    user_ptr: Vec<usize>,
    user_adj: Vec<(u32, f64)>,
    item_ptr: Vec<usize>,
    item_adj: Vec<(u32, f64)>,
}

impl PropagationGraph {
    pub fn new(adjacency: &InteractionMatrix, norm: Normalization) -> Self {
        let user_deg = adjacency.user_weight_sums();
        let item_deg = adjacency.item_weight_sums();
        let coef = |u: usize, i: usize, w: f64| match norm {
            Normalization::Paper => w / (user_deg[u] * item_deg[i]),
            Normalization::Sqrt => w / (user_deg[u].sqrt() * item_deg[i].sqrt()),
        };

        let mut user_ptr = Vec::with_capacity(adjacency.user_count() + 1);
        let mut user_adj = Vec::with_capacity(adjacency.nnz());
        user_ptr.push(0);
        for u in 0..adjacency.user_count() {
            for (&i, &w) in adjacency.row_items(u).iter().zip(adjacency.row_weights(u)) {
                user_adj.push((i, coef(u, i as usize, w)));
            }
            user_ptr.push(user_adj.len());
        }

        let counts = adjacency.item_counts();
        let mut item_ptr = vec![0usize; adjacency.item_count() + 1];
        for (i, c) in counts.iter().enumerate() {
            item_ptr[i + 1] = item_ptr[i] + c;
        }
        let mut fill = item_ptr.clone();
        let mut item_adj = vec![(0u32, 0.0f64); adjacency.nnz()];
        for u in 0..adjacency.user_count() {
            for &(i, c) in &user_adj[user_ptr[u]..user_ptr[u + 1]] {
                item_adj[fill[i as usize]] = (u as u32, c);
                fill[i as usize] += 1;
            }
        }
        PropagationGraph {
            user_count: adjacency.user_count(),
            item_count: adjacency.item_count(),
            user_ptr,
            user_adj,
            item_ptr,
            item_adj,
        }
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn user_edges(&self, u: usize) -> &[(u32, f64)] {
        &self.user_adj[self.user_ptr[u]..self.user_ptr[u + 1]]
    }

    pub fn item_edges(&self, i: usize) -> &[(u32, f64)] {
        &self.item_adj[self.item_ptr[i]..self.item_ptr[i + 1]]
    }
}

/// User and item tables of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTables {
    pub users: Table,
    pub items: Table,
}

impl LayerTables {
    pub fn zeros_like(&self) -> Self {
        LayerTables {
            users: Table::zeros(self.users.rows(), self.users.dim()),
            items: Table::zeros(self.items.rows(), self.items.dim()),
        }
    }

    pub fn add_assign(&mut self, other: &LayerTables) {
        self.users.add_assign(&other.users);
        self.items.add_assign(&other.items);
    }
}

fn gather<'g>(out: &mut Table, edges: impl Fn(usize) -> &'g [(u32, f64)] + Sync, src: &Table) {
    let dim = out.dim();
    if dim == 0 {
        return;
    }
    out.as_mut_slice().par_chunks_mut(dim).enumerate().for_each(|(r, row)| {
        for &(j, c) in edges(r) {
            axpy(c, src.row(j as usize), row);
        }
    });
}

/// One propagation step.
pub fn propagate(graph: &PropagationGraph, tables: &LayerTables) -> Result<LayerTables> {
    if tables.users.rows() != graph.user_count
        || tables.items.rows() != graph.item_count
        || tables.users.dim() != tables.items.dim()
    {
        return Err(Error::ShapeMismatch(format!(
            "tables {}×{} / {}×{} do not match graph with {} users, {} items",
            tables.users.rows(),
            tables.users.dim(),
            tables.items.rows(),
            tables.items.dim(),
            graph.user_count,
            graph.item_count
        )));
    }
    let mut next = tables.zeros_like();
    gather(&mut next.users, |u| graph.user_edges(u), &tables.items);
    gather(&mut next.items, |i| graph.item_edges(i), &tables.users);
    Ok(next)
}

/// Layers `0..=layers`, starting with a copy of `base`.
pub fn propagate_layers(graph: &PropagationGraph, base: &LayerTables, layers: usize) -> Result<Vec<LayerTables>> {
    let mut out = Vec::with_capacity(layers + 1);
    out.push(base.clone());
    for l in 0..layers {
        let next = propagate(graph, &out[l])?;
        out.push(next);
    }
    Ok(out)
}

/// Elementwise sum of all layers.
pub fn aggregate(layers: &[LayerTables]) -> LayerTables {
    let mut acc = layers[0].clone();
    for layer in &layers[1..] {
        acc.add_assign(layer);
    }
    acc
}
