//! BPR loss `Σ -log σ(ŷ(u,i+) - ŷ(u,i-))` and its exact gradient with
//! respect to the layer-0 tables, back through aggregation and propagation.

use super::graph::{aggregate, propagate_layers, LayerTables, PropagationGraph};
use super::model::EmbeddingModel;
use super::sampler::TripletBatch;
use super::table::{axpy, dot};
use crate::error::Result;

/// `log σ(x)` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Gradients for each modality's layer-0 tables, in model order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub modalities: Vec<LayerTables>,
}

/// Summed BPR loss over `batch` and its gradient. Aggregated tables are
/// recomputed from the model's layer-0 tables.
pub fn bpr_loss(batch: &TripletBatch, model: &EmbeddingModel, graph: &PropagationGraph) -> Result<(f64, Gradients)> {
    let aggregated: Vec<LayerTables> = model
        .modalities
        .iter()
        .map(|m| propagate_layers(graph, &m.base, model.layers).map(|l| aggregate(&l)))
        .collect::<Result<_>>()?;

    let mut loss = 0.0;
    let mut upstream: Vec<LayerTables> = aggregated.iter().map(LayerTables::zeros_like).collect();
    for t in batch.iter() {
        let (u, p, n) = (t.user as usize, t.pos as usize, t.neg as usize);
        let mut margin = 0.0;
        for agg in &aggregated {
            let eu = agg.users.row(u);
            margin += dot(eu, agg.items.row(p)) - dot(eu, agg.items.row(n));
        }
        loss -= log_sigmoid(margin);
        // d/dmargin of -log σ(margin) = -σ(-margin)
        let g = -(log_sigmoid(-margin).exp());
        for (agg, up) in aggregated.iter().zip(upstream.iter_mut()) {
            let (eu, ep, en) = (agg.users.row(u), agg.items.row(p), agg.items.row(n));
            let urow = up.users.row_mut(u);
            axpy(g, ep, urow);
            axpy(-g, en, urow);
            axpy(g, eu, up.items.row_mut(p));
            axpy(-g, eu, up.items.row_mut(n));
        }
    }

    // The propagation operator is symmetric, so pulling the gradient back
    // through L layers is the same layer sum applied to the upstream gradient.
    let modalities = upstream
        .iter()
        .map(|up| propagate_layers(graph, up, model.layers).map(|l| aggregate(&l)))
        .collect::<Result<_>>()?;
    Ok((loss, Gradients { modalities }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sigmoid_values() {
        assert!((-log_sigmoid(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(-log_sigmoid(50.0) < 1e-20);
        assert!(-log_sigmoid(1e6) >= 0.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
    }
}
