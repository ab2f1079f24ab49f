use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use super::adam::Adam;
use super::bpr::bpr_loss;
use super::graph::{Normalization, PropagationGraph};
use super::model::{EmbeddingModel, ItemInit, ModalitySource};
use super::sampler::TripletSampler;
use super::table::axpy;
use crate::corpus::SplitBundle;
use crate::error::{invalid, Error, Result};
use crate::eval::evaluate_targets;
use crate::matrix::{InteractionMatrix, MatrixKind};
use crate::rng;

/// Where BPR positives come from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BprSource {
    /// Training interactions only.
    #[default]
    Real,
    /// Training interactions plus augmented entries with weight `>= x`.
    Threshold(f64),
}

impl FromStr for BprSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "real" {
            return Ok(BprSource::Real);
        }
        if let Some(x) = s.strip_prefix("threshold:") {
            let x: f64 = x.parse().map_err(|_| invalid!("malformed threshold {x:?}"))?;
            if !(x > 0.0 && x.is_finite()) {
                return Err(invalid!("threshold must be positive"));
            }
            return Ok(BprSource::Threshold(x));
        }
        Err(invalid!("unknown bpr source {s:?}, expected real or threshold:<x>"))
    }
}

impl fmt::Display for BprSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BprSource::Real => f.write_str("real"),
            BprSource::Threshold(x) => write!(f, "threshold:{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub layers: usize,
    pub dim: usize,
    pub seed: u64,
    /// L2 coefficient on the layer-0 rows touched by each triplet.
    pub regularization: f64,
    pub norm: Normalization,
    /// Epochs without a validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub eval_k: usize,
    pub item_init: ItemInit,
    pub bpr_source: BprSource,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 1000,
            batch_size: 2048,
            layers: 2,
            dim: 64,
            seed: 0,
            regularization: 1e-4,
            norm: Normalization::Paper,
            patience: 20,
            eval_k: 10,
            item_init: ItemInit::Features,
            bpr_source: BprSource::Real,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-triplet loss including regularization.
    pub loss: f64,
    pub val_recall: f64,
    pub val_ndcg: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the best validation recall (last epoch if there is no
    /// validation data).
    pub model: EmbeddingModel,
    pub best_epoch: usize,
    pub history: Vec<EpochLog>,
    /// Mean wall-clock seconds per epoch, evaluation excluded. Diagnostic only.
    pub epoch_seconds: f64,
}

impl TrainOutcome {
    /// `epoch,loss,val_recall10,val_ndcg10` CSV.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("epoch,loss,val_recall10,val_ndcg10\n");
        for h in &self.history {
            out.push_str(&format!(
                "{},{:.9},{:.9},{:.9}\n",
                h.epoch, h.loss, h.val_recall, h.val_ndcg
            ));
        }
        out
    }
}

fn bpr_positives(
    train: &InteractionMatrix,
    adjacency: &InteractionMatrix,
    source: BprSource,
) -> Result<InteractionMatrix> {
    match source {
        BprSource::Real => Ok(train.clone()),
        BprSource::Threshold(x) => InteractionMatrix::from_pairs(
            train.user_count(),
            train.item_count(),
            MatrixKind::Real,
            train
                .pairs()
                .chain(adjacency.iter().filter(|&(_, _, w)| w >= x).map(|(u, i, _)| (u, i))),
        ),
    }
}

/// Trains the reference model on `split.train` with message passing over
/// `adjacency` (the real matrix or an augmented one).
pub fn train(
    split: &SplitBundle,
    adjacency: &InteractionMatrix,
    sources: &[ModalitySource<'_>],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    adjacency.ensure_shape(split.user_count(), split.item_count(), "adjacency")?;
    if config.batch_size == 0 || config.dim == 0 {
        return Err(invalid!("batch size and dim must be positive"));
    }
    if sources.is_empty() {
        return Err(invalid!("model needs at least one modality"));
    }
    let sources: Vec<ModalitySource<'_>> = match config.item_init {
        ItemInit::Features => sources.to_vec(),
        ItemInit::Random => sources.iter().map(|s| ModalitySource::Named(s.name())).collect(),
    };
    let graph = PropagationGraph::new(adjacency, config.norm);
    let positives = bpr_positives(&split.train, adjacency, config.bpr_source)?;
    let sampler = TripletSampler::new(&positives)?;
    let mut model = EmbeddingModel::init(
        split.user_count(),
        split.item_count(),
        &sources,
        config.dim,
        config.layers,
        config.seed,
    )?;
    let sizes: Vec<usize> = model.parameters_mut().iter().map(|p| p.len()).collect();
    let mut adam = Adam::new(config.learning_rate, &sizes);
    let mut sample_rng = rng::stream(rng::derive(config.seed, 0x5A3F), 0);
    let steps = positives.nnz().div_ceil(config.batch_size);

    model.refresh(&graph)?;
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_recall = f64::NEG_INFINITY;
    let mut stale = 0;
    let mut history = Vec::with_capacity(config.epochs);

    let mut train_seconds = 0.0;
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let mut total = 0.0;
        let mut count = 0usize;
        for _ in 0..steps {
            let batch = sampler.sample(config.batch_size, &mut sample_rng);
            let (loss, mut grads) = bpr_loss(&batch, &model, &graph)?;
            let scale = 1.0 / batch.len() as f64;
            let mut reg_loss = 0.0;
            for (g, m) in grads.modalities.iter_mut().zip(&model.modalities) {
                g.users.scale(scale);
                g.items.scale(scale);
                if config.regularization > 0.0 {
                    let c = config.regularization * scale;
                    for t in batch.iter() {
                        let (u, p, n) = (t.user as usize, t.pos as usize, t.neg as usize);
                        for (items, row) in [(false, u), (true, p), (true, n)] {
                            let (r, grad) = if items {
                                (m.base.items.row(row), g.items.row_mut(row))
                            } else {
                                (m.base.users.row(row), g.users.row_mut(row))
                            };
                            reg_loss += 0.5 * c * r.iter().map(|v| v * v).sum::<f64>();
                            axpy(c, r, grad);
                        }
                    }
                }
            }
            total += loss + reg_loss / scale;
            count += batch.len();
            let grad_slices: Vec<&[f64]> = grads
                .modalities
                .iter()
                .flat_map(|g| [g.users.as_slice(), g.items.as_slice()])
                .collect();
            adam.step(&mut model.parameters_mut(), &grad_slices);
        }
        let mean_loss = total / count.max(1) as f64;
        model.refresh(&graph)?;
        train_seconds += started.elapsed().as_secs_f64();
        if !mean_loss.is_finite() || !model.is_finite() {
            return Err(Error::Divergence {
                epoch,
                message: format!("mean loss {mean_loss}, parameters finite: {}", model.is_finite()),
            });
        }

        let (val_recall, val_ndcg) = if split.validation.is_empty() {
            (0.0, 0.0)
        } else {
            let m = evaluate_targets(&model, &split.train, &split.validation, config.eval_k);
            (m.recall, m.ndcg)
        };
        history.push(EpochLog {
            epoch,
            loss: mean_loss,
            val_recall,
            val_ndcg,
        });

        if split.validation.is_empty() || val_recall > best_recall {
            best_recall = val_recall;
            best = model.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if config.patience > 0 && stale >= config.patience {
                break;
            }
        }
    }

    let epoch_seconds = train_seconds / history.len().max(1) as f64;
    Ok(TrainOutcome {
        model: best,
        best_epoch,
        history,
        epoch_seconds,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::corpus::{generate_synthetic, split_dataset, SplitRatios, SynthConfig};

    fn small() -> (crate::corpus::Dataset, SplitBundle) {
        let ds = generate_synthetic(&SynthConfig::new(
            40,
            60,
            4,
            8,
            BTreeMap::from([("t".into(), 8), ("v".into(), 8)]),
            0.1,
            1,
        ))
        .unwrap();
        let split = split_dataset(&ds, SplitRatios::default(), 2).unwrap();
        (ds, split)
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let (ds, split) = small();
        let sources: Vec<_> = ds.embeddings().into_iter().map(ModalitySource::Features).collect();
        let config = TrainConfig {
            learning_rate: 0.0,
            epochs: 1,
            dim: 4,
            batch_size: 32,
            ..TrainConfig::default()
        };
        let out = train(&split, &split.train, &sources, &config).unwrap();
        let init = EmbeddingModel::init(40, 60, &sources, 4, config.layers, config.seed).unwrap();
        for (a, b) in out.model.modalities.iter().zip(&init.modalities) {
            assert_eq!(a.base, b.base);
        }
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn deterministic_for_seed() {
        let (ds, split) = small();
        let sources: Vec<_> = ds.embeddings().into_iter().map(ModalitySource::Features).collect();
        let config = TrainConfig {
            learning_rate: 0.01,
            epochs: 3,
            dim: 8,
            batch_size: 64,
            ..TrainConfig::default()
        };
        let a = train(&split, &split.train, &sources, &config).unwrap();
        let b = train(&split, &split.train, &sources, &config).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.metrics_csv(), b.metrics_csv());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (ds, split) = small();
        let sources: Vec<_> = ds.embeddings().into_iter().map(ModalitySource::Features).collect();
        let wrong = InteractionMatrix::empty(41, 60, MatrixKind::Augmented);
        assert!(train(&split, &wrong, &sources, &TrainConfig::default()).is_err());
    }

    #[test]
    fn bpr_source_parsing() {
        assert_eq!("real".parse::<BprSource>().unwrap(), BprSource::Real);
        assert_eq!("threshold:0.5".parse::<BprSource>().unwrap(), BprSource::Threshold(0.5));
        assert!("threshold:x".parse::<BprSource>().is_err());
        assert!("other".parse::<BprSource>().is_err());
    }
}
