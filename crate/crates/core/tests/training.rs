use std::collections::BTreeMap;

use vimm_core::augment::AugmentConfig;
use vimm_core::corpus::{generate_synthetic, Dataset, SynthConfig};
use vimm_core::pipeline::{augment_train, prepare, run_pipeline, run_prepared, PipelineConfig};
use vimm_core::recsys::{propagate, LayerTables, Normalization, PropagationGraph, Table, TrainConfig};

fn dataset() -> Dataset {
    generate_synthetic(&SynthConfig::new(
        80,
        120,
        4,
        10,
        BTreeMap::from([("text".into(), 16), ("visual".into(), 24)]),
        0.1,
        3,
    ))
    .unwrap()
}

fn quick() -> TrainConfig {
    TrainConfig {
        epochs: 15,
        batch_size: 256,
        learning_rate: 1e-2,
        dim: 16,
        patience: 0,
        ..TrainConfig::default()
    }
}

#[test]
fn training_loss_decreases() {
    let config = PipelineConfig {
        train: quick(),
        ..PipelineConfig::default()
    };
    let run = run_pipeline(&dataset(), &config).unwrap();
    let h = &run.training.history;
    assert_eq!(h.len(), 15);
    assert!(
        h.last().unwrap().loss < 0.9 * h[0].loss,
        "loss {} -> {}",
        h[0].loss,
        h.last().unwrap().loss
    );
    assert!(run.metrics.recall > 0.0);
}

#[test]
fn zero_lambda_reproduces_the_baseline() {
    let ds = dataset();
    let baseline = PipelineConfig {
        augment: None,
        train: quick(),
        ..PipelineConfig::default()
    };
    let zero = PipelineConfig {
        augment: Some(AugmentConfig {
            lambda: 0.0,
            ..AugmentConfig::default()
        }),
        ..baseline.clone()
    };
    let a = run_pipeline(&ds, &baseline).unwrap();
    let b = run_pipeline(&ds, &zero).unwrap();
    let train = prepare(&ds, &baseline, None).unwrap().split.train;
    let aug = b.augmentation.unwrap().matrix;
    assert_eq!(aug.nnz(), train.nnz());
    assert!(train.iter().all(|(u, i, _)| aug.get(u as usize, i) == 1.0));
    assert_eq!(a.training.model, b.training.model);
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn held_out_items_are_isolated_until_augmented() {
    let ds = dataset();
    let config = PipelineConfig {
        holdout: 0.1,
        holdout_seed: 4,
        train: quick(),
        ..PipelineConfig::default()
    };
    let prepared = prepare(&ds, &config, Some(10)).unwrap();
    let cold = prepared.cold.as_ref().unwrap();
    assert_eq!(cold.held_out.len(), 12);
    let train = &cold.split.train;
    let ones = LayerTables {
        users: Table::from_vec(80, 1, vec![1.0; 80]),
        items: Table::from_vec(120, 1, vec![1.0; 120]),
    };
    let graph = PropagationGraph::new(train, Normalization::Paper);
    let next = propagate(&graph, &ones).unwrap();
    for &i in &cold.held_out {
        assert!(graph.item_edges(i as usize).is_empty());
        assert_eq!(next.items.row(i as usize), &[0.0]);
    }

    let aug = augment_train(
        train,
        train,
        &ds.modality_names(),
        prepared.cache.as_ref().unwrap(),
        &AugmentConfig::default(),
        Default::default(),
    )
    .unwrap();
    let reached = cold
        .held_out
        .iter()
        .filter(|&&i| {
            !PropagationGraph::new(&aug.matrix, Normalization::Paper)
                .item_edges(i as usize)
                .is_empty()
        })
        .count();
    assert!(
        reached > cold.held_out.len() / 2,
        "only {reached} held-out items gained edges"
    );

    let run = run_prepared(&prepared, &config).unwrap();
    assert!(run
        .metrics
        .users
        .iter()
        .all(|&u| cold.targets.iter().any(|&(v, _)| v == u)));
}
