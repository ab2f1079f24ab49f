//! End-to-end runs: perturb, split, build neighbor tables and virtual
//! matrices, augment, train, evaluate.

use std::fmt;
use std::str::FromStr;

use crate::augment::{overlay_augment, synergistic_augment, AugmentConfig, Strategy};
use crate::corpus::{perturb_dataset, split_dataset, Dataset, SplitBundle, SplitRatios};
use crate::error::{invalid, Error, Result};
use crate::eval::{cold_start_eval, cold_start_split, evaluate, ColdStartSplit, RankingMetrics};
use crate::matrix::InteractionMatrix;
use crate::recsys::{train, ModalitySource, TrainConfig, TrainOutcome};
use crate::simgraph::{topk_modality, topk_synergistic, NeighborTable};
use crate::stats::{overlap_report, OverlapDenominator, OverlapReport};
use crate::virtual_graph::{build_virtual, virtual_size_bounds_check};

/// Which interactions the overlap statistics are measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StatsScope {
    #[default]
    Train,
    Full,
}

impl FromStr for StatsScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(StatsScope::Train),
            "full" => Ok(StatsScope::Full),
            _ => Err(invalid!("unknown stats scope {s:?}, expected train or full")),
        }
    }
}

impl fmt::Display for StatsScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatsScope::Train => "train",
            StatsScope::Full => "full",
        })
    }
}

/// Per-modality and synergistic neighbor tables at some `k`; smaller `k` are
/// served by truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborCache {
    pub modalities: Vec<NeighborTable>,
    pub synergistic: NeighborTable,
}

impl NeighborCache {
    pub fn build(dataset: &Dataset, k: usize) -> Result<Self> {
        let embeddings = dataset.embeddings();
        let modalities = embeddings.iter().map(|e| topk_modality(e, k)).collect::<Result<_>>()?;
        Ok(NeighborCache {
            modalities,
            synergistic: topk_synergistic(&embeddings, k)?,
        })
    }

    pub fn k(&self) -> usize {
        self.synergistic.k()
    }

    pub fn at(&self, k: usize) -> Result<NeighborCache> {
        if k == self.k() {
            return Ok(self.clone());
        }
        Ok(NeighborCache {
            modalities: self.modalities.iter().map(|t| t.truncated(k)).collect::<Result<_>>()?,
            synergistic: self.synergistic.truncated(k)?,
        })
    }
}

/// Virtual matrices built from one real matrix, plus their statistics.
#[derive(Debug, Clone)]
pub struct VirtualSet {
    /// `(modality, R^m)` in dataset order.
    pub modalities: Vec<(String, InteractionMatrix)>,
    pub synergistic: InteractionMatrix,
    pub report: OverlapReport,
}

/// Builds every virtual matrix from `real` at `k` and measures overlaps
/// against the same matrix.
pub fn build_virtual_set(
    real: &InteractionMatrix,
    names: &[String],
    cache: &NeighborCache,
    k: usize,
    denominator: OverlapDenominator,
) -> Result<VirtualSet> {
    let tables = cache.at(k)?;
    let mut modalities = Vec::with_capacity(names.len());
    for (name, table) in names.iter().zip(&tables.modalities) {
        let v = build_virtual(real, table)?;
        virtual_size_bounds_check(real, &v, k)?;
        modalities.push((name.clone(), v));
    }
    let synergistic = build_virtual(real, &tables.synergistic)?;
    virtual_size_bounds_check(real, &synergistic, k)?;
    let refs: Vec<(String, &InteractionMatrix)> = modalities.iter().map(|(n, m)| (n.clone(), m)).collect();
    let report = overlap_report(real, &refs, &synergistic, k, denominator)?;
    Ok(VirtualSet {
        modalities,
        synergistic,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct Augmentation {
    pub matrix: InteractionMatrix,
    /// Report the weights were taken from.
    pub report: OverlapReport,
}

/// Augments `train`. Weights come from overlaps measured on `stats_real`
/// (the training matrix itself, or all interactions).
pub fn augment_train(
    train: &InteractionMatrix,
    stats_real: &InteractionMatrix,
    names: &[String],
    cache: &NeighborCache,
    config: &AugmentConfig,
    denominator: OverlapDenominator,
) -> Result<Augmentation> {
    let own = build_virtual_set(train, names, cache, config.k, denominator)?;
    let report = if stats_real == train {
        own.report.clone()
    } else {
        build_virtual_set(stats_real, names, cache, config.k, denominator)?.report
    };
    let refine = config.ablation.refine();
    let clamp = config.ablation.confine();
    let matrix = match config.strategy {
        Strategy::Overlay => {
            let weighted: Vec<(&InteractionMatrix, f64)> = own
                .modalities
                .iter()
                .map(|(name, v)| {
                    let w = if refine {
                        report.weight(name).unwrap_or(0.0)
                    } else {
                        1.0
                    };
                    (v, w)
                })
                .collect();
            overlay_augment(train, &weighted, config.lambda, clamp)?
        }
        Strategy::Synergistic => {
            let w = if refine { report.synergistic.weight } else { 1.0 };
            synergistic_augment(train, &own.synergistic, w, config.lambda, clamp)?
        }
    };
    Ok(Augmentation { matrix, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// `None` trains on the real matrix.
    pub augment: Option<AugmentConfig>,
    pub overlap_denominator: OverlapDenominator,
    pub stats_scope: StatsScope,
    pub train: TrainConfig,
    pub split_ratios: SplitRatios,
    pub split_seed: u64,
    pub noise_level: u8,
    pub error_level: u8,
    pub perturb_seed: u64,
    /// Item cold-start holdout fraction; 0 runs the standard protocol.
    pub holdout: f64,
    pub holdout_seed: u64,
    pub eval_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            augment: Some(AugmentConfig::default()),
            overlap_denominator: OverlapDenominator::Real,
            stats_scope: StatsScope::Train,
            train: TrainConfig::default(),
            split_ratios: SplitRatios::default(),
            split_seed: 0,
            noise_level: 0,
            error_level: 0,
            perturb_seed: 0,
            holdout: 0.0,
            holdout_seed: 0,
            eval_k: 10,
        }
    }
}

/// Everything that does not depend on augmentation or training settings.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub split: SplitBundle,
    pub cold: Option<ColdStartSplit>,
    pub cache: Option<NeighborCache>,
}

impl Prepared {
    /// The split models train on: the reduced one under cold start.
    pub fn training_split(&self) -> &SplitBundle {
        self.cold.as_ref().map_or(&self.split, |c| &c.split)
    }
}

/// Perturbs and splits the dataset; builds neighbor tables up to `max_k`
/// when given.
pub fn prepare(dataset: &Dataset, config: &PipelineConfig, max_k: Option<usize>) -> Result<Prepared> {
    let dataset = if config.noise_level == 0 && config.error_level == 0 {
        dataset.clone()
    } else {
        perturb_dataset(dataset, config.noise_level, config.error_level, config.perturb_seed)?
    };
    let split = split_dataset(&dataset, config.split_ratios, config.split_seed)?;
    let cold = if config.holdout > 0.0 {
        Some(cold_start_split(&split, config.holdout, config.holdout_seed)?)
    } else {
        None
    };
    let cache = max_k.map(|k| NeighborCache::build(&dataset, k)).transpose()?;
    Ok(Prepared {
        dataset,
        split,
        cold,
        cache,
    })
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub augmentation: Option<Augmentation>,
    pub training: TrainOutcome,
    /// Test metrics, or cold-start metrics when a holdout is configured.
    pub metrics: RankingMetrics,
}

/// Augments (if configured), trains and evaluates on a prepared dataset.
pub fn run_prepared(prepared: &Prepared, config: &PipelineConfig) -> Result<PipelineRun> {
    let split = prepared.training_split();
    let augmentation = match &config.augment {
        None => None,
        Some(aug) => {
            let built;
            let cache = match &prepared.cache {
                Some(c) if c.k() >= aug.k => c,
                _ => {
                    built = NeighborCache::build(&prepared.dataset, aug.k)?;
                    &built
                }
            };
            let full;
            let stats_real = match config.stats_scope {
                StatsScope::Train => &split.train,
                StatsScope::Full => {
                    full = prepared.dataset.interaction_matrix();
                    &full
                }
            };
            let names = prepared.dataset.modality_names();
            Some(augment_train(
                &split.train,
                stats_real,
                &names,
                cache,
                aug,
                config.overlap_denominator,
            )?)
        }
    };
    let adjacency = augmentation.as_ref().map_or(&split.train, |a| &a.matrix);
    let sources: Vec<ModalitySource<'_>> = prepared
        .dataset
        .embeddings()
        .into_iter()
        .map(ModalitySource::Features)
        .collect();
    let training = train(split, adjacency, &sources, &config.train)?;
    let metrics = match &prepared.cold {
        Some(cold) => cold_start_eval(&training.model, cold, config.eval_k),
        None => evaluate(&training.model, split, config.eval_k),
    };
    Ok(PipelineRun {
        augmentation,
        training,
        metrics,
    })
}

pub fn run_pipeline(dataset: &Dataset, config: &PipelineConfig) -> Result<PipelineRun> {
    let prepared = prepare(dataset, config, config.augment.map(|a| a.k))?;
    run_prepared(&prepared, config)
}

pub const SWEEP_LAMBDAS: [f64; 4] = [1e-3, 5e-3, 1e-2, 5e-2];
pub const SWEEP_KS: [usize; 3] = [5, 10, 20];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub lambda: f64,
    pub k: usize,
    /// `(recall, ndcg)` or the error that stopped the cell.
    pub result: std::result::Result<(f64, f64), String>,
}

/// Grid of pipeline runs over `lambdas × ks`. Duplicate grid points run once;
/// a failing cell is recorded and the sweep moves on. Every cell uses the
/// same split and training seed, so cells differ only in the grid values.
pub fn sweep(dataset: &Dataset, base: &PipelineConfig, lambdas: &[f64], ks: &[usize]) -> Result<Vec<SweepCell>> {
    let mut grid_lambdas: Vec<f64> = Vec::new();
    for &l in lambdas {
        if !grid_lambdas.iter().any(|x| x.to_bits() == l.to_bits()) {
            grid_lambdas.push(l);
        }
    }
    let mut grid_ks: Vec<usize> = Vec::new();
    for &k in ks {
        if !grid_ks.contains(&k) {
            grid_ks.push(k);
        }
    }
    if grid_lambdas.is_empty() || grid_ks.is_empty() {
        return Err(invalid!("sweep grid is empty"));
    }
    let template = base.augment.unwrap_or_default();
    let max_k = grid_ks.iter().copied().filter(|&k| k > 0).max();
    let prepared = prepare(dataset, base, max_k)?;
    let mut cells = Vec::with_capacity(grid_lambdas.len() * grid_ks.len());
    for &lambda in &grid_lambdas {
        for &k in &grid_ks {
            let config = PipelineConfig {
                augment: Some(AugmentConfig { lambda, k, ..template }),
                ..base.clone()
            };
            let result = run_prepared(&prepared, &config)
                .map(|run| (run.metrics.recall, run.metrics.ndcg))
                .map_err(|e| e.to_string());
            cells.push(SweepCell { lambda, k, result });
        }
    }
    Ok(cells)
}

/// `lambda,k,recall@10,ndcg@10,error` with empty metric fields on failure.
pub fn sweep_csv(cells: &[SweepCell], eval_k: usize) -> String {
    let mut out = format!("lambda,k,recall@{eval_k},ndcg@{eval_k},error\n");
    for c in cells {
        match &c.result {
            Ok((r, n)) => out.push_str(&format!("{},{},{r:.9},{n:.9},\n", c.lambda, c.k)),
            Err(e) => out.push_str(&format!("{},{},,,\"{}\"\n", c.lambda, c.k, e.replace('"', "'"))),
        }
    }
    out
}

/// The cell with the highest recall (first on ties).
pub fn best_cell(cells: &[SweepCell]) -> Option<&SweepCell> {
    cells
        .iter()
        .filter(|c| c.result.is_ok())
        .fold(None, |best: Option<&SweepCell>, c| match best {
            Some(b) if b.result.as_ref().unwrap().0 >= c.result.as_ref().unwrap().0 => Some(b),
            _ => Some(c),
        })
}
