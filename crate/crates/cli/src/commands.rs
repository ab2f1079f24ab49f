use std::collections::BTreeMap;
use std::error::Error as StdError;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use vimm_core::augment::{load_augmented, save_augmented, AugmentConfig};
use vimm_core::corpus::{
    generate_synthetic, load_dataset_dir, read_interactions, save_dataset_dir, split_interactions, Dataset,
    SplitBundle, SplitRatios, SynthConfig, EMBEDDING_EXTENSION, INTERACTIONS_FILE,
};
use vimm_core::eval::{
    cold_start_eval, cold_start_split, evaluate, parse_groups, sparsity_group_eval, ColdStartSplit, RankingMetrics,
};
use vimm_core::pipeline::{
    augment_train, best_cell, build_virtual_set, prepare, sweep, sweep_csv, NeighborCache, PipelineConfig, Prepared,
    StatsScope,
};
use vimm_core::recsys::{load_checkpoint, save_checkpoint, train, ItemInit, ModalitySource, TrainConfig};
use vimm_core::simgraph::{read_table_dump, write_table_dump, TableSource};
use vimm_core::stats::{o_avg_analytic, o_avg_exact, o_avg_montecarlo, render_investigation_table};
use vimm_core::InteractionMatrix;

use crate::{
    AugmentArgs, Command, DataArgs, EvalArgs, InvestigateArgs, StatsArgs, SweepArgs, SynthArgs, TrainArgs, TrainOptions,
};

type Result<T> = std::result::Result<T, Box<dyn StdError + Send + Sync>>;

pub fn run(command: &Command, run_dir: &Path) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a, run_dir),
        Command::Investigate(a) => investigate(a, run_dir),
        Command::Augment(a) => augment(a, run_dir),
        Command::Train(a) => train_cmd(a, run_dir),
        Command::Eval(a) => eval(a, run_dir),
        Command::Sweep(a) => sweep_cmd(a, run_dir),
    }
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}

fn base_config(data: &DataArgs) -> PipelineConfig {
    PipelineConfig {
        augment: None,
        split_seed: data.split_seed,
        noise_level: data.noise_level,
        error_level: data.error_level,
        perturb_seed: data.perturb_seed,
        holdout: data.holdout,
        holdout_seed: data.holdout_seed,
        ..PipelineConfig::default()
    }
}

fn with_stats(mut cfg: PipelineConfig, stats: &StatsArgs) -> PipelineConfig {
    cfg.overlap_denominator = stats.overlap_denominator;
    cfg.stats_scope = stats.stats_scope;
    cfg
}

fn train_config(t: &TrainOptions) -> TrainConfig {
    TrainConfig {
        learning_rate: t.learning_rate,
        epochs: t.epochs,
        batch_size: t.batch_size,
        layers: t.layers,
        dim: t.dim,
        seed: t.seed,
        regularization: t.regularization,
        norm: t.norm,
        patience: t.patience,
        eval_k: t.top_k,
        item_init: t.item_init,
        bpr_source: t.bpr_source,
    }
}

fn load_prepared(data: &DataArgs, cfg: &PipelineConfig) -> Result<Prepared> {
    let ds = load_dataset_dir(&data.data)?;
    Ok(prepare(&ds, cfg, None)?)
}

/// The split of a dataset directory built from the interaction file alone.
/// Modality features only enter through noise and item swaps, so neither
/// level changes it.
struct BareSplit {
    split: SplitBundle,
    cold: Option<ColdStartSplit>,
    /// Modality names taken from the embedding file names; the files are
    /// not opened.
    names: Vec<String>,
}

impl BareSplit {
    fn load(data: &DataArgs) -> Result<Self> {
        let (users, items, pairs) = read_interactions(&data.data.join(INTERACTIONS_FILE))?;
        let split = split_interactions(users, items, &pairs, SplitRatios::default(), data.split_seed)?;
        let cold = if data.holdout > 0.0 {
            Some(cold_start_split(&split, data.holdout, data.holdout_seed)?)
        } else {
            None
        };
        Ok(BareSplit {
            split,
            cold,
            names: modality_names(&data.data)?,
        })
    }

    fn training_split(&self) -> &SplitBundle {
        self.cold.as_ref().map_or(&self.split, |c| &c.split)
    }
}

fn modality_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(EMBEDDING_EXTENSION) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(format!("{}: no .{EMBEDDING_EXTENSION} files", dir.display()).into());
    }
    Ok(names)
}

/// Hash of every modality's name, shape and raw values.
fn fingerprint(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    for (name, emb) in &ds.modalities {
        h.update(name.as_bytes());
        h.update([0]);
        h.update((emb.item_count() as u64).to_le_bytes());
        h.update((emb.dim() as u64).to_le_bytes());
        for v in emb.as_slice() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Neighbor tables at `k`, read from and written to `cache_dir` when given.
fn neighbor_cache(ds: &Dataset, k: usize, cache_dir: Option<&Path>) -> Result<NeighborCache> {
    let Some(dir) = cache_dir else {
        return Ok(NeighborCache::build(ds, k)?);
    };
    let fp = &fingerprint(ds)[..16];
    let path = |label: &str| dir.join(format!("{fp}-{label}-k{k}.tsv"));
    let names = ds.modality_names();
    let all: Vec<PathBuf> = names.iter().map(|n| path(n)).chain([path("synergistic")]).collect();
    if all.iter().all(|p| p.is_file()) {
        let mut modalities = Vec::with_capacity(names.len());
        for (name, p) in names.iter().zip(&all) {
            modalities.push(read_table_dump(
                p,
                TableSource::Modality(name.clone()),
                k,
                ds.item_count,
            )?);
        }
        let synergistic = read_table_dump(&path("synergistic"), TableSource::Synergistic, k, ds.item_count)?;
        let cache = NeighborCache {
            modalities,
            synergistic,
        };
        for t in &cache.modalities {
            t.validate(1)?;
        }
        cache.synergistic.validate(names.len())?;
        return Ok(cache);
    }
    let cache = NeighborCache::build(ds, k)?;
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    for (t, p) in cache.modalities.iter().chain([&cache.synergistic]).zip(&all) {
        write_table_dump(t, p)?;
    }
    Ok(cache)
}

fn stats_matrix(prepared: &Prepared, scope: StatsScope) -> InteractionMatrix {
    match scope {
        StatsScope::Train => prepared.training_split().train.clone(),
        StatsScope::Full => prepared.dataset.interaction_matrix(),
    }
}

fn synth(a: &SynthArgs, run_dir: &Path) -> Result<()> {
    let dims: BTreeMap<String, usize> = a.dims.iter().cloned().collect();
    if dims.len() != a.dims.len() {
        return Err("duplicate modality name in --dims".into());
    }
    let cfg = SynthConfig::new(a.users, a.items, a.clusters, a.per_user, dims, a.affinity_noise, a.seed);
    let ds = generate_synthetic(&cfg)?;
    save_dataset_dir(&ds, run_dir)?;
    println!(
        "wrote {} users, {} items, {} interactions, modalities {} to {}",
        ds.user_count,
        ds.item_count,
        ds.interactions.len(),
        ds.modality_names().join(","),
        run_dir.display()
    );
    Ok(())
}

fn investigate(a: &InvestigateArgs, run_dir: &Path) -> Result<()> {
    if a.k.is_empty() || a.k.contains(&0) {
        return Err("--k needs positive values".into());
    }
    let cfg = with_stats(base_config(&a.data), &a.stats);
    let prepared = load_prepared(&a.data, &cfg)?;
    let real = stats_matrix(&prepared, cfg.stats_scope);
    let max_k = *a.k.iter().max().unwrap();
    let cache = neighbor_cache(&prepared.dataset, max_k, a.cache_dir.as_deref())?;
    let names = prepared.dataset.modality_names();
    let mut reports = Vec::with_capacity(a.k.len());
    for &k in &a.k {
        reports.push(build_virtual_set(&real, &names, &cache, k, cfg.overlap_denominator)?.report);
    }
    let mut out = render_investigation_table(&reports);
    if a.montecarlo_trials > 0 {
        out.push('\n');
        let (u, i) = real.shape();
        for &k in &a.k {
            let mc = o_avg_montecarlo(u, i, &real, k, a.montecarlo_trials, a.montecarlo_seed)?;
            writeln!(
                out,
                "k={k}: O_avg analytic {:.6}, exact {:.6}, monte carlo {:.6} (se {:.6}, {} trials)",
                o_avg_analytic(u, i, real.nnz(), k),
                o_avg_exact(u, i, real.nnz(), k),
                mc.mean,
                mc.std_error,
                mc.trials
            )?;
        }
    }
    print!("{out}");
    write(run_dir.join("investigation.txt"), out)
}

fn augment(a: &AugmentArgs, run_dir: &Path) -> Result<()> {
    let cfg = with_stats(base_config(&a.data), &a.stats);
    let prepared = load_prepared(&a.data, &cfg)?;
    let aug = AugmentConfig {
        strategy: a.augment.strategy,
        lambda: a.augment.lambda,
        k: a.augment.k,
        ablation: a.augment.ablation,
    };
    let cache = neighbor_cache(&prepared.dataset, aug.k, a.cache_dir.as_deref())?;
    let train = &prepared.training_split().train;
    let stats_real = stats_matrix(&prepared, cfg.stats_scope);
    let names = prepared.dataset.modality_names();
    let out = augment_train(train, &stats_real, &names, &cache, &aug, cfg.overlap_denominator)?;
    save_augmented(&out.matrix, &run_dir.join("augmented.bin"))?;
    write(run_dir.join("weights.txt"), render_investigation_table(&[out.report]))?;
    println!(
        "nnz {} -> {}, density {:.6} -> {:.6}; wrote {}",
        train.nnz(),
        out.matrix.nnz(),
        train.density(),
        out.matrix.density(),
        run_dir.join("augmented.bin").display()
    );
    Ok(())
}

/// A stored matrix must match the training split it is paired with: same
/// shape, and every training interaction present.
fn check_adjacency(adjacency: &InteractionMatrix, split: &SplitBundle) -> Result<()> {
    adjacency.ensure_shape(split.user_count(), split.item_count(), "adjacency")?;
    if let Some((u, i)) = split.train.pairs().find(|&(u, i)| !adjacency.contains(u as usize, i)) {
        return Err(format!(
            "adjacency lacks training interaction ({u}, {i}); was it built with the same split and holdout?"
        )
        .into());
    }
    Ok(())
}

fn metrics_csv(rows: &[(String, Option<&RankingMetrics>)], k: usize) -> String {
    let mut out = format!("scope,users,recall@{k},ndcg@{k}\n");
    for (scope, m) in rows {
        match m {
            Some(m) => out.push_str(&format!("{scope},{},{:.9},{:.9}\n", m.users.len(), m.recall, m.ndcg)),
            None => out.push_str(&format!("{scope},0,,\n")),
        }
    }
    out
}

fn train_cmd(a: &TrainArgs, run_dir: &Path) -> Result<()> {
    let config = train_config(&a.train);
    let full;
    let bare;
    let (split, cold, sources): (&SplitBundle, Option<&ColdStartSplit>, Vec<ModalitySource<'_>>) =
        match config.item_init {
            ItemInit::Features => {
                full = load_prepared(&a.data, &base_config(&a.data))?;
                let sources = full
                    .dataset
                    .embeddings()
                    .into_iter()
                    .map(ModalitySource::Features)
                    .collect();
                (full.training_split(), full.cold.as_ref(), sources)
            }
            ItemInit::Random => {
                bare = BareSplit::load(&a.data)?;
                let sources = bare.names.iter().map(|n| ModalitySource::Named(n)).collect();
                (bare.training_split(), bare.cold.as_ref(), sources)
            }
        };
    let adjacency = match &a.adjacency {
        Some(path) => {
            let m = load_augmented(path)?;
            check_adjacency(&m, split)?;
            m
        }
        None => split.train.clone(),
    };
    let outcome = train(split, &adjacency, &sources, &config)?;
    save_checkpoint(&outcome.model, &run_dir.join("model.bin"))?;
    write(run_dir.join("metrics.csv"), outcome.metrics_csv())?;
    let test = match cold {
        Some(c) => ("cold", cold_start_eval(&outcome.model, c, config.eval_k)),
        None => ("test", evaluate(&outcome.model, split, config.eval_k)),
    };
    write(
        run_dir.join("test_metrics.csv"),
        metrics_csv(&[(test.0.to_string(), Some(&test.1))], config.eval_k),
    )?;
    println!(
        "best epoch {} of {}; {} recall@{k} {:.6} ndcg@{k} {:.6}; {:.4} s/epoch",
        outcome.best_epoch,
        outcome.history.len(),
        test.0,
        test.1.recall,
        test.1.ndcg,
        outcome.epoch_seconds,
        k = config.eval_k
    );
    Ok(())
}

fn eval(a: &EvalArgs, run_dir: &Path) -> Result<()> {
    let groups = parse_groups(&a.groups)?;
    let bare = BareSplit::load(&a.data)?;
    let split = bare.training_split();
    let model = load_checkpoint(&a.checkpoint)?;
    if (model.user_count, model.item_count) != (split.user_count(), split.item_count()) {
        return Err(format!(
            "checkpoint is {}x{}, dataset is {}x{}",
            model.user_count,
            model.item_count,
            split.user_count(),
            split.item_count()
        )
        .into());
    }
    let all = evaluate(&model, split, a.top_k);
    let by_group = sparsity_group_eval(&model, split, &groups, a.top_k);
    let cold = bare.cold.as_ref().map(|c| cold_start_eval(&model, c, a.top_k));
    let mut rows: Vec<(String, Option<&RankingMetrics>)> = vec![("all".into(), Some(&all))];
    rows.extend(by_group.iter().map(|(g, m)| (format!("group:{g}"), m.as_ref())));
    if let Some(c) = &cold {
        rows.push(("cold".into(), Some(c)));
    }
    let csv = metrics_csv(&rows, a.top_k);
    print!("{csv}");
    write(run_dir.join("eval.csv"), csv)
}

fn sweep_cmd(a: &SweepArgs, run_dir: &Path) -> Result<()> {
    let mut cfg = with_stats(base_config(&a.data), &a.stats);
    cfg.train = train_config(&a.train);
    cfg.eval_k = a.train.top_k;
    cfg.augment = Some(AugmentConfig {
        strategy: a.strategy,
        ablation: a.ablation,
        ..AugmentConfig::default()
    });
    let ds = load_dataset_dir(&a.data.data)?;
    let cells = sweep(&ds, &cfg, &a.lambdas, &a.ks)?;
    write(run_dir.join("sweep.csv"), sweep_csv(&cells, cfg.eval_k))?;
    for c in &cells {
        match &c.result {
            Ok((r, n)) => println!("lambda {} k {}: recall {r:.6} ndcg {n:.6}", c.lambda, c.k),
            Err(e) => println!("lambda {} k {}: failed: {e}", c.lambda, c.k),
        }
    }
    match best_cell(&cells) {
        Some(b) => println!("best: lambda {} k {}", b.lambda, b.k),
        None => return Err("every sweep cell failed".into()),
    }
    Ok(())
}
