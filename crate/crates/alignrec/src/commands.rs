//! The pipeline behind each subcommand. Every command reads the run
//! configuration, writes its artifacts under `paths.output_dir` and returns
//! the text it wants printed.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use alignrec_core::data::{kcore_filter, split_dataset, SplitStrategy};
use alignrec_core::eval::{self, EvalReport, Split};
use alignrec_core::model;
use alignrec_core::protocols::{itemcf_eval, mask_modality_eval, zero_shot_eval, BaseProtocol};
use alignrec_core::trainer::{
    self, CheckpointKind, EpochRecord, FitOutput, TrainObserver, SELECTION_K,
};
use alignrec_core::{
    CoreError, Dataset, FeatureMatrix, GraphBundle, ModelParams, Representations, TrainConfig,
    TrainState,
};

use crate::checkpoint::{kind_name, read_checkpoint, write_checkpoint, Checkpoint};
use crate::config::RunConfig;
use crate::dataset::{DatasetDir, Manifest};
use crate::error::{Error, Result};
use crate::features::{align_features, load_aligned, read_features, read_keys};
use crate::graphcache::{self, file_digest, graph_key, hex};
use crate::interactions::load_interactions;
use crate::parallel;
use crate::report::{epoch_line, report_block, report_line};

pub const TRAIN_LOG: &str = "train.log";
pub const TIMING_LOG: &str = "train.timing";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const GRAPH_CACHE: &str = "graphs.agrf";

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.paths.output_dir.join(name)
}

fn ensure_output_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.paths.output_dir).map_err(|e| Error::io(&cfg.paths.output_dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    crate::binfmt::write_atomic(path, text.as_bytes())
}

/// Load, k-core filter and split the interaction log.
pub fn prepare(cfg: &RunConfig) -> Result<String> {
    let src = cfg.require(&cfg.paths.interactions, "interactions")?;
    let raw = load_interactions(src)?;
    log::info!(
        "loaded {} interactions ({} users, {} items)",
        raw.len(),
        raw.num_users(),
        raw.num_items()
    );
    let filtered = kcore_filter(&raw, cfg.data.kcore)?;
    log::info!(
        "{}-core keeps {} interactions ({} users, {} items)",
        cfg.data.kcore,
        filtered.len(),
        filtered.num_users(),
        filtered.num_items()
    );
    let strategy = cfg.split_strategy()?;
    let ratios = cfg.split_ratios();
    let ds = split_dataset(&filtered, ratios, cfg.data.split_seed, strategy)?;
    let manifest = Manifest::describe(
        &ds,
        raw.len(),
        cfg.data.kcore,
        cfg.data.split_seed,
        ratios,
        strategy,
    );
    ensure_output_dir(cfg)?;
    DatasetDir::new(cfg.dataset_dir()).write(&ds, &filtered, &manifest)?;
    Ok(manifest.to_text())
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let dir = DatasetDir::new(cfg.dataset_dir());
    if !dir.path(crate::dataset::MANIFEST).exists() {
        return Err(Error::Config(format!(
            "no prepared dataset in {}; run `prepare` first",
            dir.root.display()
        )));
    }
    dir.load()
}

pub fn load_features(cfg: &RunConfig, ds: &Dataset) -> Result<FeatureMatrix> {
    let f = cfg.require(&cfg.paths.features, "features")?;
    let k = cfg.require(&cfg.paths.item_keys, "item_keys")?;
    load_aligned(f, k, &ds.items)
}

/// Similarity and interaction graphs, reused from the cache when its key
/// matches.
pub fn load_graphs(cfg: &RunConfig, ds: &Dataset, feat: &FeatureMatrix) -> Result<GraphBundle> {
    let k = cfg.train.knn_k;
    let key = graph_key(ds, feat, k);
    let path = out_path(cfg, GRAPH_CACHE);
    if let Some(g) = graphcache::load(&path, &key) {
        log::info!("using cached graphs {}", hex(&key));
        return Ok(g);
    }
    let g = parallel::build_graphs(ds, feat, k)?;
    ensure_output_dir(cfg)?;
    graphcache::store(&path, &key, &g)?;
    let record = format!(
        "hash={}\nknn_k={k}\nadjacency_nnz={}\ninteraction_nnz={}\nsimilarity_nnz={}\n",
        hex(&key),
        g.adj_norm.nnz(),
        g.inter_norm.nnz(),
        g.sim.nnz()
    );
    write_text(&out_path(cfg, "graphs.txt"), &record)?;
    Ok(g)
}

pub fn load_inputs(cfg: &RunConfig) -> Result<(Dataset, FeatureMatrix, GraphBundle)> {
    let ds = load_dataset(cfg)?;
    let feat = load_features(cfg, &ds)?;
    let graphs = load_graphs(cfg, &ds, &feat)?;
    Ok((ds, feat, graphs))
}

/// Validates on all cores; no files.
pub struct ParallelValidation;

impl TrainObserver for ParallelValidation {
    fn validate(&mut self, reps: &Representations, ds: &Dataset) -> EvalReport {
        parallel::evaluate(reps, ds, Split::Val, &[SELECTION_K])
    }
}

/// Writes the training log, the timing sidecar and checkpoints. The first
/// write error is kept and reported once training returns.
struct RunObserver {
    cfg_text: String,
    out_dir: PathBuf,
    log: BufWriter<File>,
    timing: BufWriter<File>,
    start: Instant,
    error: Option<Error>,
}

impl RunObserver {
    fn keep(&mut self, r: Result<()>) {
        if let Err(e) = r {
            if self.error.is_none() {
                self.error = Some(e);
            }
        }
    }

    fn line(w: &mut BufWriter<File>, path: &Path, text: &str) -> Result<()> {
        writeln!(w, "{text}")
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

impl TrainObserver for RunObserver {
    fn validate(&mut self, reps: &Representations, ds: &Dataset) -> EvalReport {
        parallel::evaluate(reps, ds, Split::Val, &[SELECTION_K])
    }

    fn on_epoch(&mut self, record: &EpochRecord, _state: &TrainState) {
        let log_path = self.out_dir.join(TRAIN_LOG);
        let r = Self::line(&mut self.log, &log_path, &epoch_line(record));
        self.keep(r);
        let t = format!(
            "epoch={} wall_seconds={:.3}",
            record.stats.epoch,
            self.start.elapsed().as_secs_f64()
        );
        let timing_path = self.out_dir.join(TIMING_LOG);
        let r = Self::line(&mut self.timing, &timing_path, &t);
        self.keep(r);
        log::info!("{}", epoch_line(record));
    }

    fn on_checkpoint(&mut self, kind: CheckpointKind, state: &TrainState) {
        let name = match kind {
            CheckpointKind::Best => BEST_CHECKPOINT,
            CheckpointKind::Final | CheckpointKind::Failed => FINAL_CHECKPOINT,
        };
        let ck = Checkpoint {
            kind,
            config: self.cfg_text.clone(),
            state: state.clone(),
        };
        let r = write_checkpoint(&self.out_dir.join(name), &ck);
        self.keep(r);
    }
}

fn open_log(path: &Path, append: bool) -> Result<BufWriter<File>> {
    let f = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(f))
}

fn check_shape(
    params: &ModelParams,
    ds: &Dataset,
    feat: &FeatureMatrix,
    cfg: &TrainConfig,
) -> Result<()> {
    let want = (
        ds.num_users,
        ds.num_items,
        feat.dim(),
        cfg.model.d_e,
        cfg.model.d_h,
    );
    let got = (
        params.num_users(),
        params.num_items(),
        params.d_f(),
        params.d_e(),
        params.d_h(),
    );
    if want != got {
        return Err(CoreError::Dimension(format!(
            "checkpoint is for (users, items, d_f, d_e, d_h) = {got:?}, configuration gives {want:?}"
        ))
        .into());
    }
    Ok(())
}

fn test_reports(cfg: &RunConfig, reps: &Representations, ds: &Dataset) -> Vec<EvalReport> {
    let mut out = vec![parallel::evaluate(reps, ds, Split::Test, &cfg.eval.ks)];
    if cfg.eval.long_tail {
        out.push(parallel::longtail_evaluate(
            reps,
            ds,
            &cfg.eval.ks,
            cfg.eval.long_tail_threshold,
        ));
    }
    out
}

/// Trains from scratch, or from `resume` when given, then evaluates the
/// selected parameters on the test split.
pub fn train(cfg: &RunConfig, resume: Option<&Path>) -> Result<String> {
    let tc = cfg.train_config()?;
    let (ds, feat, graphs) = load_inputs(cfg)?;
    ensure_output_dir(cfg)?;
    let state = match resume {
        Some(p) => {
            let ck = read_checkpoint(p)?;
            check_shape(&ck.state.params, &ds, &feat, &tc)?;
            log::info!(
                "resuming from {} ({}, epoch {})",
                p.display(),
                kind_name(ck.kind),
                ck.state.epoch
            );
            ck.state
        }
        None => TrainState::init(ds.num_users, ds.num_items, feat.dim(), &tc),
    };
    let out_dir = cfg.paths.output_dir.clone();
    let mut obs = RunObserver {
        cfg_text: cfg.to_toml(),
        log: open_log(&out_dir.join(TRAIN_LOG), resume.is_some())?,
        timing: open_log(&out_dir.join(TIMING_LOG), resume.is_some())?,
        out_dir,
        start: Instant::now(),
        error: None,
    };
    let fitted = trainer::fit_from(state, &ds, &graphs, &feat, &tc, &mut obs);
    if let Some(e) = obs.error.take() {
        return Err(e);
    }
    let out: FitOutput = fitted?;
    let reps = model::forward(&out.params, &graphs, &feat, tc.model.gcn_layers)?;
    let reports = test_reports(cfg, &reps, &ds);
    let tags = |best: usize| {
        vec![
            ("split", "test".to_string()),
            ("best_epoch", best.to_string()),
        ]
    };
    let mut block = String::new();
    let log_path = cfg.paths.output_dir.join(TRAIN_LOG);
    for r in &reports {
        RunObserver::line(
            &mut obs.log,
            &log_path,
            &report_line(&tags(out.best_epoch), r),
        )?;
        block.push_str(&report_block(&tags(out.best_epoch), r));
    }
    write_text(&out_path(cfg, "test_report.txt"), &block)?;
    Ok(block)
}

fn checkpoint_params(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    ds: &Dataset,
    feat: &FeatureMatrix,
) -> Result<ModelParams> {
    let default = out_path(cfg, BEST_CHECKPOINT);
    let path = checkpoint.unwrap_or(&default);
    let ck = read_checkpoint(path)?;
    let tc = cfg.train_config()?;
    check_shape(&ck.state.best_params, ds, feat, &tc)?;
    Ok(ck.state.best_params)
}

/// Test-split metrics of a checkpoint's selected parameters.
pub fn evaluate(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<String> {
    let (ds, feat, graphs) = load_inputs(cfg)?;
    let params = checkpoint_params(cfg, checkpoint, &ds, &feat)?;
    let reps = model::forward(&params, &graphs, &feat, cfg.train.gcn_layers)?;
    let mut block = String::new();
    for r in test_reports(cfg, &reps, &ds) {
        block.push_str(&report_block(&[("split", "test".to_string())], &r));
    }
    write_text(&out_path(cfg, "eval.txt"), &block)?;
    Ok(block)
}

/// Top-`k` unseen items for one user as `item<TAB>score` lines.
pub fn recommend(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    user: &str,
    k: usize,
) -> Result<String> {
    let (ds, feat, graphs) = load_inputs(cfg)?;
    let u = ds
        .users
        .index(user)
        .ok_or_else(|| Error::Lookup(format!("unknown user {user:?}")))?;
    let params = checkpoint_params(cfg, checkpoint, &ds, &feat)?;
    let reps = model::forward(&params, &graphs, &feat, cfg.train.gcn_layers)?;
    let seen = &ds.user_train_items()[u];
    let scores = eval::score_items(&reps.h_users, &reps.h_items, u);
    let mut out = String::new();
    for i in eval::rank_all(&reps, u, seen).into_iter().take(k) {
        out.push_str(&format!("{}\t{}\n", ds.items.key(i), scores[i]));
    }
    Ok(out)
}

/// Runs the enabled feature-quality protocols on a temporal
/// leave-one-out split of the filtered interactions.
pub fn intermediate(cfg: &RunConfig) -> Result<String> {
    let dir = DatasetDir::new(cfg.dataset_dir());
    let filtered = if dir.path(crate::dataset::FILTERED).exists() {
        dir.filtered()?
    } else {
        kcore_filter(
            &load_interactions(cfg.require(&cfg.paths.interactions, "interactions")?)?,
            cfg.data.kcore,
        )?
    };
    let ds = split_dataset(
        &filtered,
        cfg.split_ratios(),
        cfg.data.split_seed,
        SplitStrategy::TemporalLeaveOneOut,
    )?;
    let feat_path = cfg.require(&cfg.paths.features, "features")?;
    let keys_path = cfg.require(&cfg.paths.item_keys, "item_keys")?;
    let feat = load_aligned(feat_path, keys_path, &ds.items)?;
    let digest = file_digest(feat_path)?;
    let pc = cfg.protocol_config();
    let mut block = String::new();
    let mut emit = |tags: Vec<(&str, String)>, r: &EvalReport| {
        block.push_str(&report_block(&tags, r));
        block.push('\n');
    };
    if cfg.protocol.zero_shot {
        let r = zero_shot_eval(&feat, &ds, &pc)?;
        emit(
            vec![
                ("protocol", "zero-shot".into()),
                ("features", digest.clone()),
            ],
            &r,
        );
    }
    if cfg.protocol.item_cf {
        let r = itemcf_eval(&feat, &ds, &pc)?;
        emit(
            vec![("protocol", "item-cf".into()), ("features", digest.clone())],
            &r,
        );
    }
    if cfg.protocol.mask_modality {
        let masked_path = cfg.require(&cfg.paths.masked_features, "masked_features")?;
        let masked_raw = read_features(masked_path, None)?;
        let masked = align_features(&masked_raw, &read_keys(keys_path)?, &ds.items)?;
        let base = cfg.mask_base()?;
        let r = mask_modality_eval(&feat, &masked, &pc, base, &ds)?;
        let base_name = match base {
            BaseProtocol::ZeroShot => "zero-shot",
            BaseProtocol::ItemCf => "item-cf",
        };
        emit(
            vec![
                ("protocol", format!("mask-modality/{base_name}")),
                ("mask_ratio", pc.mask_ratio.to_string()),
                ("mask_seed", pc.mask_seed.to_string()),
                ("masking", "row-replacement".into()),
                ("features", digest.clone()),
                ("masked_features", file_digest(masked_path)?),
            ],
            &r,
        );
    }
    ensure_output_dir(cfg)?;
    write_text(&out_path(cfg, "intermediate.txt"), &block)?;
    Ok(block)
}

fn axis(values: &[f64], current: f64) -> Vec<f64> {
    if values.is_empty() {
        vec![current]
    } else {
        values.to_vec()
    }
}

/// Sequential sweep over the grid section; one table row per point.
pub fn grid(cfg: &RunConfig) -> Result<String> {
    let (ds, feat, graphs) = load_inputs(cfg)?;
    let base = cfg.train_config()?;
    let ks = eval::normalize_ks(&cfg.eval.ks);
    let mut header = vec![
        "learning_rate",
        "alpha",
        "beta",
        "lambda",
        "best_epoch",
        "val_recall@20",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    header.extend(ks.iter().map(|k| format!("test_recall@{k}")));
    header.extend(ks.iter().map(|k| format!("test_ndcg@{k}")));
    let mut table = header.join("\t");
    table.push('\n');
    for &lr in &axis(&cfg.grid.learning_rate, base.learning_rate) {
        for &alpha in &axis(&cfg.grid.alpha, base.weights.alpha) {
            for &beta in &axis(&cfg.grid.beta, base.weights.beta) {
                for &lambda in &axis(&cfg.grid.lambda, base.weights.lambda) {
                    let mut tc = base.clone();
                    tc.learning_rate = lr;
                    tc.weights.alpha = alpha;
                    tc.weights.beta = beta;
                    tc.weights.lambda = lambda;
                    let mut row = vec![
                        lr.to_string(),
                        alpha.to_string(),
                        beta.to_string(),
                        lambda.to_string(),
                    ];
                    match trainer::fit(&ds, &graphs, &feat, &tc, &mut ParallelValidation) {
                        Ok(out) => {
                            let reps =
                                model::forward(&out.params, &graphs, &feat, tc.model.gcn_layers)?;
                            let r = parallel::evaluate(&reps, &ds, Split::Test, &ks);
                            row.push(out.best_epoch.to_string());
                            row.push(out.best_recall.to_string());
                            row.extend(r.metrics.iter().map(|m| m.recall.to_string()));
                            row.extend(r.metrics.iter().map(|m| m.ndcg.to_string()));
                        }
                        Err(e @ CoreError::Diverged { .. }) => {
                            log::warn!(
                                "grid point lr={lr} alpha={alpha} beta={beta} lambda={lambda}: {e}"
                            );
                            row.push("diverged".into());
                        }
                        Err(e) => return Err(e.into()),
                    }
                    table.push_str(&row.join("\t"));
                    table.push('\n');
                }
            }
        }
    }
    ensure_output_dir(cfg)?;
    write_text(&out_path(cfg, "grid.tsv"), &table)?;
    Ok(table)
}
