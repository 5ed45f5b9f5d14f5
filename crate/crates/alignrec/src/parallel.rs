//! Multi-threaded evaluation and similarity-graph construction. Work is
//! split per user or per item row and gathered in index order, so results
//! are bit-identical to the sequential versions in the core crate.

use alignrec_core::eval::{self, normalize_ks, EvalReport, Slice, Split, UserTask};
use alignrec_core::graph::{
    build_norm_adjacency, build_norm_interaction, knn_prepare, knn_row, normalize_knn,
};
use alignrec_core::{Dataset, FeatureMatrix, GraphBundle, Representations};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "ALIGNREC_THREADS";

/// Thread cap from the environment; 0 or unset lets the pool decide.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::Config(format!("{THREADS_ENV}={v:?} is not a non-negative integer"))
        }),
        Err(_) => Ok(0),
    }
}

pub fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
}

pub fn run_tasks(
    reps: &Representations,
    tasks: &[UserTask],
    ks: &[usize],
    slice: Slice,
    skipped: usize,
) -> EvalReport {
    let ks = normalize_ks(ks);
    let per: Vec<Vec<(f64, f64)>> = tasks
        .par_iter()
        .map(|t| eval::evaluate_task(&reps.h_users, &reps.h_items, t, &ks))
        .collect();
    eval::reduce(slice, &ks, &per, skipped)
}

pub fn evaluate(reps: &Representations, ds: &Dataset, split: Split, ks: &[usize]) -> EvalReport {
    run_tasks(reps, &eval::plan(ds, split), ks, Slice::Full, 0)
}

pub fn longtail_evaluate(
    reps: &Representations,
    ds: &Dataset,
    ks: &[usize],
    threshold: usize,
) -> EvalReport {
    let (tasks, skipped) = eval::longtail_plan(ds, threshold);
    run_tasks(reps, &tasks, ks, Slice::LongTail, skipped)
}

pub fn build_graphs(ds: &Dataset, feat: &FeatureMatrix, k_prime: usize) -> Result<GraphBundle> {
    feat.expect_rows(ds.num_items)?;
    let adj = build_norm_adjacency(ds)?;
    let inter = build_norm_interaction(ds)?;
    let norms = knn_prepare(feat, k_prime)?;
    let rows: Vec<Vec<(usize, f64)>> = (0..feat.rows())
        .into_par_iter()
        .map(|i| knn_row(feat, &norms, i, k_prime))
        .collect();
    let sim = normalize_knn(rows)?;
    Ok(GraphBundle::from_parts(adj, inter, sim)?)
}
