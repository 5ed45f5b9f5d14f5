//! All-ranking top-K evaluation.
//!
//! Every candidate item is scored for a user, seen items are masked, and the
//! rest are ordered by descending score with ties going to the lower item
//! index. Metrics are averaged over users in ascending user order so the
//! floating-point reduction is reproducible.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::dense::Matrix;
use crate::math::{dot, log2};
use crate::model::Representations;

pub const DEFAULT_KS: [usize; 3] = [10, 20, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slice {
    Full,
    LongTail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMetrics {
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub slice: Slice,
    /// One entry per requested K, ascending.
    pub metrics: Vec<KMetrics>,
    pub users_evaluated: usize,
    /// Entities that had nothing to evaluate.
    pub skipped: usize,
}

impl EvalReport {
    pub fn at(&self, k: usize) -> Option<&KMetrics> {
        self.metrics.iter().find(|m| m.k == k)
    }

    pub fn recall(&self, k: usize) -> f64 {
        self.at(k).map_or(0.0, |m| m.recall)
    }

    pub fn ndcg(&self, k: usize) -> f64 {
        self.at(k).map_or(0.0, |m| m.ndcg)
    }
}

/// Sorted, deduplicated copy of `ks`.
pub fn normalize_ks(ks: &[usize]) -> Vec<usize> {
    let mut v = ks.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Total ranking order: higher score first, then lower index. Both zeros
/// count as the same score.
#[inline]
pub fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> core::cmp::Ordering {
    score_key(b.1)
        .total_cmp(&score_key(a.1))
        .then(a.0.cmp(&b.0))
}

#[inline]
fn score_key(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// The `k` best `(index, score)` candidates in ranking order.
pub fn top_k(mut cand: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    if k == 0 {
        return Vec::new();
    }
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, rank_order);
        cand.truncate(k);
    }
    cand.sort_unstable_by(rank_order);
    cand
}

/// Inner-product scores of every item for one user.
pub fn score_items(h_users: &Matrix, h_items: &Matrix, user: usize) -> Vec<f64> {
    let hu = h_users.row(user);
    (0..h_items.rows())
        .map(|i| dot(hu, h_items.row(i)))
        .collect()
}

/// Full ranking of non-excluded items for `user`. `exclude` must be sorted.
pub fn rank_all(reps: &Representations, user: usize, exclude: &[usize]) -> Vec<usize> {
    let scores = score_items(&reps.h_users, &reps.h_items, user);
    let mut cand: Vec<(usize, f64)> = scores
        .into_iter()
        .enumerate()
        .filter(|(i, _)| exclude.binary_search(i).is_err())
        .collect();
    cand.sort_unstable_by(rank_order);
    cand.into_iter().map(|(i, _)| i).collect()
}

/// `|top-K ∩ relevant| / |relevant|`; `relevant` sorted.
pub fn recall_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let hits = ranked
        .iter()
        .take(k)
        .filter(|i| relevant.binary_search(i).is_ok())
        .count();
    hits as f64 / relevant.len() as f64
}

/// Binary-gain NDCG with `1 / log2(rank + 1)` discounts, ranks from 1.
pub fn ndcg_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut dcg = 0.0;
    for (pos, item) in ranked.iter().take(k).enumerate() {
        if relevant.binary_search(item).is_ok() {
            dcg += 1.0 / log2((pos + 2) as f64);
        }
    }
    let mut ideal = 0.0;
    for pos in 0..relevant.len().min(k) {
        ideal += 1.0 / log2((pos + 2) as f64);
    }
    dcg / ideal
}

/// What to evaluate for one user: masked items and relevant items, both sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserTask {
    pub user: usize,
    pub exclude: Vec<usize>,
    pub relevant: Vec<usize>,
}

/// Per-user evaluation tasks for a split, ascending by user. Test ranking
/// masks train and validation items; validation ranking masks train items.
pub fn plan(ds: &Dataset, split: Split) -> Vec<UserTask> {
    let train = ds.per_user(&ds.train);
    let (relevant, extra_mask) = match split {
        Split::Val => (ds.per_user(&ds.val), None),
        Split::Test => (ds.per_user(&ds.test), Some(ds.per_user(&ds.val))),
    };
    let mut tasks = Vec::new();
    for (user, rel) in relevant.into_iter().enumerate() {
        if rel.is_empty() {
            continue;
        }
        let mut exclude = train[user].clone();
        if let Some(extra) = &extra_mask {
            exclude.extend_from_slice(&extra[user]);
            exclude.sort_unstable();
        }
        tasks.push(UserTask {
            user,
            exclude,
            relevant: rel,
        });
    }
    tasks
}

/// `(recall, ndcg)` at each K for one task.
pub fn evaluate_task(
    h_users: &Matrix,
    h_items: &Matrix,
    task: &UserTask,
    ks: &[usize],
) -> Vec<(f64, f64)> {
    let max_k = ks.iter().copied().max().unwrap_or(0);
    let scores = score_items(h_users, h_items, task.user);
    let cand: Vec<(usize, f64)> = scores
        .into_iter()
        .enumerate()
        .filter(|(i, _)| task.exclude.binary_search(i).is_err())
        .collect();
    let ranked: Vec<usize> = top_k(cand, max_k).into_iter().map(|(i, _)| i).collect();
    ks.iter()
        .map(|&k| {
            (
                recall_at_k(&ranked, &task.relevant, k),
                ndcg_at_k(&ranked, &task.relevant, k),
            )
        })
        .collect()
}

/// Means of per-task metrics, summed in the order given.
pub fn reduce(
    slice: Slice,
    ks: &[usize],
    per_task: &[Vec<(f64, f64)>],
    skipped: usize,
) -> EvalReport {
    let mut sums = vec![(0.0, 0.0); ks.len()];
    for row in per_task {
        for (s, m) in sums.iter_mut().zip(row) {
            s.0 += m.0;
            s.1 += m.1;
        }
    }
    let n = per_task.len();
    let metrics = ks
        .iter()
        .zip(sums)
        .map(|(&k, (r, g))| KMetrics {
            k,
            recall: if n == 0 { 0.0 } else { r / n as f64 },
            ndcg: if n == 0 { 0.0 } else { g / n as f64 },
        })
        .collect();
    EvalReport {
        slice,
        metrics,
        users_evaluated: n,
        skipped,
    }
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
        .iter()
        .map(|t| evaluate_task(&reps.h_users, &reps.h_items, t, &ks))
        .collect();
    reduce(slice, &ks, &per, skipped)
}

/// All-ranking Recall@K and NDCG@K over users with at least one interaction
/// in `split`.
pub fn evaluate(reps: &Representations, ds: &Dataset, split: Split, ks: &[usize]) -> EvalReport {
    run_tasks(reps, &plan(ds, split), ks, Slice::Full, 0)
}

/// Test-split tasks restricted to items with fewer than `threshold` training
/// interactions; users left with nothing relevant are dropped.
pub fn longtail_plan(ds: &Dataset, threshold: usize) -> (Vec<UserTask>, usize) {
    let mut skipped = 0;
    let tasks = plan(ds, Split::Test)
        .into_iter()
        .filter_map(|mut t| {
            t.relevant.retain(|&i| ds.item_train_degree[i] < threshold);
            if t.relevant.is_empty() {
                skipped += 1;
                None
            } else {
                Some(t)
            }
        })
        .collect();
    (tasks, skipped)
}

pub fn longtail_evaluate(
    reps: &Representations,
    ds: &Dataset,
    ks: &[usize],
    threshold: usize,
) -> EvalReport {
    let (tasks, skipped) = longtail_plan(ds, threshold);
    run_tasks(reps, &tasks, ks, Slice::LongTail, skipped)
}

/// Expected Recall@K of a uniformly random ranking of every task's candidates.
pub fn random_recall(ds: &Dataset, split: Split, k: usize) -> f64 {
    let tasks = plan(ds, split);
    if tasks.is_empty() {
        return 0.0;
    }
    let sum: f64 = tasks
        .iter()
        .map(|t| {
            let n = ds.num_items - t.exclude.len();
            if n == 0 {
                0.0
            } else {
                k.min(n) as f64 / n as f64
            }
        })
        .sum();
    sum / tasks.len() as f64
}
