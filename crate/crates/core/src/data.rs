//! Interaction logs, k-core filtering, splitting and the item feature matrix.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};

/// One raw `(user, item, timestamp)` record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub timestamp: u64,
}

impl Interaction {
    pub fn new(user: impl Into<String>, item: impl Into<String>, timestamp: u64) -> Self {
        Interaction {
            user: user.into(),
            item: item.into(),
            timestamp,
        }
    }
}

/// Deduplicated interaction log keyed by opaque user and item strings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawInteractions {
    records: Vec<Interaction>,
}

impl RawInteractions {
    /// Collapses duplicate `(user, item)` pairs, keeping the earliest timestamp.
    /// Surviving records keep the position of the pair's first occurrence.
    pub fn from_records(records: impl IntoIterator<Item = Interaction>) -> Self {
        let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
        let mut out: Vec<Interaction> = Vec::new();
        for rec in records {
            let key = (rec.user.clone(), rec.item.clone());
            match seen.get(&key) {
                Some(&idx) => {
                    if rec.timestamp < out[idx].timestamp {
                        out[idx].timestamp = rec.timestamp;
                    }
                }
                None => {
                    seen.insert(key, out.len());
                    out.push(rec);
                }
            }
        }
        RawInteractions { records: out }
    }

    pub fn records(&self) -> &[Interaction] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_users(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.user.as_str())
            .collect::<alloc::collections::BTreeSet<_>>()
            .len()
    }

    pub fn num_items(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.item.as_str())
            .collect::<alloc::collections::BTreeSet<_>>()
            .len()
    }
}

/// Removes users and items with fewer than `k` interactions until every
/// survivor has at least `k`.
///
/// Works by peeling: nodes under the threshold are queued, and removing a
/// node's edges may push its neighbours under the threshold in turn.
pub fn kcore_filter(raw: &RawInteractions, k: usize) -> Result<RawInteractions> {
    if k == 0 {
        return Err(CoreError::Config(
            "k-core threshold must be at least 1".into(),
        ));
    }
    let records = raw.records();
    let mut user_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut item_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(records.len());
    for r in records {
        let next = user_ids.len();
        let u = *user_ids.entry(r.user.as_str()).or_insert(next);
        let next = item_ids.len();
        let i = *item_ids.entry(r.item.as_str()).or_insert(next);
        edges.push((u, i));
    }
    let nu = user_ids.len();
    // Nodes: users [0, nu), items [nu, nu + ni).
    let n = nu + item_ids.len();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(u, i)) in edges.iter().enumerate() {
        incident[u].push(e);
        incident[nu + i].push(e);
    }
    let mut degree: Vec<usize> = incident.iter().map(Vec::len).collect();
    let mut alive = vec![true; edges.len()];
    let mut removed = vec![false; n];
    let mut queued = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for v in 0..n {
        if degree[v] < k {
            queued[v] = true;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        removed[v] = true;
        for &e in &incident[v] {
            if !alive[e] {
                continue;
            }
            alive[e] = false;
            let (u, i) = edges[e];
            let other = if v < nu { nu + i } else { u };
            degree[v] -= 1;
            degree[other] -= 1;
            if degree[other] < k && !queued[other] && !removed[other] {
                queued[other] = true;
                queue.push_back(other);
            }
        }
    }
    let kept: Vec<Interaction> = records
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(r, _)| r.clone())
        .collect();
    if kept.is_empty() {
        return Err(CoreError::EmptyAfterFilter { k });
    }
    Ok(RawInteractions { records: kept })
}

/// Bidirectional map between opaque keys and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    keys: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl IdMap {
    pub fn from_keys(keys: Vec<String>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, k) in keys.iter().enumerate() {
            if index.insert(k.clone(), i).is_some() {
                return Err(CoreError::Data(format!("duplicate key {k:?}")));
            }
        }
        Ok(IdMap { keys, index })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, idx: usize) -> &str {
        &self.keys[idx]
    }

    pub fn index(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const EIGHT_ONE_ONE: SplitRatios = SplitRatios {
        train: 0.8,
        val: 0.1,
        test: 0.1,
    };

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(CoreError::Config(format!(
                "split ratios must be non-negative: {self:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::Config(format!(
                "split ratios sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStrategy {
    /// Per-user shuffle, cut by ratios.
    Random,
    /// Each user's most recent interaction goes to test, the rest to train.
    TemporalLeaveOneOut,
}

/// Remapped, split interaction data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub num_users: usize,
    pub num_items: usize,
    pub train: Vec<(usize, usize)>,
    pub val: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
    pub item_train_degree: Vec<usize>,
    pub users: IdMap,
    pub items: IdMap,
}

impl Dataset {
    /// Assembles a dataset from explicit splits, checking index ranges and
    /// that no `(user, item)` pair appears twice across the splits.
    ///
    /// Train coverage of every user and item is not required here; graph
    /// construction rejects isolated nodes.
    pub fn from_parts(
        users: IdMap,
        items: IdMap,
        train: Vec<(usize, usize)>,
        val: Vec<(usize, usize)>,
        test: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let num_users = users.len();
        let num_items = items.len();
        let mut seen = alloc::collections::BTreeSet::new();
        for &(u, i) in train.iter().chain(&val).chain(&test) {
            if u >= num_users || i >= num_items {
                return Err(CoreError::Data(format!(
                    "interaction ({u}, {i}) out of range for {num_users} users x {num_items} items"
                )));
            }
            if !seen.insert((u, i)) {
                return Err(CoreError::Data(format!(
                    "interaction ({u}, {i}) appears twice"
                )));
            }
        }
        let mut item_train_degree = vec![0; num_items];
        for &(_, i) in &train {
            item_train_degree[i] += 1;
        }
        Ok(Dataset {
            num_users,
            num_items,
            train,
            val,
            test,
            item_train_degree,
            users,
            items,
        })
    }

    pub fn num_interactions(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    /// Sorted item lists per user for one set of interactions.
    pub fn per_user(&self, pairs: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_users];
        for &(u, i) in pairs {
            out[u].push(i);
        }
        for v in &mut out {
            v.sort_unstable();
        }
        out
    }

    pub fn user_train_items(&self) -> Vec<Vec<usize>> {
        self.per_user(&self.train)
    }

    /// Sorted user lists per item over the training split.
    pub fn item_train_users(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_items];
        for &(u, i) in &self.train {
            out[i].push(u);
        }
        for v in &mut out {
            v.sort_unstable();
        }
        out
    }
}

/// Remaps keys to dense indices (sorted key order) and splits every user's
/// interactions.
///
/// After the per-user cut, any item left without a training interaction gets
/// its first held-out interaction (lowest user index) moved back into train,
/// so every user and item index is trainable.
pub fn split_dataset(
    raw: &RawInteractions,
    ratios: SplitRatios,
    seed: u64,
    strategy: SplitStrategy,
) -> Result<Dataset> {
    ratios.validate()?;
    if raw.is_empty() {
        return Err(CoreError::EmptyInput("no interactions to split".into()));
    }
    let user_keys: alloc::collections::BTreeSet<&str> =
        raw.records().iter().map(|r| r.user.as_str()).collect();
    let item_keys: alloc::collections::BTreeSet<&str> =
        raw.records().iter().map(|r| r.item.as_str()).collect();
    let users = IdMap::from_keys(user_keys.into_iter().map(String::from).collect())?;
    let items = IdMap::from_keys(item_keys.into_iter().map(String::from).collect())?;

    // (item, timestamp) per user, in log order.
    let mut by_user: Vec<Vec<(usize, u64)>> = vec![Vec::new(); users.len()];
    for r in raw.records() {
        let u = users.index(&r.user).expect("user key interned above");
        let i = items.index(&r.item).expect("item key interned above");
        by_user[u].push((i, r.timestamp));
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    match strategy {
        SplitStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (u, list) in by_user.iter_mut().enumerate() {
                list.shuffle(&mut rng);
                let (n_train, n_val, _) = split_counts(list.len(), ratios);
                for (pos, &(i, _)) in list.iter().enumerate() {
                    if pos < n_train {
                        train.push((u, i));
                    } else if pos < n_train + n_val {
                        val.push((u, i));
                    } else {
                        test.push((u, i));
                    }
                }
            }
        }
        SplitStrategy::TemporalLeaveOneOut => {
            for (u, list) in by_user.iter().enumerate() {
                if list.len() < 2 {
                    train.extend(list.iter().map(|&(i, _)| (u, i)));
                    continue;
                }
                // Latest timestamp; the later log position wins ties.
                let latest = list
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1 .1.cmp(&b.1 .1).then(a.0.cmp(&b.0)))
                    .map(|(pos, _)| pos)
                    .expect("non-empty");
                for (pos, &(i, _)) in list.iter().enumerate() {
                    if pos == latest {
                        test.push((u, i));
                    } else {
                        train.push((u, i));
                    }
                }
            }
        }
    }

    rescue_orphan_items(items.len(), &mut train, &mut val, &mut test);
    Dataset::from_parts(users, items, train, val, test)
}

/// Per-user `(train, val, test)` counts for `n` interactions: held-out parts
/// are floored, train takes the remainder and never drops below one.
pub fn split_counts(n: usize, ratios: SplitRatios) -> (usize, usize, usize) {
    if n == 0 {
        return (0, 0, 0);
    }
    let mut n_val = crate::math::floor(n as f64 * ratios.val + 1e-9) as usize;
    let mut n_test = crate::math::floor(n as f64 * ratios.test + 1e-9) as usize;
    if n_val + n_test >= n {
        let excess = n_val + n_test + 1 - n;
        let from_val = excess.min(n_val);
        n_val -= from_val;
        n_test -= excess - from_val;
    }
    (n - n_val - n_test, n_val, n_test)
}

fn rescue_orphan_items(
    num_items: usize,
    train: &mut Vec<(usize, usize)>,
    val: &mut Vec<(usize, usize)>,
    test: &mut Vec<(usize, usize)>,
) {
    let mut has_train = vec![false; num_items];
    for &(_, i) in train.iter() {
        has_train[i] = true;
    }
    for (item, &covered) in has_train.iter().enumerate() {
        if covered {
            continue;
        }
        let best_val = val
            .iter()
            .enumerate()
            .filter(|(_, p)| p.1 == item)
            .min_by_key(|(_, p)| p.0);
        let best_test = test
            .iter()
            .enumerate()
            .filter(|(_, p)| p.1 == item)
            .min_by_key(|(_, p)| p.0);
        let pick_val = match (best_val, best_test) {
            (Some(v), Some(t)) => v.1 .0 <= t.1 .0,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => continue,
        };
        let pair = if pick_val {
            let idx = best_val.expect("checked").0;
            val.remove(idx)
        } else {
            let idx = best_test.expect("checked").0;
            test.remove(idx)
        };
        train.push(pair);
    }
}

/// Dense per-item multimodal feature vectors, row `i` belongs to item `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(CoreError::Dimension(format!(
                "feature matrix {rows}x{dim} needs {} values, got {}",
                rows * dim,
                data.len()
            )));
        }
        if dim > 0 {
            if let Some(bad) = data
                .chunks(dim)
                .position(|row| row.iter().any(|v| !v.is_finite()))
            {
                return Err(CoreError::Data(format!(
                    "feature row {bad} has a non-finite entry"
                )));
            }
        }
        Ok(FeatureMatrix { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn expect_rows(&self, expected: usize) -> Result<()> {
        if self.rows != expected {
            return Err(CoreError::Dimension(format!(
                "feature matrix has {} rows, expected {expected}",
                self.rows
            )));
        }
        Ok(())
    }

    /// New matrix whose row `k` is row `order[k]` of `self`.
    pub fn select_rows(&self, order: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(order.len() * self.dim);
        for &r in order {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            rows: order.len(),
            dim: self.dim,
            data,
        }
    }

    pub fn to_matrix(&self) -> crate::dense::Matrix {
        crate::dense::Matrix::from_vec(self.rows, self.dim, self.data.clone())
            .expect("shape checked at construction")
    }

    /// L2 norm of every row.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| crate::math::norm(self.row(i)))
            .collect()
    }
}
