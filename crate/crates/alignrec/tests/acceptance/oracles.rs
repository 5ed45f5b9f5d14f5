//! Straight-line references written without the library's sparse types or
//! ranking helpers.

use std::collections::BTreeSet;

use alignrec_core::{Dataset, FeatureMatrix, Interaction, Matrix, ModelParams, RawInteractions};

pub type Dense = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn from_matrix(m: &Matrix) -> Dense {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn mul(a: &Dense, b: &Dense, cols: usize) -> Dense {
    let mut out = zeros(a.len(), cols);
    for (i, row) in a.iter().enumerate() {
        for (k, &x) in row.iter().enumerate() {
            for j in 0..cols {
                out[i][j] += x * b[k][j];
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &Dense, m: &Matrix) -> f64 {
    assert_eq!(
        (a.len(), a.first().map_or(m.cols(), Vec::len)),
        (m.rows(), m.cols())
    );
    let mut worst: f64 = 0.0;
    for (r, row) in a.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            worst = worst.max((v - m.get(r, c)).abs());
        }
    }
    worst
}

fn train_degrees(ds: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let mut du = vec![0.0; ds.num_users];
    let mut di = vec![0.0; ds.num_items];
    for &(u, i) in &ds.train {
        du[u] += 1.0;
        di[i] += 1.0;
    }
    (du, di)
}

/// Dense `D^{-1/2} A D^{-1/2}`, users first.
pub fn norm_adjacency(ds: &Dataset) -> Dense {
    let (du, di) = train_degrees(ds);
    let nu = ds.num_users;
    let mut a = zeros(nu + ds.num_items, nu + ds.num_items);
    for &(u, i) in &ds.train {
        let w = 1.0 / (du[u] * di[i]).sqrt();
        a[u][nu + i] = w;
        a[nu + i][u] = w;
    }
    a
}

pub fn norm_interaction(ds: &Dataset) -> Dense {
    let (du, di) = train_degrees(ds);
    let mut r = zeros(ds.num_users, ds.num_items);
    for &(u, i) in &ds.train {
        r[u][i] = 1.0 / (du[u] * di[i]).sqrt();
    }
    r
}

/// `(1/(L+1)) Σ_l Â^l E`.
pub fn lightgcn(adj: &Dense, emb: &Dense, layers: usize) -> Dense {
    let d = emb[0].len();
    let mut acc = emb.clone();
    let mut cur = emb.clone();
    for _ in 0..layers {
        cur = mul(adj, &cur, d);
        for (a, c) in acc.iter_mut().zip(&cur) {
            for (x, y) in a.iter_mut().zip(c) {
                *x += y;
            }
        }
    }
    let s = 1.0 / (layers + 1) as f64;
    acc.iter_mut()
        .for_each(|r| r.iter_mut().for_each(|v| *v *= s));
    acc
}

pub fn content_gate(p: &ModelParams, feat: &FeatureMatrix) -> Dense {
    let (d_h, d_e) = (p.d_h(), p.d_e());
    let mut out = zeros(feat.rows(), d_e);
    for i in 0..feat.rows() {
        let x = feat.row(i);
        let mut hidden = vec![0.0; d_h];
        for (h, slot) in hidden.iter_mut().enumerate() {
            let mut z = p.b1.get(0, h);
            for (k, xk) in x.iter().enumerate() {
                z += xk * p.w1.get(k, h);
            }
            *slot = if z > 0.0 { z } else { 0.0 };
        }
        for e in 0..d_e {
            let mut z = p.b2.get(0, e);
            for (h, hv) in hidden.iter().enumerate() {
                z += hv * p.w2.get(h, e);
            }
            out[i][e] = p.item_emb.get(i, e) / (1.0 + (-z).exp());
        }
    }
    out
}

/// Dense normalized kNN graph: top `k` positive cosines per row, self
/// excluded, ties to the lower index.
pub fn knn_similarity(feat: &FeatureMatrix, k: usize) -> Dense {
    let n = feat.rows();
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut s = zeros(n, n);
    for i in 0..n {
        let mut cand: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let dot: f64 = feat
                    .row(i)
                    .iter()
                    .zip(feat.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                (j, dot / (norm(feat.row(i)) * norm(feat.row(j))))
            })
            .collect();
        cand.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for &(j, v) in cand.iter().take(k) {
            if v > 0.0 {
                s[i][j] = v;
            }
        }
    }
    let deg: Vec<f64> = s.iter().map(|r| r.iter().sum()).collect();
    let mut out = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if s[i][j] != 0.0 && deg[j] > 0.0 {
                out[i][j] = s[i][j] / (deg[i] * deg[j]).sqrt();
            }
        }
    }
    out
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

/// Brute-force ranking metrics, `(recall, ndcg)` per K, averaged over
/// users in ascending order.
pub fn brute_force_metrics(
    h_users: &Matrix,
    h_items: &Matrix,
    ds: &Dataset,
    test: bool,
    ks: &[usize],
) -> (Vec<(f64, f64)>, usize) {
    let ni = ds.num_items;
    let mut sums = vec![(0.0, 0.0); ks.len()];
    let mut users = 0;
    for u in 0..ds.num_users {
        let held: &[(usize, usize)] = if test { &ds.test } else { &ds.val };
        let relevant: BTreeSet<usize> = held.iter().filter(|p| p.0 == u).map(|p| p.1).collect();
        if relevant.is_empty() {
            continue;
        }
        let mut masked = vec![false; ni];
        for &(v, i) in &ds.train {
            if v == u {
                masked[i] = true;
            }
        }
        if test {
            for &(v, i) in &ds.val {
                if v == u {
                    masked[i] = true;
                }
            }
        }
        let mut cand: Vec<(usize, f64)> = Vec::new();
        for (i, &m) in masked.iter().enumerate() {
            if !m {
                let mut s = 0.0;
                for (a, b) in h_users.row(u).iter().zip(h_items.row(i)) {
                    s += a * b;
                }
                cand.push((i, s));
            }
        }
        cand.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (slot, &k) in sums.iter_mut().zip(ks) {
            let mut hits = 0usize;
            let mut dcg = 0.0;
            for (pos, &(i, _)) in cand.iter().take(k).enumerate() {
                if relevant.contains(&i) {
                    hits += 1;
                    dcg += 1.0 / ((pos + 2) as f64).log2();
                }
            }
            let mut ideal = 0.0;
            for pos in 0..relevant.len().min(k) {
                ideal += 1.0 / ((pos + 2) as f64).log2();
            }
            slot.0 += hits as f64 / relevant.len() as f64;
            slot.1 += dcg / ideal;
        }
        users += 1;
    }
    let n = users as f64;
    let means = sums
        .into_iter()
        .map(|(r, g)| {
            if users == 0 {
                (0.0, 0.0)
            } else {
                (r / n, g / n)
            }
        })
        .collect();
    (means, users)
}

/// k-core by repeated simultaneous removal of every under-degree node.
pub fn kcore(records: &[Interaction], k: usize) -> BTreeSet<(String, String, u64)> {
    let mut alive: BTreeSet<(String, String, u64)> = records
        .iter()
        .map(|r| (r.user.clone(), r.item.clone(), r.timestamp))
        .collect();
    loop {
        let mut du = std::collections::BTreeMap::<&str, usize>::new();
        let mut di = std::collections::BTreeMap::<&str, usize>::new();
        for (u, i, _) in &alive {
            *du.entry(u).or_default() += 1;
            *di.entry(i).or_default() += 1;
        }
        let keep: BTreeSet<_> = alive
            .iter()
            .filter(|(u, i, _)| du[u.as_str()] >= k && di[i.as_str()] >= k)
            .cloned()
            .collect();
        if keep.len() == alive.len() {
            return alive;
        }
        alive = keep;
    }
}

pub fn record_set(raw: &RawInteractions) -> BTreeSet<(String, String, u64)> {
    raw.records()
        .iter()
        .map(|r| (r.user.clone(), r.item.clone(), r.timestamp))
        .collect()
}

/// Dense item-CF cosine over training user sets, diagonal zero.
pub fn itemcf(ds: &Dataset) -> Dense {
    let n = ds.num_items;
    let sets: Vec<BTreeSet<usize>> = (0..n)
        .map(|i| ds.train.iter().filter(|p| p.1 == i).map(|p| p.0).collect())
        .collect();
    let mut out = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let c = sets[i].intersection(&sets[j]).count();
            if c > 0 {
                out[i][j] = c as f64 / ((sets[i].len() * sets[j].len()) as f64).sqrt();
            }
        }
    }
    out
}
