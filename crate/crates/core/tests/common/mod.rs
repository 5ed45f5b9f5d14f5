#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use alignrec_core::data::{Dataset, FeatureMatrix, IdMap};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ids(prefix: &str, n: usize) -> IdMap {
    IdMap::from_keys((0..n).map(|i| format!("{prefix}{i:04}")).collect()).unwrap()
}

pub fn dataset(
    nu: usize,
    ni: usize,
    train: Vec<(usize, usize)>,
    val: Vec<(usize, usize)>,
    test: Vec<(usize, usize)>,
) -> Dataset {
    Dataset::from_parts(ids("u", nu), ids("i", ni), train, val, test).unwrap()
}

/// Random bipartite training graph in which every user and item has at
/// least one edge.
pub fn random_train(r: &mut ChaCha8Rng, nu: usize, ni: usize, density: f64) -> Vec<(usize, usize)> {
    let mut on = vec![vec![false; ni]; nu];
    for row in on.iter_mut() {
        for cell in row.iter_mut() {
            *cell = r.gen_bool(density);
        }
    }
    for row in on.iter_mut() {
        if !row.iter().any(|&b| b) {
            row[r.gen_range(0..ni)] = true;
        }
    }
    for i in 0..ni {
        if !(0..nu).any(|u| on[u][i]) {
            on[r.gen_range(0..nu)][i] = true;
        }
    }
    let mut out = Vec::new();
    for (u, row) in on.iter().enumerate() {
        for (i, &b) in row.iter().enumerate() {
            if b {
                out.push((u, i));
            }
        }
    }
    out
}

pub fn random_features(
    r: &mut ChaCha8Rng,
    rows: usize,
    dim: usize,
    lo: f64,
    hi: f64,
) -> FeatureMatrix {
    let data = (0..rows * dim).map(|_| r.gen_range(lo..hi)).collect();
    FeatureMatrix::new(rows, dim, data).unwrap()
}

/// Dense row-major matrix as nested vectors.
pub type Dense = Vec<Vec<f64>>;

pub fn dense_zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn dense_mul(a: &Dense, b: &Dense) -> Dense {
    let (n, m, p) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = dense_zeros(n, p);
    for i in 0..n {
        for k in 0..m {
            for j in 0..p {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &Dense, b: &[f64]) -> f64 {
    a.iter()
        .flatten()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Users and items split into `clusters` equal blocks; each user draws
/// `per_user` distinct items from its own block. Features are the block
/// centroid plus uniform noise.
pub struct Planted {
    pub pairs: Vec<(usize, usize)>,
    pub features: FeatureMatrix,
}

pub fn planted(
    seed: u64,
    nu: usize,
    ni: usize,
    clusters: usize,
    per_user: usize,
    dim: usize,
    noise: f64,
) -> Planted {
    let mut r = rng(seed);
    let block = ni / clusters;
    let centroids: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut pairs = Vec::new();
    for u in 0..nu {
        let c = u % clusters;
        let picked = rand::seq::index::sample(&mut r, block, per_user.min(block));
        for j in picked.iter() {
            pairs.push((u, c * block + j));
        }
    }
    let mut data = Vec::with_capacity(ni * dim);
    for i in 0..ni {
        let c = (i / block).min(clusters - 1);
        for d in 0..dim {
            data.push(centroids[c][d] + r.gen_range(-noise..noise));
        }
    }
    Planted {
        pairs,
        features: FeatureMatrix::new(ni, dim, data).unwrap(),
    }
}

/// Random 8/1/1 split of a planted corpus with features aligned to the
/// dataset's item indices.
pub fn planted_dataset(p: &Planted, seed: u64) -> (Dataset, FeatureMatrix) {
    use alignrec_core::data::{
        split_dataset, Interaction, RawInteractions, SplitRatios, SplitStrategy,
    };
    let raw = RawInteractions::from_records(
        p.pairs
            .iter()
            .map(|&(u, i)| Interaction::new(format!("u{u:04}"), format!("i{i:04}"), 0)),
    );
    let ds = split_dataset(
        &raw,
        SplitRatios::EIGHT_ONE_ONE,
        seed,
        SplitStrategy::Random,
    )
    .unwrap();
    let order: Vec<usize> = ds
        .items
        .keys()
        .iter()
        .map(|k| k[1..].parse().unwrap())
        .collect();
    let feat = p.features.select_rows(&order);
    (ds, feat)
}
