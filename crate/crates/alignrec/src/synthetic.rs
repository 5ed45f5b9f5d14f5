//! Planted-cluster corpora for smoke runs and tests. Users and items share
//! cluster labels; users interact only inside their cluster and item
//! features are noisy copies of a per-cluster center.

use std::path::{Path, PathBuf};

use alignrec_core::{FeatureMatrix, Interaction, RawInteractions};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{write_features, write_keys};
use crate::interactions::write_interactions;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedSpec {
    pub users: usize,
    pub items: usize,
    pub clusters: usize,
    pub per_user: usize,
    pub dim: usize,
    /// Uniform noise amplitude added to each feature coordinate.
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub interactions: RawInteractions,
    /// Feature rows in file order, with their item keys.
    pub row_keys: Vec<String>,
    pub features: FeatureMatrix,
    pub user_cluster: Vec<usize>,
    pub item_cluster: Vec<usize>,
}

pub fn user_key(u: usize) -> String {
    format!("u{u:05}")
}

pub fn item_key(i: usize) -> String {
    format!("i{i:05}")
}

/// Item `i` sits in cluster `i % clusters`, user `u` in `u % clusters`.
/// Feature rows are written in a shuffled order so that loaders must align
/// them by key.
pub fn planted(spec: &PlantedSpec) -> Result<Corpus> {
    if spec.clusters == 0 || spec.items < spec.clusters || spec.dim == 0 || spec.per_user == 0 {
        return Err(Error::Config(format!(
            "unusable planted corpus shape {spec:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.clusters)
        .map(|_| (0..spec.dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let item_cluster: Vec<usize> = (0..spec.items).map(|i| i % spec.clusters).collect();
    let user_cluster: Vec<usize> = (0..spec.users).map(|u| u % spec.clusters).collect();
    let mut members = vec![Vec::new(); spec.clusters];
    for (i, &c) in item_cluster.iter().enumerate() {
        members[c].push(i);
    }
    let mut records = Vec::with_capacity(spec.users * spec.per_user);
    let mut t = 0u64;
    for (u, &c) in user_cluster.iter().enumerate() {
        let take = spec.per_user.min(members[c].len());
        for &i in members[c].choose_multiple(&mut rng, take) {
            records.push(Interaction::new(user_key(u), item_key(i), t));
            t += 1;
        }
    }
    let mut order: Vec<usize> = (0..spec.items).collect();
    order.shuffle(&mut rng);
    let mut data = Vec::with_capacity(spec.items * spec.dim);
    for &i in &order {
        for &x in &centers[item_cluster[i]] {
            data.push(x + spec.noise * rng.gen_range(-1.0..1.0));
        }
    }
    Ok(Corpus {
        interactions: RawInteractions::from_records(records),
        row_keys: order.iter().map(|&i| item_key(i)).collect(),
        features: FeatureMatrix::new(spec.items, spec.dim, data)?,
        user_cluster,
        item_cluster,
    })
}

/// The same rows with every feature value replaced by uniform noise.
pub fn scrambled_features(feat: &FeatureMatrix, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..feat.as_slice().len())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    FeatureMatrix::new(feat.rows(), feat.dim(), data).expect("shape is preserved")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFiles {
    pub interactions: PathBuf,
    pub features: PathBuf,
    pub item_keys: PathBuf,
}

/// Writes `interactions.tsv`, `features.afea` and `item_keys.txt` into `dir`.
pub fn write_corpus(dir: &Path, c: &Corpus) -> Result<CorpusFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = CorpusFiles {
        interactions: dir.join("interactions.tsv"),
        features: dir.join("features.afea"),
        item_keys: dir.join("item_keys.txt"),
    };
    write_interactions(&files.interactions, &c.interactions)?;
    write_features(&files.features, &c.features)?;
    write_keys(&files.item_keys, &c.row_keys)?;
    Ok(files)
}
