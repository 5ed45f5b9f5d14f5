//! Prepared dataset directory: a key=value manifest, user and item key
//! lists in index order, one file per split and the filtered log.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use alignrec_core::data::{SplitRatios, SplitStrategy};
use alignrec_core::{Dataset, IdMap, RawInteractions};

use crate::binfmt::write_atomic;
use crate::error::{Error, Result};
use crate::features::{read_keys, write_keys};
use crate::interactions::{format_interactions, load_interactions};

pub const MANIFEST: &str = "manifest.txt";
pub const FILTERED: &str = "interactions.tsv";
const FORMAT: &str = "alignrec-dataset-1";

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub seed: u64,
    pub ratios: SplitRatios,
    pub strategy: SplitStrategy,
    pub kcore: usize,
    pub raw_interactions: usize,
    pub users: usize,
    pub items: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

pub fn strategy_name(s: SplitStrategy) -> &'static str {
    match s {
        SplitStrategy::Random => "random",
        SplitStrategy::TemporalLeaveOneOut => "temporal-leave-one-out",
    }
}

pub fn parse_strategy(s: &str) -> Option<SplitStrategy> {
    match s {
        "random" => Some(SplitStrategy::Random),
        "temporal-leave-one-out" => Some(SplitStrategy::TemporalLeaveOneOut),
        _ => None,
    }
}

/// Splits `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv(path: &Path, text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: "expected key=value".into(),
            });
        };
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl Manifest {
    pub fn describe(
        ds: &Dataset,
        raw_interactions: usize,
        kcore: usize,
        seed: u64,
        ratios: SplitRatios,
        strategy: SplitStrategy,
    ) -> Self {
        Manifest {
            seed,
            ratios,
            strategy,
            kcore,
            raw_interactions,
            users: ds.num_users,
            items: ds.num_items,
            train: ds.train.len(),
            val: ds.val.len(),
            test: ds.test.len(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").expect("writing to a String");
        kv("format", FORMAT.into());
        kv("seed", self.seed.to_string());
        kv("train_ratio", self.ratios.train.to_string());
        kv("val_ratio", self.ratios.val.to_string());
        kv("test_ratio", self.ratios.test.to_string());
        kv("strategy", strategy_name(self.strategy).into());
        kv("kcore", self.kcore.to_string());
        kv("raw_interactions", self.raw_interactions.to_string());
        kv("users", self.users.to_string());
        kv("items", self.items.to_string());
        kv("train", self.train.to_string());
        kv("val", self.val.to_string());
        kv("test", self.test.to_string());
        s
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let kv = parse_kv(path, text)?;
        let get = |k: &str| {
            kv.get(k)
                .ok_or_else(|| Error::format(path, format!("manifest is missing {k}")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::format(path, format!("{k} is not an integer")))
        };
        let float = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::format(path, format!("{k} is not a number")))
        };
        if get("format")? != FORMAT {
            return Err(Error::format(
                path,
                format!("unsupported dataset format {}", get("format")?),
            ));
        }
        Ok(Manifest {
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::format(path, "seed is not an integer"))?,
            ratios: SplitRatios {
                train: float("train_ratio")?,
                val: float("val_ratio")?,
                test: float("test_ratio")?,
            },
            strategy: parse_strategy(get("strategy")?)
                .ok_or_else(|| Error::format(path, "unknown split strategy"))?,
            kcore: num("kcore")?,
            raw_interactions: num("raw_interactions")?,
            users: num("users")?,
            items: num("items")?,
            train: num("train")?,
            val: num("val")?,
            test: num("test")?,
        })
    }
}

fn split_text(ds: &Dataset, pairs: &[(usize, usize)]) -> String {
    let mut s = String::new();
    for &(u, i) in pairs {
        writeln!(s, "{}\t{}", ds.users.key(u), ds.items.key(i)).expect("writing to a String");
    }
    s
}

pub struct DatasetDir {
    pub root: PathBuf,
}

impl DatasetDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DatasetDir { root: root.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(
        &self,
        ds: &Dataset,
        filtered: &RawInteractions,
        manifest: &Manifest,
    ) -> Result<()> {
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        write_keys(&self.path("users.txt"), ds.users.keys())?;
        write_keys(&self.path("items.txt"), ds.items.keys())?;
        for (name, pairs) in [
            ("train.tsv", &ds.train),
            ("val.tsv", &ds.val),
            ("test.tsv", &ds.test),
        ] {
            write_atomic(&self.path(name), split_text(ds, pairs).as_bytes())?;
        }
        write_atomic(
            &self.path(FILTERED),
            format_interactions(filtered).as_bytes(),
        )?;
        write_atomic(&self.path(MANIFEST), manifest.to_text().as_bytes())
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let p = self.path(MANIFEST);
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Manifest::parse(&p, &text)
    }

    pub fn filtered(&self) -> Result<RawInteractions> {
        load_interactions(&self.path(FILTERED))
    }

    fn read_split(&self, name: &str, users: &IdMap, items: &IdMap) -> Result<Vec<(usize, usize)>> {
        let p = self.path(name);
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let mut out = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let bad = |msg: String| Error::Parse {
                path: p.clone(),
                line: n + 1,
                msg,
            };
            let (u, i) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected user<TAB>item".into()))?;
            let u = users
                .index(u)
                .ok_or_else(|| bad(format!("unknown user {u}")))?;
            let i = items
                .index(i)
                .ok_or_else(|| bad(format!("unknown item {i}")))?;
            out.push((u, i));
        }
        Ok(out)
    }

    pub fn load(&self) -> Result<Dataset> {
        let manifest = self.manifest()?;
        let users = IdMap::from_keys(read_keys(&self.path("users.txt"))?)?;
        let items = IdMap::from_keys(read_keys(&self.path("items.txt"))?)?;
        let train = self.read_split("train.tsv", &users, &items)?;
        let val = self.read_split("val.tsv", &users, &items)?;
        let test = self.read_split("test.tsv", &users, &items)?;
        let ds = Dataset::from_parts(users, items, train, val, test)?;
        if (
            ds.num_users,
            ds.num_items,
            ds.train.len(),
            ds.val.len(),
            ds.test.len(),
        ) != (
            manifest.users,
            manifest.items,
            manifest.train,
            manifest.val,
            manifest.test,
        ) {
            return Err(Error::format(
                self.path(MANIFEST),
                "counts disagree with the split files",
            ));
        }
        Ok(ds)
    }
}
