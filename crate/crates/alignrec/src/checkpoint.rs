//! Training checkpoints (`ACKP`): run configuration, RNG position, loop
//! counters and named tensors for parameters, best parameters and optimizer
//! moments.

use std::collections::BTreeMap;
use std::path::Path;

use alignrec_core::model::TENSOR_NAMES;
use alignrec_core::optim::{OptimizerKind, OptimizerState};
use alignrec_core::trainer::{CheckpointKind, RngState};
use alignrec_core::{Matrix, ModelParams, TrainState};

use crate::binfmt::{read_file, Reader, Writer};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ACKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: CheckpointKind,
    /// Resolved run configuration as TOML.
    pub config: String,
    pub state: TrainState,
}

fn kind_tag(k: CheckpointKind) -> u32 {
    match k {
        CheckpointKind::Best => 0,
        CheckpointKind::Final => 1,
        CheckpointKind::Failed => 2,
    }
}

pub fn kind_name(k: CheckpointKind) -> &'static str {
    match k {
        CheckpointKind::Best => "best",
        CheckpointKind::Final => "final",
        CheckpointKind::Failed => "failed",
    }
}

fn put_tensor(w: &mut Writer, name: &str, m: &Matrix) {
    w.str(name);
    w.u32(2);
    w.usize(m.rows());
    w.usize(m.cols());
    w.f64s(m.as_slice());
}

pub fn encode(ck: &Checkpoint) -> Vec<u8> {
    let s = &ck.state;
    let mut w = Writer::new(MAGIC, VERSION);
    w.u32(kind_tag(ck.kind));
    w.str(&ck.config);
    let rng = RngState::capture(&s.rng);
    w.bytes(&rng.seed);
    w.u64(rng.stream);
    w.u128(rng.word_pos);
    w.usize(s.epoch);
    w.usize(s.best_epoch);
    w.f64(s.best_recall);
    w.u64(s.optimizer.step);
    match s.optimizer.kind {
        OptimizerKind::Adam { beta1, beta2, eps } => {
            w.u32(0);
            w.f64(beta1);
            w.f64(beta2);
            w.f64(eps);
        }
        OptimizerKind::Sgd => w.u32(1),
    }
    let mut tensors: Vec<(String, &Matrix)> = Vec::new();
    for (name, t) in TENSOR_NAMES.iter().zip(s.params.tensors()) {
        tensors.push((name.to_string(), t));
    }
    for (name, t) in TENSOR_NAMES.iter().zip(s.best_params.tensors()) {
        tensors.push((format!("best.{name}"), t));
    }
    let moments: Vec<(String, Matrix)> = if s.optimizer.m.is_empty() {
        Vec::new()
    } else {
        let shapes = s.params.tensors();
        let mut out = Vec::new();
        for (k, name) in TENSOR_NAMES.iter().enumerate() {
            let (r, c) = shapes[k].shape();
            out.push((
                format!("adam.m.{name}"),
                Matrix::from_vec(r, c, s.optimizer.m[k].clone()).expect("moment shape"),
            ));
            out.push((
                format!("adam.v.{name}"),
                Matrix::from_vec(r, c, s.optimizer.v[k].clone()).expect("moment shape"),
            ));
        }
        out
    };
    for (name, m) in &moments {
        tensors.push((name.clone(), m));
    }
    w.u32(tensors.len() as u32);
    for (name, t) in &tensors {
        put_tensor(&mut w, name, t);
    }
    w.into_bytes()
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<Checkpoint> {
    let (mut r, version) = Reader::open(path, bytes, MAGIC)?;
    if version != VERSION {
        return Err(r.err(format!("unsupported checkpoint version {version}")));
    }
    let kind = match r.u32()? {
        0 => CheckpointKind::Best,
        1 => CheckpointKind::Final,
        2 => CheckpointKind::Failed,
        t => return Err(r.err(format!("unknown checkpoint status {t}"))),
    };
    let config = r.str()?;
    let mut seed = [0u8; 32];
    seed.copy_from_slice(r.take(32)?);
    let rng = RngState {
        seed,
        stream: r.u64()?,
        word_pos: r.u128()?,
    };
    let epoch = r.usize()?;
    let best_epoch = r.usize()?;
    let best_recall = r.f64()?;
    let step = r.u64()?;
    let kind_opt = match r.u32()? {
        0 => OptimizerKind::Adam {
            beta1: r.f64()?,
            beta2: r.f64()?,
            eps: r.f64()?,
        },
        1 => OptimizerKind::Sgd,
        t => return Err(r.err(format!("unknown optimizer tag {t}"))),
    };
    let count = r.u32()? as usize;
    let mut tensors: BTreeMap<String, Matrix> = BTreeMap::new();
    for _ in 0..count {
        let name = r.str()?;
        let ndims = r.u32()?;
        if ndims != 2 {
            return Err(r.err(format!("tensor {name} has {ndims} dimensions, expected 2")));
        }
        let rows = r.usize()?;
        let cols = r.usize()?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| r.err("tensor size overflows"))?;
        let data = r.f64s(n)?;
        let m = Matrix::from_vec(rows, cols, data)?;
        if tensors.insert(name.clone(), m).is_some() {
            return Err(r.err(format!("tensor {name} appears twice")));
        }
    }
    r.finish()?;
    let mut take = |name: String| {
        tensors
            .remove(&name)
            .ok_or_else(|| Error::format(path, format!("missing tensor {name}")))
    };
    let params_of =
        |take: &mut dyn FnMut(String) -> Result<Matrix>, prefix: &str| -> Result<ModelParams> {
            let mut ts = Vec::with_capacity(6);
            for name in TENSOR_NAMES {
                ts.push(take(format!("{prefix}{name}"))?);
            }
            let arr: [Matrix; 6] = ts.try_into().expect("six tensors");
            Ok(ModelParams::from_tensors(arr)?)
        };
    let params = params_of(&mut take, "")?;
    let best_params = params_of(&mut take, "best.")?;
    let (m, v) = match kind_opt {
        OptimizerKind::Adam { .. } => {
            let mut m = Vec::new();
            let mut v = Vec::new();
            for name in TENSOR_NAMES {
                m.push(take(format!("adam.m.{name}"))?.into_vec());
                v.push(take(format!("adam.v.{name}"))?.into_vec());
            }
            (m, v)
        }
        OptimizerKind::Sgd => (Vec::new(), Vec::new()),
    };
    if let Some(extra) = tensors.keys().next() {
        return Err(Error::format(path, format!("unexpected tensor {extra}")));
    }
    let shapes_match = |a: &ModelParams, b: &ModelParams| {
        a.tensors()
            .iter()
            .zip(b.tensors())
            .all(|(x, y)| x.shape() == y.shape())
    };
    if !shapes_match(&params, &best_params) {
        return Err(Error::format(path, "best parameters have different shapes"));
    }
    if let OptimizerKind::Adam { .. } = kind_opt {
        let ok = params
            .tensors()
            .iter()
            .zip(&m)
            .all(|(t, mm)| t.as_slice().len() == mm.len());
        if !ok {
            return Err(Error::format(
                path,
                "optimizer moments have different shapes",
            ));
        }
    }
    Ok(Checkpoint {
        kind,
        config,
        state: TrainState {
            params,
            optimizer: OptimizerState {
                kind: kind_opt,
                step,
                m,
                v,
            },
            epoch,
            best_recall,
            best_epoch,
            best_params,
            rng: rng.restore(),
        },
    })
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    crate::binfmt::write_atomic(path, &encode(ck))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode(path, &read_file(path)?)
}
