//! Central finite differences of each loss with respect to every parameter.

use alignrec_core::losses::{
    bpr_loss, cca_infonce, reg_similarity, total_loss, uia_cosine, LossOutput,
};
use alignrec_core::model::{backward, forward_cached};
use alignrec_core::{
    BatchSample, Dataset, FeatureMatrix, GraphBundle, IdMap, LossWeights, ModelConfig, ModelParams,
    Representations,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-5;
pub const MIN_MAGNITUDE: f64 = 1e-8;

pub const LOSS_NAMES: [&str; 5] = ["bpr", "cca", "uia", "reg", "total"];

pub struct Instance {
    pub feat: FeatureMatrix,
    pub graphs: GraphBundle,
    pub params: ModelParams,
    pub layers: usize,
    pub batch: BatchSample,
    pub weights: LossWeights,
}

fn ids(prefix: &str, n: usize) -> IdMap {
    IdMap::from_keys((0..n).map(|i| format!("{prefix}{i:02}")).collect()).unwrap()
}

pub fn instance(seed: u64) -> Instance {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let nu = r.gen_range(3..=10);
    let ni = r.gen_range(4..=10);
    let mut on = vec![vec![false; ni]; nu];
    on.iter_mut()
        .for_each(|row| row.iter_mut().for_each(|c| *c = r.gen_bool(0.35)));
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
    let train: Vec<(usize, usize)> = (0..nu)
        .flat_map(|u| (0..ni).map(move |i| (u, i)))
        .filter(|&(u, i)| on[u][i])
        .collect();
    let ds =
        Dataset::from_parts(ids("u", nu), ids("i", ni), train.clone(), vec![], vec![]).unwrap();
    let d_f = r.gen_range(3..=6);
    let feat = FeatureMatrix::new(
        ni,
        d_f,
        (0..ni * d_f).map(|_| r.gen_range(-0.3..1.0)).collect(),
    )
    .unwrap();
    let graphs = GraphBundle::build(&ds, &feat, r.gen_range(1..=3.min(ni - 1))).unwrap();
    let cfg = ModelConfig {
        d_e: r.gen_range(2..=8),
        d_h: r.gen_range(2..=6),
        gcn_layers: r.gen_range(1..=3),
    };
    let mut params = ModelParams::init(nu, ni, d_f, &cfg, &mut r);
    for v in params
        .b1
        .as_mut_slice()
        .iter_mut()
        .chain(params.b2.as_mut_slice())
    {
        *v = r.gen_range(-0.5..0.5);
    }
    let n = r.gen_range(4..=8);
    let mut batch = BatchSample::default();
    for _ in 0..n {
        let (u, i) = train[r.gen_range(0..train.len())];
        let mut j = r.gen_range(0..ni);
        while j == i {
            j = r.gen_range(0..ni);
        }
        batch.users.push(u);
        batch.pos_items.push(i);
        batch.neg_items.push(j);
    }
    let weights = LossWeights {
        alpha: r.gen_range(0.1..1.0),
        beta: r.gen_range(0.1..1.0),
        lambda: r.gen_range(0.1..1.0),
        tau: r.gen_range(0.2..1.0),
    };
    Instance {
        feat,
        graphs,
        params,
        layers: cfg.gcn_layers,
        batch,
        weights,
    }
}

fn loss(which: usize, reps: &Representations, inst: &Instance) -> LossOutput {
    let b = &inst.batch;
    match which {
        0 => bpr_loss(reps, b),
        1 => cca_infonce(reps, b, inst.weights.tau),
        2 => uia_cosine(reps, b),
        3 => reg_similarity(reps, &inst.feat, b),
        _ => total_loss(reps, &inst.feat, b, &inst.weights).map(|t| LossOutput {
            value: t.value,
            grads: t.grads,
            degenerate: t.degenerate,
        }),
    }
    .unwrap()
}

fn value_at(which: usize, params: &ModelParams, inst: &Instance) -> f64 {
    let (reps, _) = forward_cached(params, &inst.graphs, &inst.feat, inst.layers).unwrap();
    loss(which, &reps, inst).value
}

#[derive(Debug, Default, Clone, Copy)]
pub struct CheckStats {
    pub compared: usize,
    pub failures: usize,
    pub worst_rel: f64,
    /// Failures whose discrepancy is within the f64 resolution of the
    /// difference quotient.
    pub at_resolution: usize,
    pub worst_failure: Option<(f64, f64)>,
}

fn ulp(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1) - x
}

/// Compares analytic and numeric gradients for loss `which`.
pub fn check(which: usize, inst: &Instance) -> CheckStats {
    let (reps, cache) =
        forward_cached(&inst.params, &inst.graphs, &inst.feat, inst.layers).unwrap();
    let out = loss(which, &reps, inst);
    let analytic = backward(
        &inst.params,
        &inst.graphs,
        &inst.feat,
        inst.layers,
        &cache,
        &out.grads,
    )
    .unwrap();
    let mut probe = inst.params.clone();
    let mut stats = CheckStats::default();
    for t in 0..6 {
        for k in 0..probe.tensors()[t].as_slice().len() {
            let orig = inst.params.tensors()[t].as_slice()[k];
            probe.tensors_mut()[t].as_mut_slice()[k] = orig + STEP;
            let up = value_at(which, &probe, inst);
            probe.tensors_mut()[t].as_mut_slice()[k] = orig - STEP;
            let down = value_at(which, &probe, inst);
            probe.tensors_mut()[t].as_mut_slice()[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic.tensors()[t].as_slice()[k];
            let scale = a.abs().max(numeric.abs());
            if scale <= MIN_MAGNITUDE {
                continue;
            }
            let rel = (a - numeric).abs() / scale;
            stats.compared += 1;
            stats.worst_rel = stats.worst_rel.max(rel);
            if rel >= REL_TOL {
                stats.failures += 1;
                // Two ulps of the loss value, divided by 2h: the smallest
                // error a central difference in f64 can resolve here.
                let floor = 2.0 * ulp(up.abs().max(down.abs())) / (2.0 * STEP);
                if (a - numeric).abs() <= floor {
                    stats.at_resolution += 1;
                }
                stats.worst_failure = Some((a, numeric));
            }
        }
    }
    stats
}
