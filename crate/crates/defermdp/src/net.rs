//! GraphSAGE policy and value networks over the deferred-vertex induced
//! subgraph, with batched forwards, action sampling, and entropy.

use crate::env::{Observation, VertexState};
use crate::graph::NormalizedAdjacency;
use crate::nn::tape::SparseId;
use crate::nn::{ParamStore, ParamVars, Scalar, SparseMatrix, Tape, Tensor, Var};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const NUM_ACTIONS: usize = 3;

#[derive(Debug, Clone)]
pub struct NetConfig {
    pub layers: usize,
    pub width: usize,
    pub input_dim: usize,
    /// When false the value head reads the policy trunk's final embedding
    /// instead of its own stack of layers.
    pub separate_value_trunk: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            layers: 4,
            width: 128,
            input_dim: 2,
            separate_value_trunk: true,
        }
    }
}

impl NetConfig {
    /// Canonical parameter order; determines init draws and checkpoint
    /// layout.
    pub fn param_shapes(&self) -> Vec<(String, usize, usize)> {
        assert!(self.layers >= 1, "need at least one layer");
        let mut out = Vec::new();
        let mut trunks = vec!["policy"];
        if self.separate_value_trunk {
            trunks.push("value");
        }
        for trunk in trunks {
            for n in 1..=self.layers {
                let fan_in = if n == 1 { self.input_dim } else { self.width };
                out.push((format!("{trunk}.layer{n}.W1"), fan_in, self.width));
                out.push((format!("{trunk}.layer{n}.W2"), fan_in, self.width));
            }
        }
        out.push(("policy_head.W".to_string(), self.width, NUM_ACTIONS));
        out.push(("value_head.W".to_string(), self.width, 1));
        out
    }
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("policy is undefined on an empty subgraph")]
    EmptySubgraph,
    #[error("checkpoint does not fit the network: {0}")]
    BadCheckpoint(String),
}

/// One h(H) = ReLU(H·W1 + Â·H·W2) transformation.
pub fn sage_layer<S: Scalar>(tape: &mut Tape<S>, adj: SparseId, h: Var, w1: Var, w2: Var) -> Var {
    let hw1 = tape.matmul(h, w1);
    let ah = tape.spmm(adj, h);
    let ahw2 = tape.matmul(ah, w2);
    let sum = tape.add(hw1, ahw2);
    tape.relu(sum)
}

/// Several observations packed for one forward pass: block-diagonal Â,
/// stacked feature rows, and per-row graph ids.
pub struct BatchedObs {
    adjs: Vec<NormalizedAdjacency>,
    features: Vec<[f32; 2]>,
    segments: Vec<u32>,
    offsets: Vec<usize>,
}

impl BatchedObs {
    pub fn new(obs: &[&Observation]) -> Result<BatchedObs, NetError> {
        let mut adjs = Vec::with_capacity(obs.len());
        let mut features = Vec::new();
        let mut segments = Vec::new();
        let mut offsets = vec![0];
        for (i, o) in obs.iter().enumerate() {
            let n = o.sub.vertex_count();
            if n == 0 {
                return Err(NetError::EmptySubgraph);
            }
            adjs.push(crate::graph::normalized_adjacency(&o.sub));
            features.extend_from_slice(&o.features);
            segments.extend(std::iter::repeat_n(i as u32, n));
            offsets.push(features.len());
        }
        Ok(BatchedObs {
            adjs,
            features,
            segments,
            offsets,
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn total_rows(&self) -> usize {
        self.features.len()
    }

    /// Row range of graph `i` within the stacked tensors.
    pub fn rows_of(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Graph id of every row.
    pub fn segments(&self) -> &[u32] {
        &self.segments
    }

    pub fn adjacency<S: Scalar>(&self) -> SparseMatrix<S> {
        let blocks: Vec<SparseMatrix<S>> = self
            .adjs
            .iter()
            .map(SparseMatrix::from_normalized)
            .collect();
        SparseMatrix::block_diagonal(&blocks)
    }

    pub fn feature_tensor<S: Scalar>(&self) -> Tensor<S> {
        let data = self
            .features
            .iter()
            .flatten()
            .map(|&x| S::from_f64(x as f64))
            .collect();
        Tensor::from_vec(self.features.len(), 2, data)
    }
}

pub struct NetOutputs {
    /// total_rows × 3, pre-softmax.
    pub logits: Var,
    /// total_rows × 3, log π per vertex and action.
    pub log_probs: Var,
    /// num_graphs × 1.
    pub values: Var,
}

/// Builds both heads on the tape. Generic over the scalar so the same code
/// serves training (f32) and finite-difference checking (f64).
pub fn forward_batch<S: Scalar>(
    tape: &mut Tape<S>,
    vars: &ParamVars,
    cfg: &NetConfig,
    batch: &BatchedObs,
) -> NetOutputs {
    let adj = tape.register_sparse(batch.adjacency());
    let input = tape.leaf(batch.feature_tensor());

    let trunk = |tape: &mut Tape<S>, prefix: &str| {
        let mut h = input;
        for n in 1..=cfg.layers {
            let w1 = vars.get(&format!("{prefix}.layer{n}.W1"));
            let w2 = vars.get(&format!("{prefix}.layer{n}.W2"));
            h = sage_layer(tape, adj, h, w1, w2);
        }
        h
    };

    let hp = trunk(tape, "policy");
    let logits = tape.matmul(hp, vars.get("policy_head.W"));
    let log_probs = tape.row_log_softmax(logits);

    let hv = if cfg.separate_value_trunk {
        trunk(tape, "value")
    } else {
        hp
    };
    let pooled = tape.segment_sum(hv, &batch.segments, batch.num_graphs());
    let values = tape.matmul(pooled, vars.get("value_head.W"));

    NetOutputs {
        logits,
        log_probs,
        values,
    }
}

/// Policy and value networks sharing one parameter store.
pub struct GraphSageNet {
    pub cfg: NetConfig,
    pub store: ParamStore,
}

impl GraphSageNet {
    /// Fresh network with seeded uniform(−√(6/(fan_in+fan_out)), +) init.
    pub fn new(cfg: NetConfig, seed: u64) -> GraphSageNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        for (name, rows, cols) in cfg.param_shapes() {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| rng.gen_range(-limit..limit) as f32)
                .collect();
            store.insert(&name, Tensor::from_vec(rows, cols, data));
        }
        GraphSageNet { cfg, store }
    }

    /// Wraps a loaded store after verifying it holds exactly the expected
    /// parameters.
    pub fn from_store(cfg: NetConfig, store: ParamStore) -> Result<GraphSageNet, NetError> {
        let expected = cfg.param_shapes();
        if store.len() != expected.len() {
            return Err(NetError::BadCheckpoint(format!(
                "expected {} parameters, found {}",
                expected.len(),
                store.len()
            )));
        }
        for ((name, rows, cols), (found, tensor)) in expected.iter().zip(store.iter()) {
            if name != found {
                return Err(NetError::BadCheckpoint(format!(
                    "expected parameter `{name}`, found `{found}`"
                )));
            }
            if tensor.shape() != (*rows, *cols) {
                return Err(NetError::BadCheckpoint(format!(
                    "`{name}` has shape {:?}, expected ({rows}, {cols})",
                    tensor.shape()
                )));
            }
        }
        Ok(GraphSageNet { cfg, store })
    }

    /// Forward pass without gradients; returns per-vertex log-probs
    /// (total_rows × 3) and one value per graph.
    pub fn forward(&self, batch: &BatchedObs) -> (Tensor<f32>, Vec<f32>) {
        let mut tape: Tape<f32> = Tape::new();
        let vars = ParamVars::bind(&mut tape, &self.store);
        let out = forward_batch(&mut tape, &vars, &self.cfg, batch);
        let log_probs = tape.value(out.log_probs).clone();
        let values = tape.value(out.values).data.clone();
        (log_probs, values)
    }
}

/// Samples one action index from a log-probability row.
pub fn sample_row(log_probs: &[f32], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &lp) in log_probs.iter().enumerate() {
        acc += (lp as f64).exp();
        if u < acc {
            return i;
        }
    }
    log_probs.len() - 1
}

pub fn action_from_index(i: usize) -> VertexState {
    match i {
        0 => VertexState::Excluded,
        1 => VertexState::Included,
        2 => VertexState::Deferred,
        _ => unreachable!("action index {i}"),
    }
}

pub fn index_from_action(a: VertexState) -> u32 {
    match a {
        VertexState::Excluded => 0,
        VertexState::Included => 1,
        VertexState::Deferred => 2,
    }
}

/// Mean over vertices of −Σ_c p_c log p_c.
pub fn mean_entropy(log_probs: &Tensor<f32>) -> f64 {
    if log_probs.rows == 0 {
        return 0.0;
    }
    let mut total = 0.0f64;
    for row in log_probs.data.chunks(log_probs.cols) {
        for &lp in row {
            let lp = lp as f64;
            total -= lp.exp() * lp;
        }
    }
    total / log_probs.rows as f64
}
