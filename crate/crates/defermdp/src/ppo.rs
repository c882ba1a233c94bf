//! Proximal policy optimization: undiscounted advantages with the
//! diversification bonus, per-vertex ratio clipping in log space, the
//! training loop, and best-of-k evaluation.

use crate::config::{ConfigError, TrainConfig};
use crate::env::Observation;
use crate::graph::Graph;
use crate::net::{forward_batch, BatchedObs, GraphSageNet, NetConfig, NetError};
use crate::nn::{CheckpointError, LossFn, ParamVars, Scalar, Tape, Tensor, Var};
use crate::problem::{sample_mwis_weights, Assignment, ProblemKind, ProblemSpec};
use crate::rollout::{rollout_pairs, rollout_single, Agent, RolloutBatch, StepRecord};
use crate::seeded_stream;
use crate::solver::local_search_2imp;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

pub const VALUE_COEFF: f64 = 0.5;
pub const GRAD_CLIP: f64 = 0.5;

/// One (episode, step) pair ready for the learner.
#[derive(Clone, Copy)]
pub struct MiniStep<'a> {
    pub rec: &'a StepRecord,
    /// Normalized return-to-go minus the stored value prediction.
    pub advantage: f64,
    /// Normalized return-to-go; the value regression target.
    pub target: f64,
}

/// Undiscounted suffix sums of (R + α·R_div), scaled by `scale` (1 over
/// the dataset's maximum vertex count), minus stored value predictions.
pub fn compute_advantages(batch: &RolloutBatch, alpha: f64, scale: f64) -> Vec<MiniStep<'_>> {
    let mut out = Vec::with_capacity(batch.num_steps());
    for pair in &batch.pairs {
        let mut div_suffix = vec![0.0; pair.div.len() + 1];
        for j in (0..pair.div.len()).rev() {
            div_suffix[j] = div_suffix[j + 1] + pair.div[j];
        }
        for episode in [&pair.a, &pair.b] {
            let mut reward_to_go = 0.0;
            let mut steps = Vec::with_capacity(episode.len());
            for (t, rec) in episode.steps.iter().enumerate().rev() {
                reward_to_go += rec.reward;
                let div = div_suffix[t.min(pair.div.len())];
                let ret = scale * (reward_to_go + alpha * div);
                steps.push(MiniStep {
                    rec,
                    advantage: ret - rec.value as f64,
                    target: ret,
                });
            }
            steps.reverse();
            out.extend(steps);
        }
    }
    out
}

/// The PPO objective over one minibatch, buildable at any precision.
pub struct PpoLoss<'a> {
    pub net_cfg: &'a NetConfig,
    pub steps: &'a [MiniStep<'a>],
    pub clip_eps: f64,
    pub entropy_coeff: f64,
}

pub struct LossParts {
    pub total: Var,
    pub policy: Var,
    pub value_mse: Var,
    pub entropy: Var,
}

impl PpoLoss<'_> {
    /// Per-vertex ratios are combined in log space: with S = Σ log r_i and
    /// S̃ its clipped counterpart, min(A·e^S, A·e^S̃) = A·e^m where
    /// m = sgn(A)·min(sgn(A)·S, sgn(A)·S̃), so only one exp is taken per
    /// step and products over hundreds of vertices cannot overflow.
    pub fn build_parts<S: Scalar>(&self, tape: &mut Tape<S>, vars: &ParamVars) -> LossParts {
        let steps = self.steps;
        let num_steps = steps.len();
        assert!(num_steps > 0, "empty minibatch");
        let obs: Vec<&Observation> = steps.iter().map(|s| &s.rec.obs).collect();
        let batch = BatchedObs::new(&obs).expect("recorded steps have deferred vertices");
        let out = forward_batch(tape, vars, self.net_cfg, &batch);

        let mut actions: Vec<u32> = Vec::with_capacity(batch.total_rows());
        let mut old: Vec<S> = Vec::with_capacity(batch.total_rows());
        for (i, st) in steps.iter().enumerate() {
            debug_assert_eq!(batch.rows_of(i).len(), st.rec.action_idx.len());
            actions.extend(&st.rec.action_idx);
            old.extend(st.rec.old_log_probs.iter().map(|&x| S::from_f64(x as f64)));
        }
        let chosen = tape.select_column(out.log_probs, &actions);
        let old = tape.leaf(Tensor::from_vec(actions.len(), 1, old));
        let log_ratio = tape.sub(chosen, old);
        let lo = S::from_f64((1.0 - self.clip_eps).ln());
        let hi = S::from_f64((1.0 + self.clip_eps).ln());
        let clipped = tape.clamp(log_ratio, lo, hi);
        let sum = tape.segment_sum(log_ratio, batch.segments(), num_steps);
        let sum_clip = tape.segment_sum(clipped, batch.segments(), num_steps);

        let sign_data: Vec<S> = steps
            .iter()
            .map(|st| S::from_f64(if st.advantage < 0.0 { -1.0 } else { 1.0 }))
            .collect();
        let sign = tape.leaf(Tensor::from_vec(num_steps, 1, sign_data));
        let s_sum = tape.mul(sign, sum);
        let s_clip = tape.mul(sign, sum_clip);
        let s_min = tape.min(s_sum, s_clip);
        let m = tape.mul(sign, s_min);
        let ratio = tape.exp(m);
        let neg_adv: Vec<S> = steps.iter().map(|st| S::from_f64(-st.advantage)).collect();
        let neg_adv = tape.leaf(Tensor::from_vec(num_steps, 1, neg_adv));
        let per_step = tape.mul(neg_adv, ratio);
        let policy_sum = tape.sum_all(per_step);
        let policy = tape.scale(policy_sum, S::from_f64(1.0 / num_steps as f64));

        let targets: Vec<S> = steps.iter().map(|st| S::from_f64(st.target)).collect();
        let targets = tape.leaf(Tensor::from_vec(num_steps, 1, targets));
        let diff = tape.sub(out.values, targets);
        let sq = tape.mul(diff, diff);
        let sq_sum = tape.sum_all(sq);
        let value_mse = tape.scale(sq_sum, S::from_f64(1.0 / num_steps as f64));

        let probs = tape.exp(out.log_probs);
        let plogp = tape.mul(probs, out.log_probs);
        let neg_ent_sum = tape.sum_all(plogp);
        let entropy = tape.scale(neg_ent_sum, S::from_f64(-1.0 / batch.total_rows() as f64));

        let weighted_mse = tape.scale(value_mse, S::from_f64(VALUE_COEFF));
        let weighted_ent = tape.scale(entropy, S::from_f64(-self.entropy_coeff));
        let partial = tape.add(policy, weighted_mse);
        let total = tape.add(partial, weighted_ent);
        LossParts {
            total,
            policy,
            value_mse,
            entropy,
        }
    }
}

impl LossFn for PpoLoss<'_> {
    fn build<S: Scalar>(&self, tape: &mut Tape<S>, vars: &ParamVars) -> Var {
        self.build_parts(tape, vars).total
    }
}

/// Problem instance for one graph; MWIS draws fresh weights.
pub fn problem_spec_for(kind: ProblemKind, n: usize, rng: &mut ChaCha8Rng) -> ProblemSpec {
    match kind {
        ProblemKind::Mis => ProblemSpec::mis(),
        ProblemKind::Mwis => ProblemSpec::mwis(sample_mwis_weights(n, rng)),
        ProblemKind::Pcmis => ProblemSpec::pcmis(0.5),
        ProblemKind::MaxCut => ProblemSpec::maxcut(),
        ProblemKind::Ising => ProblemSpec::ising(1.0, 1.0),
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at update {update}: policy {policy}, value mse {value_mse}, entropy {entropy}")]
    NonFinite {
        update: usize,
        policy: f64,
        value_mse: f64,
        entropy: f64,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize)]
struct MetricsLine {
    update: usize,
    mean_return: f64,
    val_mean: Option<f64>,
    val_best: Option<f64>,
    entropy: f64,
    loss: f64,
    wall_ms: u64,
}

pub struct TrainOutcome {
    pub updates: usize,
    pub best_val: Option<f64>,
    pub last_val: Option<f64>,
}

/// Full training loop. Writes `metrics.ndjson`, `best.ckpt` (highest
/// validation mean), and `last.ckpt` into `out_dir`.
pub fn train(cfg: &TrainConfig, out_dir: &Path) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let net_cfg = NetConfig::default();
    let mut net = GraphSageNet::new(net_cfg.clone(), seeded_stream(cfg.seed, "init").gen());
    let mut data_rng = seeded_stream(cfg.seed, "data");
    let mut train_rng = seeded_stream(cfg.seed, "train");
    let mut val_rng = seeded_stream(cfg.seed, "val");

    let val_set: Vec<(Graph, ProblemSpec)> = (0..cfg.val_graphs)
        .map(|_| {
            let g = cfg.dataset.sample(&mut val_rng);
            let spec = problem_spec_for(cfg.problem, g.vertex_count(), &mut val_rng);
            (g, spec)
        })
        .collect();

    let best_path = out_dir.join("best.ckpt");
    let last_path = out_dir.join("last.ckpt");
    let mut metrics = std::fs::File::create(out_dir.join("metrics.ndjson"))?;
    net.store.save(&best_path)?;

    let mut best_val: Option<f64> = None;
    let mut last_val: Option<f64> = None;
    let scale = 1.0 / cfg.dataset.n_max as f64;

    for update in 1..=cfg.updates {
        let started = Instant::now();
        let num_pairs = cfg.envs_per_batch / 2;
        let mut graphs = Vec::with_capacity(num_pairs);
        let mut specs = Vec::with_capacity(num_pairs);
        for _ in 0..num_pairs {
            let g = cfg.dataset.sample(&mut data_rng);
            specs.push(problem_spec_for(
                cfg.problem,
                g.vertex_count(),
                &mut data_rng,
            ));
            graphs.push(g);
        }
        let batch = rollout_pairs(&net, &graphs, &specs, cfg.horizon, &mut train_rng)?;
        let steps = compute_advantages(&batch, cfg.alpha, scale);

        let mut last_parts = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..cfg.grad_steps {
            let take = cfg.minibatch.min(steps.len());
            let picked = rand::seq::index::sample(&mut train_rng, steps.len(), take);
            let mini: Vec<MiniStep> = picked.iter().map(|i| steps[i]).collect();
            let loss = PpoLoss {
                net_cfg: &net_cfg,
                steps: &mini,
                clip_eps: cfg.clip_eps,
                entropy_coeff: cfg.entropy_coeff,
            };
            let mut tape: Tape<f32> = Tape::new();
            let vars = ParamVars::bind(&mut tape, &net.store);
            let parts = loss.build_parts(&mut tape, &vars);
            let total = tape.value(parts.total).item() as f64;
            let policy = tape.value(parts.policy).item() as f64;
            let value_mse = tape.value(parts.value_mse).item() as f64;
            let entropy = tape.value(parts.entropy).item() as f64;
            if !total.is_finite() {
                metrics.flush()?;
                return Err(TrainError::NonFinite {
                    update,
                    policy,
                    value_mse,
                    entropy,
                });
            }
            tape.backward(parts.total);
            net.store.zero_grads();
            vars.accumulate_grads(&tape, &mut net.store);
            net.store.clip_grad_norm(GRAD_CLIP);
            net.store.adam_step(cfg.lr);
            last_parts = (total, policy, value_mse, entropy);
        }

        if update % cfg.val_interval == 0 || update == cfg.updates {
            let records = evaluate_best_of_k(
                &net,
                &val_set,
                cfg.horizon,
                cfg.val_samples,
                false,
                &mut val_rng,
            )?;
            let mean =
                records.iter().map(|r| r.objective).sum::<f64>() / records.len().max(1) as f64;
            last_val = Some(mean);
            if best_val.is_none_or(|b| mean > b) {
                best_val = Some(mean);
                net.store.save(&best_path)?;
            }
        }

        let line = MetricsLine {
            update,
            mean_return: batch.mean_return(),
            val_mean: last_val,
            val_best: best_val,
            entropy: last_parts.3,
            loss: last_parts.0,
            wall_ms: started.elapsed().as_millis() as u64,
        };
        writeln!(
            metrics,
            "{}",
            serde_json::to_string(&line).expect("metrics serialize")
        )?;
        metrics.flush()?;
    }
    net.store.save(&last_path)?;
    Ok(TrainOutcome {
        updates: cfg.updates,
        best_val,
        last_val,
    })
}

pub struct EvalRecord {
    pub objective: f64,
    pub assignment: Assignment,
    pub time_ms: u64,
}

/// k stochastic rollouts per instance, reporting the best. Each instance
/// draws its own sub-stream up front, so results for a given instance are
/// a prefix-stable function of k. With `local_search`, MIS solutions are
/// improved by 2-improvement before comparison.
pub fn evaluate_best_of_k<A: Agent>(
    agent: &A,
    instances: &[(Graph, ProblemSpec)],
    horizon: usize,
    k: usize,
    local_search: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EvalRecord>, NetError> {
    assert!(k >= 1, "need at least one sample");
    let mut out = Vec::with_capacity(instances.len());
    for (g, spec) in instances {
        let mut sub = ChaCha8Rng::seed_from_u64(rng.gen());
        let started = Instant::now();
        let mut best: Option<(f64, Assignment)> = None;
        for _ in 0..k {
            let (mut x, mut objective) = rollout_single(agent, g, spec, horizon, &mut sub)?;
            if local_search && spec.kind == ProblemKind::Mis {
                let set: Vec<usize> = (0..x.len()).filter(|&v| x[v] == 1).collect();
                let improved =
                    local_search_2imp(g, &set).expect("rollout solutions are independent");
                objective = improved.len() as f64;
                x = vec![0; x.len()];
                for v in improved {
                    x[v] = 1;
                }
            }
            if best.as_ref().is_none_or(|(b, _)| objective > *b) {
                best = Some((objective, x));
            }
        }
        let (objective, assignment) = best.expect("k >= 1");
        out.push(EvalRecord {
            objective,
            assignment,
            time_ms: started.elapsed().as_millis() as u64,
        });
    }
    Ok(out)
}
