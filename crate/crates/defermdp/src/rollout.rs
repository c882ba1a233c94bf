//! Episode collection: the agent interface, coupled-pair rollouts for
//! training, and single rollouts for evaluation.

use crate::env::{div_reward, CoupledEnv, EnvState, Observation, VertexState};
use crate::graph::Graph;
use crate::net::{action_from_index, sample_row, BatchedObs, GraphSageNet, NetError};
use crate::problem::{objective, Assignment, ProblemSpec};
use rand_chacha::ChaCha8Rng;

/// One policy query for one observation.
pub struct Decision {
    pub actions: Vec<VertexState>,
    pub action_idx: Vec<u32>,
    pub log_probs: Vec<f32>,
    pub value: f32,
}

pub trait Agent {
    fn act(&self, obs: &[&Observation], rng: &mut ChaCha8Rng) -> Result<Vec<Decision>, NetError>;
}

impl Agent for GraphSageNet {
    fn act(&self, obs: &[&Observation], rng: &mut ChaCha8Rng) -> Result<Vec<Decision>, NetError> {
        if obs.is_empty() {
            return Ok(Vec::new());
        }
        let batch = BatchedObs::new(obs)?;
        let (log_probs, values) = self.forward(&batch);
        let mut out = Vec::with_capacity(obs.len());
        for (i, &value) in values.iter().enumerate() {
            let rows = batch.rows_of(i);
            let mut actions = Vec::with_capacity(rows.len());
            let mut action_idx = Vec::with_capacity(rows.len());
            let mut lps = Vec::with_capacity(rows.len());
            for row in rows {
                let row_lp = &log_probs.data[row * log_probs.cols..(row + 1) * log_probs.cols];
                let a = sample_row(row_lp, rng);
                actions.push(action_from_index(a));
                action_idx.push(a as u32);
                lps.push(row_lp[a]);
            }
            out.push(Decision {
                actions,
                action_idx,
                log_probs: lps,
                value,
            });
        }
        Ok(out)
    }
}

/// Everything the learner needs about one step, frozen at collection time.
pub struct StepRecord {
    pub obs: Observation,
    pub action_idx: Vec<u32>,
    pub old_log_probs: Vec<f32>,
    pub value: f32,
    pub reward: f64,
}

#[derive(Default)]
pub struct Episode {
    pub steps: Vec<StepRecord>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Two episodes on the same graph plus their joint-time diversification
/// rewards; `div[l]` aligns with step `l` of both copies.
pub struct CoupledPair {
    pub a: Episode,
    pub b: Episode,
    pub div: Vec<f64>,
}

pub struct RolloutBatch {
    pub pairs: Vec<CoupledPair>,
}

impl RolloutBatch {
    pub fn episodes(&self) -> impl Iterator<Item = &Episode> {
        self.pairs.iter().flat_map(|p| [&p.a, &p.b])
    }

    pub fn num_steps(&self) -> usize {
        self.episodes().map(Episode::len).sum()
    }

    pub fn mean_return(&self) -> f64 {
        let n = 2 * self.pairs.len();
        if n == 0 {
            return 0.0;
        }
        self.episodes().map(Episode::total_return).sum::<f64>() / n as f64
    }
}

/// Runs a coupled pair of episodes on every graph, advancing all active
/// copies in lockstep with batched policy queries.
pub fn rollout_pairs<A: Agent>(
    agent: &A,
    graphs: &[Graph],
    specs: &[ProblemSpec],
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RolloutBatch, NetError> {
    assert_eq!(graphs.len(), specs.len());
    let mut envs: Vec<CoupledEnv> = graphs
        .iter()
        .zip(specs)
        .map(|(g, spec)| CoupledEnv::reset(g, spec, horizon))
        .collect();
    let mut pairs: Vec<CoupledPair> = (0..graphs.len())
        .map(|_| CoupledPair {
            a: Episode::default(),
            b: Episode::default(),
            div: Vec::new(),
        })
        .collect();

    loop {
        let mut idx: Vec<(usize, bool)> = Vec::new();
        let mut obs_store: Vec<Observation> = Vec::new();
        for (p, env) in envs.iter().enumerate() {
            if !env.a.is_done() {
                idx.push((p, false));
                obs_store.push(env.a.observe());
            }
            if !env.b.is_done() {
                idx.push((p, true));
                obs_store.push(env.b.observe());
            }
        }
        if idx.is_empty() {
            break;
        }
        let refs: Vec<&Observation> = obs_store.iter().collect();
        let decisions = agent.act(&refs, rng)?;
        debug_assert_eq!(decisions.len(), idx.len());

        let prev: Vec<Option<(_, _)>> = envs
            .iter()
            .enumerate()
            .map(|(p, env)| {
                idx.iter()
                    .any(|&(q, _)| q == p)
                    .then(|| (env.a.state().clone(), env.b.state().clone()))
            })
            .collect();

        for ((&(p, is_b), obs), dec) in idx.iter().zip(obs_store).zip(decisions) {
            let env = &mut envs[p];
            let side = if is_b { &mut env.b } else { &mut env.a };
            let out = side.step(&dec.actions).expect("active env accepts action");
            let episode = if is_b {
                &mut pairs[p].b
            } else {
                &mut pairs[p].a
            };
            episode.steps.push(StepRecord {
                obs,
                action_idx: dec.action_idx,
                old_log_probs: dec.log_probs,
                value: dec.value,
                reward: out.reward,
            });
        }
        for (p, env) in envs.iter().enumerate() {
            if let Some((pa, pb)) = &prev[p] {
                pairs[p]
                    .div
                    .push(div_reward(pa, pb, env.a.state(), env.b.state()));
            }
        }
    }
    Ok(RolloutBatch { pairs })
}

/// One stochastic episode; returns the final assignment and its objective.
pub fn rollout_single<A: Agent>(
    agent: &A,
    g: &Graph,
    spec: &ProblemSpec,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Assignment, f64), NetError> {
    let mut env = EnvState::reset(g, spec, horizon);
    while !env.is_done() {
        let obs = env.observe();
        let mut dec = agent.act(&[&obs], rng)?;
        let dec = dec.pop().expect("one decision per observation");
        env.step(&dec.actions).expect("active env accepts action");
    }
    let x = env.solution().expect("episode is done");
    let value = objective(spec, g, &x);
    Ok((x, value))
}

/// Applies the same action to every vertex; for tests and baselines.
pub struct ConstantAgent(pub VertexState);

impl Agent for ConstantAgent {
    fn act(&self, obs: &[&Observation], _rng: &mut ChaCha8Rng) -> Result<Vec<Decision>, NetError> {
        Ok(obs
            .iter()
            .map(|o| {
                let n = o.sub.vertex_count();
                Decision {
                    actions: vec![self.0; n],
                    action_idx: vec![crate::net::index_from_action(self.0); n],
                    log_probs: vec![0.0; n],
                    value: 0.0,
                }
            })
            .collect())
    }
}

/// Uniform over the three actions; the untrained baseline.
pub struct RandomAgent;

impl Agent for RandomAgent {
    fn act(&self, obs: &[&Observation], rng: &mut ChaCha8Rng) -> Result<Vec<Decision>, NetError> {
        let lp = (1.0f32 / 3.0).ln();
        let row = [lp; 3];
        Ok(obs
            .iter()
            .map(|o| {
                let n = o.sub.vertex_count();
                let mut actions = Vec::with_capacity(n);
                let mut action_idx = Vec::with_capacity(n);
                for _ in 0..n {
                    let a = sample_row(&row, rng);
                    actions.push(action_from_index(a));
                    action_idx.push(a as u32);
                }
                Decision {
                    actions,
                    action_idx,
                    log_probs: vec![lp; n],
                    value: 0.0,
                }
            })
            .collect())
    }
}
