//! The deferred-decision MDP: ternary vertex states, update + clean-up
//! transition, objective-difference rewards, forced completion at the time
//! limit, diversification reward for coupled copies, and per-step features.

use crate::graph::{induced_subgraph, Graph, VertexMapping};
use crate::problem::{greedy_complete, objective, partial_objective, Assignment, ProblemSpec};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexState {
    Excluded,
    Included,
    Deferred,
}

impl VertexState {
    pub fn is_determined(self) -> bool {
        self != VertexState::Deferred
    }

    /// 0/1 value of a determined state.
    pub fn value(self) -> u8 {
        match self {
            VertexState::Excluded => 0,
            VertexState::Included => 1,
            VertexState::Deferred => panic!("deferred state has no value"),
        }
    }
}

/// Per-vertex ternary state vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVector(Vec<VertexState>);

impl StateVector {
    pub fn all_deferred(n: usize) -> Self {
        StateVector(vec![VertexState::Deferred; n])
    }

    /// Builds from codes: -1 → Deferred, 0 → Excluded, 1 → Included.
    pub fn from_codes(codes: &[i8]) -> Self {
        StateVector(
            codes
                .iter()
                .map(|&c| match c {
                    -1 => VertexState::Deferred,
                    0 => VertexState::Excluded,
                    1 => VertexState::Included,
                    _ => panic!("state code must be -1, 0 or 1"),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, v: usize) -> VertexState {
        self.0[v]
    }

    pub fn set(&mut self, v: usize, state: VertexState) {
        self.0[v] = state;
    }

    pub fn deferred_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&v| self.0[v] == VertexState::Deferred)
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.0.iter().all(|s| s.is_determined())
    }

    /// The 0/1 assignment, if every vertex is determined.
    pub fn assignment(&self) -> Option<Assignment> {
        self.0
            .iter()
            .map(|s| s.is_determined().then(|| s.value()))
            .collect()
    }

    pub fn from_assignment(x: &[u8]) -> Self {
        StateVector(
            x.iter()
                .map(|&b| {
                    if b == 1 {
                        VertexState::Included
                    } else {
                        VertexState::Excluded
                    }
                })
                .collect(),
        )
    }
}

/// Action per deferred vertex, in deferred-set order; `Deferred` keeps the
/// vertex undecided.
pub type ActionVector = Vec<VertexState>;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action has {found} entries, deferred set has {expected}")]
    ActionLength { expected: usize, found: usize },
    #[error("step called on a finished episode")]
    Finished,
}

/// Conflict resolution after an update: a clean-up pass that first reverts
/// every included vertex with an included neighbor to deferred
/// (simultaneously), then excludes every deferred vertex with an included
/// neighbor.
///
/// Output states satisfy: no two included vertices adjacent; no deferred
/// vertex adjacent to an included one. This holds for arbitrary input.
pub fn cleanup(g: &Graph, s: &StateVector) -> StateVector {
    let mut out = s.clone();
    let included_conflict = |v: usize| {
        s.get(v) == VertexState::Included
            && g.neighbors(v)
                .iter()
                .any(|&u| s.get(u as usize) == VertexState::Included)
    };
    for v in 0..s.len() {
        if included_conflict(v) {
            out.set(v, VertexState::Deferred);
        }
    }
    let mid = out.clone();
    for v in 0..s.len() {
        if mid.get(v) == VertexState::Deferred
            && g.neighbors(v)
                .iter()
                .any(|&u| mid.get(u as usize) == VertexState::Included)
        {
            out.set(v, VertexState::Excluded);
        }
    }
    out
}

/// Per-vertex observation rows over the deferred induced subgraph.
#[derive(Debug, Clone)]
pub struct Observation {
    pub sub: Graph,
    pub map: VertexMapping,
    /// Rows `[deg_sub / max(1, max_deg_sub), t / T]`, one per subgraph
    /// vertex.
    pub features: Vec<[f32; 2]>,
}

pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
}

/// One episode of the deferred MDP on a fixed graph.
pub struct EnvState<'g> {
    g: &'g Graph,
    spec: &'g ProblemSpec,
    s: StateVector,
    t: usize,
    horizon: usize,
    phi: f64,
    deferred: Vec<usize>,
    done: bool,
}

impl<'g> EnvState<'g> {
    /// Fresh episode: everything deferred, t = 0.
    pub fn reset(g: &'g Graph, spec: &'g ProblemSpec, horizon: usize) -> Self {
        assert!(horizon >= 1, "horizon must be at least 1");
        EnvState {
            g,
            spec,
            s: StateVector::all_deferred(g.vertex_count()),
            t: 0,
            horizon,
            phi: 0.0,
            deferred: (0..g.vertex_count()).collect(),
            done: g.vertex_count() == 0,
        }
    }

    pub fn graph(&self) -> &Graph {
        self.g
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    pub fn state(&self) -> &StateVector {
        &self.s
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn partial(&self) -> f64 {
        self.phi
    }

    pub fn deferred(&self) -> &[usize] {
        &self.deferred
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Final assignment once the episode is done.
    pub fn solution(&self) -> Option<Assignment> {
        if self.done {
            self.s.assignment()
        } else {
            None
        }
    }

    /// Deferred induced subgraph with feature rows.
    pub fn observe(&self) -> Observation {
        let (sub, map) =
            induced_subgraph(self.g, &self.deferred).expect("deferred set is in range");
        let max_deg = sub.max_degree().max(1) as f32;
        let progress = self.t as f32 / self.horizon as f32;
        let features = (0..sub.vertex_count())
            .map(|v| [sub.degree(v) as f32 / max_deg, progress])
            .collect();
        Observation { sub, map, features }
    }

    pub fn features(&self) -> Vec<[f32; 2]> {
        self.observe().features
    }

    /// Applies an action over the deferred set, runs clean-up when the
    /// problem uses it, pays the change in partial objective, and handles
    /// termination (empty deferred set, or forced completion at t = T).
    pub fn step(&mut self, action: &[VertexState]) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::Finished);
        }
        if action.len() != self.deferred.len() {
            return Err(EnvError::ActionLength {
                expected: self.deferred.len(),
                found: action.len(),
            });
        }
        let mut hat = self.s.clone();
        for (k, &v) in self.deferred.iter().enumerate() {
            hat.set(v, action[k]);
        }
        let next = if self.spec.uses_cleanup() {
            cleanup(self.g, &hat)
        } else {
            hat
        };
        #[cfg(debug_assertions)]
        for v in 0..self.s.len() {
            if self.s.get(v).is_determined() {
                debug_assert_eq!(self.s.get(v), next.get(v), "determined vertex reverted");
            }
        }
        let next_phi = partial_objective(self.spec, self.g, &next);
        let mut reward = next_phi - self.phi;
        self.s = next;
        self.phi = next_phi;
        self.t += 1;
        self.deferred = self.s.deferred_indices();
        if self.deferred.is_empty() {
            self.done = true;
        } else if self.t == self.horizon {
            let x = greedy_complete(self.spec, self.g, &self.s);
            let full = objective(self.spec, self.g, &x);
            reward += full - self.phi;
            self.s = StateVector::from_assignment(&x);
            self.phi = full;
            self.deferred.clear();
            self.done = true;
        }
        Ok(StepOutcome {
            reward,
            done: self.done,
        })
    }
}

/// Two copies of the MDP on one graph, advanced in lockstep while both run.
pub struct CoupledEnv<'g> {
    pub a: EnvState<'g>,
    pub b: EnvState<'g>,
}

impl<'g> CoupledEnv<'g> {
    pub fn reset(g: &'g Graph, spec: &'g ProblemSpec, horizon: usize) -> Self {
        CoupledEnv {
            a: EnvState::reset(g, spec, horizon),
            b: EnvState::reset(g, spec, horizon),
        }
    }

    pub fn is_done(&self) -> bool {
        self.a.is_done() && self.b.is_done()
    }
}

/// Diversification reward for one joint transition of a coupled pair.
///
/// A vertex contributes |x_i − x̄_i| exactly once: at the first step where
/// both copies have determined it, which is the later of the two
/// finalization steps. Summed over a completed pair this equals the L1
/// distance between the two solutions.
pub fn div_reward(
    prev_a: &StateVector,
    prev_b: &StateVector,
    next_a: &StateVector,
    next_b: &StateVector,
) -> f64 {
    let n = prev_a.len();
    assert!(n == prev_b.len() && n == next_a.len() && n == next_b.len());
    let mut total = 0.0;
    for v in 0..n {
        let newly = (!prev_a.get(v).is_determined() && next_a.get(v).is_determined())
            || (!prev_b.get(v).is_determined() && next_b.get(v).is_determined());
        if newly && next_a.get(v).is_determined() && next_b.get(v).is_determined() {
            total += (next_a.get(v).value() as f64 - next_b.get(v).value() as f64).abs();
        }
    }
    total
}
