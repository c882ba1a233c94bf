//! Objective definitions for the five supported problems: MIS, MWIS, PCMIS,
//! MAXCUT and the Ising model.
//!
//! Each objective has a partial form over ternary states that counts only
//! fully determined terms; per-step differences of the partial objective
//! telescope to the final objective over any completion trajectory.

use crate::env::{StateVector, VertexState};
use crate::graph::Graph;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Complete solution vector, one 0/1 value per vertex.
pub type Assignment = Vec<u8>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Mis,
    Mwis,
    Pcmis,
    MaxCut,
    Ising,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Per-vertex weights, MWIS only; strictly positive.
    pub weights: Option<Vec<f64>>,
    /// PCMIS penalty per edge inside the chosen set.
    pub lambda: f64,
    /// Ising interaction strength.
    pub beta: f64,
    /// Ising magnetic field strength.
    pub gamma: f64,
}

impl ProblemSpec {
    pub fn mis() -> Self {
        Self {
            kind: ProblemKind::Mis,
            weights: None,
            lambda: 0.5,
            beta: 1.0,
            gamma: 1.0,
        }
    }

    pub fn mwis(weights: Vec<f64>) -> Self {
        assert!(
            weights.iter().all(|&w| w > 0.0),
            "MWIS weights must be strictly positive"
        );
        Self {
            weights: Some(weights),
            ..Self::mis()
        }
        .with_kind(ProblemKind::Mwis)
    }

    pub fn pcmis(lambda: f64) -> Self {
        assert!(lambda > 0.0, "PCMIS lambda must be positive");
        Self {
            lambda,
            ..Self::mis()
        }
        .with_kind(ProblemKind::Pcmis)
    }

    pub fn maxcut() -> Self {
        Self::mis().with_kind(ProblemKind::MaxCut)
    }

    pub fn ising(beta: f64, gamma: f64) -> Self {
        Self {
            beta,
            gamma,
            ..Self::mis()
        }
        .with_kind(ProblemKind::Ising)
    }

    fn with_kind(mut self, kind: ProblemKind) -> Self {
        self.kind = kind;
        self
    }

    /// Whether the environment applies the conflict clean-up phase.
    pub fn uses_cleanup(&self) -> bool {
        matches!(self.kind, ProblemKind::Mis | ProblemKind::Mwis)
    }

    /// Vertex weight: the MWIS weight, or 1 for every other kind.
    pub fn weight(&self, v: usize) -> f64 {
        match &self.weights {
            Some(w) => w[v],
            None => 1.0,
        }
    }
}

/// Samples MWIS weights from Normal(1.0, 0.1), clamped below at 1e-6 so
/// they stay strictly positive.
pub fn sample_mwis_weights<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let normal = Normal::<f64>::new(1.0, 0.1).unwrap();
    (0..n).map(|_| normal.sample(rng).max(1e-6)).collect()
}

/// Objective value of a complete assignment. The assignment need not be
/// independent for MIS/MWIS; feasibility is checked separately.
pub fn objective(spec: &ProblemSpec, g: &Graph, x: &[u8]) -> f64 {
    assert_eq!(
        x.len(),
        g.vertex_count(),
        "assignment length {} does not match graph order {}",
        x.len(),
        g.vertex_count()
    );
    match spec.kind {
        ProblemKind::Mis => x.iter().map(|&b| b as f64).sum(),
        ProblemKind::Mwis => x
            .iter()
            .enumerate()
            .map(|(i, &b)| b as f64 * spec.weight(i))
            .sum(),
        ProblemKind::Pcmis => {
            let included: f64 = x.iter().map(|&b| b as f64).sum();
            let inner = g.edges().filter(|&(u, v)| x[u] == 1 && x[v] == 1).count();
            included - spec.lambda * inner as f64
        }
        ProblemKind::MaxCut => g.edges().filter(|&(u, v)| x[u] != x[v]).count() as f64,
        ProblemKind::Ising => {
            let field: f64 = x.iter().map(|&b| 2.0 * b as f64 - 1.0).sum();
            let interaction: f64 = g
                .edges()
                .map(|(u, v)| if x[u] == x[v] { -1.0 } else { 1.0 })
                .sum();
            spec.gamma * field + spec.beta * interaction
        }
    }
}

/// Partial objective over a ternary state: vertex terms for determined
/// vertices, edge terms for edges with both endpoints determined.
pub fn partial_objective(spec: &ProblemSpec, g: &Graph, s: &StateVector) -> f64 {
    assert_eq!(s.len(), g.vertex_count());
    let val = |v: usize| match s.get(v) {
        VertexState::Included => Some(1u8),
        VertexState::Excluded => Some(0u8),
        VertexState::Deferred => None,
    };
    let mut total = 0.0;
    for v in 0..g.vertex_count() {
        if let Some(b) = val(v) {
            total += vertex_term(spec, v, b);
        }
    }
    for (u, v) in g.edges() {
        if let (Some(a), Some(b)) = (val(u), val(v)) {
            total += edge_term(spec, a, b);
        }
    }
    total
}

fn vertex_term(spec: &ProblemSpec, v: usize, b: u8) -> f64 {
    match spec.kind {
        ProblemKind::Mis => b as f64,
        ProblemKind::Mwis => b as f64 * spec.weight(v),
        ProblemKind::Pcmis => b as f64,
        ProblemKind::MaxCut => 0.0,
        ProblemKind::Ising => spec.gamma * (2.0 * b as f64 - 1.0),
    }
}

fn edge_term(spec: &ProblemSpec, a: u8, b: u8) -> f64 {
    match spec.kind {
        ProblemKind::Mis | ProblemKind::Mwis => 0.0,
        ProblemKind::Pcmis => {
            if a == 1 && b == 1 {
                -spec.lambda
            } else {
                0.0
            }
        }
        ProblemKind::MaxCut => {
            if a != b {
                1.0
            } else {
                0.0
            }
        }
        ProblemKind::Ising => {
            if a == b {
                -spec.beta
            } else {
                spec.beta
            }
        }
    }
}

/// True iff no edge has both endpoints set to 1.
pub fn is_independent(g: &Graph, x: &[u8]) -> bool {
    assert_eq!(x.len(), g.vertex_count());
    g.edges().all(|(u, v)| x[u] == 0 || x[v] == 0)
}

/// Completes a partial state when the episode hits its time limit.
///
/// MIS and MWIS set every deferred vertex to 0, which is always feasible.
/// The other kinds scan deferred vertices in ascending order and give each
/// the value with the larger increase in partial objective; ties pick 0.
pub fn greedy_complete(spec: &ProblemSpec, g: &Graph, s: &StateVector) -> Assignment {
    assert_eq!(s.len(), g.vertex_count());
    let mut x: Vec<u8> = Vec::with_capacity(s.len());
    let mut determined: Vec<bool> = Vec::with_capacity(s.len());
    for v in 0..s.len() {
        match s.get(v) {
            VertexState::Included => {
                x.push(1);
                determined.push(true);
            }
            VertexState::Excluded => {
                x.push(0);
                determined.push(true);
            }
            VertexState::Deferred => {
                x.push(0);
                determined.push(false);
            }
        }
    }
    if spec.uses_cleanup() {
        return x; // deferred already mapped to 0
    }
    for v in 0..s.len() {
        if determined[v] {
            continue;
        }
        let delta = |b: u8| {
            let mut d = vertex_term(spec, v, b);
            for &u in g.neighbors(v) {
                if determined[u as usize] {
                    d += edge_term(spec, b, x[u as usize]);
                }
            }
            d
        };
        x[v] = if delta(1) > delta(0) { 1 } else { 0 };
        determined[v] = true;
    }
    x
}
