//! Non-learned references: exact oracles, a greedy baseline, and the
//! 2-improvement local search.

use crate::graph::Graph;
use crate::problem::{is_independent, objective, Assignment, ProblemSpec};
use thiserror::Error;

pub const BB_CAP: usize = 40;
pub const ENUM_CAP: usize = 22;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("graph has {n} vertices, solver cap is {cap}")]
    AboveCap { n: usize, cap: usize },
    #[error("input set is not independent")]
    NotIndependent,
}

/// Exact maximum independent set by branch and bound: branch on a residual
/// max-degree vertex (exclude, or include and delete its neighborhood),
/// prune when the current size plus the residual count cannot beat the
/// incumbent. Returns the size and a witness, verified independent.
pub fn brute_force_mis(g: &Graph) -> Result<(usize, Vec<usize>), SolverError> {
    let n = g.vertex_count();
    if n > BB_CAP {
        return Err(SolverError::AboveCap { n, cap: BB_CAP });
    }
    if n == 0 {
        return Ok((0, Vec::new()));
    }
    let adj = bitmask_adjacency(g);
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut best_size = 0usize;
    let mut best_set = 0u64;
    branch(&adj, full, 0, &mut best_size, &mut best_set);
    let witness: Vec<usize> = (0..n).filter(|&v| best_set >> v & 1 == 1).collect();
    assert!(
        witness.iter().all(|&v| adj[v] & best_set == 0),
        "witness is not independent"
    );
    Ok((best_size, witness))
}

fn bitmask_adjacency(g: &Graph) -> Vec<u64> {
    (0..g.vertex_count())
        .map(|v| {
            g.neighbors(v)
                .iter()
                .fold(0u64, |mask, &u| mask | 1u64 << u)
        })
        .collect()
}

fn branch(adj: &[u64], remaining: u64, cur: u64, best_size: &mut usize, best_set: &mut u64) {
    let cur_size = cur.count_ones() as usize;
    if cur_size > *best_size {
        *best_size = cur_size;
        *best_set = cur;
    }
    if cur_size + remaining.count_ones() as usize <= *best_size {
        return;
    }
    // residual max-degree vertex; degree 0 means the rest is edgeless
    let mut v = usize::MAX;
    let mut vd = 0usize;
    let mut it = remaining;
    while it != 0 {
        let w = it.trailing_zeros() as usize;
        it &= it - 1;
        let d = (adj[w] & remaining).count_ones() as usize;
        if v == usize::MAX || d > vd {
            v = w;
            vd = d;
        }
    }
    if vd == 0 {
        let cand = cur | remaining;
        let size = cand.count_ones() as usize;
        if size > *best_size {
            *best_size = size;
            *best_set = cand;
        }
        return;
    }
    let bit = 1u64 << v;
    branch(
        adj,
        remaining & !bit & !adj[v],
        cur | bit,
        best_size,
        best_set,
    );
    branch(adj, remaining & !bit, cur, best_size, best_set);
}

/// Exact optimum of any supported objective by enumerating all 2^n
/// assignments; MIS and MWIS are restricted to independent sets.
pub fn brute_force_generic(
    spec: &ProblemSpec,
    g: &Graph,
) -> Result<(f64, Assignment), SolverError> {
    let n = g.vertex_count();
    if n > ENUM_CAP {
        return Err(SolverError::AboveCap { n, cap: ENUM_CAP });
    }
    let restrict = spec.uses_cleanup();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_x: Assignment = vec![0; n];
    let mut x: Assignment = vec![0; n];
    for mask in 0u32..(1u32 << n) {
        for (v, slot) in x.iter_mut().enumerate() {
            *slot = (mask >> v & 1) as u8;
        }
        if restrict && !is_independent(g, &x) {
            continue;
        }
        let val = objective(spec, g, &x);
        if val > best_val {
            best_val = val;
            best_x.copy_from_slice(&x);
        }
    }
    Ok((best_val, best_x))
}

/// Greedy baseline: repeatedly take the minimum-degree vertex of the
/// residual graph (ties to the lowest index) and delete its closed
/// neighborhood. Returns a sorted independent set.
pub fn greedy_mis(g: &Graph) -> Vec<usize> {
    let n = g.vertex_count();
    let mut alive = vec![true; n];
    let mut deg: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut result = Vec::new();
    let mut remaining = n;
    let kill = |v: usize, alive: &mut Vec<bool>, deg: &mut Vec<usize>| {
        alive[v] = false;
        for &u in g.neighbors(v) {
            if alive[u as usize] {
                deg[u as usize] -= 1;
            }
        }
    };
    while remaining > 0 {
        let v = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (deg[v], v))
            .unwrap();
        result.push(v);
        let victims: Vec<usize> = std::iter::once(v)
            .chain(
                g.neighbors(v)
                    .iter()
                    .map(|&u| u as usize)
                    .filter(|&u| alive[u]),
            )
            .collect();
        for u in victims {
            if alive[u] {
                kill(u, &mut alive, &mut deg);
                remaining -= 1;
            }
        }
    }
    result
}

/// 2-improvement local search: repeatedly replace one solution vertex by
/// two of its "tight" free neighbors (free vertices whose only solution
/// neighbor is it) when they are non-adjacent. Free vertices are inserted
/// greedily before the search and after every accepted move, so the output
/// is both 1-maximal and 2-improvement-maximal.
pub fn local_search_2imp(g: &Graph, initial: &[usize]) -> Result<Vec<usize>, SolverError> {
    let n = g.vertex_count();
    let mut in_sol = vec![false; n];
    for &v in initial {
        in_sol[v] = true;
    }
    if g.edges().any(|(u, v)| in_sol[u] && in_sol[v]) {
        return Err(SolverError::NotIndependent);
    }
    let mut sol_deg: Vec<usize> = (0..n)
        .map(|v| {
            g.neighbors(v)
                .iter()
                .filter(|&&u| in_sol[u as usize])
                .count()
        })
        .collect();
    insert_free(g, &mut in_sol, &mut sol_deg);
    loop {
        let mut improved = false;
        'scan: for v in 0..n {
            if !in_sol[v] {
                continue;
            }
            let tights: Vec<usize> = g
                .neighbors(v)
                .iter()
                .map(|&u| u as usize)
                .filter(|&u| !in_sol[u] && sol_deg[u] == 1)
                .collect();
            for (i, &u) in tights.iter().enumerate() {
                for &w in &tights[i + 1..] {
                    if !g.has_edge(u, w) {
                        set_vertex(g, v, false, &mut in_sol, &mut sol_deg);
                        set_vertex(g, u, true, &mut in_sol, &mut sol_deg);
                        set_vertex(g, w, true, &mut in_sol, &mut sol_deg);
                        insert_free(g, &mut in_sol, &mut sol_deg);
                        improved = true;
                        break 'scan;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok((0..n).filter(|&v| in_sol[v]).collect())
}

fn set_vertex(g: &Graph, v: usize, value: bool, in_sol: &mut [bool], sol_deg: &mut [usize]) {
    debug_assert_ne!(in_sol[v], value);
    in_sol[v] = value;
    for &u in g.neighbors(v) {
        if value {
            sol_deg[u as usize] += 1;
        } else {
            sol_deg[u as usize] -= 1;
        }
    }
}

/// Single ascending pass adding every free vertex with no solution
/// neighbor; sufficient for maximality since insertions never free others.
fn insert_free(g: &Graph, in_sol: &mut [bool], sol_deg: &mut [usize]) {
    for v in 0..in_sol.len() {
        if !in_sol[v] && sol_deg[v] == 0 {
            set_vertex(g, v, true, in_sol, sol_deg);
        }
    }
}
