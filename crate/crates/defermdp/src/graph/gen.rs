//! Random graph generators: Erdős–Rényi, Barabási–Albert, Holme–Kim and
//! Watts–Strogatz models.
//!
//! All generators are deterministic functions of their parameters and seed;
//! the RNG is local to each call.

use super::{Graph, GraphError};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Erdős–Rényi G(n, p): each of the C(n,2) pairs is an edge independently
/// with probability `p`.
pub fn gen_er(n: usize, p: f64, seed: u64) -> Graph {
    assert!(n >= 1, "gen_er requires n >= 1");
    assert!((0.0..=1.0).contains(&p), "gen_er requires p in [0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges).expect("generator produced an invalid edge set")
}

/// Picks `count` distinct vertices from `pool` uniformly; since `pool`
/// lists each vertex once per incident edge, the draw is proportional to
/// degree.
fn pick_preferential(pool: &[u32], count: usize, taken: &mut Vec<u32>, rng: &mut ChaCha8Rng) {
    while taken.len() < count {
        let t = pool[rng.gen_range(0..pool.len())];
        if !taken.contains(&t) {
            taken.push(t);
        }
    }
}

/// Barabási–Albert preferential attachment.
///
/// Starts from `m_attach` isolated vertices; every arriving vertex attaches
/// to `m_attach` distinct existing vertices chosen proportionally to degree
/// (the first arrival attaches to all seed vertices).
pub fn gen_ba(n: usize, m_attach: usize, seed: u64) -> Result<Graph, GraphError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_ba_inner(n, m_attach, &mut rng)
}

fn gen_ba_inner(n: usize, m_attach: usize, rng: &mut ChaCha8Rng) -> Result<Graph, GraphError> {
    check_attach(n, m_attach)?;
    let mut edges = Vec::with_capacity((n - m_attach) * m_attach);
    let mut pool: Vec<u32> = Vec::with_capacity(2 * (n - m_attach) * m_attach);
    let mut targets: Vec<u32> = Vec::with_capacity(m_attach);
    for v in m_attach..n {
        targets.clear();
        if pool.is_empty() {
            targets.extend(0..m_attach as u32);
        } else {
            pick_preferential(&pool, m_attach, &mut targets, rng);
        }
        for &t in &targets {
            edges.push((v, t as usize));
            pool.push(t);
            pool.push(v as u32);
        }
    }
    Graph::from_edges(n, &edges)
}

/// Holme–Kim powerlaw cluster model: Barabási–Albert attachment where each
/// attachment after the first in a round closes a triangle with probability
/// `p_triad` by linking to a neighbor of the previous target.
///
/// With `p_triad = 0` the construction consumes the RNG stream exactly as
/// [`gen_ba`] does, so the output matches it per seed.
pub fn gen_hk(n: usize, m_attach: usize, p_triad: f64, seed: u64) -> Result<Graph, GraphError> {
    check_attach(n, m_attach)?;
    assert!(
        (0.0..=1.0).contains(&p_triad),
        "gen_hk requires p_triad in [0, 1]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity((n - m_attach) * m_attach);
    let mut pool: Vec<u32> = Vec::new();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut targets: Vec<u32> = Vec::with_capacity(m_attach);
    for v in m_attach..n {
        targets.clear();
        if pool.is_empty() {
            targets.extend(0..m_attach as u32);
        } else {
            for k in 0..m_attach {
                // short-circuit keeps the p_triad = 0 stream identical to BA
                if k > 0 && p_triad > 0.0 && rng.gen_bool(p_triad) {
                    let prev = targets[k - 1] as usize;
                    let candidates: Vec<u32> = adj[prev]
                        .iter()
                        .copied()
                        .filter(|w| !targets.contains(w) && *w != v as u32)
                        .collect();
                    if !candidates.is_empty() {
                        let w = candidates[rng.gen_range(0..candidates.len())];
                        targets.push(w);
                        continue;
                    }
                    // no eligible triad partner: fall through to attachment
                }
                pick_preferential(&pool, k + 1, &mut targets, &mut rng);
            }
        }
        for &t in &targets {
            edges.push((v, t as usize));
            adj[v].push(t);
            adj[t as usize].push(v as u32);
            pool.push(t);
            pool.push(v as u32);
        }
    }
    Graph::from_edges(n, &edges)
}

/// Watts–Strogatz small world: ring lattice with `k` nearest neighbors per
/// vertex, each lattice edge rewired with probability `p_rewire` avoiding
/// self-loops and duplicates. Edge count is preserved.
pub fn gen_ws(n: usize, k: usize, p_rewire: f64, seed: u64) -> Result<Graph, GraphError> {
    if !k.is_multiple_of(2) {
        return Err(GraphError::MalformedHeader(format!(
            "watts-strogatz requires even k, got {k}"
        )));
    }
    if k >= n {
        return Err(GraphError::VertexOutOfRange { vertex: k, n });
    }
    assert!(
        (0.0..=1.0).contains(&p_rewire),
        "gen_ws requires p_rewire in [0, 1]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    let has = |adj: &Vec<Vec<u32>>, u: usize, w: u32| adj[u].contains(&w);
    for j in 1..=k / 2 {
        for u in 0..n {
            let t = ((u + j) % n) as u32;
            adj[u].push(t);
            adj[t as usize].push(u as u32);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            if !rng.gen_bool(p_rewire) {
                continue;
            }
            let t = ((u + j) % n) as u32;
            if adj[u].len() >= n - 1 {
                continue; // saturated vertex, keep the lattice edge
            }
            let mut w = rng.gen_range(0..n) as u32;
            while w == u as u32 || has(&adj, u, w) {
                w = rng.gen_range(0..n) as u32;
            }
            // replace {u, t} by {u, w}
            adj[u].retain(|&x| x != t);
            adj[t as usize].retain(|&x| x != u as u32);
            adj[u].push(w);
            adj[w as usize].push(u as u32);
        }
    }
    let mut edges = Vec::with_capacity(n * k / 2);
    for (u, list) in adj.iter().enumerate() {
        for &w in list {
            if (w as usize) > u {
                edges.push((u, w as usize));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

fn check_attach(n: usize, m_attach: usize) -> Result<(), GraphError> {
    if m_attach == 0 {
        return Err(GraphError::MalformedHeader(
            "attachment count must be at least 1".into(),
        ));
    }
    if m_attach >= n {
        return Err(GraphError::VertexOutOfRange {
            vertex: m_attach,
            n,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_degenerate_probabilities() {
        let g = gen_er(5, 0.0, 123);
        assert_eq!(g.edge_count(), 0);
        let g = gen_er(3, 1.0, 123);
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn er_is_deterministic_per_seed() {
        assert_eq!(gen_er(40, 0.2, 7), gen_er(40, 0.2, 7));
        assert_ne!(gen_er(40, 0.2, 7), gen_er(40, 0.2, 8));
    }

    #[test]
    fn er_edge_count_matches_binomial_mean() {
        // Monte-Carlo over seeds vs Binomial(C(200,2), 0.15): the observed
        // mean of 1000 independent counts stays within 3 sigma of the
        // binomial mean.
        let n = 200usize;
        let p = 0.15f64;
        let pairs = (n * (n - 1) / 2) as f64;
        let seeds = 1000u64;
        let total: f64 = (0..seeds)
            .map(|s| gen_er(n, p, s).edge_count() as f64)
            .sum();
        let observed_mean = total / seeds as f64;
        let mean = pairs * p;
        let sigma_of_mean = (pairs * p * (1.0 - p) / seeds as f64).sqrt();
        assert!(
            (observed_mean - mean).abs() < 3.0 * sigma_of_mean,
            "observed {observed_mean} vs expected {mean} +- {sigma_of_mean}"
        );
    }

    #[test]
    fn ba_small_cases() {
        assert_eq!(gen_ba(2, 1, 0).unwrap().edge_count(), 1);
        let tree = gen_ba(10, 1, 3).unwrap();
        assert_eq!(tree.edge_count(), 9);
    }

    #[test]
    fn ba_edge_count_and_validity() {
        let g = gen_ba(100, 2, 42).unwrap();
        assert_eq!(g.edge_count(), 196);
        g.check_invariants().unwrap();
    }

    #[test]
    fn ba_rejects_bad_attachment() {
        assert!(gen_ba(3, 3, 0).is_err());
        assert!(gen_ba(3, 0, 0).is_err());
    }

    #[test]
    fn hk_zero_triad_matches_ba() {
        for seed in [0u64, 1, 99] {
            assert_eq!(
                gen_hk(60, 2, 0.0, seed).unwrap(),
                gen_ba(60, 2, seed).unwrap()
            );
        }
    }

    #[test]
    fn hk_single_attachment_is_tree() {
        let g = gen_hk(10, 1, 1.0, 5).unwrap();
        assert_eq!(g.edge_count(), 9);
        // connected: BFS from 0 reaches all
        let mut seen = [false; 10];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in g.neighbors(v) {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    stack.push(u as usize);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    fn mean_clustering(g: &Graph) -> f64 {
        let n = g.vertex_count();
        let mut total = 0.0;
        for v in 0..n {
            let nb = g.neighbors(v);
            let d = nb.len();
            if d < 2 {
                continue;
            }
            let mut tri = 0usize;
            for i in 0..d {
                for j in (i + 1)..d {
                    if g.has_edge(nb[i] as usize, nb[j] as usize) {
                        tri += 1;
                    }
                }
            }
            total += tri as f64 / (d * (d - 1) / 2) as f64;
        }
        total / n as f64
    }

    #[test]
    fn hk_clusters_more_than_ba() {
        let seeds = 500u64;
        let mut hk_sum = 0.0;
        let mut ba_sum = 0.0;
        for s in 0..seeds {
            hk_sum += mean_clustering(&gen_hk(100, 3, 0.5, s).unwrap());
            ba_sum += mean_clustering(&gen_ba(100, 3, s).unwrap());
        }
        assert!(
            hk_sum / seeds as f64 > ba_sum / seeds as f64,
            "triad closure should raise mean clustering ({} vs {})",
            hk_sum / seeds as f64,
            ba_sum / seeds as f64
        );
    }

    #[test]
    fn ws_unrewired_is_ring_lattice() {
        let g = gen_ws(6, 2, 0.0, 0).unwrap();
        assert_eq!(g.edge_count(), 6);
        for v in 0..6 {
            assert_eq!(g.degree(v), 2);
            assert!(g.has_edge(v, (v + 1) % 6));
        }
        let g = gen_ws(20, 4, 0.0, 0).unwrap();
        assert_eq!(g.edge_count(), 40);
    }

    #[test]
    fn ws_rewiring_preserves_edge_count() {
        let lattice = gen_ws(20, 4, 0.0, 3).unwrap();
        let rewired = gen_ws(20, 4, 1.0, 3).unwrap();
        assert_eq!(rewired.edge_count(), 40);
        assert_ne!(rewired, lattice);
        rewired.check_invariants().unwrap();
    }

    #[test]
    fn ws_rejects_bad_parameters() {
        assert!(gen_ws(10, 3, 0.1, 0).is_err());
        assert!(gen_ws(4, 4, 0.1, 0).is_err());
    }

    #[test]
    fn generators_always_produce_valid_graphs() {
        for seed in 0..20 {
            gen_er(37, 0.3, seed).check_invariants().unwrap();
            gen_ba(37, 3, seed).unwrap().check_invariants().unwrap();
            gen_hk(37, 3, 0.4, seed)
                .unwrap()
                .check_invariants()
                .unwrap();
            gen_ws(37, 6, 0.3, seed)
                .unwrap()
                .check_invariants()
                .unwrap();
        }
    }
}
