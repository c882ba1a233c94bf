//! Immutable sparse graphs in compressed sparse row form.
//!
//! Every graph in this crate is undirected and simple: no self-loops, no
//! duplicate edges, adjacency stored symmetrically with each neighbor list
//! sorted ascending. Construction validates all of this once; afterwards the
//! structure is immutable and safe to share across threads.

pub mod gen;
pub mod io;
pub mod sat;

use thiserror::Error;

/// Errors from graph construction and the edge-list file format.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{u}, {v}}}")]
    DuplicateEdge { u: usize, v: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("edge count mismatch: header declares {expected}, file has {found}")]
    EdgeCountMismatch { expected: usize, found: usize },
    #[error("weights file: {0}")]
    MalformedWeights(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected simple graph, CSR adjacency with sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    m: usize,
    row_ptr: Vec<u32>,
    col: Vec<u32>,
}

impl Graph {
    /// Builds a graph from undirected edges given in either orientation.
    ///
    /// Rejects out-of-range endpoints, self-loops and duplicate edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph, GraphError> {
        for &(u, v) in edges {
            if u >= n {
                return Err(GraphError::VertexOutOfRange { vertex: u, n });
            }
            if v >= n {
                return Err(GraphError::VertexOutOfRange { vertex: v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
        }
        let mut deg = vec![0u32; n];
        for &(u, v) in edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut acc = 0u32;
        row_ptr.push(0);
        for d in &deg {
            acc += d;
            row_ptr.push(acc);
        }
        let mut col = vec![0u32; acc as usize];
        let mut cursor: Vec<u32> = row_ptr[..n].to_vec();
        for &(u, v) in edges {
            col[cursor[u] as usize] = v as u32;
            cursor[u] += 1;
            col[cursor[v] as usize] = u as u32;
            cursor[v] += 1;
        }
        for v in 0..n {
            let list = &mut col[row_ptr[v] as usize..row_ptr[v + 1] as usize];
            list.sort_unstable();
            for w in list.windows(2) {
                if w[0] == w[1] {
                    return Err(GraphError::DuplicateEdge {
                        u: v.min(w[0] as usize),
                        v: v.max(w[0] as usize),
                    });
                }
            }
        }
        Ok(Graph {
            n,
            m: edges.len(),
            row_ptr,
            col,
        })
    }

    /// Graph with `n` vertices and no edges.
    pub fn edgeless(n: usize) -> Graph {
        Graph {
            n,
            m: 0,
            row_ptr: vec![0; n + 1],
            col: Vec::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.m
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.col[self.row_ptr[v] as usize..self.row_ptr[v + 1] as usize]
    }

    pub fn degree(&self, v: usize) -> usize {
        (self.row_ptr[v + 1] - self.row_ptr[v]) as usize
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Iterates undirected edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| (v as usize) > u)
                .map(move |&v| (u, v as usize))
        })
    }

    /// Checks every structural invariant of the CSR representation.
    ///
    /// Intended for tests and fuzzing: verifies sorted neighbor lists,
    /// symmetry, absence of self-loops and duplicates, and that the list
    /// lengths sum to `2m`.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.row_ptr.len() != self.n + 1 {
            return Err("row_ptr length != n + 1".into());
        }
        if self.col.len() != 2 * self.m {
            return Err(format!(
                "neighbor list total {} != 2m = {}",
                self.col.len(),
                2 * self.m
            ));
        }
        for v in 0..self.n {
            let list = self.neighbors(v);
            for w in list.windows(2) {
                if w[0] >= w[1] {
                    return Err(format!("unsorted or duplicate neighbors at vertex {v}"));
                }
            }
            for &u in list {
                let u = u as usize;
                if u >= self.n {
                    return Err(format!("neighbor {u} out of range at vertex {v}"));
                }
                if u == v {
                    return Err(format!("self-loop at vertex {v}"));
                }
                if !self.has_edge(u, v) {
                    return Err(format!("asymmetric adjacency: {v} -> {u} but not back"));
                }
            }
        }
        Ok(())
    }
}

/// Maps vertex indices of an induced subgraph back to the original graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexMapping {
    sub_to_full: Vec<u32>,
}

impl VertexMapping {
    pub fn identity(n: usize) -> VertexMapping {
        VertexMapping {
            sub_to_full: (0..n as u32).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sub_to_full.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sub_to_full.is_empty()
    }

    pub fn to_full(&self, sub: usize) -> usize {
        self.sub_to_full[sub] as usize
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.sub_to_full
    }
}

/// Extracts the subgraph induced on `keep`, plus the index mapping.
///
/// `keep` may be unsorted; the subgraph orders vertices by ascending
/// original index, which keeps neighbor lists sorted without extra work.
pub fn induced_subgraph(g: &Graph, keep: &[usize]) -> Result<(Graph, VertexMapping), GraphError> {
    let n = g.vertex_count();
    for &v in keep {
        if v >= n {
            return Err(GraphError::VertexOutOfRange { vertex: v, n });
        }
    }
    let mut kept: Vec<u32> = keep.iter().map(|&v| v as u32).collect();
    kept.sort_unstable();
    kept.dedup();

    const ABSENT: u32 = u32::MAX;
    let mut full_to_sub = vec![ABSENT; n];
    for (si, &v) in kept.iter().enumerate() {
        full_to_sub[v as usize] = si as u32;
    }

    let mut row_ptr = Vec::with_capacity(kept.len() + 1);
    let mut col = Vec::new();
    row_ptr.push(0u32);
    let mut m = 0usize;
    for &v in &kept {
        for &u in g.neighbors(v as usize) {
            let su = full_to_sub[u as usize];
            if su != ABSENT {
                col.push(su);
                if su > full_to_sub[v as usize] {
                    m += 1;
                }
            }
        }
        row_ptr.push(col.len() as u32);
    }
    Ok((
        Graph {
            n: kept.len(),
            m,
            row_ptr,
            col,
        },
        VertexMapping { sub_to_full: kept },
    ))
}

/// Symmetrically normalized adjacency `D^(-1/2) A D^(-1/2)` in CSR form.
///
/// Rows of isolated vertices are all-zero by construction.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    n: usize,
    row_ptr: Vec<u32>,
    col: Vec<u32>,
    vals: Vec<f32>,
}

impl NormalizedAdjacency {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, v: usize) -> (&[u32], &[f32]) {
        let lo = self.row_ptr[v] as usize;
        let hi = self.row_ptr[v + 1] as usize;
        (&self.col[lo..hi], &self.vals[lo..hi])
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }
}

/// Builds `D^(-1/2) A D^(-1/2)` for a graph.
pub fn normalized_adjacency(g: &Graph) -> NormalizedAdjacency {
    let n = g.vertex_count();
    let inv_sqrt_deg: Vec<f32> = (0..n)
        .map(|v| {
            let d = g.degree(v);
            if d == 0 {
                0.0
            } else {
                1.0 / (d as f32).sqrt()
            }
        })
        .collect();
    let mut vals = Vec::with_capacity(2 * g.edge_count());
    for v in 0..n {
        for &u in g.neighbors(v) {
            vals.push(inv_sqrt_deg[v] * inv_sqrt_deg[u as usize]);
        }
    }
    NormalizedAdjacency {
        n,
        row_ptr: g.row_ptr.clone(),
        col: g.col.clone(),
        vals,
    }
}
