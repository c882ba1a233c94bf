//! DIMACS CNF parsing and the 3-SAT to maximum-independent-set reduction.
//!
//! A formula with k clauses maps to a graph with one vertex per literal
//! occurrence; the formula is satisfiable exactly when the graph has an
//! independent set of size k.

use super::Graph;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CnfError {
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: `{token}` is not a literal")]
    BadToken { line: usize, token: String },
    #[error("literal {lit} out of range for {num_vars} variables")]
    LiteralOutOfRange { lit: i32, num_vars: usize },
    #[error("clause {0} is empty")]
    EmptyClause(usize),
    #[error("clause {clause} has {len} literals, at most 3 supported")]
    ClauseTooLarge { clause: usize, len: usize },
    #[error("header declares {expected} clauses, found {found}")]
    ClauseCountMismatch { expected: usize, found: usize },
    #[error("input ends inside a clause (missing terminating 0)")]
    UnterminatedClause,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i32>>,
}

/// Parses the DIMACS CNF subset: `c` comments, a `p cnf V C` header, then
/// clauses as nonzero literals terminated by `0`, free-form across lines.
/// SATLIB's trailing `%` line and extra `0` terminators are tolerated.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, CnfError> {
    let mut header: Option<(usize, usize)> = None;
    let mut tokens: Vec<(usize, i32)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if header.is_none() {
            let mut parts = line.split_whitespace();
            if parts.next() != Some("p") || parts.next() != Some("cnf") {
                return Err(CnfError::MissingHeader);
            }
            let v: usize = parse_header_field(parts.next(), line)?;
            let c: usize = parse_header_field(parts.next(), line)?;
            if parts.next().is_some() {
                return Err(CnfError::MalformedHeader(line.to_string()));
            }
            header = Some((v, c));
            continue;
        }
        for tok in line.split_whitespace() {
            let lit: i32 = tok.parse().map_err(|_| CnfError::BadToken {
                line: line_no,
                token: tok.to_string(),
            })?;
            tokens.push((line_no, lit));
        }
    }
    let (num_vars, num_clauses) = header.ok_or(CnfError::MissingHeader)?;

    let mut clauses: Vec<Vec<i32>> = Vec::with_capacity(num_clauses);
    let mut current: Vec<i32> = Vec::new();
    for &(_, lit) in &tokens {
        if lit == 0 {
            if current.is_empty() {
                // SATLIB files pad the tail with a bare 0; anywhere else an
                // empty clause is an error.
                if clauses.len() >= num_clauses {
                    continue;
                }
                return Err(CnfError::EmptyClause(clauses.len() + 1));
            }
            clauses.push(std::mem::take(&mut current));
        } else {
            if lit.unsigned_abs() as usize > num_vars {
                return Err(CnfError::LiteralOutOfRange { lit, num_vars });
            }
            current.push(lit);
        }
    }
    if !current.is_empty() {
        return Err(CnfError::UnterminatedClause);
    }
    if clauses.len() != num_clauses {
        return Err(CnfError::ClauseCountMismatch {
            expected: num_clauses,
            found: clauses.len(),
        });
    }
    Ok(CnfFormula { num_vars, clauses })
}

fn parse_header_field(field: Option<&str>, line: &str) -> Result<usize, CnfError> {
    field
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| CnfError::MalformedHeader(line.to_string()))
}

/// Reduces a ≤3-literal-per-clause formula to a graph whose maximum
/// independent set has size = clause count iff the formula is satisfiable.
///
/// Returns the graph and the literal map: entry `v` is the signed literal
/// whose occurrence vertex `v` represents, in clause order.
pub fn sat3_to_mis(clauses: &[Vec<i32>]) -> Result<(Graph, Vec<i32>), CnfError> {
    let mut literal_map: Vec<i32> = Vec::new();
    let mut clause_ranges: Vec<(usize, usize)> = Vec::with_capacity(clauses.len());
    for (ci, clause) in clauses.iter().enumerate() {
        if clause.is_empty() {
            return Err(CnfError::EmptyClause(ci + 1));
        }
        if clause.len() > 3 {
            return Err(CnfError::ClauseTooLarge {
                clause: ci + 1,
                len: clause.len(),
            });
        }
        let start = literal_map.len();
        for &lit in clause {
            if lit == 0 {
                return Err(CnfError::BadToken {
                    line: ci + 1,
                    token: "0".into(),
                });
            }
            literal_map.push(lit);
        }
        clause_ranges.push((start, literal_map.len()));
    }

    let mut edges: Vec<(usize, usize)> = Vec::new();
    for &(start, end) in &clause_ranges {
        for a in start..end {
            for b in (a + 1)..end {
                edges.push((a, b));
            }
        }
    }
    for a in 0..literal_map.len() {
        for b in (a + 1)..literal_map.len() {
            if literal_map[a] == -literal_map[b] {
                edges.push((a, b));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let g = Graph::from_edges(literal_map.len(), &edges)
        .expect("reduction produced an invalid edge set");
    Ok((g, literal_map))
}

/// Decides satisfiability by trying all 2^num_vars assignments. Intended
/// for small formulas only.
pub fn enumerate_satisfiable(cnf: &CnfFormula) -> bool {
    assert!(cnf.num_vars < 32, "enumeration limited to < 32 variables");
    'assignment: for assign in 0u32..(1u32 << cnf.num_vars) {
        for clause in &cnf.clauses {
            let sat = clause.iter().any(|&lit| {
                let bit = (assign >> (lit.unsigned_abs() - 1)) & 1;
                (lit > 0) == (bit == 1)
            });
            if !sat {
                continue 'assignment;
            }
        }
        return true;
    }
    false
}
