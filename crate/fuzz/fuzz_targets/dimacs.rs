#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(formula) = defermdp::graph::sat::parse_dimacs(text) {
        // A parsed formula must be reducible unless a clause is too wide,
        // and the reduction graph must be well-formed.
        if let Ok((g, literals)) = defermdp::graph::sat::sat3_to_mis(&formula.clauses) {
            g.check_invariants()
                .expect("reduction graph is well-formed");
            assert_eq!(g.vertex_count(), literals.len());
            assert_eq!(
                g.vertex_count(),
                formula.clauses.iter().map(|c| c.len()).sum::<usize>()
            );
        }
    }
});
