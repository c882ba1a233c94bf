#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = defermdp::graph::io::parse_edge_list(text) {
        g.check_invariants().expect("parsed graph is well-formed");
        // Accepted input must survive a print/parse round trip.
        let printed = defermdp::graph::io::format_edge_list(&g);
        let again = defermdp::graph::io::parse_edge_list(&printed).expect("own output reparses");
        assert_eq!(g.vertex_count(), again.vertex_count());
        assert_eq!(g.edge_count(), again.edge_count());
    }
});
