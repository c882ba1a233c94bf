#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&first, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let n = first as usize % 65;
    if let Ok(weights) = defermdp::graph::io::parse_weights(text, n) {
        assert_eq!(weights.len(), n);
        assert!(weights.iter().all(|w| w.is_finite()));
        let printed = defermdp::graph::io::format_weights(&weights);
        let again = defermdp::graph::io::parse_weights(&printed, n).expect("own output reparses");
        assert_eq!(weights, again);
    }
});
