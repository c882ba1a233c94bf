#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(store) = defermdp::nn::ParamStore::from_bytes(data) {
        // Decoded stores re-encode bit-exactly.
        let bytes = store.to_bytes();
        let again = defermdp::nn::ParamStore::from_bytes(&bytes).expect("own output reloads");
        assert_eq!(again.to_bytes(), bytes);
    }
});
