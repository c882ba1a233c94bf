#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(manifest) = serde_json::from_str::<defermdp::dataset::Manifest>(text) {
        // Model reconstruction either succeeds with a validatable spec or
        // reports a named error; out-of-range parameters must be caught
        // by validate, not by a panic downstream.
        if let Ok(spec) = manifest.spec() {
            let _ = spec.validate();
        }
    }
});
