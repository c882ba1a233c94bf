#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = defermdp::config::parse_config(text) {
        // Accepted configs are valid and survive a print/parse round trip.
        cfg.validate().expect("parsed config validates");
        let printed = defermdp::config::format_config(&cfg);
        let again = defermdp::config::parse_config(&printed).expect("own output reparses");
        assert_eq!(format!("{cfg:?}"), format!("{again:?}"));
    }
});
