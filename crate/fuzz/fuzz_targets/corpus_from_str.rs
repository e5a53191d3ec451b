#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(corpus) = levelblend::corpus::corpus_from_str(text) {
            // a successful parse must round-trip
            let rendered = levelblend::corpus::corpus_to_string(&corpus);
            let again = levelblend::corpus::corpus_from_str(&rendered).unwrap();
            assert_eq!(again, corpus);
        }
    }
});
