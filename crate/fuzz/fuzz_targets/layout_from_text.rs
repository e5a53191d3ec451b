#![no_main]

use libfuzzer_sys::fuzz_target;
use levelblend::layout::Layout;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Layout::from_text(text);
    }
});
