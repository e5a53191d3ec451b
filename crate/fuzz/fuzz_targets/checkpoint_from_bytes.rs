#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = levelblend::cvae::checkpoint_from_bytes(data) {
        // a checkpoint that decodes must re-encode and decode to itself
        let bytes = levelblend::cvae::checkpoint_to_bytes(&model);
        let again = levelblend::cvae::checkpoint_from_bytes(&bytes).unwrap();
        assert_eq!(levelblend::cvae::checkpoint_to_bytes(&again), bytes);
    }
});
