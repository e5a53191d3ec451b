#![no_main]

use libfuzzer_sys::fuzz_target;
use levelblend::{GameConfig, GameId};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        for game in GameId::ALL {
            let config = GameConfig::builtin(game);
            let _ = levelblend::tiles::parse_level(text, &config);
        }
    }
});
