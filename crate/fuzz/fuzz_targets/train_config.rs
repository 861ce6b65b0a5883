#![no_main]

use libfuzzer_sys::fuzz_target;

use aecif::trainer::TrainConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = TrainConfig::parse(text, &TrainConfig::desk());
});
