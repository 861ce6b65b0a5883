#![no_main]

use libfuzzer_sys::fuzz_target;

use aecif::loss::parse_loss_history;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_loss_history(text);
});
