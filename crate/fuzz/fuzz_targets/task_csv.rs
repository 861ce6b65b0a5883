#![no_main]

use libfuzzer_sys::fuzz_target;

use aecif::metrics::parse_task_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_task_csv(text);
});
