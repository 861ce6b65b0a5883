#![no_main]

use libfuzzer_sys::fuzz_target;

use aecif::model::decode_f32_le;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = decode_f32_le(data) {
        assert_eq!(v.len() * 4, data.len());
    }
});
