#![no_main]

use libfuzzer_sys::fuzz_target;

use aecif::dataset::io::decode_mask_png;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_mask_png(data) {
        assert_eq!(m.data().len(), m.height() * m.width());
    }
});
