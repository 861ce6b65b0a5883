#![no_main]

use libfuzzer_sys::fuzz_target;

use aecif::dataset::SplitManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = SplitManifest::parse(text) {
        assert_eq!(SplitManifest::parse(&m.render()).expect("rendered manifest must parse"), m);
    }
});
