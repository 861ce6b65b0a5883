#![no_main]

use libfuzzer_sys::fuzz_target;

use aecif::kv::KvDoc;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = KvDoc::parse(text) {
        let again = KvDoc::parse(&doc.render()).expect("rendered document must parse");
        assert_eq!(again.render(), doc.render());
    }
});
