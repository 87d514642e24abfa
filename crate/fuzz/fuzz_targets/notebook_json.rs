#![no_main]

use libfuzzer_sys::fuzz_target;
use vizual_core::notebook::Notebook;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Accepted files replay to the outputs they record, so saving and
    // loading again is the identity.
    if let Ok(nb) = Notebook::from_json(text) {
        let again = Notebook::from_json(&nb.to_json()).expect("saved notebooks load");
        assert_eq!(again.content_hash(), nb.content_hash());
    }
});
