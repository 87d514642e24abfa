#![no_main]

use libfuzzer_sys::fuzz_target;
use vizual_core::lang::{parse_script, render_script};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = parse_script(text) {
        let rendered = render_script(&s);
        let back = parse_script(&rendered).expect("rendered scripts parse");
        assert_eq!(back, s, "{rendered}");
    }
});
