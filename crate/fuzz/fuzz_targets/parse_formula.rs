#![no_main]

use libfuzzer_sys::fuzz_target;
use vizual_core::formula::parse_formula_text;
use vizual_core::model::Pos;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // Whatever parses renders to text that parses back to the same tree.
    if let Ok(f) = parse_formula_text(text, None) {
        let canonical = f.to_text(None);
        assert_eq!(parse_formula_text(&canonical, None).as_ref(), Ok(&f), "{canonical}");
        assert_eq!(parse_formula_text(&f.script_text(), None).as_ref(), Ok(&f));
    }
    let host = Pos::new(2, 3);
    if let Ok(f) = parse_formula_text(text, Some(host)) {
        let shown = f.to_text(Some(host));
        assert_eq!(parse_formula_text(&shown, Some(host)).as_ref(), Ok(&f), "{shown}");
    }
});
