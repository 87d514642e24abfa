#![no_main]

use libfuzzer_sys::fuzz_target;
use vizual_core::executor::{load_csv_bytes, LoadOptions};
use vizual_core::model::validate_state;

fuzz_target!(|data: &[u8]| {
    let Some((&flags, bytes)) = data.split_first() else { return };
    let opts = LoadOptions {
        header: flags & 1 == 1,
        infer: flags & 2 == 2,
    };
    if let Ok((state, _)) = load_csv_bytes(bytes, opts) {
        assert!(state.check_structure().is_ok());
        assert!(validate_state(&state).is_empty());
    }
});
