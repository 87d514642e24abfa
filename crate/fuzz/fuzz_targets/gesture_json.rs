#![no_main]

use libfuzzer_sys::fuzz_target;
use vizual_core::executor::{apply, gesture_to_statements, Gesture, StabilityPolicy};
use vizual_core::model::{new_sheet, validate_state};
use vizual_core::value::Value;

fuzz_target!(|data: &[u8]| {
    let Ok(g) = serde_json::from_slice::<Gesture>(data) else { return };
    let mut state = new_sheet(&["a", "b", "c"]).unwrap();
    for i in 0..4 {
        state.push_row(vec![Value::Int(i), Value::Int(10 - i)]);
    }
    let Ok(steps) = gesture_to_statements(&g, &state, 1) else { return };
    let mut s = state;
    for step in steps {
        match apply(&s, &step.stmt, &StabilityPolicy::default()) {
            Ok(next) => s = next,
            Err(_) => return,
        }
    }
    assert!(validate_state(&s).iter().all(|v| v.expected == v.stored));
});
