#![no_main]
use libfuzzer_sys::fuzz_target;
use mcreduce::io::{matrix_to_json, parse_matrix_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(m) = parse_matrix_json(text) else { return };
    assert!(m.max_row_sum_error() <= 1e-9);
    let back = parse_matrix_json(&matrix_to_json(&m)).expect("emitted JSON parses");
    assert_eq!(back, m);
});
