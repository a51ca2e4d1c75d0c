#![no_main]
use libfuzzer_sys::fuzz_target;
use mcreduce::io::{matrix_to_csv, parse_matrix_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(m) = parse_matrix_csv(text) else { return };
    assert!(m.max_row_sum_error() <= 1e-9);
    let back = parse_matrix_csv(&matrix_to_csv(&m)).expect("emitted CSV parses");
    assert_eq!(back.to_rows(), m.to_rows());
});
