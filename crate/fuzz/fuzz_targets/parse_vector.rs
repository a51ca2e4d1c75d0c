#![no_main]
use libfuzzer_sys::fuzz_target;
use mcreduce::io::{parse_vector, Format};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for format in [Format::Csv, Format::Json] {
        if let Ok(v) = parse_vector(text, format) {
            assert!(v.values.iter().all(|x| x.is_finite()));
            if let Some(labels) = &v.labels {
                assert_eq!(labels.len(), v.values.len());
            }
            let _ = v.into_probability();
        }
    }
});
