#![no_main]
use libfuzzer_sys::fuzz_target;
use mcreduce::io::{parse_sweep_spec, MAX_SWEEP_POINTS};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(points) = parse_sweep_spec(text) else { return };
    assert!(!points.is_empty() && points.len() <= MAX_SWEEP_POINTS);
    assert!(points.iter().all(|r| r.is_finite()));
    assert!(points.windows(2).all(|w| w[0] <= w[1]));
});
