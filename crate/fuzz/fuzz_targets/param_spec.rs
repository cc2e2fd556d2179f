#![no_main]

use libfuzzer_sys::fuzz_target;
use voigt_gcc::io::{format_param_spec, parse_param_spec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_param_spec(text) {
        assert!(!spec.is_empty());
        assert!(spec.values().all(|v| v.is_finite()));
        let names: Vec<&str> = spec.keys().map(String::as_str).collect();
        let values: Vec<f64> = spec.values().copied().collect();
        assert_eq!(parse_param_spec(&format_param_spec(&names, &values)).unwrap(), spec);
    }
});
