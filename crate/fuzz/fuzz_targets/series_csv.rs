#![no_main]

use libfuzzer_sys::fuzz_target;
use voigt_gcc::io::SeriesFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(series) = SeriesFile::parse(text) {
        assert!(!series.y.is_empty());
        assert!(series.y.iter().all(|v| v.is_finite()));
        if let Some(d) = &series.dates {
            assert_eq!(d.len(), series.y.len());
        }
        let again = SeriesFile::parse(&series.to_csv().unwrap()).unwrap();
        assert_eq!(again.y, series.y);
    }
});
