#![no_main]

use libfuzzer_sys::fuzz_target;
use maxent_core::io::ResultFile;

// Serializing a parsed file and parsing it back must be a fixed point.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = ResultFile::parse(text) else {
        return;
    };
    let once = file.to_json().expect("parsed file serializes");
    let twice = ResultFile::parse(&once)
        .expect("own output parses")
        .to_json()
        .expect("reparsed file serializes");
    assert_eq!(once, twice);
});
