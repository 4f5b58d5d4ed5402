#![no_main]

use libfuzzer_sys::fuzz_target;
use maxent_core::io::parse_state;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rho) = parse_state(text) {
            assert!((rho.matrix().trace().re - 1.0).abs() < 1e-9);
        }
    }
});
