#![no_main]

use libfuzzer_sys::fuzz_target;
use maxent_core::io::parse_channel;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(channel) = parse_channel(text) {
            assert!(channel.completeness_residual() <= 1e-9);
        }
    }
});
