#![no_main]

use libfuzzer_sys::fuzz_target;
use secflow::model::Configuration;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = Configuration::from_json(text) {
        let _ = c.to_json();
    }
});
