#![no_main]

use libfuzzer_sys::fuzz_target;
use secflow::model::ModelWeights;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(w) = ModelWeights::from_json(text) {
        let _ = w.validate();
    }
});
