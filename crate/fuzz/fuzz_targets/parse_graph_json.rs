#![no_main]

use libfuzzer_sys::fuzz_target;
use secflow::attack_graph::GraphFile;
use secflow::exact_risk::risk;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = GraphFile::from_json(text) else { return };
    if file.capabilities.len() + file.exploits.len() > 64 {
        return;
    }
    if let Ok(g) = file.build() {
        let g = if g.is_augmented() { g } else { g.with_targets() };
        let r = risk(&g);
        assert!(r.is_finite() && r >= 0.0);
    }
});
