#![no_main]

use libfuzzer_sys::fuzz_target;
use secflow::instance::Instance;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(inst) = Instance::from_json(text) else { return };
    if inst.network.flows.len() > 32 || inst.vulnerabilities.exploits.len() > 32 {
        return;
    }
    let _ = inst.assemble();
    assert_eq!(Instance::from_json(&inst.to_json()).ok().as_ref(), Some(&inst));
});
