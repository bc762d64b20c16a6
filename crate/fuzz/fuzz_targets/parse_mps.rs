#![no_main]

use libfuzzer_sys::fuzz_target;
use secflow::milp::{export_mps_with_names, parse_mps};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(p) = parse_mps(text) else { return };
    let (out, names) = export_mps_with_names(&p);
    let mut back = parse_mps(&out).expect("exported MPS parses");
    names.restore(&mut back).expect("names restore");
    assert_eq!(back.columns.len(), p.columns.len());
    assert_eq!(back.rows.len(), p.rows.len());
});
