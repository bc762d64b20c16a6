#![no_main]

use libfuzzer_sys::fuzz_target;
use secflow::milp::{export_lp_with_names, parse_lp};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(p) = parse_lp(text) else { return };
    let (out, names) = export_lp_with_names(&p);
    let mut back = parse_lp(&out).expect("exported LP parses");
    names.restore(&mut back).expect("names restore");
    assert_eq!(back.columns.len(), p.columns.len());
    assert_eq!(back.rows.len(), p.rows.len());
});
