//! Boolean gates over binary columns as linear rows.

use crate::milp::{ColId, MilpProblem, RowSense};

/// `out = AND(ins)`: `out <= in_i` for each input and
/// `out >= sum(ins) - (n - 1)`.
pub fn linearize_and(p: &mut MilpProblem, name: &str, out: ColId, ins: &[ColId]) {
    for (k, &i) in ins.iter().enumerate() {
        p.add_row(format!("{name}_le{k}"), RowSense::Le, 0.0, [(out, 1.0), (i, -1.0)]);
    }
    let n = ins.len() as f64;
    let terms = std::iter::once((out, 1.0)).chain(ins.iter().map(|&i| (i, -1.0)));
    p.add_row(format!("{name}_ge"), RowSense::Ge, 1.0 - n, terms);
}

/// `out = OR(ins)`: `out >= in_i` for each input and `out <= sum(ins)`.
pub fn linearize_or(p: &mut MilpProblem, name: &str, out: ColId, ins: &[ColId]) {
    for (k, &i) in ins.iter().enumerate() {
        p.add_row(format!("{name}_ge{k}"), RowSense::Ge, 0.0, [(out, 1.0), (i, -1.0)]);
    }
    let terms = std::iter::once((out, 1.0)).chain(ins.iter().map(|&i| (i, -1.0)));
    p.add_row(format!("{name}_le"), RowSense::Le, 0.0, terms);
}
