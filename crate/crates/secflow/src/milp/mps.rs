//! Fixed-form MPS. Numbers are written at full precision, so a field can
//! run past its nominal width; the reader splits on whitespace.

use std::collections::HashMap;
use std::fmt::Write;

use super::{fmt_num, mangle_if, syntax, ColId, ColumnKind, FormatError, MilpProblem, NameMap, RowSense};

const OBJ: &str = "OBJ";

fn bad_name(name: &str, is_column: bool) -> bool {
    name.len() > 8 || name.is_empty() || name.chars().any(char::is_whitespace) || (!is_column && name == OBJ)
}

/// MPS text; fails if a name is longer than 8 characters or otherwise
/// unusable.
pub fn export_mps(p: &MilpProblem) -> Result<String, FormatError> {
    if let Some(c) = p.columns.iter().find(|c| bad_name(&c.name, true)) {
        return Err(FormatError::NameTooLong(c.name.clone()));
    }
    if let Some(r) = p.rows.iter().find(|r| bad_name(&r.name, false)) {
        return Err(FormatError::NameTooLong(r.name.clone()));
    }
    Ok(write(p))
}

/// MPS text with every name replaced by `C0000001` / `R0000001` style
/// names when any name is unusable. The map is empty otherwise.
pub fn export_mps_with_names(p: &MilpProblem) -> (String, NameMap) {
    match mangle_if(p, bad_name) {
        Some((q, map)) => (write(&q), map),
        None => (write(p), NameMap::default()),
    }
}

fn line(out: &mut String, f1: &str, f2: &str, f3: &str, f4: &str) {
    let text = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}");
    out.push_str(text.trim_end());
    out.push('\n');
}

fn write(p: &MilpProblem) -> String {
    let mut out = String::new();
    writeln!(out, "NAME          {}", p.name).unwrap();
    out.push_str("ROWS\n");
    line(&mut out, "N", OBJ, "", "");
    for r in &p.rows {
        let t = match r.sense {
            RowSense::Le => "L",
            RowSense::Eq => "E",
            RowSense::Ge => "G",
        };
        line(&mut out, t, &r.name, "", "");
    }

    let mut by_col: Vec<Vec<(&str, f64)>> = vec![Vec::new(); p.columns.len()];
    for r in &p.rows {
        for &(c, a) in &r.coefficients {
            by_col[c.0].push((&r.name, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut markers = 0;
    for (c, entries) in p.columns.iter().zip(&by_col) {
        let is_int = c.kind == ColumnKind::Binary;
        if is_int != in_int {
            let tag = if is_int { "'INTORG'" } else { "'INTEND'" };
            writeln!(out, "    {:<8}  'MARKER'                 {tag}", format!("MARKER{markers}")).unwrap();
            markers += 1;
            in_int = is_int;
        }
        if c.objective != 0.0 || entries.is_empty() {
            line(&mut out, "", &c.name, OBJ, &fmt_num(c.objective));
        }
        for &(row, a) in entries {
            line(&mut out, "", &c.name, row, &fmt_num(a));
        }
    }
    if in_int {
        writeln!(out, "    {:<8}  'MARKER'                 'INTEND'", format!("MARKER{markers}")).unwrap();
    }

    out.push_str("RHS\n");
    if p.objective_offset != 0.0 {
        line(&mut out, "", "RHS", OBJ, &fmt_num(-p.objective_offset));
    }
    for r in &p.rows {
        if r.rhs != 0.0 {
            line(&mut out, "", "RHS", &r.name, &fmt_num(r.rhs));
        }
    }

    out.push_str("BOUNDS\n");
    for c in &p.columns {
        let n = c.name.as_str();
        let (lo, hi) = (c.lower, c.upper);
        if c.kind == ColumnKind::Binary {
            if lo == hi {
                line(&mut out, "FX", "BND", n, &fmt_num(lo));
            } else {
                line(&mut out, "BV", "BND", n, "");
            }
            continue;
        }
        if lo == hi {
            line(&mut out, "FX", "BND", n, &fmt_num(lo));
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            line(&mut out, "FR", "BND", n, "");
        } else {
            if lo == f64::NEG_INFINITY {
                line(&mut out, "MI", "BND", n, "");
            } else if lo != 0.0 {
                line(&mut out, "LO", "BND", n, &fmt_num(lo));
            }
            if hi != f64::INFINITY {
                line(&mut out, "UP", "BND", n, &fmt_num(hi));
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    ObjSense,
    End,
}

fn number(line: usize, s: &str) -> Result<f64, FormatError> {
    let v: f64 = match s.parse() {
        Ok(v) => v,
        Err(_) => return syntax(line, format!("bad number {s:?}")),
    };
    if v.is_nan() {
        return syntax(line, "NaN is not allowed");
    }
    Ok(if v >= 1e30 {
        f64::INFINITY
    } else if v <= -1e30 {
        f64::NEG_INFINITY
    } else {
        v
    })
}

/// Reads MPS (fixed or free form with whitespace-separated fields).
pub fn parse_mps(text: &str) -> Result<MilpProblem, FormatError> {
    let mut p = MilpProblem::new("");
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut rows: HashMap<String, usize> = HashMap::new();
    let mut free_rows: Vec<String> = Vec::new();
    let mut cols: HashMap<String, usize> = HashMap::new();
    let mut entries: Vec<Vec<(ColId, f64)>> = Vec::new();
    let mut in_int = false;
    let mut seen_rhs = std::collections::HashSet::new();

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match toks[0] {
                "NAME" => {
                    p.name = raw[4..].trim().to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "OBJSENSE" => match toks.get(1) {
                    Some(&"MIN") | Some(&"MINIMIZE") => Section::None,
                    Some(_) => return syntax(ln, "only minimization is supported"),
                    None => Section::ObjSense,
                },
                "RANGES" => return syntax(ln, "RANGES are not supported"),
                "ENDATA" => Section::End,
                other => return syntax(ln, format!("unknown section {other:?}")),
            };
            if section == Section::End {
                break;
            }
            continue;
        }
        match section {
            Section::None | Section::End => return syntax(ln, "data outside a section"),
            Section::ObjSense => {
                if !matches!(toks[0], "MIN" | "MINIMIZE") {
                    return syntax(ln, "only minimization is supported");
                }
            }
            Section::Rows => {
                let [t, name] = toks[..] else { return syntax(ln, "expected row type and name") };
                let sense = match t {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(name.to_string());
                        } else {
                            free_rows.push(name.to_string());
                        }
                        continue;
                    }
                    "L" => RowSense::Le,
                    "G" => RowSense::Ge,
                    "E" => RowSense::Eq,
                    _ => return syntax(ln, format!("unknown row type {t:?}")),
                };
                if rows.contains_key(name) || obj_row.as_deref() == Some(name) {
                    return syntax(ln, format!("duplicate row {name:?}"));
                }
                rows.insert(name.to_string(), p.rows.len());
                p.add_row(name, sense, 0.0, []);
                entries.push(Vec::new());
            }
            Section::Columns => {
                if toks.len() == 3 && toks[1] == "'MARKER'" {
                    in_int = match toks[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        m => return syntax(ln, format!("unknown marker {m}")),
                    };
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return syntax(ln, "expected column, row, value [, row, value]");
                }
                let name = toks[0];
                let c = match cols.get(name) {
                    Some(&c) if c == p.columns.len() - 1 => c,
                    Some(_) => return syntax(ln, format!("entries of column {name:?} are not contiguous")),
                    None => {
                        let (kind, hi) = if in_int { (ColumnKind::Binary, 1.0) } else { (ColumnKind::Continuous, f64::INFINITY) };
                        let c = p.add_column(name, kind, 0.0, hi, 0.0).0;
                        cols.insert(name.to_string(), c);
                        c
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let v = number(ln, pair[1])?;
                    if !v.is_finite() {
                        return syntax(ln, "coefficients must be finite");
                    }
                    if obj_row.as_deref() == Some(pair[0]) {
                        p.columns[c].objective += v;
                    } else if let Some(&r) = rows.get(pair[0]) {
                        if entries[r].last().is_some_and(|e| e.0 .0 == c) {
                            return syntax(ln, format!("repeated entry for row {:?}", pair[0]));
                        }
                        if v != 0.0 {
                            entries[r].push((ColId(c), v));
                        }
                    } else if !free_rows.iter().any(|f| f == pair[0]) {
                        return syntax(ln, format!("unknown row {:?}", pair[0]));
                    }
                }
            }
            Section::Rhs => {
                if toks.len() != 3 && toks.len() != 5 {
                    return syntax(ln, "expected set, row, value [, row, value]");
                }
                for pair in toks[1..].chunks(2) {
                    let v = number(ln, pair[1])?;
                    if !seen_rhs.insert(pair[0].to_string()) {
                        return syntax(ln, format!("repeated rhs for {:?}", pair[0]));
                    }
                    if obj_row.as_deref() == Some(pair[0]) {
                        p.objective_offset = -v;
                    } else if let Some(&r) = rows.get(pair[0]) {
                        p.rows[r].rhs = v;
                    } else if !free_rows.iter().any(|f| f == pair[0]) {
                        return syntax(ln, format!("unknown row {:?}", pair[0]));
                    }
                }
            }
            Section::Bounds => {
                if toks.len() < 3 || toks.len() > 4 {
                    return syntax(ln, "expected type, set, column [, value]");
                }
                let Some(&c) = cols.get(toks[2]) else {
                    return syntax(ln, format!("unknown column {:?}", toks[2]));
                };
                let val = toks.get(3).map(|s| number(ln, s)).transpose()?;
                let need = |v: Option<f64>| v.map_or_else(|| syntax(ln, "bound needs a value"), Ok);
                let col = &mut p.columns[c];
                match toks[0] {
                    "UP" => col.upper = need(val)?,
                    "LO" => col.lower = need(val)?,
                    "FX" => {
                        let v = need(val)?;
                        col.lower = v;
                        col.upper = v;
                    }
                    "FR" => {
                        col.lower = f64::NEG_INFINITY;
                        col.upper = f64::INFINITY;
                    }
                    "MI" => col.lower = f64::NEG_INFINITY,
                    "PL" => col.upper = f64::INFINITY,
                    "BV" => {
                        col.kind = ColumnKind::Binary;
                        col.lower = 0.0;
                        col.upper = 1.0;
                    }
                    "LI" | "UI" => {
                        let v = need(val)?;
                        col.kind = ColumnKind::Binary;
                        if toks[0] == "LI" {
                            col.lower = v;
                        } else {
                            col.upper = v;
                        }
                    }
                    t => return syntax(ln, format!("unknown bound type {t:?}")),
                }
            }
        }
    }
    if section != Section::End {
        return syntax(text.lines().count(), "missing ENDATA");
    }
    for (r, e) in entries.into_iter().enumerate() {
        p.rows[r].coefficients = e;
    }
    for c in &p.columns {
        if c.kind == ColumnKind::Binary && !(c.lower >= 0.0 && c.upper <= 1.0) {
            return Err(FormatError::Invalid(super::ProblemError::BadColumn(c.name.clone(), "integer columns must lie in [0, 1]".into())));
        }
    }
    p.validate()?;
    Ok(p)
}
