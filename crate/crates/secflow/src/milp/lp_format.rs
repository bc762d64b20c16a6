//! CPLEX LP text. The objective lists every column, zeros included, so the
//! column order survives a round trip.

use std::collections::HashMap;

use super::{fmt_num, mangle_if, syntax, ColId, ColumnKind, FormatError, MilpProblem, NameMap, RowSense};

const WIDTH: usize = 200;
const KEYWORDS: &[&str] = &[
    "min", "minimize", "minimum", "max", "maximize", "maximum", "st", "s.t.", "st.", "subject", "such", "to", "that", "bound", "bounds",
    "bin", "binary", "binaries", "gen", "general", "generals", "end", "free", "inf", "infinity",
];

fn is_name_char(ch: char) -> bool {
    !ch.is_whitespace() && !"+-*^:<>=[]\\".contains(ch)
}

fn bad_name(name: &str, _is_column: bool) -> bool {
    let Some(first) = name.chars().next() else { return true };
    name.len() > 255
        || first.is_ascii_digit()
        || first == '.'
        || !name.chars().all(is_name_char)
        || KEYWORDS.contains(&name.to_ascii_lowercase().as_str())
}

pub fn export_lp(p: &MilpProblem) -> Result<String, FormatError> {
    for n in p.columns.iter().map(|c| &c.name).chain(p.rows.iter().map(|r| &r.name)) {
        if bad_name(n, true) {
            return Err(FormatError::NameTooLong(n.clone()));
        }
    }
    Ok(write(p))
}

/// LP text with every name replaced when any name is unusable. The map is
/// empty otherwise.
pub fn export_lp_with_names(p: &MilpProblem) -> (String, NameMap) {
    match mangle_if(p, bad_name) {
        Some((q, map)) => (write(&q), map),
        None => (write(p), NameMap::default()),
    }
}

/// Appends terms, breaking lines before they grow past `WIDTH`.
struct Wrapped<'a> {
    out: &'a mut String,
    col: usize,
}

impl Wrapped<'_> {
    fn put(&mut self, tok: &str) {
        if self.col + tok.len() + 1 > WIDTH {
            self.out.push_str("\n   ");
            self.col = 3;
        }
        self.out.push(' ');
        self.out.push_str(tok);
        self.col += tok.len() + 1;
    }

    fn term(&mut self, a: f64, name: &str, first: bool) {
        let sign = if a.is_sign_negative() { "-" } else { "+" };
        let tok = format!("{} {name}", fmt_num(a.abs()));
        if first && sign == "+" {
            self.put(&tok);
        } else {
            self.put(&format!("{sign} {tok}"));
        }
    }

    fn end(self) {
        self.out.push('\n');
    }
}

fn write(p: &MilpProblem) -> String {
    let mut out = format!("\\Problem name: {}\nMinimize\n", p.name);
    {
        let mut w = Wrapped { out: &mut out, col: 0 };
        w.put("obj:");
        for (i, c) in p.columns.iter().enumerate() {
            w.term(c.objective, &c.name, i == 0);
        }
        if p.objective_offset != 0.0 || p.columns.is_empty() {
            let o = p.objective_offset;
            let sign = if o.is_sign_negative() { "-" } else { "+" };
            w.put(&format!("{sign} {}", fmt_num(o.abs())));
        }
        w.end();
    }
    out.push_str("Subject To\n");
    for r in &p.rows {
        let mut w = Wrapped { out: &mut out, col: 0 };
        w.put(&format!("{}:", r.name));
        if r.coefficients.is_empty() {
            w.put("0");
        }
        for (i, &(c, a)) in r.coefficients.iter().enumerate() {
            w.term(a, &p.columns[c.0].name, i == 0);
        }
        let op = match r.sense {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        };
        w.put(&format!("{op} {}", fmt_lp(r.rhs)));
        w.end();
    }
    out.push_str("Bounds\n");
    for c in &p.columns {
        let (lo, hi) = (c.lower, c.upper);
        let n = &c.name;
        let line = if lo == hi {
            Some(format!(" {n} = {}", fmt_lp(lo)))
        } else if c.kind == ColumnKind::Binary || (lo == 0.0 && hi == f64::INFINITY) {
            None
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            Some(format!(" {n} free"))
        } else if hi == f64::INFINITY {
            Some(format!(" {n} >= {}", fmt_lp(lo)))
        } else {
            Some(format!(" {} <= {n} <= {}", fmt_lp(lo), fmt_lp(hi)))
        };
        if let Some(l) = line {
            out.push_str(&l);
            out.push('\n');
        }
    }
    let bins: Vec<&str> = p.columns.iter().filter(|c| c.kind == ColumnKind::Binary).map(|c| c.name.as_str()).collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        let mut w = Wrapped { out: &mut out, col: 0 };
        for b in bins {
            w.put(b);
        }
        w.end();
    }
    out.push_str("End\n");
    out
}

fn fmt_lp(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        fmt_num(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Name(String),
    Num(f64),
    Op(RowSense),
    Colon,
    Sign(f64),
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Binaries,
}

fn header(line: &str) -> Option<Result<Option<Section>, &'static str>> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.split_whitespace().collect::<Vec<_>>().join(" ");
    Some(Ok(Some(match l.as_str() {
        "minimize" | "minimum" | "min" => Section::Objective,
        "subject to" | "such that" | "st" | "s.t." | "st." => Section::Constraints,
        "bounds" | "bound" => Section::Bounds,
        "binaries" | "binary" | "bin" => Section::Binaries,
        "end" => return Some(Ok(None)),
        "maximize" | "maximum" | "max" => return Some(Err("only minimization is supported")),
        "generals" | "general" | "gen" | "semi-continuous" | "semis" | "semi" => {
            return Some(Err("only binary integer columns are supported"))
        }
        _ => return None,
    })))
}

fn tokenize(line: &str, ln: usize, out: &mut Vec<(usize, Tok)>) -> Result<(), FormatError> {
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        if ch == '\\' {
            break;
        }
        let start = i;
        let tok = match ch {
            '+' => {
                i += 1;
                Tok::Sign(1.0)
            }
            '-' => {
                i += 1;
                Tok::Sign(-1.0)
            }
            ':' => {
                i += 1;
                Tok::Colon
            }
            '<' | '>' | '=' => {
                i += 1;
                let mut op = String::from(ch);
                if i < chars.len() && "<>=".contains(chars[i]) {
                    op.push(chars[i]);
                    i += 1;
                }
                Tok::Op(match op.as_str() {
                    "<" | "<=" | "=<" => RowSense::Le,
                    ">" | ">=" | "=>" => RowSense::Ge,
                    "=" => RowSense::Eq,
                    _ => return syntax(ln, format!("bad operator {op:?}")),
                })
            }
            c if c.is_ascii_digit() || c == '.' => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                match s.parse::<f64>() {
                    Ok(v) => Tok::Num(v),
                    Err(_) => return syntax(ln, format!("bad number {s:?}")),
                }
            }
            c if is_name_char(c) => {
                while i < chars.len() && is_name_char(chars[i]) {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                match s.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" => Tok::Num(f64::INFINITY),
                    _ => Tok::Name(s),
                }
            }
            c => return syntax(ln, format!("unexpected character {c:?}")),
        };
        out.push((ln, tok));
    }
    Ok(())
}

struct Reader {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    last_line: usize,
}

impl Reader {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.1)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map_or(self.last_line, |t| t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    /// Optional `label:` prefix.
    fn label(&mut self) -> Option<String> {
        if let (Some(Tok::Name(n)), Some(Tok::Colon)) = (self.peek(), self.peek_at(1)) {
            let n = n.clone();
            self.pos += 2;
            return Some(n);
        }
        None
    }

    /// Signed number, if one comes next.
    fn number(&mut self) -> Option<f64> {
        let save = self.pos;
        let mut sign = 1.0;
        while let Some(Tok::Sign(s)) = self.peek() {
            sign *= s;
            self.pos += 1;
        }
        if let Some(Tok::Num(v)) = self.peek() {
            let v = *v;
            self.pos += 1;
            return Some(sign * v);
        }
        self.pos = save;
        None
    }

    /// Linear expression up to (not including) an operator or the end.
    /// Returns terms and the constant part.
    fn expression(&mut self) -> Result<(Vec<(String, f64)>, f64), FormatError> {
        let mut terms = Vec::new();
        let mut constant = 0.0;
        let mut first = true;
        loop {
            match self.peek() {
                None | Some(Tok::Op(_)) => break,
                // A new `label:` starts the next statement.
                Some(Tok::Name(_)) if self.peek_at(1) == Some(&Tok::Colon) => break,
                _ => {}
            }
            let mut sign = 1.0;
            let mut signed = false;
            while let Some(Tok::Sign(s)) = self.peek() {
                sign *= s;
                signed = true;
                self.pos += 1;
            }
            if !first && !signed {
                return syntax(self.line(), "expected + or - between terms");
            }
            first = false;
            match self.next() {
                Some(Tok::Num(v)) => {
                    if let Some(Tok::Name(_)) = self.peek() {
                        if self.peek_at(1) == Some(&Tok::Colon) {
                            constant += sign * v;
                            continue;
                        }
                        let Some(Tok::Name(n)) = self.next() else { unreachable!() };
                        terms.push((n, sign * v));
                    } else {
                        constant += sign * v;
                    }
                }
                Some(Tok::Name(n)) => terms.push((n, sign)),
                _ => return syntax(self.line(), "expected a term"),
            }
        }
        Ok((terms, constant))
    }
}

/// Reads CPLEX LP text (minimization, continuous and binary columns).
pub fn parse_lp(text: &str) -> Result<MilpProblem, FormatError> {
    let mut p = MilpProblem::new("");
    let mut sections: Vec<(Section, Vec<(usize, Tok)>)> = Vec::new();
    let mut ended = false;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        if let Some(name) = raw.strip_prefix("\\Problem name:") {
            p.name = name.trim().to_string();
            continue;
        }
        let content = raw.split('\\').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        if ended {
            return syntax(ln, "text after End");
        }
        match header(content) {
            Some(Err(msg)) => return syntax(ln, msg),
            Some(Ok(None)) => ended = true,
            Some(Ok(Some(s))) => {
                if sections.iter().any(|(t, _)| *t == s) {
                    return syntax(ln, "repeated section");
                }
                sections.push((s, Vec::new()))
            }
            None => match sections.last_mut() {
                Some((_, toks)) => tokenize(content, ln, toks)?,
                None => return syntax(ln, "expected Minimize"),
            },
        }
    }
    if sections.first().map(|s| s.0) != Some(Section::Objective) {
        return syntax(1, "expected Minimize");
    }
    let last_line = text.lines().count();

    let mut cols: HashMap<String, usize> = HashMap::new();
    let mut col = |p: &mut MilpProblem, name: &str| -> ColId {
        let next = p.columns.len();
        let c = *cols.entry(name.to_string()).or_insert(next);
        if c == next {
            p.add_continuous(name, 0.0, f64::INFINITY, 0.0);
        }
        ColId(c)
    };

    for (section, toks) in sections {
        let mut r = Reader { toks, pos: 0, last_line };
        match section {
            Section::Objective => {
                r.label();
                let (terms, constant) = r.expression()?;
                if r.peek().is_some() {
                    return syntax(r.line(), "unexpected token in objective");
                }
                for (n, a) in terms {
                    let c = col(&mut p, &n);
                    p.columns[c.0].objective += a;
                }
                p.objective_offset = constant;
            }
            Section::Constraints => {
                while r.peek().is_some() {
                    let name = r.label().unwrap_or_else(|| format!("R{}", p.rows.len() + 1));
                    let (terms, constant) = r.expression()?;
                    let Some(Tok::Op(sense)) = r.next() else {
                        return syntax(r.line(), "expected <=, >= or =");
                    };
                    let Some(rhs) = r.number() else {
                        return syntax(r.line(), "expected a number on the right-hand side");
                    };
                    let terms: Vec<(ColId, f64)> = terms.iter().map(|(n, a)| (col(&mut p, n), *a)).collect();
                    let mut seen: Vec<ColId> = terms.iter().map(|t| t.0).collect();
                    seen.sort();
                    if seen.windows(2).any(|w| w[0] == w[1]) {
                        return syntax(r.line(), format!("row {name:?} repeats a column"));
                    }
                    p.add_row(name, sense, rhs - constant, terms);
                }
            }
            Section::Bounds => {
                while r.peek().is_some() {
                    let ln = r.line();
                    if let Some(lo) = r.number() {
                        // lo <= x [<= hi]
                        let Some(Tok::Op(op)) = r.next() else { return syntax(ln, "expected an operator") };
                        let Some(Tok::Name(n)) = r.next() else { return syntax(ln, "expected a column") };
                        let c = col(&mut p, &n).0;
                        match op {
                            RowSense::Le => p.columns[c].lower = lo,
                            RowSense::Ge => p.columns[c].upper = lo,
                            RowSense::Eq => {
                                p.columns[c].lower = lo;
                                p.columns[c].upper = lo;
                            }
                        }
                        if let Some(Tok::Op(op2)) = r.peek().cloned() {
                            r.pos += 1;
                            let Some(v) = r.number() else { return syntax(ln, "expected a number") };
                            match (op, op2) {
                                (RowSense::Le, RowSense::Le) => p.columns[c].upper = v,
                                (RowSense::Ge, RowSense::Ge) => p.columns[c].lower = v,
                                _ => return syntax(ln, "mismatched double bound"),
                            }
                        }
                        continue;
                    }
                    let Some(Tok::Name(n)) = r.next() else { return syntax(ln, "expected a bound") };
                    let c = col(&mut p, &n).0;
                    if let Some(Tok::Name(f)) = r.peek() {
                        if f.eq_ignore_ascii_case("free") {
                            r.pos += 1;
                            p.columns[c].lower = f64::NEG_INFINITY;
                            p.columns[c].upper = f64::INFINITY;
                            continue;
                        }
                    }
                    let Some(Tok::Op(op)) = r.next() else { return syntax(ln, "expected an operator") };
                    let Some(v) = r.number() else { return syntax(ln, "expected a number") };
                    match op {
                        RowSense::Le => p.columns[c].upper = v,
                        RowSense::Ge => p.columns[c].lower = v,
                        RowSense::Eq => {
                            p.columns[c].lower = v;
                            p.columns[c].upper = v;
                        }
                    }
                }
            }
            Section::Binaries => {
                while let Some(t) = r.next() {
                    let Tok::Name(n) = t else { return syntax(r.line(), "expected a column name") };
                    let c = col(&mut p, &n).0;
                    let column = &mut p.columns[c];
                    column.kind = ColumnKind::Binary;
                    if column.lower != column.upper {
                        column.lower = 0.0;
                        column.upper = 1.0;
                    }
                }
            }
        }
    }
    if !ended {
        return syntax(last_line, "missing End");
    }
    p.validate()?;
    Ok(p)
}
