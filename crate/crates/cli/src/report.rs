use std::fmt::Write as _;
use std::path::Path;

use loopshift::loopgraph::LoopRef;
use loopshift::series::Series;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde_json::Value;

use crate::error::Failure;
use crate::Format;

/// A command's output in both renderings, plus the exit verdict when the
/// command ran but a check failed.
pub struct Report {
    pub json: Value,
    pub text: String,
    pub verdict: Option<Failure>,
}

impl Report {
    pub fn new(json: Value, text: String) -> Self {
        Report {
            json,
            text,
            verdict: None,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.text.clone(),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("report serializes");
                s.push('\n');
                s
            }
        }
    }

    pub fn emit(&self, format: Format, path: Option<&Path>) -> Result<(), Failure> {
        let out = self.render(format);
        match path {
            Some(p) => std::fs::write(p, out)?,
            None => print!("{out}"),
        }
        Ok(())
    }
}

/// Integers that fit in `u64` as JSON numbers, larger ones as decimal strings.
pub fn big(x: &BigUint) -> Value {
    match x.to_u64() {
        Some(v) => Value::from(v),
        None => Value::from(x.to_string()),
    }
}

pub fn bigs(xs: &[BigUint]) -> Value {
    Value::Array(xs.iter().map(big).collect())
}

/// `f_1..f_N`.
pub fn series(f: &Series) -> Value {
    bigs(f.coeffs())
}

pub fn loop_ref(l: &LoopRef) -> Value {
    Value::from(l.to_string())
}

pub fn loops(ls: &[LoopRef]) -> Value {
    Value::Array(ls.iter().map(loop_ref).collect())
}

pub fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

/// Right-aligned columns, one row per `n = 1..=rows`.
pub fn table(headers: &[&str], columns: &[Vec<String>]) -> String {
    let rows = columns.iter().map(Vec::len).max().unwrap_or(0);
    let width: Vec<usize> = headers
        .iter()
        .zip(columns)
        .map(|(h, c)| c.iter().map(String::len).chain([h.len()]).max().unwrap())
        .collect();
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "  {}", parts.join("  "));
    };
    line(headers.to_vec(), &mut out);
    for r in 0..rows {
        line(columns.iter().map(|c| c.get(r).map(String::as_str).unwrap_or("")).collect(), &mut out);
    }
    out
}

pub fn strings<T: ToString>(xs: &[T]) -> Vec<String> {
    xs.iter().map(ToString::to_string).collect()
}

pub fn series_line(f: &Series) -> String {
    let shown: Vec<String> = f.coeffs().iter().take(12).map(ToString::to_string).collect();
    let more = if f.degree() > 12 { ", ..." } else { "" };
    format!("[{}{more}] (degree {})", shown.join(", "), f.degree())
}
