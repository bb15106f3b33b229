//! Plain-text container for complex matrices and signals.
//!
//! ```text
//! spreadid-matrix v1
//! <rows> <cols>
//! <re> <im>        one line per entry, row-major
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Numbers are written
//! in shortest round-trip form, so reading a written file is exact. Signals
//! are stored as single-column matrices.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::linalg::CMat;
use crate::{Error, Result};

pub const MAGIC: &str = "spreadid-matrix v1";

pub fn write_matrix<W: Write>(m: &CMat, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            writeln!(out, "{:e} {:e}", z.re, z.im)?;
        }
    }
    Ok(())
}

pub fn matrix_to_string(m: &CMat) -> String {
    let mut buf = Vec::new();
    write_matrix(m, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("ASCII output")
}

fn parse_error(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<CMat> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| match l {
            Ok(s) => {
                let t = s.trim();
                !t.is_empty() && !t.starts_with('#')
            }
            Err(_) => true,
        });
    let (line, magic) = lines.next().ok_or_else(|| parse_error(1, "empty matrix file"))?;
    if magic?.trim() != MAGIC {
        return Err(parse_error(line, format!("expected header `{MAGIC}`")));
    }
    let (line, shape) = lines.next().ok_or_else(|| parse_error(line + 1, "missing shape line"))?;
    let shape = shape?;
    let dims: Vec<&str> = shape.split_whitespace().collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| parse_error(line, format!("invalid dimension `{s}`")))
    };
    let (rows, cols) = match dims.as_slice() {
        [r, c] => (parse_dim(r)?, parse_dim(c)?),
        _ => return Err(parse_error(line, "shape line must be `<rows> <cols>`")),
    };
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| parse_error(line, "matrix shape overflows"))?;
    let mut values = Vec::with_capacity(count.min(1 << 24));
    let mut last_line = line;
    for (line, text) in lines {
        let text = text?;
        last_line = line;
        if values.len() == count {
            return Err(parse_error(line, format!("more than {count} entries")));
        }
        let parts: Vec<&str> = text.split_whitespace().collect();
        let [re, im] = parts.as_slice() else {
            return Err(parse_error(line, "entry must be `<re> <im>`"));
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(line, format!("invalid number `{s}`")))
        };
        values.push(Complex64::new(num(re)?, num(im)?));
    }
    if values.len() != count {
        return Err(parse_error(
            last_line,
            format!("expected {count} entries, found {}", values.len()),
        ));
    }
    Ok(CMat::from_row_slice(rows, cols, &values))
}

pub fn matrix_from_str(s: &str) -> Result<CMat> {
    read_matrix(s.as_bytes())
}

/// `{"rows": r, "cols": c, "data": [[re, im], ...]}` in row-major order.
pub fn matrix_to_json(m: &CMat) -> Value {
    let mut data = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            data.push(json!([m[(i, j)].re, m[(i, j)].im]));
        }
    }
    json!({ "rows": m.nrows(), "cols": m.ncols(), "data": data })
}

pub fn matrix_from_json(v: &Value) -> Result<CMat> {
    let bad = |msg: &str| Error::invalid(format!("JSON matrix: {msg}"));
    let dim = |key: &str| {
        v.get(key)
            .and_then(Value::as_u64)
            .map(|x| x as usize)
            .ok_or_else(|| bad(&format!("missing integer `{key}`")))
    };
    let (rows, cols) = (dim("rows")?, dim("cols")?);
    let data = v.get("data").and_then(Value::as_array).ok_or_else(|| bad("missing `data` array"))?;
    if data.len() != rows * cols {
        return Err(bad(&format!("expected {} entries, found {}", rows * cols, data.len())));
    }
    let values = data
        .iter()
        .map(|e| match e.as_array().map(|a| a.as_slice()) {
            Some([re, im]) => match (re.as_f64(), im.as_f64()) {
                (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
                _ => Err(bad("entries must be numeric [re, im] pairs")),
            },
            _ => Err(bad("entries must be [re, im] pairs")),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CMat::from_row_slice(rows, cols, &values))
}
