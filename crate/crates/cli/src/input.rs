//! Parsing of matrices, flags and number lists given on the command line.

use std::path::Path;

use serde_json::Value;

use wcc_core::{Flag, GroupElement, Result, WccError};

pub fn group_dim(group: &str) -> Result<usize> {
    match group {
        "sl2" => Ok(2),
        "sl3" => Ok(3),
        other => Err(WccError::Parameter(format!("unknown group {other:?} (expected sl2 or sl3)"))),
    }
}

/// Rows of a JSON array of arrays; integers are kept exact when every entry is one.
pub enum Parsed {
    Integer(usize, Vec<i64>),
    Real(Vec<Vec<f64>>),
}

pub fn parse_matrix(text: &str) -> Result<Parsed> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| WccError::Parameter(format!("matrix is not valid JSON: {e}")))?;
    let rows = v.as_array().ok_or_else(|| WccError::Parameter("matrix must be a JSON array of rows".into()))?;
    let n = rows.len();
    if n == 0 {
        return Err(WccError::Parameter("matrix is empty".into()));
    }
    let mut ints = Vec::with_capacity(n * n);
    let mut reals = Vec::with_capacity(n);
    let mut exact = true;
    for row in rows {
        let row = row.as_array().ok_or_else(|| WccError::Parameter("matrix rows must be arrays".into()))?;
        if row.len() != n {
            return Err(WccError::Parameter(format!("matrix must be square, got a row of length {} in {n} rows", row.len())));
        }
        let mut r = Vec::with_capacity(n);
        for x in row {
            match x.as_i64() {
                Some(i) => ints.push(i),
                None => exact = false,
            }
            r.push(x.as_f64().ok_or_else(|| WccError::Parameter(format!("matrix entry {x} is not a number")))?);
        }
        reals.push(r);
    }
    Ok(if exact { Parsed::Integer(n, ints) } else { Parsed::Real(reals) })
}

pub fn matrix_text(inline: Option<&str>, file: Option<&Path>) -> Result<String> {
    match (inline, file) {
        (Some(s), None) => Ok(s.to_string()),
        (None, Some(p)) => Ok(std::fs::read_to_string(p)?),
        (Some(_), Some(_)) => Err(WccError::Parameter("give either --matrix or --matrix-file, not both".into())),
        (None, None) => Err(WccError::Parameter("a matrix is required (--matrix or --matrix-file)".into())),
    }
}

pub fn element(text: &str, d: usize) -> Result<GroupElement> {
    let g = match parse_matrix(text)? {
        Parsed::Integer(n, e) => {
            check_dim(n, d)?;
            GroupElement::from_integer(n, &e)?
        }
        Parsed::Real(rows) => {
            check_dim(rows.len(), d)?;
            GroupElement::from_rows(&rows)?
        }
    };
    Ok(g)
}

/// A flag from a matrix whose first `k` columns span its `k`-th subspace.
pub fn flag(text: &str, d: usize) -> Result<Flag> {
    let rows = match parse_matrix(text)? {
        Parsed::Integer(n, e) => (0..n).map(|i| e[i * n..(i + 1) * n].iter().map(|&v| v as f64).collect()).collect(),
        Parsed::Real(r) => r,
    };
    check_dim(rows.len(), d)?;
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let m = wcc_core::linalg::Mat::from_row_slice(d, d, &flat);
    if m.determinant().abs() < 1e-12 {
        return Err(WccError::Parameter("flag frame must have independent columns".into()));
    }
    Ok(Flag::from_columns(&m))
}

fn check_dim(n: usize, d: usize) -> Result<()> {
    if n != d {
        return Err(WccError::Parameter(format!("matrix is {n}x{n} but the group needs {d}x{d}")));
    }
    Ok(())
}

pub fn number_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| WccError::Parameter(format!("{s:?} is not a number")))
        })
        .collect()
}
