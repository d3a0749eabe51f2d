//! Text formats: the sparse matrix file, density/curve CSVs and the
//! decomposition/classification JSON reports.
//!
//! All floats are printed like C's printf("%.17g"): 17 significant digits,
//! trailing zeros trimmed, scientific form outside [1e-4, 1e17). That many
//! digits round-trips every f64 bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, TlError};
use crate::ulam::{BuildMethod, TransferMatrix};

/// printf("%.17g") for finite doubles.
pub fn format_g17(x: f64) -> String {
    debug_assert!(x.is_finite());
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let neg = x < 0.0;
    let mag = x.abs();
    // 17 significant digits = 1 leading + 16 after the point in e-form.
    let e_form = format!("{:.16e}", mag);
    let (mant, exp) = e_form.split_once('e').expect("exponential form");
    let exp: i32 = exp.parse().expect("exponent");
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 17);

    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if exp < -4 || exp >= 17 {
        let trimmed = digits.trim_end_matches('0');
        out.push(trimmed.as_bytes()[0] as char);
        if trimmed.len() > 1 {
            out.push('.');
            out.push_str(&trimmed[1..]);
        }
        let _ = write!(out, "e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    } else if exp >= 0 {
        let cut = exp as usize + 1;
        out.push_str(&digits[..cut]);
        let frac = digits[cut..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    } else {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(digits.trim_end_matches('0'));
    }
    out
}

/// Serialize a matrix: header "ULAM 1 <N> <nnz> <build_method>", then one
/// "<i> <j> <value>" triplet per line.
pub fn matrix_to_string(k: &TransferMatrix) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ULAM 1 {} {} {}", k.n, k.nnz(), k.build_method);
    for (i, row) in k.rows.iter().enumerate() {
        for &(j, v) in row {
            let _ = writeln!(s, "{i} {j} {}", format_g17(v));
        }
    }
    s
}

pub fn write_matrix(path: &Path, k: &TransferMatrix) -> Result<()> {
    std::fs::write(path, matrix_to_string(k))?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> TlError {
    TlError::MatrixParse { line, message: message.into() }
}

pub fn matrix_from_string(text: &str) -> Result<TransferMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != "ULAM" || parts[1] != "1" {
        return Err(parse_err(1, format!("bad header {header:?}")));
    }
    let n: usize = parts[2].parse().map_err(|_| parse_err(1, "bad N"))?;
    let nnz: usize = parts[3].parse().map_err(|_| parse_err(1, "bad nnz"))?;
    let build_method: BuildMethod =
        parts[4].parse().map_err(|m: String| parse_err(1, m))?;
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut count = 0usize;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (i, j, v) = (it.next(), it.next(), it.next());
        let (i, j, v) = match (i, j, v, it.next()) {
            (Some(i), Some(j), Some(v), None) => (i, j, v),
            _ => return Err(parse_err(idx + 1, "expected \"i j value\"")),
        };
        let i: usize = i.parse().map_err(|_| parse_err(idx + 1, "bad row index"))?;
        let j: u32 = j.parse().map_err(|_| parse_err(idx + 1, "bad column index"))?;
        let v: f64 = v.parse().map_err(|_| parse_err(idx + 1, "bad value"))?;
        if i >= n || j as usize >= n {
            return Err(parse_err(idx + 1, "index out of range"));
        }
        rows[i].push((j, v));
        count += 1;
    }
    if count != nnz {
        return Err(parse_err(1, format!("header promises {nnz} entries, found {count}")));
    }
    for row in &mut rows {
        row.sort_by_key(|&(j, _)| j);
    }
    let defects = rows
        .iter()
        .map(|r| (1.0 - crate::ulam::neumaier_sum(r.iter().map(|&(_, v)| v))).abs())
        .collect();
    Ok(TransferMatrix { n, rows, row_defects: defects, build_method, mc_rows: Vec::new() })
}

pub fn read_matrix(path: &Path) -> Result<TransferMatrix> {
    matrix_from_string(&std::fs::read_to_string(path)?)
}

/// Density CSV: header "cell,value", one row per cell.
pub fn density_to_csv(u: &[f64]) -> String {
    let mut s = String::from("cell,value\n");
    for (i, v) in u.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", format_g17(*v));
    }
    s
}

pub fn write_density_csv(path: &Path, u: &[f64]) -> Result<()> {
    std::fs::write(path, density_to_csv(u))?;
    Ok(())
}

pub fn read_density_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line.trim() != "cell,value" {
                return Err(parse_err(1, "expected header \"cell,value\""));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (cell, value) = line
            .split_once(',')
            .ok_or_else(|| parse_err(idx + 1, "expected \"cell,value\""))?;
        let cell: usize = cell.trim().parse().map_err(|_| parse_err(idx + 1, "bad cell"))?;
        if cell != out.len() {
            return Err(parse_err(idx + 1, "cells out of order"));
        }
        out.push(value.trim().parse().map_err(|_| parse_err(idx + 1, "bad value"))?);
    }
    Ok(out)
}

/// Two-column CSV of an integer-indexed sequence, e.g. "n,value".
pub fn curve_to_csv(header: (&str, &str), xs: impl IntoIterator<Item = (usize, f64)>) -> String {
    let mut s = format!("{},{}\n", header.0, header.1);
    for (n, v) in xs {
        let _ = writeln!(s, "{n},{}", format_g17(v));
    }
    s
}

pub fn write_curve_csv(
    path: &Path,
    header: (&str, &str),
    xs: impl IntoIterator<Item = (usize, f64)>,
) -> Result<()> {
    std::fs::write(path, curve_to_csv(header, xs))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
