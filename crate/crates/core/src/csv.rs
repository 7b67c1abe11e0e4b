//! Text encoding for complex matrices.
//!
//! One matrix row per line, entries separated by commas. Each entry is
//! `a+bi` or `a-bi` with decimal reals (`1.5-0.25i`); a purely real entry
//! may drop the imaginary part and a purely imaginary one may drop the real
//! part. Blank lines are skipped. An optional header `# rows=<n> cols=<p>`
//! is checked against the data when present; any other `#` line is a comment.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Formats one entry in the `a+bi` encoding.
pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}i", z.re, sign, z.im.abs())
}

/// Parses one entry in the `a+bi` encoding.
pub fn parse_complex(token: &str) -> std::result::Result<Complex64, String> {
    let t = token.trim();
    if t.is_empty() {
        return Err("empty entry".into());
    }
    let bad = || format!("cannot parse `{t}` as a complex number");
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // Split at the last sign that is neither leading nor part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        s => s,
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = im.parse().map_err(|_| bad())?;
    Ok(Complex64::new(re, im))
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut rows = None;
    let mut cols = None;
    for part in line.trim_start_matches('#').split_whitespace() {
        if let Some(v) = part.strip_prefix("rows=") {
            rows = v.parse().ok();
        } else if let Some(v) = part.strip_prefix("cols=") {
            cols = v.parse().ok();
        }
    }
    Some((rows?, cols?))
}

/// Parses a whole matrix document.
pub fn parse_matrix(text: &str) -> Result<ComplexMatrix> {
    let mut header = None;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if trimmed.contains("rows=") || trimmed.contains("cols=") {
                header = Some(parse_header(trimmed).ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    column: 1,
                    message: "malformed header, expected `# rows=<n> cols=<p>`".into(),
                })?);
            }
            continue;
        }
        let mut row = Vec::new();
        let mut column = 1;
        for token in line.split(',') {
            let z = parse_complex(token).map_err(|message| Error::Parse {
                line: lineno + 1,
                column,
                message,
            })?;
            row.push(z);
            column += token.len() + 1;
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    column: 1,
                    message: format!("row has {} entries, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "no matrix rows found".into(),
        });
    }
    let m = ComplexMatrix::from_rows(&rows)?;
    if let Some((r, c)) = header {
        if (r, c) != m.shape() {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("header declares {r}x{c} but data is {}x{}", m.rows(), m.cols()),
            });
        }
    }
    Ok(m)
}

/// Encodes a matrix with a shape header.
pub fn format_matrix(m: &ComplexMatrix) -> String {
    let mut out = format!("# rows={} cols={}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        for (j, &z) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", format_complex(z));
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<ComplexMatrix> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix(&text)
}

pub fn write_matrix(path: &Path, m: &ComplexMatrix) -> Result<()> {
    std::fs::write(path, format_matrix(m)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
