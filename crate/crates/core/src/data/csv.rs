//! Comma-separated vectors with an `x1,…,xd` header. Values are written with
//! 17 significant digits, which round-trips every `f64` exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::ndcore::Tensor;

pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (1..=data.dim()).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..data.len() {
        let row: Vec<String> = data.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_csv(&text, &path.display().to_string())
}

pub fn parse_csv(text: &str, provenance: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let dim = match lines.next() {
        Some((_, header)) if !header.trim().is_empty() => header.split(',').count(),
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty file".into(),
            })
        }
    };
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {dim} columns, found {}", fields.len()),
            });
        }
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("not a number: {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite value {f:?}"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse {
            line: 2,
            msg: "no data rows".into(),
        });
    }
    Dataset::new(Tensor::matrix(rows, dim, values)?, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_row_cites_line() {
        let err = parse_csv("x1,x2\n1.0,2.0\n1.0,abc\n", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_and_header_only_fail() {
        assert!(matches!(
            parse_csv("", "t"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_csv("x1,x2\n", "t").is_err());
    }

    #[test]
    fn column_mismatch() {
        let err = parse_csv("x1,x2\n1,2\n3\n", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let d =
            Dataset::from_rows(&[[0.1, -1e-300], [std::f64::consts::PI, 123456.789]], "t").unwrap();
        write_csv(&d, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("x1,x2\n"));
        let back = load_csv(&p).unwrap();
        assert_eq!(back.points(), d.points());
    }
}
