//! Matrix Market coordinate I/O. Only `matrix coordinate real
//! {general|symmetric}` is accepted on read; the writer always emits
//! `general` with 1-based indices.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrixCSR;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    // tolerate Fortran-style exponents (1.5D-3)
    let normalized: String;
    let t = if token.contains(['D', 'd']) {
        normalized = token.replace(['D', 'd'], "e");
        &normalized
    } else {
        token
    };
    t.parse::<f64>()
        .map_err(|_| parse_err(line, format!("bad real value '{token}'")))
}

fn parse_index(token: &str, line: usize, what: &str, bound: usize) -> Result<usize> {
    let v: usize = token
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what} index '{token}'")))?;
    if v == 0 || v > bound {
        return Err(parse_err(
            line,
            format!("{what} index {v} outside 1..={bound}"),
        ));
    }
    Ok(v - 1)
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrixCSR> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_matrix_market_str(&text)
}

pub(crate) fn read_matrix_market_str(text: &str) -> Result<SparseMatrixCSR> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix coordinate real general|symmetric'"));
    }
    if fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(parse_err(1, format!("unsupported object/format '{} {}'", fields[1], fields[2])));
    }
    if fields[3] != "real" {
        return Err(parse_err(1, format!("unsupported field '{}', only real is accepted", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(parse_err(1, format!("unsupported symmetry '{other}'")));
        }
    };

    let mut size_line = None;
    for (idx, raw) in lines.by_ref() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        size_line = Some((line_no, trimmed.to_string()));
        break;
    }
    let (size_line_no, size_text) =
        size_line.ok_or_else(|| parse_err(1, "missing size line"))?;
    let dims: Vec<&str> = size_text.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(parse_err(size_line_no, "size line must be 'm n nnz'"));
    }
    let m: usize = dims[0]
        .parse()
        .map_err(|_| parse_err(size_line_no, format!("bad row count '{}'", dims[0])))?;
    let n: usize = dims[1]
        .parse()
        .map_err(|_| parse_err(size_line_no, format!("bad column count '{}'", dims[1])))?;
    let declared_nnz: usize = dims[2]
        .parse()
        .map_err(|_| parse_err(size_line_no, format!("bad entry count '{}'", dims[2])))?;
    if symmetric && m != n {
        return Err(parse_err(size_line_no, "symmetric matrix must be square"));
    }

    let mut triplets = Vec::with_capacity(if symmetric {
        declared_nnz * 2
    } else {
        declared_nnz
    });
    let mut seen = 0usize;
    let mut last_line = size_line_no;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        last_line = line_no;
        if seen == declared_nnz {
            return Err(parse_err(
                line_no,
                format!("more than the declared {declared_nnz} entries"),
            ));
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(line_no, "entry line must be 'i j value'"));
        }
        let i = parse_index(toks[0], line_no, "row", m)?;
        let j = parse_index(toks[1], line_no, "column", n)?;
        let v = parse_f64(toks[2], line_no)?;
        if !v.is_finite() {
            return Err(parse_err(line_no, format!("non-finite value '{}'", toks[2])));
        }
        triplets.push((i, j, v));
        if symmetric && i != j {
            triplets.push((j, i, v));
        }
        seen += 1;
    }
    if seen != declared_nnz {
        return Err(parse_err(
            last_line,
            format!("declared {declared_nnz} entries but found {seen}"),
        ));
    }
    SparseMatrixCSR::from_coordinates(&triplets, m, n)
}

pub fn write_matrix_market(a: &SparseMatrixCSR, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", a.nrows(), a.ncols(), a.nnz()));
    for i in 0..a.nrows() {
        for (j, v) in a.row_entries(i) {
            out.push_str(&format!("{} {} {:e}\n", i + 1, j + 1, v));
        }
    }
    let mut file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(out.as_bytes()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_minimal_general_file() {
        let a = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 5.0\n",
        )
        .unwrap();
        assert_eq!((a.nrows(), a.ncols(), a.nnz()), (1, 1, 1));
        assert_eq!(a.values(), &[5.0]);
    }

    #[test]
    fn skips_comments_and_blank_lines() {
        let a = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real general\n% a comment\n\n2 2 2\n1 1 1.0\n% mid comment\n2 2 -2.5\n",
        )
        .unwrap();
        assert_eq!(a.to_triplets(), vec![(0, 0, 1.0), (1, 1, -2.5)]);
    }

    #[test]
    fn expands_symmetric_storage() {
        let a = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n2 1 4.0\n3 1 -1.0\n",
        )
        .unwrap();
        assert_eq!(a.nnz(), 4);
        let d = a.to_dense();
        assert_eq!(d.get(1, 0), 4.0);
        assert_eq!(d.get(0, 1), 4.0);
        assert_eq!(d.get(2, 0), -1.0);
        assert_eq!(d.get(0, 2), -1.0);
    }

    #[test]
    fn rejects_pattern_and_complex_fields() {
        for field in ["pattern", "complex", "integer"] {
            let text = format!("%%MatrixMarket matrix coordinate {field} general\n1 1 1\n1 1 1\n");
            let err = read_matrix_market_str(&text).unwrap_err();
            match err {
                Error::Parse { line, .. } => assert_eq!(line, 1),
                other => panic!("wrong error {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_array_format() {
        let err = read_matrix_market_str("%%MatrixMarket matrix array real general\n2 2\n1.0\n");
        assert!(matches!(err, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn reports_line_of_bad_index() {
        let err = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n3 1 2.0\n",
        )
        .unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 4);
                assert!(msg.contains("row index 3"));
            }
            other => panic!("wrong error {other:?}"),
        }
    }

    #[test]
    fn reports_line_of_bad_value() {
        let err = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 abc\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn rejects_entry_count_mismatch() {
        let too_few = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
        );
        assert!(matches!(too_few, Err(Error::Parse { .. })));
        let too_many = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1.0\n2 2 2.0\n",
        );
        assert!(matches!(too_many, Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn accepts_fortran_exponents() {
        let a = read_matrix_market_str(
            "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1.5D-3\n",
        )
        .unwrap();
        assert_eq!(a.values(), &[1.5e-3]);
    }

    #[test]
    fn write_then_read_round_trips() {
        let a = SparseMatrixCSR::from_coordinates(
            &[(0, 1, 2.25e-12), (1, 0, -7.5), (2, 3, 1.0 / 3.0)],
            3,
            4,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        write_matrix_market(&a, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n"));
        let b = read_matrix_market(&path).unwrap();
        assert_eq!(a, b);
    }
}
