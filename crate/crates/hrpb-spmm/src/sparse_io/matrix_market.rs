//! Matrix Market coordinate-format reader and writer.
//!
//! Supported headers: `matrix coordinate {real|pattern} {general|symmetric}`.
//! Comment lines start with `%`. Indices are 1-based in the file and 0-based
//! in memory. Symmetric inputs are expanded to both triangles (the diagonal
//! is not duplicated), pattern entries get the value 1.0, and duplicate
//! coordinates are summed. Array-format files and integer/complex fields are
//! rejected.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{CooMatrix, SparseIoError};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Pattern,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_err(line: usize, msg: impl Into<String>) -> SparseIoError {
    SparseIoError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses a Matrix Market coordinate stream into a canonical [`CooMatrix`].
pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<CooMatrix, SparseIoError> {
    let mut lines = reader.lines().enumerate();

    let (header_no, header) = match lines.next() {
        Some((no, line)) => (no + 1, line?),
        None => return Err(parse_err(1, "empty input")),
    };
    let (field, symmetry) = parse_header(header_no, &header)?;

    // Size line: first non-comment, non-blank line after the header.
    let mut size_line = None;
    for (no, line) in &mut lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        size_line = Some((no + 1, line));
        break;
    }
    let (size_no, size_line) = size_line.ok_or_else(|| parse_err(1, "missing size line"))?;
    let sizes = split_counts(size_no, &size_line, 3)?;
    let (num_rows, num_cols, nnz) = (sizes[0], sizes[1], sizes[2]);

    // Capacity capped: the declared count is untrusted until the entries
    // actually arrive.
    let mut entries: Vec<(usize, usize, f32)> = Vec::with_capacity(nnz.min(1 << 20));
    let mut seen = 0usize;
    for (no, line) in &mut lines {
        let no = no + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        if seen == nnz {
            return Err(parse_err(no, format!("more than {nnz} entries")));
        }
        let mut tokens = trimmed.split_whitespace();
        let row = parse_index(no, tokens.next(), "row", num_rows)?;
        let col = parse_index(no, tokens.next(), "column", num_cols)?;
        let value = match field {
            Field::Pattern => 1.0,
            Field::Real => {
                let tok = tokens
                    .next()
                    .ok_or_else(|| parse_err(no, "missing value"))?;
                tok.parse::<f32>()
                    .map_err(|_| parse_err(no, format!("non-numeric value '{tok}'")))?
            }
        };
        if tokens.next().is_some() {
            return Err(parse_err(no, "trailing tokens on entry line"));
        }
        entries.push((row, col, value));
        if symmetry == Symmetry::Symmetric && row != col {
            entries.push((col, row, value));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(parse_err(
            size_no,
            format!("size line declares {nnz} entries, found {seen}"),
        ));
    }
    CooMatrix::from_entries(num_rows, num_cols, entries)
}

fn parse_header(line_no: usize, header: &str) -> Result<(Field, Symmetry), SparseIoError> {
    let tokens: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(parse_err(line_no, "malformed MatrixMarket header"));
    }
    if tokens[1] != "matrix" {
        return Err(parse_err(
            line_no,
            format!("unsupported object '{}'", tokens[1]),
        ));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(
            line_no,
            format!("unsupported format '{}'", tokens[2]),
        ));
    }
    let field = match tokens[3].as_str() {
        "real" => Field::Real,
        "pattern" => Field::Pattern,
        other => return Err(parse_err(line_no, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => {
            return Err(parse_err(
                line_no,
                format!("unsupported symmetry '{other}'"),
            ));
        }
    };
    Ok((field, symmetry))
}

fn split_counts(line_no: usize, line: &str, want: usize) -> Result<Vec<usize>, SparseIoError> {
    let counts: Vec<usize> = line
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| parse_err(line_no, format!("non-numeric count '{t}'")))
        })
        .collect::<Result<_, _>>()?;
    if counts.len() != want {
        return Err(parse_err(line_no, format!("expected {want} counts")));
    }
    Ok(counts)
}

fn parse_index(
    line_no: usize,
    token: Option<&str>,
    what: &str,
    bound: usize,
) -> Result<usize, SparseIoError> {
    let tok = token.ok_or_else(|| parse_err(line_no, format!("missing {what} index")))?;
    let idx = tok
        .parse::<usize>()
        .map_err(|_| parse_err(line_no, format!("non-numeric {what} index '{tok}'")))?;
    if idx == 0 || idx > bound {
        return Err(parse_err(
            line_no,
            format!("{what} index {idx} out of range 1..={bound}"),
        ));
    }
    Ok(idx - 1)
}

/// Reads a `.mtx` file from disk.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CooMatrix, SparseIoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| SparseIoError::Open {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix_market(BufReader::new(file))
}

/// Writes a canonical COO matrix as `coordinate real general`, 1-based.
/// Values use the shortest decimal form that parses back to the same f32,
/// so `parse(write(m)) == m`.
pub fn write_matrix_market<W: Write>(w: &mut W, m: &CooMatrix) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.num_rows, m.num_cols, m.nnz())?;
    for &(r, c, v) in &m.entries {
        writeln!(w, "{} {} {}", r + 1, c + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<CooMatrix, SparseIoError> {
        parse_matrix_market(Cursor::new(text))
    }

    #[test]
    fn general_real() {
        let m = parse(
            "%%MatrixMarket matrix coordinate real general\n\
             % a comment\n\
             3 3 2\n\
             1 1 2.0\n\
             3 2 -1.0\n",
        )
        .unwrap();
        assert_eq!(m.num_rows, 3);
        assert_eq!(m.num_cols, 3);
        assert_eq!(m.entries, vec![(0, 0, 2.0), (2, 1, -1.0)]);
    }

    #[test]
    fn symmetric_expands_off_diagonal() {
        let m = parse(
            "%%MatrixMarket matrix coordinate real symmetric\n\
             2 2 1\n\
             2 1 5.0\n",
        )
        .unwrap();
        assert_eq!(m.entries, vec![(0, 1, 5.0), (1, 0, 5.0)]);
    }

    #[test]
    fn symmetric_diagonal_not_duplicated() {
        let m = parse(
            "%%MatrixMarket matrix coordinate real symmetric\n\
             2 2 1\n\
             2 2 4.0\n",
        )
        .unwrap();
        assert_eq!(m.entries, vec![(1, 1, 4.0)]);
    }

    #[test]
    fn pattern_entries_get_unit_value() {
        let m = parse(
            "%%MatrixMarket matrix coordinate pattern general\n\
             2 2 1\n\
             1 2\n",
        )
        .unwrap();
        assert_eq!(m.entries, vec![(0, 1, 1.0)]);
    }

    #[test]
    fn duplicates_are_summed() {
        let m = parse(
            "%%MatrixMarket matrix coordinate real general\n\
             2 2 2\n\
             1 1 1.5\n\
             1 1 2.5\n",
        )
        .unwrap();
        assert_eq!(m.entries, vec![(0, 0, 4.0)]);
    }

    #[test]
    fn malformed_header_rejected() {
        let err = parse("%%NotMatrixMarket\n1 1 0\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn integer_field_rejected() {
        let err = parse("%%MatrixMarket matrix coordinate integer general\n1 1 0\n").unwrap_err();
        assert!(err.to_string().contains("unsupported field"));
    }

    #[test]
    fn out_of_range_index_names_line() {
        let err = parse(
            "%%MatrixMarket matrix coordinate real general\n\
             2 2 1\n\
             3 1 1.0\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(err.to_string().contains("out of range"));
    }

    #[test]
    fn non_numeric_value_names_line() {
        let err = parse(
            "%%MatrixMarket matrix coordinate real general\n\
             2 2 1\n\
             1 1 abc\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn truncated_entry_list_rejected() {
        let err = parse(
            "%%MatrixMarket matrix coordinate real general\n\
             2 2 2\n\
             1 1 1.0\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("found 1"));
    }

    #[test]
    fn writer_reader_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let entries: Vec<_> = (0..200)
            .map(|_| {
                (
                    rng.gen_range(0..40),
                    rng.gen_range(0..30),
                    rng.gen_range(-1.0f32..1.0),
                )
            })
            .collect();
        let m = CooMatrix::from_entries(40, 30, entries).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &m).unwrap();
        let parsed = parse_matrix_market(Cursor::new(buf)).unwrap();
        assert_eq!(parsed, m);
    }
}
