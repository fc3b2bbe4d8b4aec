//! Plain numeric CSV: comma separated, one optional header line.

use std::path::Path;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
    /// 1-based line number of every row in the source text.
    pub lines: Vec<usize>,
}

impl Table {
    pub fn columns(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Human-readable position of data row `index` (0-based).
    pub fn locate(&self, index: usize) -> String {
        match self.lines.get(index) {
            Some(line) => format!("row {} (line {line})", index + 1),
            None => format!("row {}", index + 1),
        }
    }
}

/// A header is present when the first token of the first non-empty line
/// does not parse as a number.
pub fn parse(text: &str) -> Result<Table, CliError> {
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split(',').map(str::trim).collect();
        if rows.is_empty() && header.is_none() && tokens[0].parse::<f64>().is_err() {
            header = Some(tokens.iter().map(|t| t.to_string()).collect());
            continue;
        }
        let row_no = rows.len() + 1;
        let mut row = Vec::with_capacity(tokens.len());
        for (c, tok) in tokens.iter().enumerate() {
            let v: f64 = tok.parse().map_err(|_| {
                CliError::Data(format!("row {row_no} (line {}), column {}: {tok:?} is not a number", i + 1, c + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!(
                    "row {row_no} (line {}), column {}: non-finite value {tok:?}",
                    i + 1,
                    c + 1
                )));
            }
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::Data(format!(
                    "row {row_no} (line {}): expected {w} columns, found {}",
                    i + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
        lines.push(i + 1);
    }
    if let (Some(h), Some(w)) = (&header, width) {
        if h.len() != w {
            return Err(CliError::Data(format!("header has {} columns, data has {w}", h.len())));
        }
    }
    Ok(Table { header, rows, lines })
}

pub fn read(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let table = parse(&text)?;
    if table.rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(table)
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_rows<'a>(header: &[String], rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `x` for one column, `x1 … xd` otherwise.
pub fn point_header(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["x".into()]
    } else {
        (1..=dim).map(|i| format!("x{i}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_detected() {
        let t = parse("a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(t.header, Some(vec!["a".into(), "b".into()]));
        assert_eq!(t.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(t.lines, vec![2, 3]);
        let t = parse("1,2\n\n3,4\n").unwrap();
        assert!(t.header.is_none());
        assert_eq!(t.lines, vec![1, 3]);
    }

    #[test]
    fn non_finite_values_name_the_row() {
        let err = parse("x\n1\nNaN\n").unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("line 3"), "{err}");
        let err = parse("1\ninf\n").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(parse("1,2\n3\n").is_err());
        assert!(parse("1,x\n").is_err());
    }

    #[test]
    fn formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -0.0, 3.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
