//! Long-format observation tables: loading, serialisation, partitioning.

use std::io::Read;

use crate::error::{Error, Result};

/// Tokens treated as a missing cell, compared case-insensitively.
const MISSING_TOKENS: [&str; 6] = ["", "na", "n/a", "nan", "null", "."];

/// One named column. Raw text is always kept; `numeric` is present when every
/// cell is a plain decimal literal.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub raw: Vec<String>,
    pub numeric: Option<Vec<f64>>,
}

impl Column {
    fn new(name: String, raw: Vec<String>) -> Self {
        let numeric = raw
            .iter()
            .map(|s| parse_decimal(s))
            .collect::<Option<Vec<f64>>>();
        Column { name, raw, numeric }
    }

    pub fn is_numeric(&self) -> bool {
        self.numeric.is_some()
    }
}

/// Parses `[+-]?(digits[.digits]|.digits)`; exponents and special values are rejected.
pub fn parse_decimal(s: &str) -> Option<f64> {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    if body.is_empty() {
        return None;
    }
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    let ok = match frac {
        None => !int.is_empty() && digits(int),
        Some(f) => digits(int) && digits(f) && !(int.is_empty() && f.is_empty()),
    };
    if !ok {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn is_missing(s: &str) -> bool {
    MISSING_TOKENS.iter().any(|t| s.eq_ignore_ascii_case(t))
}

/// An immutable table of equally long columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    n_rows: usize,
}

impl Dataset {
    /// Builds a dataset from named columns of raw cell text.
    pub fn from_columns(columns: Vec<(String, Vec<String>)>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptyTable);
        }
        let n_rows = columns[0].1.len();
        if n_rows == 0 {
            return Err(Error::EmptyTable);
        }
        let mut seen = std::collections::HashSet::new();
        for (name, cells) in &columns {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{name}`")));
            }
            if cells.len() != n_rows {
                return Err(Error::Schema(format!(
                    "column `{name}` has {} cells, expected {n_rows}",
                    cells.len()
                )));
            }
            if let Some(row) = cells.iter().position(|c| is_missing(c)) {
                return Err(Error::MissingCell {
                    row: row + 1,
                    column: name.clone(),
                });
            }
        }
        let columns = columns
            .into_iter()
            .map(|(name, raw)| Column::new(name, raw))
            .collect();
        Ok(Dataset { columns, n_rows })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column> {
        self.column(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Distinct labels of a column in order of first appearance.
    pub fn levels(&self, name: &str) -> Result<Vec<String>> {
        let col = self.require(name)?;
        let mut out: Vec<String> = Vec::new();
        for v in &col.raw {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        Ok(out)
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let raw: Vec<String> = rows.iter().map(|&r| c.raw[r].clone()).collect();
                Column::new(c.name.clone(), raw)
            })
            .collect();
        Dataset {
            columns,
            n_rows: rows.len(),
        }
    }

    /// Comma-delimited text with a header row; `load_table` reads it back unchanged.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        // Writing into a Vec cannot fail.
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .expect("in-memory write");
        for r in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c.raw[r].as_str()))
                .expect("in-memory write");
        }
        let bytes = w.into_inner().expect("in-memory flush");
        String::from_utf8(bytes).expect("input was UTF-8")
    }
}

/// Reads a comma-delimited table with a mandatory header row.
///
/// Cells are trimmed. Row numbers in errors are 1-based file lines, so the
/// header is line 1 and the first data row is line 2.
pub fn load_table<R: Read>(source: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(Error::EmptyTable),
        Some(r) => r.map_err(csv_error)?,
    };
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    for (i, n) in names.iter().enumerate() {
        if n.is_empty() {
            return Err(Error::Parse {
                row: 1,
                column: i + 1,
                message: "empty column name".into(),
            });
        }
        if names[..i].contains(n) {
            return Err(Error::Parse {
                row: 1,
                column: i + 1,
                message: format!("duplicate column name `{n}`"),
            });
        }
    }
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() == 1 && rec.get(0) == Some("") {
            // blank line
            continue;
        }
        if rec.len() != names.len() {
            return Err(Error::Parse {
                row: line,
                column: rec.len().min(names.len()) + 1,
                message: format!("expected {} fields, found {}", names.len(), rec.len()),
            });
        }
        for (j, v) in rec.iter().enumerate() {
            if is_missing(v) {
                return Err(Error::MissingCell {
                    row: line,
                    column: names[j].clone(),
                });
            }
            cells[j].push(v.to_string());
        }
    }
    if cells[0].is_empty() {
        return Err(Error::EmptyTable);
    }
    Dataset::from_columns(names.into_iter().zip(cells).collect())
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        row,
        column: 0,
        message: e.to_string(),
    }
}

/// Disjoint, exhaustive split of a dataset by the levels of grouping columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    pub factors: Vec<String>,
    /// One level tuple per subset, aligned with `factors`.
    pub keys: Vec<Vec<String>>,
    /// Row indices into the parent dataset, per subset.
    pub rows: Vec<Vec<usize>>,
    pub subsets: Vec<Dataset>,
}

impl GroupPartition {
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// Human-readable key such as `Year=2021,Site=North`; empty for the trivial partition.
    pub fn label(&self, i: usize) -> String {
        self.factors
            .iter()
            .zip(&self.keys[i])
            .map(|(f, v)| format!("{f}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Splits `data` into one subset per observed combination of `group_factors`,
/// in first-appearance order.
pub fn partition(data: &Dataset, group_factors: &[String]) -> Result<GroupPartition> {
    let cols = group_factors
        .iter()
        .map(|g| data.require(g))
        .collect::<Result<Vec<_>>>()?;
    let mut keys: Vec<Vec<String>> = Vec::new();
    let mut rows: Vec<Vec<usize>> = Vec::new();
    for r in 0..data.n_rows() {
        let key: Vec<String> = cols.iter().map(|c| c.raw[r].clone()).collect();
        match keys.iter().position(|k| *k == key) {
            Some(i) => rows[i].push(r),
            None => {
                keys.push(key);
                rows.push(vec![r]);
            }
        }
    }
    let subsets = rows.iter().map(|rs| data.select_rows(rs)).collect();
    Ok(GroupPartition {
        factors: group_factors.to_vec(),
        keys,
        rows,
        subsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> Result<Dataset> {
        load_table(text.as_bytes())
    }

    #[test]
    fn loads_and_types_columns() {
        let d = table("Treatment,Yield\nA,1.5\nB,2\nA,.5\n").unwrap();
        assert_eq!(d.n_rows(), 3);
        assert!(!d.column("Treatment").unwrap().is_numeric());
        assert_eq!(d.column("Yield").unwrap().numeric.as_deref(), Some(&[1.5, 2.0, 0.5][..]));
        assert_eq!(d.levels("Treatment").unwrap(), vec!["A", "B"]);
    }

    #[test]
    fn decimal_literals_only() {
        assert_eq!(parse_decimal("-3."), Some(-3.0));
        assert_eq!(parse_decimal("+.25"), Some(0.25));
        for bad in ["1e3", "inf", "NaN", ".", "+", "1.2.3", "0x10", " 1"] {
            assert_eq!(parse_decimal(bad), None, "{bad}");
        }
    }

    #[test]
    fn missing_cell_reports_line() {
        let e = table("T,Y\nA,1\nB,NA\n").unwrap_err();
        assert_eq!(
            e,
            Error::MissingCell {
                row: 3,
                column: "Y".into()
            }
        );
    }

    #[test]
    fn ragged_row_is_parse_error_at_its_line() {
        let mut text = String::from("T,Y\n");
        for i in 0..5 {
            text.push_str(&format!("A,{i}\n"));
        }
        text.push_str("B,1,extra\n");
        match table(&text).unwrap_err() {
            Error::Parse { row, .. } => assert_eq!(row, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(table("").unwrap_err(), Error::EmptyTable);
        assert_eq!(table("T,Y\n").unwrap_err(), Error::EmptyTable);
    }

    #[test]
    fn round_trip_with_quoting() {
        let d = table("Name,Value\n\"a, b\",1\nc,2.50\n").unwrap();
        let again = load_table(d.to_csv().as_bytes()).unwrap();
        assert_eq!(d, again);
        assert_eq!(again.column("Value").unwrap().raw[1], "2.50");
    }

    #[test]
    fn partition_basics() {
        let d = table("Year,T,Y\n2021,A,1\n2022,A,2\n2021,B,3\n2022,B,4\n2021,C,5\n").unwrap();
        let whole = partition(&d, &[]).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!(whole.subsets[0], d);
        assert_eq!(whole.label(0), "");

        let p = partition(&d, &["Year".to_string()]).unwrap();
        assert_eq!(p.keys, vec![vec!["2021".to_string()], vec!["2022".to_string()]]);
        assert_eq!(p.subsets[0].n_rows() + p.subsets[1].n_rows(), 5);
        assert_eq!(p.label(1), "Year=2022");
        assert!(matches!(
            partition(&d, &["Site".to_string()]),
            Err(Error::MissingColumn(_))
        ));
    }
}
