//! CSV ingestion for design matrices and responses.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct Table {
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn ncols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// `header = None` detects a header from a non-numeric first row.
pub fn read_table(path: &Path, header: Option<bool>) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    let has_header = header.unwrap_or_else(|| records[0].iter().any(|f| f.parse::<f64>().is_err()));
    let skip = usize::from(has_header);
    let mut rows = Vec::with_capacity(records.len() - skip);
    for (i, rec) in records.iter().enumerate().skip(skip) {
        let mut row = Vec::with_capacity(rec.len());
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Input(format!("{}: row {}, column {}: '{field}' is not a number", path.display(), i + 1, j + 1))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: header but no data rows", path.display())));
    }
    Ok(Table { rows })
}

/// How a table becomes `(X, y)`.
#[derive(Debug, Clone, Default)]
pub struct Layout {
    /// 1-based response column; `None` means the last column.
    pub y_col: Option<usize>,
    pub has_response: bool,
    pub intercept: bool,
    /// Subtracted from the predictor columns, in file order.
    pub center: Option<Vec<f64>>,
}

pub fn design(table: &Table, layout: &Layout) -> Result<(DMatrix<f64>, Option<DVector<f64>>), CliError> {
    let ncols = table.ncols();
    let y_idx = if layout.has_response {
        let c = layout.y_col.unwrap_or(ncols);
        if c == 0 || c > ncols {
            return Err(CliError::Input(format!("--y-col {c} is outside 1..{ncols}")));
        }
        Some(c - 1)
    } else {
        None
    };
    let predictors: Vec<usize> = (0..ncols).filter(|&j| Some(j) != y_idx).collect();
    if let Some(c) = &layout.center {
        if c.len() != predictors.len() {
            return Err(CliError::Input(format!(
                "--center has {} values but the data have {} predictor columns",
                c.len(),
                predictors.len()
            )));
        }
    }
    let offset = usize::from(layout.intercept);
    let n = table.rows.len();
    let x = DMatrix::from_fn(n, predictors.len() + offset, |i, j| {
        if j < offset {
            return 1.0;
        }
        let k = j - offset;
        let shift = layout.center.as_ref().map_or(0.0, |c| c[k]);
        table.rows[i][predictors[k]] - shift
    });
    let y = y_idx.map(|c| DVector::from_fn(n, |i, _| table.rows[i][c]));
    Ok((x, y))
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| CliError::Input(format!("bad {what} entry '{}'", v.trim()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_detection() {
        let f = write("a,b,y\n1,2,3\n4,5,6\n");
        let t = read_table(f.path(), None).unwrap();
        assert_eq!(t.rows.len(), 2);
        let f = write("1,2,3\n4,5,6\n");
        let t = read_table(f.path(), None).unwrap();
        assert_eq!(t.rows.len(), 2);
    }

    #[test]
    fn bad_cell_reports_position() {
        let f = write("1,2\n3,x\n");
        let e = read_table(f.path(), Some(false)).unwrap_err().to_string();
        assert!(e.contains("row 2, column 2"), "{e}");
        let f = write("1,2\n3\n");
        assert!(read_table(f.path(), Some(false)).is_err());
    }

    #[test]
    fn layout_builds_centred_design() {
        let t = Table { rows: vec![vec![1.0, 10.0, 5.0], vec![3.0, 20.0, 7.0]] };
        let layout = Layout { y_col: Some(2), has_response: true, intercept: true, center: Some(vec![2.0, 6.0]) };
        let (x, y) = design(&t, &layout).unwrap();
        assert_eq!(x.ncols(), 3);
        assert_eq!(x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, -1.0, -1.0]);
        assert_eq!(y.unwrap().as_slice(), &[10.0, 20.0]);
        let bad = Layout { center: Some(vec![1.0]), ..layout };
        assert!(design(&t, &bad).is_err());
    }
}
