//! CSV input and output: comma separated, row-major, no header unless asked.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use slope::simulation::format_f64;

use crate::error::CliError;

/// Dense matrix as read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Reads a numeric CSV. With `header`, the first line is skipped.
pub fn read_table(path: &Path, header: bool) -> Result<Table, CliError> {
    let file = File::open(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_table(file, path, header)
}

fn parse_table(reader: impl io::Read, path: &Path, header: bool) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut cols = 0;
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        for field in record.iter() {
            let value: f64 = field.parse().map_err(|_| CliError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("cannot parse '{field}' as a number"),
            })?;
            data.push(value);
        }
        cols = record.len();
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Parse { path: path.to_path_buf(), line: 1, message: "no data rows".into() });
    }
    Ok(Table { rows, cols, data })
}

fn csv_error(path: &Path, err: csv::Error) -> CliError {
    let line = err.position().map_or(0, |p| p.line());
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => err.to_string(),
    };
    CliError::Parse { path: path.to_path_buf(), line, message }
}

/// A vector stored either as one column or as one row.
pub fn read_vector(path: &Path, header: bool) -> Result<Vec<f64>, CliError> {
    let table = read_table(path, header)?;
    if table.rows != 1 && table.cols != 1 {
        return Err(CliError::Usage(format!(
            "{}: expected a single row or column, found {} x {}",
            path.display(),
            table.rows,
            table.cols
        )));
    }
    Ok(table.data)
}

/// Weights as a vector, or the `index,lambda` table written by `weights`.
pub fn read_weights(path: &Path, header: bool) -> Result<Vec<f64>, CliError> {
    let table = read_table(path, header)?;
    let indexed = table.cols == 2
        && table.rows > 1
        && table.data.chunks(2).enumerate().all(|(i, row)| row[0] == (i + 1) as f64);
    if indexed {
        return Ok(table.data.chunks(2).map(|row| row[1]).collect());
    }
    read_vector(path, header)
}

/// Opens `path` for writing, or stdout when absent or `-`.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) if p != Path::new("-") => {
            let file = File::create(p).map_err(|source| CliError::Io { path: p.to_path_buf(), source })?;
            Ok(Box::new(BufWriter::new(file)))
        }
        _ => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

/// `index,value` rows, 1-based.
pub fn write_indexed(out: &mut dyn Write, values: &[f64], header: Option<&str>) -> io::Result<()> {
    if let Some(h) = header {
        writeln!(out, "index,{h}")?;
    }
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, format_f64(*v))?;
    }
    out.flush()
}

/// One value per line.
pub fn write_column(out: &mut dyn Write, values: &[f64]) -> io::Result<()> {
    for v in values {
        writeln!(out, "{}", format_f64(*v))?;
    }
    out.flush()
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// `beta_hat.csv` -> `beta_hat.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, header: bool) -> Result<Table, CliError> {
        parse_table(text.as_bytes(), Path::new("in.csv"), header)
    }

    #[test]
    fn reads_rows() {
        let t = parse("1,2\n3, 4.5\n", false).unwrap();
        assert_eq!((t.rows, t.cols), (2, 2));
        assert_eq!(t.data, vec![1.0, 2.0, 3.0, 4.5]);
        let skipped = parse("a,b\n1,2\n", true).unwrap();
        assert_eq!(skipped.data, vec![1.0, 2.0]);
    }

    #[test]
    fn reports_the_line() {
        match parse("1,2\n3,x\n", false).unwrap_err() {
            CliError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("'x'"));
            }
            other => panic!("{other:?}"),
        }
        match parse("1,2\n3,4\n5\n", false).unwrap_err() {
            CliError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse("", false).is_err());
    }

    #[test]
    fn floats_round_trip() {
        for v in [1.959_963_984_540_054_2, 0.1, -3e-300, 0.0, f64::MAX] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("out/beta_hat.csv")), PathBuf::from("out/beta_hat.json"));
    }
}
