//! Numeric CSV input and output.
//!
//! Input is comma separated with one observation per row. A single header
//! row is detected automatically (a first row containing a non-numeric
//! field) and lines starting with `#` are comments. Empty fields and ragged
//! rows are errors that name the offending row.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use tailwatch_core::PointSet;

use crate::error::{Error, Result};

/// Streaming reader of numeric rows.
pub struct PointReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    dim: Option<usize>,
    first: bool,
}

impl<R: Read> PointReader<R> {
    pub fn new(reader: R) -> Self {
        let records = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader)
            .into_records();
        PointReader { records, dim: None, first: true }
    }

    /// Dimension fixed by the first data row, once it has been read.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }
}

fn parse_row(record: &csv::StringRecord, row: u64) -> Result<Vec<f64>> {
    record
        .iter()
        .enumerate()
        .map(|(col, field)| {
            if field.is_empty() {
                return Err(Error::Csv { row, message: format!("missing value in column {}", col + 1) });
            }
            field.parse::<f64>().map_err(|_| Error::Csv {
                row,
                message: format!("column {}: {field:?} is not a number", col + 1),
            })
        })
        .collect()
}

impl<R: Read> Iterator for PointReader<R> {
    type Item = Result<Vec<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let record = match self.records.next()? {
                Ok(r) => r,
                Err(e) => {
                    let row = e.position().map_or(0, |p| p.line());
                    return Some(Err(Error::Csv { row, message: e.to_string() }));
                }
            };
            let row = record.position().map_or(0, |p| p.line());
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            let parsed = parse_row(&record, row);
            if std::mem::take(&mut self.first) && parsed.is_err() {
                // Header row.
                continue;
            }
            let values = match parsed {
                Ok(v) => v,
                Err(e) => return Some(Err(e)),
            };
            match self.dim {
                None => self.dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Some(Err(Error::Csv {
                        row,
                        message: format!("expected {d} columns, found {}", values.len()),
                    }))
                }
                Some(_) => {}
            }
            return Some(Ok(values));
        }
    }
}

/// Reads every row into a point set.
pub fn read_points<R: Read>(reader: R) -> Result<PointSet> {
    let mut rows = PointReader::new(reader);
    let mut flat = Vec::new();
    for row in rows.by_ref() {
        flat.extend(row?);
    }
    let dim = rows.dim().ok_or(Error::Csv { row: 0, message: "no data rows".into() })?;
    Ok(PointSet::from_flat(dim, flat)?)
}

/// Reads a CSV file, returning the points and the raw file bytes.
pub fn read_points_file(path: &Path) -> Result<(PointSet, Vec<u8>)> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    Ok((read_points(bytes.as_slice())?, bytes))
}

pub fn open_points(path: &Path) -> Result<PointReader<BufReader<File>>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(PointReader::new(BufReader::new(f)))
}

/// CSV writer that first emits `# key=value` lines echoing the parameters.
pub struct CsvOut<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvOut<W> {
    pub fn new(mut w: W, params: &[(&str, String)], columns: &[&str]) -> io::Result<Self> {
        for (k, v) in params {
            writeln!(w, "# {k}={v}")?;
        }
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(columns)?;
        Ok(CsvOut { inner })
    }

    pub fn row<I, T>(&mut self, fields: I) -> io::Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(io::Error::other)
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
