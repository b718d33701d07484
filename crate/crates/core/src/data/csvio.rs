use std::io::Write;
use std::path::Path;

use super::dataset::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Reads a dataset from a CSV file with a header row. When `date_column` is
/// set the first column is skipped. Splits default to the known benchmark
/// sizes for the resulting `(T, D)`, or `train_frac / val_frac / rest`.
pub fn load_csv(path: &Path, date_column: bool, train_frac: f64, val_frac: f64) -> Result<TimeSeriesDataset> {
    let file = std::fs::File::open(path)?;
    let (values, names) = read_csv(file, date_column)?;
    TimeSeriesDataset::with_default_split(values, names, train_frac, val_frac)
}

/// Parses numeric CSV from any reader. Row and column numbers in errors are
/// 1-based and count the header as row 1.
pub fn read_csv<R: std::io::Read>(reader: R, date_column: bool) -> Result<(Matrix, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let skip = usize::from(date_column);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.len() <= skip {
        return Err(Error::Parse { row: 1, col: 1, msg: "no data columns in header".into() });
    }
    let names = header[skip..].to_vec();
    let d = names.len();
    let mut data = Vec::new();
    let mut n = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 2;
        if record.len() != header.len() {
            return Err(Error::Parse { row, col: record.len().min(header.len()) + 1, msg: format!("expected {} fields, found {}", header.len(), record.len()) });
        }
        for (c, cell) in record.iter().enumerate().skip(skip) {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: c + 1,
                msg: if cell.is_empty() { "missing value".into() } else { format!("'{cell}' is not a number") },
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, col: c + 1, msg: format!("'{cell}' is not finite") });
            }
            data.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Parse { row: 2, col: 1, msg: "no data rows".into() });
    }
    Ok((Matrix::new(n, d, data)?, names))
}

/// Writes `date` (step index) plus one column per channel.
pub fn write_csv(ds: &TimeSeriesDataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(ds, file)
}

pub fn write_csv_to<W: Write>(ds: &TimeSeriesDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(ds.channel_names.iter().cloned());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec = vec![i.to_string()];
        rec.extend(ds.values.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_file() {
        let text = "date,a,b\n2020-01-01,1.5,2\n2020-01-02,3,-4.25\n2020-01-03,0,1e-3\n";
        let (m, names) = read_csv(text.as_bytes(), true).unwrap();
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(names, vec!["a", "b"]);
        assert_eq!(m.as_slice(), &[1.5, 2.0, 3.0, -4.25, 0.0, 1e-3]);
    }

    #[test]
    fn missing_cell_position() {
        let text = "date,a,b\nx,1,2\ny,3,\n";
        match read_csv(text.as_bytes(), true).unwrap_err() {
            Error::Parse { row, col, .. } => assert_eq!((row, col), (3, 3)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn ragged_row() {
        let text = "a,b\n1,2\n3\n";
        assert!(matches!(read_csv(text.as_bytes(), false), Err(Error::Parse { row: 3, .. })));
    }

    #[test]
    fn non_numeric() {
        let text = "a\nfoo\n";
        let err = read_csv(text.as_bytes(), false).unwrap_err();
        assert!(err.to_string().contains("row 2, column 1"), "{err}");
    }
}
