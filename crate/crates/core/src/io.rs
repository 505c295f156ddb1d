//! CSV readers and writers for matrices and node coordinates.
//!
//! Matrix files carry one header row of column labels followed by numeric
//! rows. Coordinate files use the header `name,lat,lon`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::GeoPoint;

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            row,
            col: 0,
            msg: format!("{other:?}"),
        },
    }
}

/// Reads a labelled numeric matrix. Row and column numbers in errors are
/// 1-based file positions (the header is row 1).
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let cols = header.len();
    if cols == 0 || header.iter().all(String::is_empty) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            col: 1,
            msg: "missing header row".into(),
        });
    }

    let mut values = Vec::new();
    let mut rows = 0;
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = idx + 2;
        if record.len() != cols {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: line,
                col: record.len().min(cols) + 1,
                msg: format!("expected {cols} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                col: j + 1,
                msg: format!("non-numeric cell {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    col: j + 1,
                    msg: format!("non-finite value {cell:?}"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    Ok((header, DMatrix::from_row_slice(rows, cols, &values)))
}

pub fn write_matrix_csv(path: &Path, header: &[String], mat: &DMatrix<f64>) -> Result<()> {
    if header.len() != mat.ncols() {
        return Err(Error::dims("CSV header", mat.ncols(), header.len()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "{}", header.join(","))?;
        for i in 0..mat.nrows() {
            let row: Vec<String> = mat.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Reads `name,lat,lon` rows; row order defines node indices.
pub fn read_coords_csv(path: &Path) -> Result<Vec<(String, GeoPoint)>> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    if header != ["name", "lat", "lon"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            col: 1,
            msg: format!("expected header name,lat,lon, found {}", header.join(",")),
        });
    }
    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = idx + 2;
        if record.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: line,
                col: record.len().min(3) + 1,
                msg: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let coord = |j: usize| -> Result<f64> {
            record[j]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    col: j + 1,
                    msg: format!("invalid coordinate {:?}", &record[j]),
                })
        };
        out.push((record[0].to_owned(), GeoPoint::new(coord(1)?, coord(2)?)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn matrix_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mat = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 1e-17, 0.1, 3.0, 4.0]);
        let header = vec!["a".to_string(), "b".into(), "c".into()];
        write_matrix_csv(&path, &header, &mat).unwrap();
        let (h, back) = read_matrix_csv(&path).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, mat);
    }

    #[test]
    fn matrix_errors_name_the_cell() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "node_1,node_2\n1,2\n3,x\n").unwrap();
        match read_matrix_csv(&path).unwrap_err() {
            Error::Parse { row, col, .. } => assert_eq!((row, col), (3, 2)),
            e => panic!("unexpected {e}"),
        }
        fs::write(&path, "node_1,node_2\n1,2\n3\n").unwrap();
        match read_matrix_csv(&path).unwrap_err() {
            Error::Parse { row, .. } => assert_eq!(row, 3),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            read_matrix_csv(&dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn coords() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        fs::write(&path, "name,lat,lon\nStockholm,59.33,18.07\nGothenburg,57.71,11.97\n").unwrap();
        let c = read_coords_csv(&path).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].0, "Gothenburg");
        assert_eq!(c[0].1, GeoPoint::new(59.33, 18.07));

        fs::write(&path, "city,lat,lon\nA,1,2\n").unwrap();
        assert!(read_coords_csv(&path).is_err());
        fs::write(&path, "name,lat,lon\nA,north,2\n").unwrap();
        assert!(matches!(read_coords_csv(&path), Err(Error::Parse { row: 2, col: 2, .. })));
    }
}
