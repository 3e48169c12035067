//! Returns containers and CSV ingestion.
//!
//! CSV layout: a header row of asset names, then one row per period. An
//! optional leading date column is detected by its header (`date`, `time`,
//! `timestamp`, `period` or empty) and carried through untouched.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{HopError, Result};

/// `T x N` matrix of per-period returns, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    data: Vec<f64>,
    t: usize,
    n: usize,
    asset_names: Option<Vec<String>>,
    dates: Option<Vec<String>>,
}

impl ReturnsMatrix {
    /// Requires `T >= 2`, `N >= 1` and finite entries.
    pub fn from_row_major(data: Vec<f64>, t: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(HopError::data("returns need at least one asset"));
        }
        if t < 2 {
            return Err(HopError::data(format!("returns need at least two periods, got {t}")));
        }
        if data.len() != t * n {
            return Err(HopError::Dimension {
                expected: t * n,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(HopError::DataAt {
                row: pos / n + 1,
                col: pos % n + 1,
                msg: format!("non-finite return {}", data[pos]),
            });
        }
        Ok(Self {
            data,
            t,
            n,
            asset_names: None,
            dates: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(HopError::Dimension {
                expected: n,
                got: bad.len(),
            });
        }
        Self::from_row_major(rows.concat(), rows.len(), n)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let data = (0..m.nrows()).flat_map(|i| m.row(i).iter().copied().collect::<Vec<_>>()).collect();
        Self::from_row_major(data, m.nrows(), m.ncols())
    }

    pub fn with_asset_names(mut self, names: Vec<String>) -> Result<Self> {
        crate::error::check_dim(self.n, names.len())?;
        self.asset_names = Some(names);
        Ok(self)
    }

    pub fn with_dates(mut self, dates: Vec<String>) -> Result<Self> {
        crate::error::check_dim(self.t, dates.len())?;
        self.dates = Some(dates);
        Ok(self)
    }

    pub fn n_periods(&self) -> usize {
        self.t
    }

    pub fn n_assets(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn asset_names(&self) -> Option<&[String]> {
        self.asset_names.as_deref()
    }

    pub fn dates(&self) -> Option<&[String]> {
        self.dates.as_deref()
    }

    /// Asset names, or `asset_1..asset_N` when none were given.
    pub fn names_or_default(&self) -> Vec<String> {
        self.asset_names.clone().unwrap_or_else(|| default_names(self.n))
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.t, self.n, &self.data)
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_assets(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.n) {
            return Err(HopError::data(format!("asset index {bad} out of range for {} assets", self.n)));
        }
        let data = self.rows().flat_map(|r| columns.iter().map(|&c| r[c])).collect();
        let mut out = Self::from_row_major(data, self.t, columns.len())?;
        out.asset_names = self.asset_names.as_ref().map(|n| columns.iter().map(|&c| n[c].clone()).collect());
        out.dates = self.dates.clone();
        Ok(out)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| HopError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::read_csv(file)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(csv_error)?.clone();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(HopError::data("empty CSV: missing header row"));
        }
        let has_dates = is_date_header(&header[0]);
        let skip = usize::from(has_dates);
        let names: Vec<String> = header.iter().skip(skip).map(str::to_string).collect();
        if names.is_empty() {
            return Err(HopError::data("CSV header lists no asset columns"));
        }
        let n = names.len();
        let mut data = Vec::new();
        let mut dates = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            // header is line 1
            let row = idx + 2;
            let record = record.map_err(csv_error)?;
            if record.len() != n + skip {
                return Err(HopError::DataAt {
                    row,
                    col: record.len().min(n + skip) + 1,
                    msg: format!("expected {} fields, found {}", n + skip, record.len()),
                });
            }
            if has_dates {
                dates.push(record[0].to_string());
            }
            for (c, field) in record.iter().enumerate().skip(skip) {
                let v: f64 = field.parse().map_err(|_| HopError::DataAt {
                    row,
                    col: c + 1,
                    msg: format!("cannot parse {field:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(HopError::DataAt {
                        row,
                        col: c + 1,
                        msg: format!("non-finite value {field:?}"),
                    });
                }
                data.push(v);
            }
        }
        let t = data.len() / n;
        let mut out = Self::from_row_major(data, t, n)?;
        out.asset_names = Some(names);
        if has_dates {
            out.dates = Some(dates);
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_returns_csv(writer, &self.names_or_default(), self.dates(), &self.data)
    }
}

pub fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("asset_{i}")).collect()
}

fn is_date_header(h: &str) -> bool {
    matches!(h.to_ascii_lowercase().as_str(), "" | "date" | "time" | "timestamp" | "period")
}

fn csv_error(e: csv::Error) -> HopError {
    match e.position() {
        Some(pos) => HopError::DataAt {
            row: pos.line() as usize,
            col: 0,
            msg: e.to_string(),
        },
        None => HopError::data(e.to_string()),
    }
}

/// Writes row-major `rows` under the given header; any number of rows,
/// including none (header only).
pub fn write_returns_csv<W: Write>(writer: W, names: &[String], dates: Option<&[String]>, rows: &[f64]) -> Result<()> {
    let n = names.len();
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| HopError::Io(e.to_string());
    if dates.is_some() {
        w.write_field("date").map_err(io)?;
    }
    w.write_record(names).map_err(io)?;
    for (i, row) in rows.chunks_exact(n).enumerate() {
        if let Some(d) = dates {
            w.write_field(&d[i]).map_err(io)?;
        }
        // shortest representation that round-trips exactly
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_and_without_dates() {
        let text = "date,A,B\n2020-01-01,0.1,-0.2\n2020-01-02,0.0,0.3\n2020-01-03,1e-3,2\n";
        let r = ReturnsMatrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!((r.n_periods(), r.n_assets()), (3, 2));
        assert_eq!(r.row(2), &[1e-3, 2.0]);
        assert_eq!(r.dates().unwrap()[1], "2020-01-02");
        assert_eq!(r.asset_names().unwrap(), &["A".to_string(), "B".to_string()]);

        let r = ReturnsMatrix::read_csv("x\n1\n2\n".as_bytes()).unwrap();
        assert!(r.dates().is_none());
        assert_eq!(r.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn diagnostics_carry_location() {
        let err = ReturnsMatrix::read_csv("A,B\n1,2\n3,oops\n".as_bytes()).unwrap_err();
        assert_eq!(
            err,
            HopError::DataAt {
                row: 3,
                col: 2,
                msg: "cannot parse \"oops\" as a number".into()
            }
        );
        assert!(matches!(ReturnsMatrix::read_csv("A,B\n1,2\n3\n".as_bytes()), Err(HopError::DataAt { row: 3, .. })));
        assert!(matches!(ReturnsMatrix::read_csv("A\n1\nNaN\n".as_bytes()), Err(HopError::DataAt { row: 3, col: 1, .. })));
        assert!(ReturnsMatrix::read_csv("".as_bytes()).is_err());
        assert!(ReturnsMatrix::read_csv("A,B\n".as_bytes()).is_err());
        assert!(ReturnsMatrix::read_csv("A,B\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let data = vec![0.1, 1.0 / 3.0, -2.5e-17, 7.0, f64::MIN_POSITIVE, -0.0];
        let r = ReturnsMatrix::from_row_major(data, 3, 2)
            .unwrap()
            .with_dates(vec!["a".into(), "b".into(), "c".into()])
            .unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let back = ReturnsMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.as_slice(), r.as_slice());
        assert_eq!(back.dates(), r.dates());
        assert_eq!(back.asset_names().unwrap(), &default_names(2)[..]);
    }

    #[test]
    fn header_only_output() {
        let mut buf = Vec::new();
        write_returns_csv(&mut buf, &default_names(2), None, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "asset_1,asset_2\n");
    }

    #[test]
    fn validation_and_selection() {
        assert!(ReturnsMatrix::from_row_major(vec![1.0], 1, 1).is_err());
        assert!(matches!(
            ReturnsMatrix::from_row_major(vec![1.0, f64::INFINITY], 2, 1),
            Err(HopError::DataAt { row: 2, col: 1, .. })
        ));
        let r = ReturnsMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = r.select_assets(&[2, 0]).unwrap();
        assert_eq!(s.as_slice(), &[3.0, 1.0, 6.0, 4.0]);
        assert_eq!(r.to_matrix()[(1, 2)], 6.0);
        assert_eq!(ReturnsMatrix::from_matrix(&r.to_matrix()).unwrap(), r);
    }
}
