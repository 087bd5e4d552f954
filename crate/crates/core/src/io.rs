//! CSV and binary column export.
//!
//! Binary layout (all integers and floats little-endian):
//!
//! ```text
//! magic   8 bytes  b"RGNCOLS\0"
//! version u8       1 = path, 2 = table with an extra axis
//! d       u32      spatial dimension
//! n       u64      number of time steps
//! -- version 2 only --
//! axis    u32      length of the extra axis (e.g. jet order + 1)
//! cols    u32      number of columns
//! rows    u64      number of rows
//! -- data --
//! columns stored one after another as f64
//! ```
//!
//! A version-1 file holds `d + 1` columns of `n + 1` rows: `t, w_1..w_d`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::gaussmodels::SamplePath;
use crate::grid::TimeGrid;

pub const MAGIC: [u8; 8] = *b"RGNCOLS\0";

/// Contents of a binary column file.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnFile {
    pub version: u8,
    pub dim: u32,
    pub steps: u64,
    /// Extra axis length (version 2 only).
    pub axis: Option<u32>,
    pub columns: Vec<Vec<f64>>,
}

impl ColumnFile {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let rows = self.columns.first().map_or(0, Vec::len);
        if self.columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Format("columns have unequal lengths".into()));
        }
        w.write_all(&MAGIC)?;
        w.write_all(&[self.version])?;
        w.write_all(&self.dim.to_le_bytes())?;
        w.write_all(&self.steps.to_le_bytes())?;
        match (self.version, self.axis) {
            (1, None) => {
                if self.columns.len() != self.dim as usize + 1 || rows as u64 != self.steps + 1 {
                    return Err(Error::Format("version 1 needs d + 1 columns of n + 1 rows".into()));
                }
            }
            (2, Some(axis)) => {
                w.write_all(&axis.to_le_bytes())?;
                w.write_all(&(self.columns.len() as u32).to_le_bytes())?;
                w.write_all(&(rows as u64).to_le_bytes())?;
            }
            _ => return Err(Error::Format(format!("unsupported version {}", self.version))),
        }
        let mut buf = Vec::with_capacity(rows * 8);
        for c in &self.columns {
            buf.clear();
            for v in c {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = read_u8(&mut r)?;
        let dim = read_u32(&mut r)?;
        let steps = read_u64(&mut r)?;
        let (axis, cols, rows) = match version {
            1 => (None, dim as usize + 1, steps as usize + 1),
            2 => {
                let axis = read_u32(&mut r)?;
                let cols = read_u32(&mut r)? as usize;
                let rows = read_u64(&mut r)? as usize;
                (Some(axis), cols, rows)
            }
            v => return Err(Error::Format(format!("unsupported version {v}"))),
        };
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != cols * rows * 8 {
            return Err(Error::Format(format!(
                "expected {} data bytes, found {}",
                cols * rows * 8,
                bytes.len()
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        let columns = if rows == 0 {
            vec![Vec::new(); cols]
        } else {
            values.chunks(rows).map(<[f64]>::to_vec).collect()
        };
        Ok(Self {
            version,
            dim,
            steps,
            axis,
            columns,
        })
    }
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn path_columns(path: &SamplePath) -> Vec<Vec<f64>> {
    let mut cols = vec![path.grid.times()];
    cols.extend((0..path.dim).map(|a| path.coordinate(a)));
    cols
}

pub fn write_path_binary<W: Write>(path: &SamplePath, w: W) -> Result<()> {
    ColumnFile {
        version: 1,
        dim: path.dim as u32,
        steps: path.grid.steps() as u64,
        axis: None,
        columns: path_columns(path),
    }
    .write(w)
}

pub fn read_path_binary<R: Read>(r: R) -> Result<SamplePath> {
    let f = ColumnFile::read(r)?;
    if f.version != 1 {
        return Err(Error::Format("not a path file".into()));
    }
    path_from_columns(&f.columns)
}

fn path_from_columns(cols: &[Vec<f64>]) -> Result<SamplePath> {
    let t = &cols[0];
    if t.len() < 2 || t[0] != 0.0 {
        return Err(Error::Format("time column must start at 0 with at least two rows".into()));
    }
    let steps = t.len() - 1;
    let grid = TimeGrid::new(t[steps], steps)?;
    for (i, &ti) in t.iter().enumerate() {
        if (ti - grid.time(i)).abs() > 1e-9 * grid.horizon() {
            return Err(Error::Format(format!("time column is not uniform at row {i}")));
        }
    }
    let d = cols.len() - 1;
    let mut values = vec![0.0; (steps + 1) * d];
    for (a, c) in cols[1..].iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            values[i * d + a] = *v;
        }
    }
    SamplePath::from_values(grid, d, values)
}

/// Write rows under a header with RFC-4180 quoting.
pub fn write_csv<W: Write, S: AsRef<str>>(w: W, header: &[S], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header.iter().map(|h| h.as_ref())).map_err(csv_err)?;
    for row in rows {
        out.write_record(row.iter().map(|v| format_float(*v))).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Shortest representation that round-trips exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_path_csv<W: Write>(path: &SamplePath, w: W) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=path.dim).map(|a| format!("w_{a}")));
    let times = path.grid.times();
    let rows = (0..path.len()).map(|i| {
        let mut r = vec![times[i]];
        r.extend_from_slice(path.point(i));
        r
    });
    write_csv(w, &header, rows)
}

pub fn read_path_csv<R: Read>(r: R) -> Result<SamplePath> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("t") || header.len() < 2 {
        return Err(Error::Format("expected header `t,w_1,...,w_d`".into()));
    }
    let mut cols = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        for (c, field) in cols.iter_mut().zip(rec.iter()) {
            c.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("bad number `{field}`: {e}")))?,
            );
        }
    }
    path_from_columns(&cols)
}
