//! On-disk formats.
//!
//! * Feature CSV: one row per item, last column an integer class label, the
//!   rest real features. A header row is optional and must be flagged.
//! * Kernel binary: `b"KGM1"`, `u32` LE size `m`, `m*m` `f64` LE entries in
//!   row-major order, `u32` LE name length, UTF-8 name.
//! * Kernel CSV: `m` headerless rows of `m` values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::{FeatureMatrix, GramMatrix};
use crate::matrix::Matrix;
use crate::Label;

pub const KERNEL_MAGIC: &[u8; 4] = b"KGM1";

/// Parses a feature CSV from any reader.
pub fn read_features<R: Read>(reader: R, has_header: bool) -> Result<(FeatureMatrix, Vec<Label>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::Format(format!(
                "row {row}: need at least one feature and a label, got {} columns",
                record.len()
            )));
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Format(format!(
                "row {row} has {} columns, expected {w}",
                record.len()
            )));
        }
        for (col, field) in record.iter().take(w - 1).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Format(format!("row {row}, column {col}: '{field}' is not a number"))
            })?;
            values.push(v);
        }
        let label_field = &record[w - 1];
        let label: Label = label_field.parse().map_err(|_| {
            Error::Format(format!(
                "row {row}: label '{label_field}' is not an integer"
            ))
        })?;
        labels.push(label);
    }
    let cols = width.map_or(0, |w| w - 1);
    let features = FeatureMatrix::new(Matrix::from_vec(labels.len(), cols, values)?)?;
    Ok((features, labels))
}

pub fn load_features(path: &Path, has_header: bool) -> Result<(FeatureMatrix, Vec<Label>)> {
    read_features(File::open(path)?, has_header)
}

pub fn write_features<W: Write>(writer: W, features: &FeatureMatrix, labels: &[Label]) -> Result<()> {
    if labels.len() != features.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} feature rows",
            labels.len(),
            features.len()
        )));
    }
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for (i, &label) in labels.iter().enumerate() {
        let mut record: Vec<String> = features.row(i).iter().map(|v| v.to_string()).collect();
        record.push(label.to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_kernel<W: Write>(mut w: W, g: &GramMatrix) -> Result<()> {
    let m = u32::try_from(g.size())
        .map_err(|_| Error::Format("kernel too large for the binary format".into()))?;
    let name = g.tag().as_bytes();
    let name_len = u32::try_from(name.len())
        .map_err(|_| Error::Format("kernel name too long".into()))?;
    w.write_all(KERNEL_MAGIC)?;
    w.write_all(&m.to_le_bytes())?;
    for v in g.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&name_len.to_le_bytes())?;
    w.write_all(name)?;
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated kernel file".into()))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_kernel<R: Read>(mut r: R) -> Result<GramMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated kernel file".into()))?;
    if &magic != KERNEL_MAGIC {
        return Err(Error::Format("not a kernel file (bad magic bytes)".into()));
    }
    let m = read_u32(&mut r)? as usize;
    let mut data = Vec::with_capacity(m * m);
    let mut buf = [0u8; 8];
    for _ in 0..m * m {
        r.read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated kernel entries".into()))?;
        data.push(f64::from_le_bytes(buf));
    }
    let name_len = read_u32(&mut r)? as usize;
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name)
        .map_err(|_| Error::Format("truncated kernel name".into()))?;
    let name = String::from_utf8(name)
        .map_err(|_| Error::Format("kernel name is not UTF-8".into()))?;
    GramMatrix::new(Matrix::from_vec(m, m, data)?, name)
}

pub fn save_kernel(path: &Path, g: &GramMatrix) -> Result<()> {
    write_kernel(BufWriter::new(File::create(path)?), g)
}

pub fn load_kernel(path: &Path) -> Result<GramMatrix> {
    read_kernel(BufReader::new(File::open(path)?))
}

pub fn write_kernel_csv<W: Write>(writer: W, g: &GramMatrix) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for i in 0..g.size() {
        wtr.write_record(g.row(i).iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_kernel_csv<R: Read>(reader: R, name: &str) -> Result<GramMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let values = record?
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {row}: '{f}' is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    GramMatrix::new(Matrix::from_rows(&rows)?, name)
}

/// Non-empty, trimmed lines of a text file (labels, item ids).
pub fn read_lines<R: Read>(reader: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        let line = line.trim();
        if !line.is_empty() {
            out.push(line.to_string());
        }
    }
    Ok(out)
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<Label>> {
    read_lines(reader)?
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            s.parse()
                .map_err(|_| Error::Format(format!("line {}: label '{s}' is not an integer", i + 1)))
        })
        .collect()
}

pub fn write_lines<W: Write, S: AsRef<str>>(mut w: W, lines: &[S]) -> Result<()> {
    for l in lines {
        writeln!(w, "{}", l.as_ref())?;
    }
    w.flush()?;
    Ok(())
}
