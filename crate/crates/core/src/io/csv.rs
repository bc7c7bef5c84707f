//! Small CSV readers for stylus samples (`x,y,z` per row, mm) and error
//! lists (one value per row; extra columns ignored). A non-numeric first row
//! is treated as a header.

use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};

const CTX: &str = "CSV";

fn records(path: &Path) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::parse(CTX, path.display().to_string(), e.to_string()))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(CTX, format!("row {}", i + 1), e.to_string()))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        out.push((line, rec));
    }
    if let Some((_, first)) = out.first() {
        if first.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            out.remove(0);
        }
    }
    Ok(out)
}

fn field(rec: &csv::StringRecord, col: usize, line: u64) -> Result<f64> {
    let raw =
        rec.get(col).ok_or_else(|| Error::parse(CTX, format!("line {line}"), format!("missing column {}", col + 1)))?;
    let v: f64 =
        raw.parse().map_err(|_| Error::parse(CTX, format!("line {line}"), format!("invalid number '{raw}'")))?;
    if !v.is_finite() {
        return Err(Error::parse(CTX, format!("line {line}"), "non-finite value"));
    }
    Ok(v)
}

pub fn read_points_csv(path: &Path) -> Result<Vec<Vector3<f64>>> {
    records(path)?
        .iter()
        .map(|(line, rec)| Ok(Vector3::new(field(rec, 0, *line)?, field(rec, 1, *line)?, field(rec, 2, *line)?)))
        .collect()
}

pub fn read_values_csv(path: &Path) -> Result<Vec<f64>> {
    records(path)?.iter().map(|(line, rec)| field(rec, 0, *line)).collect()
}

pub fn write_points_csv(points: &[Vector3<f64>], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["x_mm", "y_mm", "z_mm"]).map_err(io)?;
    for p in points {
        w.write_record([p.x.to_string(), p.y.to_string(), p.z.to_string()]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.csv");
        let pts = vec![Vector3::new(0.1, 2.0, -3.5), Vector3::new(1e-3, 4.0, 5.0)];
        write_points_csv(&pts, &path).unwrap();
        assert_eq!(read_points_csv(&path).unwrap(), pts);
        std::fs::write(&path, "1.5\n2.5, extra\n\n3\n").unwrap();
        assert_eq!(read_values_csv(&path).unwrap(), vec![1.5, 2.5, 3.0]);
        std::fs::write(&path, "x,y,z\n1,2\n").unwrap();
        assert!(matches!(read_points_csv(&path), Err(Error::Parse { .. })));
    }
}
