//! Input readers and deterministic output writers.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use surfreg::io::csv::{read_points_csv, read_values_csv};
use surfreg::io::ply::{read_ply_cloud, write_ply_cloud_file};
use surfreg::{FrameId, PointCloud, RigidTransform};

use crate::failure::{CliResult, Failure};

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::input(format!("{}: no such file", path.display())))
    }
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).unwrap_or_default()
}

/// Reads a PLY (frame comment honored) or `x,y,z` CSV point cloud.
pub fn read_cloud(path: &Path, default_frame: FrameId) -> CliResult<PointCloud> {
    require_file(path)?;
    match extension(path).as_str() {
        "ply" => read_ply_cloud(path, default_frame).map_err(|e| Failure::reading(path, e)),
        "csv" => {
            let points = read_points_csv(path).map_err(|e| Failure::reading(path, e))?;
            PointCloud::new(points, default_frame).map_err(|e| Failure::reading(path, e))
        }
        other => Err(Failure::input(format!("{}: unsupported point format '.{other}'", path.display()))),
    }
}

pub fn read_values(path: &Path) -> CliResult<Vec<f64>> {
    require_file(path)?;
    read_values_csv(path).map_err(|e| Failure::reading(path, e))
}

pub fn read_points(path: &Path) -> CliResult<Vec<nalgebra::Vector3<f64>>> {
    require_file(path)?;
    read_points_csv(path).map_err(|e| Failure::reading(path, e))
}

/// A pose given either as a file or inline, 16 row-major numbers separated
/// by whitespace or commas.
pub fn read_pose(arg: &str, from: FrameId, to: FrameId) -> CliResult<RigidTransform> {
    let path = Path::new(arg);
    let text = if path.is_file() { fs::read_to_string(path)? } else { arg.to_string() };
    let values = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Failure::input(format!("pose '{arg}': invalid number '{s}'"))))
        .collect::<CliResult<Vec<f64>>>()?;
    if values.len() != 16 {
        let hint = if path.extension().is_some() && !path.exists() { " (file not found)" } else { "" };
        return Err(Failure::input(format!("pose '{arg}': expected 16 values, got {}{hint}", values.len())));
    }
    Ok(RigidTransform::from_row_major_projected(&values, from, to, 1e-6)?)
}

pub fn pose_text(t: &RigidTransform) -> String {
    t.to_row_major().chunks(4).map(|row| row.iter().map(f64::to_string).collect::<Vec<_>>().join(" ") + "\n").collect()
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
    text.push('\n');
    write_text(path, &text)
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_ply_cloud_file(cloud, path).map_err(|e| Failure::reading(path, e))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
