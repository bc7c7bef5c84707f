//! File formats: PLY and OBJ meshes, PLY point clouds, CSV point and value lists.

pub mod csv;
pub mod obj;
pub mod ply;

use std::path::Path;

use crate::error::{Error, Result};
use crate::sampling::{TriangleMesh, ValidatedMesh};

/// Loads a PLY (ascii / binary little-endian) or OBJ mesh by file extension.
pub fn load_mesh(path: &Path) -> Result<ValidatedMesh> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).unwrap_or_default();
    let (vertices, triangles, normals) = match ext.as_str() {
        "ply" => {
            let data = ply::read_ply_file(path)?;
            let mut triangles = Vec::new();
            for face in &data.faces {
                if face.len() < 3 {
                    return Err(Error::InvalidInput(format!("face with {} vertices", face.len())));
                }
                for k in 1..face.len() - 1 {
                    triangles.push([face[0], face[k], face[k + 1]]);
                }
            }
            (data.vertices, triangles, data.normals)
        }
        "obj" => {
            let text = std::fs::read_to_string(path)?;
            let (v, t) = obj::read_obj(&text)?;
            (v, t, None)
        }
        other => return Err(Error::UnsupportedFormat(format!("mesh extension '.{other}'"))),
    };
    let validated = TriangleMesh::with_vertex_normals(vertices, triangles, normals)?;
    if validated.mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(validated)
}
