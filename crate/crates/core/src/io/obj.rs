//! Wavefront OBJ geometry reader. Only `v` and `f` records are interpreted;
//! materials, texture coordinates and groups are ignored.

use nalgebra::Vector3;

use crate::error::{Error, Result};

const CTX: &str = "OBJ";

/// Vertices and fan-triangulated faces.
pub fn read_obj(text: &str) -> Result<(Vec<Vector3<f64>>, Vec<[usize; 3]>)> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let at = || format!("line {}", i + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| Error::parse(CTX, at(), format!("invalid number '{t}'"))))
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(Error::parse(CTX, at(), "vertex needs three coordinates"));
                }
                vertices.push(Vector3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = tokens
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let v: i64 =
                            head.parse().map_err(|_| Error::parse(CTX, at(), format!("invalid face index '{t}'")))?;
                        let resolved = if v > 0 {
                            v - 1
                        } else if v < 0 {
                            vertices.len() as i64 + v
                        } else {
                            -1
                        };
                        if resolved < 0 || resolved as usize >= vertices.len() {
                            return Err(Error::parse(CTX, at(), format!("face index {v} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(Error::parse(CTX, at(), "face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_slashes_negative_indices_and_quads() {
        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nusemtl skin\nf 1/1/1 2/1/1 -2//1 -1\n";
        let (v, t) = read_obj(text).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(t, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn reports_line_of_bad_records() {
        match read_obj("v 0 0 0\nv 1 x 0\n").unwrap_err() {
            Error::Parse { location, .. } => assert_eq!(location, "line 2"),
            e => panic!("{e}"),
        }
        assert!(read_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }
}
