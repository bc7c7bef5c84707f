//! PLY reading (ascii and binary little-endian) and point-cloud writing.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{FrameId, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn is_float(self) -> bool {
        matches!(self, Scalar::F32 | Scalar::F64)
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar { name, .. } | Property::List { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// Raw contents of a PLY file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyData {
    pub vertices: Vec<Vector3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub faces: Vec<Vec<usize>>,
    /// Frame recorded by [`write_ply_cloud`], if present.
    pub frame: Option<FrameId>,
}

const CTX: &str = "PLY";

pub fn read_ply_file(path: &Path) -> Result<PlyData> {
    let bytes = std::fs::read(path)?;
    read_ply(&bytes)
}

pub fn read_ply(bytes: &[u8]) -> Result<PlyData> {
    let (format, elements, frame, body_start) = parse_header(bytes)?;
    let mut data = PlyData { frame, ..PlyData::default() };
    let mut rows: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    match format {
        Format::Ascii => read_ascii_body(bytes, body_start, &elements, &mut rows)?,
        Format::BinaryLittleEndian => read_binary_body(bytes, body_start, &elements, &mut rows)?,
    }
    for (element, (_, values)) in elements.iter().zip(rows) {
        match element.name.as_str() {
            "vertex" => extract_vertices(element, &values, &mut data)?,
            "face" => {
                let list = element
                    .properties
                    .iter()
                    .position(|p| matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index"))
                    .ok_or_else(|| Error::UnsupportedFormat("face element without vertex_indices list".into()))?;
                for (row, value) in values.into_iter().enumerate() {
                    // Lists are flattened as [count, items...] in property order.
                    let mut cursor = 0;
                    let mut indices = Vec::new();
                    for (pi, prop) in element.properties.iter().enumerate() {
                        match prop {
                            Property::Scalar { .. } => cursor += 1,
                            Property::List { .. } => {
                                let n = value[cursor] as usize;
                                if pi == list {
                                    indices = value[cursor + 1..cursor + 1 + n]
                                        .iter()
                                        .map(|&v| {
                                            if v < 0.0 || v.fract() != 0.0 {
                                                Err(Error::parse(
                                                    CTX,
                                                    format!("face {row}"),
                                                    format!("invalid vertex index {v}"),
                                                ))
                                            } else {
                                                Ok(v as usize)
                                            }
                                        })
                                        .collect::<Result<_>>()?;
                                }
                                cursor += 1 + n;
                            }
                        }
                    }
                    data.faces.push(indices);
                }
            }
            _ => {}
        }
    }
    Ok(data)
}

fn extract_vertices(element: &Element, values: &[Vec<f64>], data: &mut PlyData) -> Result<()> {
    let find = |name: &str| -> Result<Option<usize>> {
        match element.properties.iter().position(|p| p.name() == name) {
            None => Ok(None),
            Some(i) => match &element.properties[i] {
                Property::Scalar { ty, .. } if ty.is_float() => Ok(Some(i)),
                _ => Err(Error::UnsupportedFormat(format!("vertex property '{name}' must be float32 or float64"))),
            },
        }
    };
    let (x, y, z) = match (find("x")?, find("y")?, find("z")?) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::UnsupportedFormat("vertex element lacks x/y/z".into())),
    };
    if element.properties.iter().any(|p| matches!(p, Property::List { .. })) {
        return Err(Error::UnsupportedFormat("list properties on vertex element".into()));
    }
    let normal_idx = match (find("nx")?, find("ny")?, find("nz")?) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    data.vertices = values.iter().map(|r| Vector3::new(r[x], r[y], r[z])).collect();
    data.normals = normal_idx.map(|(a, b, c)| values.iter().map(|r| Vector3::new(r[a], r[b], r[c])).collect());
    Ok(())
}

type Header = (Format, Vec<Element>, Option<FrameId>, usize);

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut offset = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut frame = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let Some(end) = rest.iter().position(|&b| b == b'\n') else {
            return Err(Error::parse(CTX, format!("line {}", line_no + 1), "header ends before end_header"));
        };
        line_no += 1;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::parse(CTX, format!("line {line_no}"), "header is not valid UTF-8"))?
            .trim_end_matches('\r');
        offset += end + 1;
        let at = || format!("line {line_no}");
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if line != "ply" {
                return Err(Error::parse(CTX, at(), "missing 'ply' magic"));
            }
            continue;
        }
        match tokens.first().copied() {
            Some("format") => {
                format = Some(match tokens.get(1).copied() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLittleEndian,
                    Some(other) => return Err(Error::UnsupportedFormat(format!("PLY format '{other}'"))),
                    None => return Err(Error::parse(CTX, at(), "format line without a format")),
                });
            }
            Some("comment") => {
                if let Some(name) = line.strip_prefix("comment frame ") {
                    frame = serde_json::from_value(serde_json::Value::String(name.trim().to_string())).ok();
                }
            }
            Some("obj_info") | None => {}
            Some("element") => {
                let (Some(name), Some(count)) = (tokens.get(1), tokens.get(2)) else {
                    return Err(Error::parse(CTX, at(), "malformed element line"));
                };
                let count =
                    count.parse().map_err(|_| Error::parse(CTX, at(), format!("bad element count '{count}'")))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            Some("property") => {
                let element =
                    elements.last_mut().ok_or_else(|| Error::parse(CTX, at(), "property before any element"))?;
                let prop = if tokens.get(1) == Some(&"list") {
                    match (tokens.get(2), tokens.get(3), tokens.get(4)) {
                        (Some(c), Some(i), Some(n)) => Property::List {
                            name: n.to_string(),
                            count: Scalar::parse(c)
                                .ok_or_else(|| Error::parse(CTX, at(), format!("unknown type '{c}'")))?,
                            item: Scalar::parse(i)
                                .ok_or_else(|| Error::parse(CTX, at(), format!("unknown type '{i}'")))?,
                        },
                        _ => return Err(Error::parse(CTX, at(), "malformed list property")),
                    }
                } else {
                    match (tokens.get(1), tokens.get(2)) {
                        (Some(t), Some(n)) => Property::Scalar {
                            name: n.to_string(),
                            ty: Scalar::parse(t)
                                .ok_or_else(|| Error::parse(CTX, at(), format!("unknown type '{t}'")))?,
                        },
                        _ => return Err(Error::parse(CTX, at(), "malformed property")),
                    }
                };
                element.properties.push(prop);
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::parse(CTX, at(), format!("unexpected header keyword '{other}'"))),
        }
    }
    let format = format.ok_or_else(|| Error::parse(CTX, "header", "missing format line"))?;
    Ok((format, elements, frame, offset))
}

fn read_ascii_body(
    bytes: &[u8],
    start: usize,
    elements: &[Element],
    rows: &mut Vec<(String, Vec<Vec<f64>>)>,
) -> Result<()> {
    let body = std::str::from_utf8(&bytes[start..])
        .map_err(|_| Error::parse(CTX, format!("byte {start}"), "ascii body is not valid UTF-8"))?;
    let header_lines = bytes[..start].iter().filter(|&&b| b == b'\n').count();
    let mut lines = body.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    for element in elements {
        let mut values = Vec::with_capacity(element.count);
        for _ in 0..element.count {
            let Some((i, line)) = lines.next() else {
                return Err(Error::parse(
                    CTX,
                    format!("line {}", header_lines + body.lines().count() + 1),
                    format!("unexpected end of data in element '{}'", element.name),
                ));
            };
            let at = || format!("line {}", header_lines + i + 1);
            let mut tokens = line.split_whitespace();
            let mut next = || -> Result<f64> {
                let tok = tokens.next().ok_or_else(|| Error::parse(CTX, at(), "too few values"))?;
                tok.parse::<f64>().map_err(|_| Error::parse(CTX, at(), format!("invalid number '{tok}'")))
            };
            let mut row = Vec::new();
            for prop in &element.properties {
                match prop {
                    Property::Scalar { .. } => row.push(next()?),
                    Property::List { .. } => {
                        let n = next()?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(Error::parse(CTX, at(), format!("invalid list length {n}")));
                        }
                        row.push(n);
                        for _ in 0..n as usize {
                            row.push(next()?);
                        }
                    }
                }
            }
            values.push(row);
        }
        rows.push((element.name.clone(), values));
    }
    Ok(())
}

fn read_binary_body(
    bytes: &[u8],
    start: usize,
    elements: &[Element],
    rows: &mut Vec<(String, Vec<Vec<f64>>)>,
) -> Result<()> {
    let mut offset = start;
    let mut take = |ty: Scalar, element: &str| -> Result<f64> {
        let size = ty.size();
        if offset + size > bytes.len() {
            return Err(Error::parse(
                CTX,
                format!("byte {offset}"),
                format!("unexpected end of data in element '{element}'"),
            ));
        }
        let v = ty.read_le(&bytes[offset..offset + size]);
        offset += size;
        Ok(v)
    };
    for element in elements {
        let mut values = Vec::with_capacity(element.count.min(1 << 24));
        for _ in 0..element.count {
            let mut row = Vec::new();
            for prop in &element.properties {
                match prop {
                    Property::Scalar { ty, .. } => row.push(take(*ty, &element.name)?),
                    Property::List { count, item, .. } => {
                        let n = take(*count, &element.name)?;
                        row.push(n);
                        for _ in 0..n as usize {
                            row.push(take(*item, &element.name)?);
                        }
                    }
                }
            }
            values.push(row);
        }
        rows.push((element.name.clone(), values));
    }
    Ok(())
}

/// Reads a PLY as a point cloud (faces ignored). The frame comment written by
/// [`write_ply_cloud`] wins over `default_frame`.
pub fn read_ply_cloud(path: &Path, default_frame: FrameId) -> Result<PointCloud> {
    let data = read_ply_file(path)?;
    let frame = data.frame.unwrap_or(default_frame);
    match data.normals {
        Some(normals) => {
            let normals = normals.into_iter().map(|n| n.normalize()).collect();
            PointCloud::with_normals(data.vertices, normals, frame)
        }
        None => PointCloud::new(data.vertices, frame),
    }
}

/// Writes a cloud as binary little-endian PLY with float32 `x y z` and, when
/// present, `nx ny nz`.
pub fn write_ply_cloud<W: Write>(cloud: &PointCloud, mut out: W) -> Result<()> {
    let frame = serde_json::to_value(cloud.frame()).expect("frame serializes");
    let mut header = String::from("ply\nformat binary_little_endian 1.0\ncomment units mm\n");
    header.push_str(&format!("comment frame {}\n", frame.as_str().unwrap_or_default()));
    header.push_str(&format!("element vertex {}\n", cloud.len()));
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if cloud.has_normals() {
        header.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    header.push_str("end_header\n");
    out.write_all(header.as_bytes())?;
    let stride = if cloud.has_normals() { 24 } else { 12 };
    let mut buf = Vec::with_capacity(cloud.len() * stride);
    for (i, p) in cloud.points().iter().enumerate() {
        for v in p.iter() {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        if let Some(ns) = cloud.normals() {
            for v in ns[i].iter() {
                buf.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn write_ply_cloud_file(cloud: &PointCloud, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    write_ply_cloud(cloud, &mut writer)?;
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ASCII_TRI: &str = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty double z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 255\n1 0 0 0\n0 1 0.5 7\n3 0 1 2\n";

    #[test]
    fn reads_ascii_mesh() {
        let data = read_ply(ASCII_TRI.as_bytes()).unwrap();
        assert_eq!(data.vertices.len(), 3);
        assert_eq!(data.vertices[2], Vector3::new(0.0, 1.0, 0.5));
        assert_eq!(data.faces, vec![vec![0, 1, 2]]);
        assert!(data.normals.is_none());
    }

    #[test]
    fn truncated_header_is_a_parse_error() {
        let err = read_ply(b"ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn truncated_body_reports_location() {
        let text = ASCII_TRI.replace("3 0 1 2\n", "");
        let err = read_ply(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let bin = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n\0\0\0\0";
        match read_ply(bin).unwrap_err() {
            Error::Parse { location, .. } => assert!(location.starts_with("byte")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn integer_vertex_coordinates_are_unsupported() {
        let text = "ply\nformat ascii 1.0\nelement vertex 1\nproperty int x\nproperty int y\nproperty int z\nend_header\n1 2 3\n";
        assert!(matches!(read_ply(text.as_bytes()), Err(Error::UnsupportedFormat(_))));
        let be = "ply\nformat binary_big_endian 1.0\nend_header\n";
        assert!(matches!(read_ply(be.as_bytes()), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn binary_cloud_round_trip_in_f32() {
        let pts = vec![Vector3::new(1.5, -2.25, 3.0), Vector3::new(0.1, 0.2, 0.3)];
        let normals = vec![Vector3::z(), Vector3::x()];
        let cloud = PointCloud::with_normals(pts.clone(), normals, FrameId::DepthSensor).unwrap();
        let mut buf = Vec::new();
        write_ply_cloud(&cloud, &mut buf).unwrap();
        let data = read_ply(&buf).unwrap();
        assert_eq!(data.frame, Some(FrameId::DepthSensor));
        for (a, b) in data.vertices.iter().zip(&pts) {
            assert!((a - b).amax() < 1e-6);
        }
        assert_eq!(data.normals.unwrap()[1], Vector3::x());
    }
}
