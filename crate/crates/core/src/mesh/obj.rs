//! Minimal Wavefront OBJ support: `v` and `f` records.
//!
//! Free-form geometry records are rejected and any other record is skipped.
//! Polygons are fan-triangulated from their first vertex.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::{Mesh, MeshError, Point3};

#[derive(Debug, thiserror::Error)]
pub enum ObjError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unsupported OBJ feature `{keyword}`")]
    Unsupported { line: usize, keyword: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

const FREEFORM: &[&str] = &[
    "cstype", "deg", "bmat", "step", "curv", "curv2", "surf", "parm", "trim", "hole", "scrv",
    "sp", "end", "con", "vp",
];

/// Vertices and raw polygon index loops of an OBJ file.
#[derive(Debug, Default, Clone)]
pub struct ObjPoints {
    pub vertices: Vec<Point3>,
    pub polygons: Vec<Vec<usize>>,
}

fn parse_index(token: &str, vertex_count: usize, line: usize) -> Result<usize, ObjError> {
    let head = token.split('/').next().unwrap_or("");
    let raw: i64 = head.parse().map_err(|_| ObjError::Parse {
        line,
        message: format!("invalid face index `{token}`"),
    })?;
    let resolved = match raw {
        0 => None,
        r if r > 0 => Some(r as usize - 1),
        r => vertex_count.checked_sub(r.unsigned_abs() as usize),
    };
    match resolved {
        Some(i) if i < vertex_count => Ok(i),
        _ => Err(ObjError::Parse {
            line,
            message: format!("face index `{token}` out of range ({vertex_count} vertices so far)"),
        }),
    }
}

/// Parses OBJ text into vertices and polygon loops without triangulating.
pub fn read_points(text: &str) -> Result<ObjPoints, ObjError> {
    let mut out = ObjPoints::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut parts = content.split_whitespace();
        let Some(keyword) = parts.next() else {
            continue;
        };
        match keyword {
            "v" => {
                let coords: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| ObjError::Parse {
                        line,
                        message: format!("invalid vertex coordinate: {e}"),
                    })?;
                if coords.len() != 3 {
                    return Err(ObjError::Parse {
                        line,
                        message: "vertex needs three coordinates".to_string(),
                    });
                }
                out.vertices.push([coords[0], coords[1], coords[2]]);
            }
            "f" => {
                let indices = parts
                    .map(|t| parse_index(t, out.vertices.len(), line))
                    .collect::<Result<Vec<_>, _>>()?;
                if indices.len() < 3 {
                    return Err(ObjError::Parse {
                        line,
                        message: format!("face needs at least 3 vertices, found {}", indices.len()),
                    });
                }
                out.polygons.push(indices);
            }
            k if FREEFORM.contains(&k) => {
                return Err(ObjError::Unsupported {
                    line,
                    keyword: k.to_string(),
                })
            }
            _ => {}
        }
    }
    Ok(out)
}

pub fn parse_obj(text: &str) -> Result<Mesh, ObjError> {
    let points = read_points(text)?;
    let mut faces = Vec::new();
    for poly in &points.polygons {
        for k in 1..poly.len() - 1 {
            faces.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    Ok(Mesh::new(points.vertices, faces)?)
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh, ObjError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ObjError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_obj(&text)
}

/// Writes `v` records followed by 1-based `f` records of any arity.
pub fn write_obj<W: Write>(
    mut out: W,
    vertices: &[Point3],
    faces: impl IntoIterator<Item = impl AsRef<[usize]>>,
) -> io::Result<()> {
    for v in vertices {
        writeln!(out, "v {} {} {}", v[0], v[1], v[2])?;
    }
    for f in faces {
        write!(out, "f")?;
        for i in f.as_ref() {
            write!(out, " {}", i + 1)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

impl Mesh {
    pub fn to_obj_string(&self) -> String {
        let mut buf = Vec::new();
        write_obj(&mut buf, self.vertices(), self.faces()).expect("write to Vec");
        String::from_utf8(buf).expect("ascii output")
    }
}
