//! Indexed triangle meshes with their edge topology, Wavefront OBJ I/O and
//! the quantized token form.

mod obj;
mod quantize;
mod tokens;
mod topology;

pub use obj::{load_obj, parse_obj, read_points, write_obj, ObjError, ObjPoints};
pub use quantize::{quantize, QuantizedMesh, DEFAULT_BINS};
pub use tokens::{detokenize, tokenize, TokenSequence, TOKENS_PER_FACE};
pub use topology::{build_edge_topology, EdgeKey, EdgeTopology};

use serde::{Deserialize, Serialize};

pub type Point3 = [f64; 3];

/// Errors raised while constructing or transforming meshes.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MeshError {
    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("face {face} repeats vertex index {index}")]
    RepeatedIndex { face: usize, index: usize },
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFinite { vertex: usize },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("mesh is empty")]
    Empty,
    #[error("bins must be at least 2, got {0}")]
    InvalidBins(u32),
    #[error("token sequence interior length {0} is not a multiple of 9")]
    TokenLength(usize),
    #[error("token {token} at position {position} is outside the vocabulary of {bins} bins")]
    TokenOutOfVocabulary {
        token: u32,
        position: usize,
        bins: u32,
    },
}

/// An indexed triangle mesh.
///
/// Construction through [`Mesh::new`] checks that every index is in range,
/// that no face repeats a vertex and that all coordinates are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        for (vertex, p) in vertices.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(MeshError::NonFinite { vertex });
            }
        }
        for (face, f) in faces.iter().enumerate() {
            for &index in f {
                if index >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        face,
                        index,
                        vertex_count: vertices.len(),
                    });
                }
            }
            if f[0] == f[1] || f[0] == f[2] {
                return Err(MeshError::RepeatedIndex { face, index: f[0] });
            }
            if f[1] == f[2] {
                return Err(MeshError::RepeatedIndex { face, index: f[1] });
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Faces whose three corners span zero area. They are kept in the mesh
    /// so that edge counts stay faithful to the input.
    pub fn degenerate_faces(&self) -> Vec<usize> {
        (0..self.faces.len())
            .filter(|&f| self.face_area(f) == 0.0)
            .collect()
    }

    /// Returns a copy with every vertex mapped through `f`.
    pub fn map_vertices(&self, f: impl Fn(Point3) -> Point3) -> Result<Self, MeshError> {
        Mesh::new(
            self.vertices.iter().map(|&p| f(p)).collect(),
            self.faces.clone(),
        )
    }
}

/// Isotropic map into the unit cube: the longest bounding-box axis spans
/// `[0, 1]` and the shorter axes are centred on `0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub center: Point3,
    pub scale: f64,
}

impl Normalization {
    pub fn from_points(points: &[Point3]) -> Result<Self, MeshError> {
        let (lo, hi) = bounding_box(points).ok_or(MeshError::Empty)?;
        let extent = (0..3).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
        if extent <= 0.0 || !extent.is_finite() {
            return Err(MeshError::Degenerate(
                "bounding box has zero extent".to_string(),
            ));
        }
        let center = [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ];
        Ok(Self {
            center,
            scale: extent,
        })
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        [
            (p[0] - self.center[0]) / self.scale + 0.5,
            (p[1] - self.center[1]) / self.scale + 0.5,
            (p[2] - self.center[2]) / self.scale + 0.5,
        ]
    }

    pub fn invert(&self, p: Point3) -> Point3 {
        [
            (p[0] - 0.5) * self.scale + self.center[0],
            (p[1] - 0.5) * self.scale + self.center[1],
            (p[2] - 0.5) * self.scale + self.center[2],
        ]
    }
}

pub fn bounding_box(points: &[Point3]) -> Option<(Point3, Point3)> {
    let first = *points.first()?;
    Some(points.iter().fold((first, first), |(mut lo, mut hi), p| {
        for i in 0..3 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
        (lo, hi)
    }))
}

#[inline]
pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean distance. Every distance metric in the crate goes through this
/// function so accelerated and brute-force paths agree bit for bit.
#[inline]
pub fn distance(a: Point3, b: Point3) -> f64 {
    let d = sub(a, b);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}
