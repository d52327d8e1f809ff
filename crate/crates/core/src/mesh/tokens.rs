//! Flat coordinate token sequences.
//!
//! Each face becomes nine tokens: three vertices, each written as its X, Y
//! and Z grid coordinate. The coordinate vocabulary is `0..bins`; the start
//! and end markers use the two ids just past it (`bins` and `bins + 1`).
//!
//! Faces are put in a canonical order before emission. Within a face the
//! vertices are rotated (orientation preserved) so the smallest vertex comes
//! first, where vertices compare by `(z, y, x)`. Faces are then sorted by
//! that leading vertex, ties broken by the remaining two vertices.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{MeshError, QuantizedMesh};

pub const TOKENS_PER_FACE: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    /// Full sequence including the start and end markers.
    tokens: Vec<u32>,
    bins: u32,
    /// For each emitted face slot, the index of the face it came from in the
    /// source mesh. Empty when the sequence was read from tokens alone.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    source_faces: Vec<usize>,
}

impl TokenSequence {
    pub fn sos(bins: u32) -> u32 {
        bins
    }

    pub fn eos(bins: u32) -> u32 {
        bins + 1
    }

    /// Wraps interior coordinate tokens with start and end markers.
    pub fn from_interior(interior: &[u32], bins: u32) -> Result<Self, MeshError> {
        validate_interior(interior, bins)?;
        let mut tokens = Vec::with_capacity(interior.len() + 2);
        tokens.push(Self::sos(bins));
        tokens.extend_from_slice(interior);
        tokens.push(Self::eos(bins));
        Ok(Self {
            tokens,
            bins,
            source_faces: Vec::new(),
        })
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    /// Coordinate tokens without the markers.
    pub fn interior(&self) -> &[u32] {
        &self.tokens[1..self.tokens.len() - 1]
    }

    pub fn bins(&self) -> u32 {
        self.bins
    }

    pub fn face_count(&self) -> usize {
        self.interior().len() / TOKENS_PER_FACE
    }

    pub fn source_faces(&self) -> Option<&[usize]> {
        if self.source_faces.is_empty() && self.face_count() > 0 {
            None
        } else {
            Some(&self.source_faces)
        }
    }

    /// Writes one token per line, markers included.
    pub fn write_lines<W: Write>(&self, mut out: W) -> io::Result<()> {
        for t in &self.tokens {
            writeln!(out, "{t}")?;
        }
        Ok(())
    }

    /// Reads newline-delimited tokens. Start and end markers are optional.
    pub fn read_lines<R: BufRead>(input: R, bins: u32) -> Result<Self, TokenReadError> {
        let mut values = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v = line.parse::<u32>().map_err(|_| TokenReadError::Parse {
                line: i + 1,
                text: line.to_string(),
            })?;
            values.push(v);
        }
        if values.first() == Some(&Self::sos(bins)) {
            values.remove(0);
        }
        if values.last() == Some(&Self::eos(bins)) {
            values.pop();
        }
        Ok(Self::from_interior(&values, bins)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TokenReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: expected an unsigned integer, found {text:?}")]
    Parse { line: usize, text: String },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

fn validate_interior(interior: &[u32], bins: u32) -> Result<(), MeshError> {
    if bins < 2 {
        return Err(MeshError::InvalidBins(bins));
    }
    if !interior.len().is_multiple_of(TOKENS_PER_FACE) {
        return Err(MeshError::TokenLength(interior.len()));
    }
    if let Some((position, &token)) = interior.iter().enumerate().find(|(_, &t)| t >= bins) {
        return Err(MeshError::TokenOutOfVocabulary {
            token,
            position,
            bins,
        });
    }
    Ok(())
}

fn zyx(v: [u32; 3]) -> [u32; 3] {
    [v[2], v[1], v[0]]
}

/// Rotates the face so its smallest vertex leads, keeping orientation.
fn canonical_rotation(face: [[u32; 3]; 3]) -> [[u32; 3]; 3] {
    let lead = (0..3).min_by_key(|&i| zyx(face[i])).unwrap_or(0);
    [face[lead], face[(lead + 1) % 3], face[(lead + 2) % 3]]
}

fn face_key(face: &[[u32; 3]; 3]) -> [[u32; 3]; 3] {
    [zyx(face[0]), zyx(face[1]), zyx(face[2])]
}

pub fn tokenize(qmesh: &QuantizedMesh) -> TokenSequence {
    let mut faces: Vec<(usize, [[u32; 3]; 3])> = (0..qmesh.face_count())
        .map(|f| (f, canonical_rotation(qmesh.face_coords(f))))
        .collect();
    // stable sort keeps source order among identical faces
    faces.sort_by_key(|(_, f)| face_key(f));

    let mut tokens = Vec::with_capacity(faces.len() * TOKENS_PER_FACE + 2);
    tokens.push(TokenSequence::sos(qmesh.bins));
    for (_, face) in &faces {
        for v in face {
            tokens.extend_from_slice(v);
        }
    }
    tokens.push(TokenSequence::eos(qmesh.bins));
    TokenSequence {
        tokens,
        bins: qmesh.bins,
        source_faces: faces.into_iter().map(|(f, _)| f).collect(),
    }
}

/// Rebuilds a quantized mesh from tokens, merging vertices that share a grid
/// point. Vertices are numbered in order of first appearance.
pub fn detokenize(seq: &TokenSequence, bins: u32) -> Result<QuantizedMesh, MeshError> {
    let interior = seq.interior();
    validate_interior(interior, bins)?;
    let mut index: HashMap<[u32; 3], usize> = HashMap::new();
    let mut coords = Vec::new();
    let mut faces = Vec::with_capacity(interior.len() / TOKENS_PER_FACE);
    for chunk in interior.chunks_exact(TOKENS_PER_FACE) {
        let mut face = [0usize; 3];
        for (k, v) in chunk.chunks_exact(3).enumerate() {
            let key = [v[0], v[1], v[2]];
            face[k] = *index.entry(key).or_insert_with(|| {
                coords.push(key);
                coords.len() - 1
            });
        }
        faces.push(face);
    }
    Ok(QuantizedMesh {
        coords,
        faces,
        bins,
        transform: None,
    })
}
