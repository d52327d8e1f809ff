//! Per-face good/bad labels and the token mask derived from them.
//!
//! A triangle is good when it was merged into a quad and that quad's quality
//! reaches the threshold. Quad quality combines per-quad angle quality,
//! shape quality and neighbour consistency. The token mask repeats each
//! face's label over its nine coordinate tokens; start and end markers are
//! not part of the mask.

use serde::{Deserialize, Serialize};

use crate::mesh::{Mesh, TokenSequence, TOKENS_PER_FACE};
use crate::quad::{quad_neighbors, QuadGeometry, QuadMesh};

pub const DEFAULT_TAU: f64 = 0.8;

/// Weights of angle quality, shape quality and neighbour consistency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskWeights {
    pub angle: f64,
    pub shape: f64,
    pub consistency: f64,
}

impl Default for MaskWeights {
    /// Topology-score weights 0.2 / 0.3 / 0.1 rescaled to sum to one.
    fn default() -> Self {
        Self {
            angle: 1.0 / 3.0,
            shape: 1.0 / 2.0,
            consistency: 1.0 / 6.0,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MaskError {
    #[error("labels cover {labels} faces but the token sequence has {tokens}")]
    Alignment { labels: usize, tokens: usize },
}

/// Quality of one quad given its neighbours, in `[0, 1]`.
pub fn quad_quality(geom: &QuadGeometry, neighbors: &[&QuadGeometry], weights: &MaskWeights) -> f64 {
    let d = if neighbors.is_empty() {
        0.0
    } else {
        neighbors
            .iter()
            .map(|n| (geom.aspect_ratio - n.aspect_ratio).abs())
            .sum::<f64>()
            / neighbors.len() as f64
    };
    weights.angle * geom.angle_quality()
        + weights.shape * geom.shape_quality()
        + weights.consistency * (1.0 / (1.0 + d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceLabels {
    /// Indexed by source face.
    pub good: Vec<bool>,
    /// Quality of each quad in the quad mesh; zero for degenerate quads.
    pub quad_scores: Vec<f64>,
    pub tau: f64,
}

impl FaceLabels {
    pub fn face_count(&self) -> usize {
        self.good.len()
    }

    pub fn good_fraction(&self) -> f64 {
        if self.good.is_empty() {
            return 0.0;
        }
        self.good.iter().filter(|&&g| g).count() as f64 / self.good.len() as f64
    }

    pub fn complement(&self) -> Self {
        Self {
            good: self.good.iter().map(|g| !g).collect(),
            ..self.clone()
        }
    }
}

pub fn label_faces(mesh: &Mesh, qm: &QuadMesh, tau: f64, weights: &MaskWeights) -> FaceLabels {
    let geoms: Vec<Option<QuadGeometry>> = qm
        .quads
        .iter()
        .map(|q| QuadGeometry::measure(q.vertices.map(|i| mesh.vertices()[i])))
        .collect();
    let neighbors = quad_neighbors(qm);
    let quad_scores: Vec<f64> = geoms
        .iter()
        .zip(&neighbors)
        .map(|(g, n)| match g {
            Some(g) => {
                let around: Vec<&QuadGeometry> =
                    n.iter().filter_map(|&j| geoms[j].as_ref()).collect();
                quad_quality(g, &around, weights)
            }
            None => 0.0,
        })
        .collect();
    let mut good = vec![false; qm.source_face_count];
    for (q, &score) in qm.quads.iter().zip(&quad_scores) {
        if score >= tau {
            for &t in &q.triangles {
                good[t] = true;
            }
        }
    }
    FaceLabels {
        good,
        quad_scores,
        tau,
    }
}

/// Binary mask over the interior tokens of a sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenMask {
    bits: Vec<u8>,
}

impl TokenMask {
    pub fn from_bits(bits: Vec<u8>) -> Self {
        Self { bits }
    }

    /// Expands per-slot face labels into nine-token blocks.
    pub fn from_face_labels(labels: impl IntoIterator<Item = bool>) -> Self {
        Self {
            bits: labels
                .into_iter()
                .flat_map(|g| std::iter::repeat_n(u8::from(g), TOKENS_PER_FACE))
                .collect(),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn face_count(&self) -> usize {
        self.bits.len() / TOKENS_PER_FACE
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// The mask `1 - self`.
    pub fn inverted(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| 1 - b).collect(),
        }
    }

    pub fn all(len: usize, value: bool) -> Self {
        Self {
            bits: vec![u8::from(value); len],
        }
    }
}

/// Aligns face labels with the token order of `seq`. When the sequence
/// records which source face fills each slot, labels are permuted
/// accordingly; otherwise slot `i` takes label `i`.
pub fn build_token_mask(labels: &FaceLabels, seq: &TokenSequence) -> Result<TokenMask, MaskError> {
    let tokens = seq.face_count();
    if labels.face_count() != tokens {
        return Err(MaskError::Alignment {
            labels: labels.face_count(),
            tokens,
        });
    }
    Ok(match seq.source_faces() {
        Some(order) => TokenMask::from_face_labels(order.iter().map(|&f| labels.good[f])),
        None => TokenMask::from_face_labels(labels.good.iter().copied()),
    })
}
