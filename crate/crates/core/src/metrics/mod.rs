//! Mesh quality metrics: boundary edge ratio, the quad-based topology score
//! and its four sub-scores, and sampled surface distances.
//!
//! Chamfer distance here is the mean of the two directed mean
//! nearest-neighbour distances, using plain (not squared) Euclidean length.

mod distance;
mod sampling;

pub use distance::{
    chamfer, directed_hausdorff, directed_mean, hausdorff, nearest_distances, PointIndex,
};
pub use sampling::{sample_surface, SampledSurface, SurfaceSource, DEFAULT_SAMPLES};

use serde::{Deserialize, Serialize};

use crate::mesh::{build_edge_topology, EdgeTopology, Mesh, MeshError, Normalization};
use crate::quad::{compute_quad_geometry, merge_to_quads, QuadError, QuadGeometry, QuadMesh};

/// Weights of quad ratio, angle quality, aspect ratio and adjacent
/// consistency in the topology score.
pub const TOPOLOGY_WEIGHTS: [f64; 4] = [0.4, 0.2, 0.3, 0.1];

/// BER above this value marks a mesh as likely damaged. Reporting only.
pub const BER_ADVISORY_THRESHOLD: f64 = 0.002;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

pub fn boundary_edge_ratio(topo: &EdgeTopology) -> Result<f64, MetricError> {
    if topo.total_edge_count() == 0 {
        return Err(MetricError::Undefined("boundary edge ratio of an empty mesh"));
    }
    Ok(topo.boundary_edge_count() as f64 / topo.total_edge_count() as f64)
}

/// Share of quads among the faces of the quad-dominant mesh.
pub fn quad_ratio(qm: &QuadMesh) -> Result<f64, MetricError> {
    let quads = qm.quads.len();
    let total = quads + qm.residual_triangles.len();
    if total == 0 {
        return Err(MetricError::Undefined("quad ratio of an empty quad mesh"));
    }
    Ok(quads as f64 / total as f64)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean over quads of `1 - sum |angle - 90| / 360`. Zero with no quads.
pub fn angle_quality(geoms: &[QuadGeometry]) -> f64 {
    mean(geoms.iter().map(QuadGeometry::angle_quality)).unwrap_or(0.0)
}

/// `0.5 / mean(r) + 0.5 * mean(e)`. Zero with no quads.
pub fn aspect_ratio_score(geoms: &[QuadGeometry]) -> f64 {
    match (
        mean(geoms.iter().map(|g| g.aspect_ratio)),
        mean(geoms.iter().map(|g| g.edge_ratio)),
    ) {
        (Some(r), Some(e)) => 0.5 * (1.0 / r) + 0.5 * e,
        _ => 0.0,
    }
}

/// Mean absolute aspect-ratio difference between quad `i` and its
/// neighbours; zero for an isolated quad.
pub fn neighbor_difference(geoms: &[QuadGeometry], i: usize) -> f64 {
    let g = &geoms[i];
    mean(
        g.neighbors
            .iter()
            .map(|&j| (g.aspect_ratio - geoms[j].aspect_ratio).abs()),
    )
    .unwrap_or(0.0)
}

/// Mean over quads of `1 / (1 + d)`. Zero with no quads.
pub fn adjacent_consistency(geoms: &[QuadGeometry]) -> f64 {
    mean((0..geoms.len()).map(|i| 1.0 / (1.0 + neighbor_difference(geoms, i)))).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyScore {
    /// Weighted score on a 0-100 scale.
    pub ts: f64,
    /// Quad ratio, angle quality, aspect ratio and adjacent consistency,
    /// each in `[0, 1]`.
    pub sub_scores: [f64; 4],
    pub quad_count: usize,
    pub triangle_count: usize,
}

pub fn topology_score_of(qm: &QuadMesh, geoms: &[QuadGeometry]) -> Result<TopologyScore, MetricError> {
    let s = [
        quad_ratio(qm)?,
        angle_quality(geoms),
        aspect_ratio_score(geoms),
        adjacent_consistency(geoms),
    ];
    let weighted: f64 = TOPOLOGY_WEIGHTS.iter().zip(&s).map(|(w, s)| w * s).sum();
    Ok(TopologyScore {
        ts: 100.0 * weighted,
        sub_scores: s,
        quad_count: qm.quads.len(),
        triangle_count: qm.residual_triangles.len(),
    })
}

pub fn topology_score(mesh: &Mesh, max_dihedral_deg: f64) -> Result<TopologyScore, MetricError> {
    if mesh.is_empty() {
        return Err(MetricError::Undefined("topology score of an empty mesh"));
    }
    let qm = merge_to_quads(mesh, max_dihedral_deg);
    let geoms = compute_quad_geometry(&qm, mesh)?;
    topology_score_of(&qm, &geoms)
}

/// All metrics for one candidate mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema: u32,
    pub ber: f64,
    pub ts: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
    /// Symmetric Hausdorff distance to the reference cloud; absent when the
    /// mesh was scored on its own.
    pub hd: Option<f64>,
    pub cd: Option<f64>,
    /// Directed Hausdorff values `[mesh -> cloud, cloud -> mesh]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hd_directed: Option<[f64; 2]>,
    pub ber_high: bool,
    pub seed: u64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOptions {
    pub samples: usize,
    pub seed: u64,
    pub max_dihedral_deg: f64,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            max_dihedral_deg: crate::quad::DEFAULT_DIHEDRAL_TOLERANCE_DEG,
        }
    }
}

/// A reference point cloud expressed in the unit-cube frame shared by all
/// candidates compared against it.
#[derive(Debug, Clone)]
pub struct ReferenceCloud {
    pub frame: Normalization,
    pub points: SampledSurface,
}

impl ReferenceCloud {
    /// Uses the cloud's own bounding box as the comparison frame.
    pub fn new(points: SampledSurface) -> Result<Self, MetricError> {
        let frame = Normalization::from_points(&points.points)?;
        let normalized = SampledSurface {
            points: points.points.iter().map(|&p| frame.apply(p)).collect(),
            ..points
        };
        Ok(Self {
            frame,
            points: normalized,
        })
    }
}

/// Scores a mesh. Distances are taken between an area-weighted sample of
/// the mesh and the reference cloud, both in the cloud's unit-cube frame.
pub fn evaluate(
    mesh: &Mesh,
    reference: Option<&ReferenceCloud>,
    opts: &ScoreOptions,
) -> Result<MetricReport, MetricError> {
    let topo = build_edge_topology(mesh);
    let ber = boundary_edge_ratio(&topo)?;
    let ts = topology_score(mesh, opts.max_dihedral_deg)?;
    let (hd, cd, hd_directed) = match reference {
        Some(cloud) => {
            let local = mesh.map_vertices(|p| cloud.frame.apply(p))?;
            let sample = sample_surface(&local, opts.samples, opts.seed)?;
            let a = nearest_distances(&sample.points, &cloud.points.points);
            let b = nearest_distances(&cloud.points.points, &sample.points);
            let ab = a.iter().copied().fold(0.0, f64::max);
            let ba = b.iter().copied().fold(0.0, f64::max);
            let cd = 0.5 * (a.iter().sum::<f64>() / a.len() as f64 + b.iter().sum::<f64>() / b.len() as f64);
            (Some(ab.max(ba)), Some(cd), Some([ab, ba]))
        }
        None => (None, None, None),
    };
    let [s1, s2, s3, s4] = ts.sub_scores;
    Ok(MetricReport {
        schema: REPORT_SCHEMA,
        ber,
        ts: ts.ts,
        s1,
        s2,
        s3,
        s4,
        hd,
        cd,
        hd_directed,
        ber_high: ber > BER_ADVISORY_THRESHOLD,
        seed: opts.seed,
        n_samples: opts.samples,
    })
}
