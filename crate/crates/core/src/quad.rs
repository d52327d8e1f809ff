//! Quad-dominant derivation of a triangle mesh by greedy pairwise merging,
//! plus the per-quad geometry the topology score is built from.
//!
//! Every interior edge shared by exactly two triangles is a merge candidate.
//! A candidate is dropped when the two triangles bend by more than the
//! dihedral tolerance or when the merged loop is not strictly convex in its
//! best-fit plane. Survivors are scored by `0.5 * angle_quality + 0.5 / r`
//! and accepted best first, each triangle used at most once. Ties go to the
//! candidate whose shared edge has the smaller vertex-index pair.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::mesh::{
    add, build_edge_topology, cross, distance, dot, norm, sub, write_obj, EdgeKey, Mesh, Point3,
};

pub const DEFAULT_DIHEDRAL_TOLERANCE_DEG: f64 = 30.0;

/// A quad built from two source triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quad {
    /// Boundary loop, consistent with the orientation of the first triangle.
    pub vertices: [usize; 4],
    /// Source triangle indices.
    pub triangles: [usize; 2],
}

/// Quad-dominant mesh with provenance back to the source triangles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadMesh {
    pub quads: Vec<Quad>,
    /// Source triangles left unmerged, ascending.
    pub residual_triangles: Vec<usize>,
    pub source_face_count: usize,
}

impl QuadMesh {
    /// For each source face, the quad that absorbed it, if any.
    pub fn face_to_quad(&self) -> Vec<Option<usize>> {
        let mut owner = vec![None; self.source_face_count];
        for (qi, q) in self.quads.iter().enumerate() {
            for &t in &q.triangles {
                owner[t] = Some(qi);
            }
        }
        owner
    }

    /// Quads as 4-index records, residual triangles as 3-index records.
    pub fn write_obj<W: std::io::Write>(&self, out: W, mesh: &Mesh) -> std::io::Result<()> {
        let records = self
            .quads
            .iter()
            .map(|q| q.vertices.to_vec())
            .chain(self.residual_triangles.iter().map(|&t| mesh.faces()[t].to_vec()));
        write_obj(out, mesh.vertices(), records)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QuadError {
    #[error("quad {quad} has a zero-length side")]
    DegenerateQuad { quad: usize },
}

/// Measured shape of one quad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadGeometry {
    /// Interior angles in degrees at each loop corner.
    pub angles: [f64; 4],
    /// Side lengths `|v0 v1|, |v1 v2|, |v2 v3|, |v3 v0|`.
    pub sides: [f64; 4],
    pub aspect_ratio: f64,
    pub edge_ratio: f64,
    /// Indices of quads sharing a full edge with this one, ascending.
    pub neighbors: Vec<usize>,
}

impl QuadGeometry {
    /// Geometry of a single loop, with no neighbour information.
    pub fn measure(corners: [Point3; 4]) -> Option<Self> {
        let sides: [f64; 4] = std::array::from_fn(|i| distance(corners[i], corners[(i + 1) % 4]));
        if sides.iter().any(|&s| s <= 0.0) {
            return None;
        }
        let angles = std::array::from_fn(|i| {
            let prev = corners[(i + 3) % 4];
            let next = corners[(i + 1) % 4];
            corner_angle(corners[i], prev, next)
        });
        let ratio = |a: f64, b: f64| a.max(b) / a.min(b);
        let aspect_ratio = ratio(sides[0], sides[2]).max(ratio(sides[1], sides[3]));
        let longest = sides.iter().copied().fold(0.0, f64::max);
        let edge_ratio = sides.iter().map(|s| s / longest).sum::<f64>() / 4.0;
        Some(Self {
            angles,
            sides,
            aspect_ratio,
            edge_ratio,
            neighbors: Vec::new(),
        })
    }

    /// `1 - sum |angle - 90| / 360` for this quad alone.
    pub fn angle_quality(&self) -> f64 {
        1.0 - self.angles.iter().map(|a| (a - 90.0).abs()).sum::<f64>() / 360.0
    }

    /// `0.5 / r + 0.5 * e` for this quad alone.
    pub fn shape_quality(&self) -> f64 {
        0.5 * (1.0 / self.aspect_ratio) + 0.5 * self.edge_ratio
    }
}

/// Angle in degrees at `at` between the directions to `prev` and `next`.
fn corner_angle(at: Point3, prev: Point3, next: Point3) -> f64 {
    let a = sub(prev, at);
    let b = sub(next, at);
    let c = dot(a, b) / (norm(a) * norm(b));
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

fn triangle_normal(a: Point3, b: Point3, c: Point3) -> Point3 {
    cross(sub(b, a), sub(c, a))
}

struct Candidate {
    edge: EdgeKey,
    score: f64,
    quad: Quad,
}

/// Quad loop for two triangles sharing `edge`, oriented like `first`.
/// `None` when the pair does not form four distinct corners.
fn merged_loop(mesh: &Mesh, edge: EdgeKey, first: usize, second: usize) -> Option<[usize; 4]> {
    let fa = mesh.faces()[first];
    let fb = mesh.faces()[second];
    // rotate the first triangle so the shared edge is its leading side u -> v
    let k = (0..3).find(|&k| EdgeKey::new(fa[k], fa[(k + 1) % 3]) == edge)?;
    let (u, v, w) = (fa[k], fa[(k + 1) % 3], fa[(k + 2) % 3]);
    let x = *fb.iter().find(|&&i| i != edge.0 && i != edge.1)?;
    if x == w {
        return None;
    }
    Some([u, x, v, w])
}

fn evaluate_candidate(
    mesh: &Mesh,
    edge: EdgeKey,
    pair: [usize; 2],
    max_dihedral_deg: f64,
) -> Option<Candidate> {
    let vertices = merged_loop(mesh, edge, pair[0], pair[1])?;
    let [u, x, v, w] = vertices.map(|i| mesh.vertices()[i]);
    // both normals taken along the loop orientation, whatever the stored winding
    let na = triangle_normal(u, v, w);
    let nb = triangle_normal(v, u, x);
    let (la, lb) = (norm(na), norm(nb));
    if la == 0.0 || lb == 0.0 {
        return None;
    }
    let dihedral = (dot(na, nb) / (la * lb)).clamp(-1.0, 1.0).acos().to_degrees();
    if dihedral > max_dihedral_deg {
        return None;
    }
    let corners = [u, x, v, w];
    let plane = add(na, nb);
    let convex = (0..4).all(|i| {
        let e0 = sub(corners[i], corners[(i + 3) % 4]);
        let e1 = sub(corners[(i + 1) % 4], corners[i]);
        dot(cross(e0, e1), plane) > 0.0
    });
    if !convex {
        return None;
    }
    let geom = QuadGeometry::measure(corners)?;
    let score = 0.5 * geom.angle_quality() + 0.5 * (1.0 / geom.aspect_ratio);
    Some(Candidate {
        edge,
        score,
        quad: Quad {
            vertices,
            triangles: pair,
        },
    })
}

/// Every merge candidate that passes the coplanarity and convexity gates,
/// as `(shared edge, quad)`. Exposed for matching oracles.
pub fn merge_candidates(mesh: &Mesh, max_dihedral_deg: f64) -> Vec<(EdgeKey, Quad, f64)> {
    let topo = build_edge_topology(mesh);
    topo.interior_edges()
        .filter_map(|(edge, pair)| evaluate_candidate(mesh, edge, pair, max_dihedral_deg))
        .map(|c| (c.edge, c.quad, c.score))
        .collect()
}

pub fn merge_to_quads(mesh: &Mesh, max_dihedral_deg: f64) -> QuadMesh {
    let topo = build_edge_topology(mesh);
    let mut candidates: Vec<Candidate> = topo
        .interior_edges()
        .filter_map(|(edge, pair)| evaluate_candidate(mesh, edge, pair, max_dihedral_deg))
        .collect();
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.edge.cmp(&b.edge)));

    let mut used = vec![false; mesh.face_count()];
    let mut quads = Vec::new();
    for c in candidates {
        let [s, t] = c.quad.triangles;
        if used[s] || used[t] {
            continue;
        }
        used[s] = true;
        used[t] = true;
        quads.push(c.quad);
    }
    let residual_triangles = (0..mesh.face_count()).filter(|&f| !used[f]).collect();
    QuadMesh {
        quads,
        residual_triangles,
        source_face_count: mesh.face_count(),
    }
}

/// For each quad, the quads that share one of its four sides.
pub fn quad_neighbors(qm: &QuadMesh) -> Vec<Vec<usize>> {
    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (qi, q) in qm.quads.iter().enumerate() {
        for i in 0..4 {
            by_edge
                .entry(EdgeKey::new(q.vertices[i], q.vertices[(i + 1) % 4]))
                .or_default()
                .push(qi);
        }
    }
    let mut neighbors: Vec<BTreeMap<usize, ()>> = vec![BTreeMap::new(); qm.quads.len()];
    for owners in by_edge.values() {
        for &a in owners {
            for &b in owners {
                if a != b {
                    neighbors[a].insert(b, ());
                }
            }
        }
    }
    neighbors
        .into_iter()
        .map(|m| m.into_keys().collect())
        .collect()
}

/// Per-quad geometry with neighbour lists filled in.
pub fn compute_quad_geometry(qm: &QuadMesh, mesh: &Mesh) -> Result<Vec<QuadGeometry>, QuadError> {
    let neighbors = quad_neighbors(qm);
    qm.quads
        .iter()
        .zip(neighbors)
        .enumerate()
        .map(|(qi, (q, n))| {
            let corners = q.vertices.map(|i| mesh.vertices()[i]);
            let mut g = QuadGeometry::measure(corners).ok_or(QuadError::DegenerateQuad { quad: qi })?;
            g.neighbors = n;
            Ok(g)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use approx::assert_abs_diff_eq;

    const TOL: f64 = DEFAULT_DIHEDRAL_TOLERANCE_DEG;

    fn assert_partition(qm: &QuadMesh) {
        let mut seen = vec![0u32; qm.source_face_count];
        for q in &qm.quads {
            for &t in &q.triangles {
                seen[t] += 1;
            }
            let mut v = q.vertices.to_vec();
            v.sort();
            v.dedup();
            assert_eq!(v.len(), 4);
        }
        for &t in &qm.residual_triangles {
            seen[t] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(
            2 * qm.quads.len() + qm.residual_triangles.len(),
            qm.source_face_count
        );
    }

    #[test]
    fn unit_square_merges() {
        let qm = merge_to_quads(&shapes::grid(1, 1), TOL);
        assert_eq!(qm.quads.len(), 1);
        assert!(qm.residual_triangles.is_empty());
        assert_partition(&qm);
    }

    #[test]
    fn single_triangle_stays() {
        let qm = merge_to_quads(&shapes::single_triangle(), TOL);
        assert!(qm.quads.is_empty());
        assert_eq!(qm.residual_triangles, vec![0]);
    }

    #[test]
    fn grid_merges_along_diagonals() {
        let mesh = shapes::grid(2, 2);
        let qm = merge_to_quads(&mesh, TOL);
        assert_eq!(qm.quads.len(), 4);
        assert!(qm.residual_triangles.is_empty());
        for q in &qm.quads {
            assert_eq!(q.triangles[1], q.triangles[0] + 1);
        }
        assert_partition(&qm);
    }

    #[test]
    fn cube_edges_exceed_dihedral_gate() {
        let qm = merge_to_quads(&shapes::unit_cube(), TOL);
        assert_eq!(qm.quads.len(), 6);
        let geoms = compute_quad_geometry(&qm, &shapes::unit_cube()).unwrap();
        assert!(geoms.iter().all(|g| g.neighbors.len() == 4));
        // a permissive gate still prefers the flat diagonals
        assert_eq!(merge_to_quads(&shapes::unit_cube(), 180.0).quads.len(), 6);
    }

    #[test]
    fn folded_pair_is_rejected() {
        let mesh = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 1, 2], [1, 0, 3]],
        )
        .unwrap();
        assert!(merge_to_quads(&mesh, TOL).quads.is_empty());
        assert_eq!(merge_to_quads(&mesh, 95.0).quads.len(), 1);
    }

    #[test]
    fn reflex_pair_is_rejected() {
        // dart: the merged loop has a reflex corner at (0.5, 0.3)
        let mesh = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.3, 0.0], [0.5, 1.0, 0.0]],
            vec![[0, 2, 3], [2, 1, 3]],
        )
        .unwrap();
        assert!(merge_to_quads(&mesh, TOL).quads.is_empty());
    }

    #[test]
    fn unit_square_geometry() {
        let qm = merge_to_quads(&shapes::grid(1, 1), TOL);
        let g = &compute_quad_geometry(&qm, &shapes::grid(1, 1)).unwrap()[0];
        for a in g.angles {
            assert_abs_diff_eq!(a, 90.0, epsilon = 1e-12);
        }
        assert_eq!(g.aspect_ratio, 1.0);
        assert_eq!(g.edge_ratio, 1.0);
        assert!(g.neighbors.is_empty());
    }

    #[test]
    fn rectangle_geometry() {
        // r compares opposite sides, which are equal in a rectangle
        let mesh = shapes::rect_grid(1, 1, 2.0, 1.0);
        let qm = merge_to_quads(&mesh, TOL);
        let g = &compute_quad_geometry(&qm, &mesh).unwrap()[0];
        assert_eq!(g.aspect_ratio, 1.0);
        assert_eq!(g.edge_ratio, 0.75);
    }

    #[test]
    fn opposite_sides_define_aspect_ratio() {
        // trapezoid with parallel sides 2 and 1, legs equal
        let g = QuadGeometry::measure([
            [0.0, 0.0, 0.0],
            [2.0, 0.0, 0.0],
            [1.5, 1.0, 0.0],
            [0.5, 1.0, 0.0],
        ])
        .unwrap();
        assert_eq!(g.aspect_ratio, 2.0);
        assert_abs_diff_eq!(g.angles.iter().sum::<f64>(), 360.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_side_is_degenerate() {
        let mesh = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let qm = QuadMesh {
            quads: vec![Quad {
                vertices: [0, 1, 2, 3],
                triangles: [0, 0],
            }],
            residual_triangles: vec![],
            source_face_count: 1,
        };
        assert_eq!(
            compute_quad_geometry(&qm, &mesh),
            Err(QuadError::DegenerateQuad { quad: 0 })
        );
    }

    #[test]
    fn deterministic() {
        let mesh = shapes::subdivided_cube(3);
        assert_eq!(merge_to_quads(&mesh, TOL), merge_to_quads(&mesh, TOL));
    }

    #[test]
    fn obj_export_mixes_arities() {
        let mesh = shapes::grid_with_ears();
        let qm = merge_to_quads(&mesh, TOL);
        let mut buf = Vec::new();
        qm.write_obj(&mut buf, &mesh).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let quads = text.lines().filter(|l| l.starts_with("f ") && l.split_whitespace().count() == 5).count();
        let tris = text.lines().filter(|l| l.starts_with("f ") && l.split_whitespace().count() == 4).count();
        assert_eq!((quads, tris), (4, 2));
    }
}
