//! Quality-graded candidate meshes made by perturbing a clean seed mesh.
//!
//! Stands in for sampling a trained generator. Each candidate gets a random
//! severity. Higher severity means more edge flips, which lower TS, more
//! deleted faces, which raise BER, and larger vertex jitter.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Candidate, CandidateSet};
use crate::mesh::{build_edge_topology, EdgeKey, Mesh};
use crate::metrics::{sample_surface, MetricError, ReferenceCloud, SampledSurface};

/// Moves every vertex by a uniform offset in `[-amplitude, amplitude]³`.
pub fn jitter(mesh: &Mesh, amplitude: f64, rng: &mut impl Rng) -> Mesh {
    if amplitude <= 0.0 {
        return mesh.clone();
    }
    let vertices = mesh
        .vertices()
        .iter()
        .map(|p| std::array::from_fn(|k| p[k] + rng.random_range(-amplitude..=amplitude)))
        .collect();
    Mesh::new(vertices, mesh.faces().to_vec()).expect("finite offsets keep the mesh valid")
}

/// Removes the given faces. Vertices are kept.
pub fn delete_faces(mesh: &Mesh, faces: &[usize]) -> Mesh {
    let kept = mesh
        .faces()
        .iter()
        .enumerate()
        .filter(|(i, _)| !faces.contains(i))
        .map(|(_, f)| *f)
        .collect();
    Mesh::new(mesh.vertices().to_vec(), kept).expect("subset of valid faces")
}

/// Flips the shared edge of two adjacent triangles, replacing `(u, v, w)`
/// and `(v, u, x)` with `(u, x, w)` and `(x, v, w)`. Returns `None` when
/// the edge is not shared by exactly two faces or the new edge already
/// exists.
pub fn flip_edge(mesh: &Mesh, edge: EdgeKey) -> Option<Mesh> {
    let topo = build_edge_topology(mesh);
    let &[fa, fb] = topo.incident_faces(edge) else {
        return None;
    };
    let a = mesh.faces()[fa];
    let k = (0..3).find(|&k| EdgeKey::new(a[k], a[(k + 1) % 3]) == edge)?;
    let (u, v, w) = (a[k], a[(k + 1) % 3], a[(k + 2) % 3]);
    let x = *mesh.faces()[fb].iter().find(|&&i| i != u && i != v)?;
    if x == w || !topo.incident_faces(EdgeKey::new(w, x)).is_empty() {
        return None;
    }
    let mut faces = mesh.faces().to_vec();
    faces[fa] = [u, x, w];
    faces[fb] = [x, v, w];
    Mesh::new(mesh.vertices().to_vec(), faces).ok()
}

/// Flips up to `count` randomly chosen interior edges.
pub fn random_flips(mesh: &Mesh, count: usize, rng: &mut impl Rng) -> Mesh {
    let mut out = mesh.clone();
    let mut edges: Vec<EdgeKey> = build_edge_topology(mesh).interior_edges().map(|(e, _)| e).collect();
    edges.shuffle(rng);
    let mut done = 0;
    for e in edges {
        if done == count {
            break;
        }
        if let Some(m) = flip_edge(&out, e) {
            out = m;
            done += 1;
        }
    }
    out
}

/// One perturbed copy of `base` at severity `level` in `[0, 1]`.
pub fn perturb(base: &Mesh, level: f64, rng: &mut impl Rng) -> Mesh {
    let flips = (level * 8.0).round() as usize;
    let mut mesh = random_flips(base, flips, rng);
    let holes = (level * 4.0).floor() as usize;
    if holes > 0 {
        let mut faces: Vec<usize> = (0..mesh.face_count()).collect();
        faces.shuffle(rng);
        faces.truncate(holes.min(mesh.face_count().saturating_sub(1)));
        mesh = delete_faces(&mesh, &faces);
    }
    jitter(&mesh, 0.02 * level, rng)
}

/// Raw material of one synthetic candidate set.
#[derive(Debug, Clone)]
pub struct SyntheticSet {
    pub id: String,
    /// Reference cloud sampled from the clean mesh, in its own coordinates.
    pub cloud: SampledSurface,
    pub meshes: Vec<Mesh>,
}

impl SyntheticSet {
    pub fn into_candidate_set(self) -> Result<CandidateSet, MetricError> {
        let id = self.id;
        Ok(CandidateSet {
            point_cloud: format!("{id}/pointcloud"),
            reference: ReferenceCloud::new(self.cloud)?,
            candidates: self
                .meshes
                .into_iter()
                .enumerate()
                .map(|(i, mesh)| Candidate {
                    id: format!("{id}/cand_{i}"),
                    mesh,
                    report: None,
                })
                .collect(),
            id,
        })
    }
}

/// `count` perturbed copies of `base`, each with its own random severity,
/// plus a reference cloud sampled from the clean mesh.
pub fn synthetic_set(
    id: &str,
    base: &Mesh,
    count: usize,
    cloud_samples: usize,
    rng: &mut impl Rng,
) -> Result<SyntheticSet, MetricError> {
    let cloud = sample_surface(base, cloud_samples, rng.random())?;
    let meshes = (0..count)
        .map(|_| {
            let level = rng.random_range(0.0..1.0);
            perturb(base, level, rng)
        })
        .collect();
    Ok(SyntheticSet {
        id: id.to_string(),
        cloud,
        meshes,
    })
}

/// `sets` synthetic sets named `set_000`, `set_001`, ... drawn from one
/// generator seeded with `seed`.
pub fn synthetic_sets(
    base: &Mesh,
    sets: usize,
    count: usize,
    cloud_samples: usize,
    seed: u64,
) -> Result<Vec<SyntheticSet>, MetricError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sets)
        .map(|i| synthetic_set(&format!("set_{i:03}"), base, count, cloud_samples, &mut rng))
        .collect()
}

/// A seeded synthetic set ready for ranking.
pub fn candidate_set(
    id: &str,
    base: &Mesh,
    count: usize,
    cloud_samples: usize,
    seed: u64,
) -> Result<CandidateSet, MetricError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthetic_set(id, base, count, cloud_samples, &mut rng)?.into_candidate_set()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::topology_score;
    use crate::quad::DEFAULT_DIHEDRAL_TOLERANCE_DEG as TOL;
    use crate::shapes;

    #[test]
    fn flip_breaks_grid_squares() {
        let grid = shapes::grid(2, 1);
        // edge between the two cells, shared by faces 0 and 3
        let flipped = flip_edge(&grid, EdgeKey::new(1, 4)).unwrap();
        assert_eq!(build_edge_topology(&flipped).total_edge_count(), build_edge_topology(&grid).total_edge_count());
        assert!(topology_score(&flipped, TOL).unwrap().ts < 100.0);
        assert!(flip_edge(&grid, EdgeKey::new(0, 1)).is_none());
    }

    #[test]
    fn deletion_opens_boundary() {
        let cube = shapes::subdivided_cube(2);
        let holed = delete_faces(&cube, &[0, 1]);
        assert_eq!(holed.face_count(), cube.face_count() - 2);
        assert_eq!(build_edge_topology(&holed).boundary_edge_count(), 4);
    }

    #[test]
    fn candidate_sets_are_seeded() {
        let base = shapes::subdivided_cube(2);
        let a = candidate_set("s", &base, 8, 256, 4).unwrap();
        let b = candidate_set("s", &base, 8, 256, 4).unwrap();
        assert_eq!(a.candidates.len(), 8);
        for (x, y) in a.candidates.iter().zip(&b.candidates) {
            assert_eq!(x.mesh, y.mesh);
        }
        assert_eq!(a.reference.points, b.reference.points);
    }
}
