use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mesh::{Mesh, MeshError, Point3};

/// Default number of surface samples per mesh.
pub const DEFAULT_SAMPLES: usize = 16_384;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SurfaceSource {
    /// Sampled from a mesh; `faces[i]` is the face point `i` lies on.
    Mesh { faces: Vec<usize> },
    /// Read directly from a point-cloud file.
    PointCloud,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSurface {
    pub points: Vec<Point3>,
    pub seed: u64,
    pub source: SurfaceSource,
}

impl SampledSurface {
    pub fn from_points(points: Vec<Point3>) -> Self {
        Self {
            points,
            seed: 0,
            source: SurfaceSource::PointCloud,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draws `n` points uniformly by area over the mesh surface. Each call owns
/// its generator, seeded from `seed`.
pub fn sample_surface(mesh: &Mesh, n: usize, seed: u64) -> Result<SampledSurface, MeshError> {
    let areas: Vec<f64> = (0..mesh.face_count()).map(|f| mesh.face_area(f)).collect();
    let picker = WeightedIndex::new(&areas)
        .map_err(|_| MeshError::Degenerate("mesh has no surface area to sample".to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut faces = Vec::with_capacity(n);
    for _ in 0..n {
        let f = picker.sample(&mut rng);
        let [a, b, c] = mesh.triangle(f);
        // square-root warp gives a uniform point in the triangle
        let r1: f64 = rng.random::<f64>().sqrt();
        let r2: f64 = rng.random();
        let (wa, wb, wc) = (1.0 - r1, r1 * (1.0 - r2), r1 * r2);
        points.push(std::array::from_fn(|k| wa * a[k] + wb * b[k] + wc * c[k]));
        faces.push(f);
    }
    Ok(SampledSurface {
        points,
        seed,
        source: SurfaceSource::Mesh { faces },
    })
}
