use serde::{Deserialize, Serialize};

use super::{Mesh, MeshError, Normalization, Point3};

/// Grid resolution per axis used by the mesh tokenizer.
pub const DEFAULT_BINS: u32 = 1024;

/// A mesh whose vertices have been snapped to a `bins`³ integer grid.
///
/// Faces keep the source vertex indexing; two distinct source vertices can
/// land on the same grid point, so a face may become degenerate here even
/// when the source face is not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedMesh {
    pub coords: Vec<[u32; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub bins: u32,
    /// `None` for meshes rebuilt from tokens, where the source frame is unknown.
    pub transform: Option<Normalization>,
}

impl QuantizedMesh {
    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn face_coords(&self, face: usize) -> [[u32; 3]; 3] {
        let [a, b, c] = self.faces[face];
        [self.coords[a], self.coords[b], self.coords[c]]
    }

    /// Faces with two corners on the same grid point.
    pub fn degenerate_faces(&self) -> Vec<usize> {
        (0..self.faces.len())
            .filter(|&f| {
                let [a, b, c] = self.face_coords(f);
                a == b || b == c || a == c
            })
            .collect()
    }

    /// Cell centre of a grid coordinate in normalized unit-cube space.
    pub fn cell_center(&self, q: [u32; 3]) -> Point3 {
        let bins = f64::from(self.bins);
        [
            (f64::from(q[0]) + 0.5) / bins,
            (f64::from(q[1]) + 0.5) / bins,
            (f64::from(q[2]) + 0.5) / bins,
        ]
    }

    /// Positions in normalized space, or in source units when a transform is
    /// known. Faces that collapsed under quantization are dropped because
    /// [`Mesh`] does not admit repeated indices.
    pub fn dequantize(&self) -> Result<Mesh, MeshError> {
        let vertices = self
            .coords
            .iter()
            .map(|&q| {
                let p = self.cell_center(q);
                match &self.transform {
                    Some(t) => t.invert(p),
                    None => p,
                }
            })
            .collect();
        let collapsed = self.degenerate_faces();
        let faces = self
            .faces
            .iter()
            .enumerate()
            .filter(|(i, _)| collapsed.binary_search(i).is_err())
            .map(|(_, f)| *f)
            .collect();
        Mesh::new(vertices, faces)
    }
}

fn quantize_coord(x: f64, bins: u32) -> u32 {
    let cell = (x * f64::from(bins)).floor();
    cell.clamp(0.0, f64::from(bins - 1)) as u32
}

/// Normalizes the mesh into the unit cube and maps each coordinate to
/// `floor(x * bins)`, clamped to `[0, bins - 1]`.
pub fn quantize(mesh: &Mesh, bins: u32) -> Result<QuantizedMesh, MeshError> {
    if bins < 2 {
        return Err(MeshError::InvalidBins(bins));
    }
    if mesh.vertices().is_empty() {
        return Err(MeshError::Empty);
    }
    let transform = Normalization::from_points(mesh.vertices())?;
    let coords = mesh
        .vertices()
        .iter()
        .map(|&p| {
            let n = transform.apply(p);
            [
                quantize_coord(n[0], bins),
                quantize_coord(n[1], bins),
                quantize_coord(n[2], bins),
            ]
        })
        .collect();
    Ok(QuantizedMesh {
        coords,
        faces: mesh.faces().to_vec(),
        bins,
        transform: Some(transform),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use proptest::prelude::*;

    fn cube_with_center() -> Mesh {
        let cube = shapes::unit_cube();
        let mut vertices = cube.vertices().to_vec();
        vertices.push([0.5, 0.5, 0.5]);
        Mesh::new(vertices, cube.faces().to_vec()).unwrap()
    }

    #[test]
    fn corners_and_midpoint() {
        let q = quantize(&cube_with_center(), 1024).unwrap();
        // vertex 0 is the bbox min, vertex 6 the bbox max
        assert_eq!(q.coords[0], [0, 0, 0]);
        assert_eq!(q.coords[6], [1023, 1023, 1023]);
        // floor(0.5 * 1024) = 512
        assert_eq!(q.coords[8], [512, 512, 512]);
        let back = q.cell_center(q.coords[8]);
        for c in back {
            assert!((c - 0.5).abs() <= 0.5 / 1024.0);
        }
    }

    #[test]
    fn coincident_vertices_are_degenerate() {
        let mesh = Mesh::new(vec![[2.0, 2.0, 2.0]; 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(quantize(&mesh, 1024), Err(MeshError::Degenerate(_))));
    }

    #[test]
    fn rejects_tiny_bins() {
        assert_eq!(
            quantize(&shapes::unit_cube(), 1),
            Err(MeshError::InvalidBins(1))
        );
    }

    #[test]
    fn collapsed_faces_are_flagged() {
        let mesh = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1e-6, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap();
        let q = quantize(&mesh, 16).unwrap();
        assert_eq!(q.degenerate_faces(), vec![0]);
        assert_eq!(q.dequantize().unwrap().face_count(), 1);
    }

    proptest! {
        #[test]
        fn round_trip_within_half_cell(
            pts in prop::collection::vec(prop::array::uniform3(-50.0f64..50.0), 3..40),
            bins in 2u32..2048,
        ) {
            let n = pts.len();
            let faces = vec![[0, 1, 2]];
            let mesh = Mesh::new(pts, faces).unwrap();
            let Ok(q) = quantize(&mesh, bins) else { return Ok(()); };
            let t = q.transform.unwrap();
            let half = 0.5 / f64::from(bins);
            for i in 0..n {
                let orig = t.apply(mesh.vertices()[i]);
                let back = q.cell_center(q.coords[i]);
                for k in 0..3 {
                    prop_assert!(q.coords[i][k] < bins);
                    prop_assert!((orig[k] - back[k]).abs() <= half + 1e-12);
                }
            }
        }
    }
}
