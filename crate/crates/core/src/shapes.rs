//! Small canonical meshes for tests and the synthetic candidate generator.

use std::collections::HashMap;

use crate::mesh::{Mesh, Point3};

fn build(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Mesh {
    Mesh::new(vertices, faces).expect("canonical shape is valid")
}

/// Axis-aligned unit cube, 8 vertices and 12 outward-facing triangles.
/// Vertex 0 is the origin and vertex 6 is `(1, 1, 1)`.
pub fn unit_cube() -> Mesh {
    let v = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [0.0, 1.0, 1.0],
    ];
    let quads = [
        [0, 3, 2, 1],
        [4, 5, 6, 7],
        [0, 1, 5, 4],
        [3, 7, 6, 2],
        [0, 4, 7, 3],
        [1, 2, 6, 5],
    ];
    let faces = quads
        .iter()
        .flat_map(|&[a, b, c, d]| [[a, b, c], [a, c, d]])
        .collect();
    build(v, faces)
}

pub fn single_triangle() -> Mesh {
    build(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        vec![[0, 1, 2]],
    )
}

/// Planar grid of `nx` by `ny` unit squares in z = 0, each split along the
/// diagonal from its lower-left to upper-right corner. Vertex `(i, j)` has
/// index `j * (nx + 1) + i`.
pub fn grid(nx: usize, ny: usize) -> Mesh {
    rect_grid(nx, ny, 1.0, 1.0)
}

/// Like [`grid`] with cells of size `w` by `h`.
pub fn rect_grid(nx: usize, ny: usize, w: f64, h: f64) -> Mesh {
    let mut v = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            v.push([i as f64 * w, j as f64 * h, 0.0]);
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    build(v, faces)
}

/// The 2x2 grid plus two unmergeable triangles attached to its outer edges:
/// one below the bottom-left cell and one left of the top-left cell.
pub fn grid_with_ears() -> Mesh {
    let g = grid(2, 2);
    let mut v = g.vertices().to_vec();
    let mut faces = g.faces().to_vec();
    v.push([0.5, -0.8, 0.0]);
    v.push([-0.8, 1.5, 0.0]);
    // grid vertex (i, j) is j * 3 + i
    faces.push([1, 0, 9]);
    faces.push([3, 6, 10]);
    build(v, faces)
}

/// Closed cube with each side split into an `n` by `n` grid of squares.
/// Side length is 1.
pub fn subdivided_cube(n: usize) -> Mesh {
    assert!(n >= 1);
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut v: Vec<Point3> = Vec::new();
    let mut faces = Vec::new();
    let mut vid = |p: [usize; 3]| {
        *index.entry(p).or_insert_with(|| {
            v.push([p[0] as f64 / n as f64, p[1] as f64 / n as f64, p[2] as f64 / n as f64]);
            v.len() - 1
        })
    };
    // (fixed axis, fixed value, u axis, v axis); u x v points outward
    let sides = [
        (2, 0, 1, 0),
        (2, n, 0, 1),
        (1, 0, 0, 2),
        (1, n, 2, 0),
        (0, 0, 2, 1),
        (0, n, 1, 2),
    ];
    for &(fixed, value, ua, va) in &sides {
        let at = |i: usize, j: usize| {
            let mut p = [0usize; 3];
            p[fixed] = value;
            p[ua] = i;
            p[va] = j;
            p
        };
        for j in 0..n {
            for i in 0..n {
                let a = vid(at(i, j));
                let b = vid(at(i + 1, j));
                let c = vid(at(i + 1, j + 1));
                let d = vid(at(i, j + 1));
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
    }
    build(v, faces)
}
