use std::collections::BTreeMap;

use super::Mesh;

/// Undirected edge, stored with the smaller vertex index first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey(pub usize, pub usize);

impl EdgeKey {
    pub fn new(a: usize, b: usize) -> Self {
        if a < b {
            EdgeKey(a, b)
        } else {
            EdgeKey(b, a)
        }
    }
}

/// Edge-to-face incidence of a triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTopology {
    edges: BTreeMap<EdgeKey, Vec<usize>>,
    boundary_edge_count: usize,
}

impl EdgeTopology {
    pub fn edges(&self) -> &BTreeMap<EdgeKey, Vec<usize>> {
        &self.edges
    }

    pub fn incident_faces(&self, edge: EdgeKey) -> &[usize] {
        self.edges.get(&edge).map_or(&[], Vec::as_slice)
    }

    /// Edges with exactly one incident face.
    pub fn boundary_edge_count(&self) -> usize {
        self.boundary_edge_count
    }

    pub fn total_edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges shared by exactly two faces, in key order.
    pub fn interior_edges(&self) -> impl Iterator<Item = (EdgeKey, [usize; 2])> + '_ {
        self.edges.iter().filter_map(|(&k, faces)| match faces[..] {
            [a, b] => Some((k, [a, b])),
            _ => None,
        })
    }
}

pub fn build_edge_topology(mesh: &Mesh) -> EdgeTopology {
    let mut edges: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
    for (fi, &[a, b, c]) in mesh.faces().iter().enumerate() {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            edges.entry(EdgeKey::new(u, v)).or_default().push(fi);
        }
    }
    let boundary_edge_count = edges.values().filter(|f| f.len() == 1).count();
    EdgeTopology {
        edges,
        boundary_edge_count,
    }
}
