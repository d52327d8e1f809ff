//! Topology-aware quality scoring for triangle meshes and preference pairs
//! built from it. Good-face token masks feed a masked preference objective,
//! which is optimized with exact gradients over a small tabular policy.

pub mod mask;
pub mod mesh;
pub mod metrics;
pub mod quad;
pub mod shapes;
pub mod mdpo;
pub mod preference;
