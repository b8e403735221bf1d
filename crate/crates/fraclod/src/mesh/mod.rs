//! Conforming triangle meshes over polygonal domains, nested quadrisection
//! hierarchies, element patches, and fracture polyline geometry with
//! per-triangle traces.

mod fracture;
mod io;
mod patch;
mod point;
mod refine;
mod trimesh;

pub use fracture::{
    segment_edge_vertices, trace_fracture, trace_point_barycentric, FractureNetwork, FractureTrace,
    TraceSegment,
};
pub use io::{load_fracture, load_mesh, save_fracture, save_mesh};
pub use patch::{neighborhood, patch, patch_layers, Patch};
pub use point::{barycentric, clip_segment_to_triangle, p1_gradients, signed_area2, Point2};
pub use refine::{refine_quadrisect, MeshHierarchy, ParentLink};
pub use trimesh::{unit_square_structured, TriMesh};
