//! Object geometry: triangle meshes, basis-point-set encoding, signed distance
//! queries and distance-threshold contact labeling.

mod bps;
mod contacts;
mod mesh;
mod query;

pub use bps::{
    encode_bps, encode_bps_with, project_geometry, sample_basis_points, BasisPointSet, BpsFeature,
    GeometryProjection, BPS_POINTS, BPS_PROJECTED,
};
pub use contacts::{detect_contacts, DEFAULT_CONTACT_THRESHOLD};
pub use mesh::TriangleMesh;
pub use query::{closest_point_on_triangle, ray_triangle_intersection};
