//! Surface extraction, mesh and contour types, topology diagnostics and sampling.

mod contour;
pub mod intersect;
pub mod io;
mod marching_cubes;
mod marching_squares;
mod sample;
mod surface;
pub mod topology;

pub use contour::{Contour, Vec2};
pub use intersect::{intersecting_faces, self_intersection_ratio, triangles_intersect};
pub use marching_cubes::{marching_cubes, MIN_TRIANGLE_AREA};
pub use marching_squares::marching_squares;
pub use sample::{sample_edges, sample_faces, sample_surface, EdgeSample, FaceSample, SampleSurface};
pub use surface::{SurfaceMesh, Vec3};
pub use topology::{
    euler_characteristic, face_components, genus, is_watertight, largest_component,
    mask_components, LargestComponent,
};

pub(crate) use surface::{cross, sub};
