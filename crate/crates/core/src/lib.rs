//! Hybrid explicit/implicit shape reconstruction.
//!
//! Oriented point clouds are rasterized and turned into indicator grids with a
//! differentiable spectral Poisson solver ([`field`]). Surfaces are extracted with
//! marching cubes/squares ([`mesh`]), topology defects are repaired by offset
//! level-set extraction followed by diffeomorphic registration ([`topo`], [`flow`]),
//! and results are scored with the usual surface metrics ([`metrics`]). The
//! [`hybrid`] module holds the optimization drivers that tie these together.

pub mod error;
pub mod field;
pub mod fixtures;
pub mod flow;
pub mod hybrid;
pub mod mesh;
pub mod metrics;
pub(crate) mod rng;
pub mod topo;

pub use error::{Error, Result};
pub use field::{OrientedPointCloud, ScalarGrid, VectorGrid};
pub use mesh::{Contour, SurfaceMesh};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
