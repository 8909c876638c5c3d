//! Uniform grids and the differentiable Poisson reconstruction chain.

mod cloud;
mod dpsr;
pub mod fft;
pub mod filter;
pub mod grid;
pub mod hgrd;
mod loss;
mod normalize;
mod rasterize;
mod spectral;
pub(crate) mod stencil;

pub use cloud::{OrientedPointCloud, PointCloud2, PointCloud3};
pub use dpsr::{dpsr_backward, dpsr_forward, AdjointTape, CloudGradient, Dpsr, DEFAULT_SIGMA};
pub use filter::{edge_weight_map, edge_weight_map_with, gaussian_blur, sobel_magnitude};
pub use grid::{ScalarGrid, VectorGrid};
pub use loss::{mse_loss, wmse_loss};
pub use normalize::{normalize_indicator, DEFAULT_SCALE};
pub use rasterize::{rasterize, MIN_RESOLUTION};
pub use spectral::{solve_poisson_spectral, SpectralKernel, SpectralSolver};

/// Multilinear interpolation of a grid at `p` with periodic wrap.
pub fn interpolate<const D: usize>(grid: &ScalarGrid, p: &[f64; D]) -> f64 {
    stencil::Stencil::new(p, grid.res()).interpolate(grid.values())
}
