use super::cloud::OrientedPointCloud;
use super::grid::VectorGrid;
use super::stencil::Stencil;
use crate::error::{Error, Result};

pub const MIN_RESOLUTION: usize = 8;

/// Splats every normal onto the `2^D` cells around its point with multilinear
/// weights (periodic wrap). Contributions from different points add up.
pub fn rasterize<const D: usize>(cloud: &OrientedPointCloud<D>, res: usize) -> Result<VectorGrid> {
    if cloud.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if res < MIN_RESOLUTION {
        return Err(Error::invalid(format!(
            "rasterization needs resolution >= {MIN_RESOLUTION}, got {res}"
        )));
    }
    let mut q = VectorGrid::zeros(D, res)?;
    let comps = q.components_mut();
    for (p, n) in cloud.positions().iter().zip(cloud.normals()) {
        let st = Stencil::new(p, res);
        for (&cell, &w) in st.cells.iter().zip(&st.weights) {
            for k in 0..D {
                comps[k][cell] += w * n[k];
            }
        }
    }
    Ok(q)
}

/// Pulls a cotangent on the point-normal field back to positions and normals.
///
/// The normal adjoint is multilinear interpolation of the cotangent; the
/// position adjoint uses the spatial derivatives of the splat weights.
pub(crate) fn rasterize_adjoint<const D: usize>(
    cloud: &OrientedPointCloud<D>,
    cotangent: &VectorGrid,
    grad_positions: &mut [[f64; D]],
    grad_normals: &mut [[f64; D]],
) {
    let res = cotangent.res();
    let comps = cotangent.components();
    for (i, (p, n)) in cloud.positions().iter().zip(cloud.normals()).enumerate() {
        let st = Stencil::new(p, res);
        for ((&cell, &w), dw) in st.cells.iter().zip(&st.weights).zip(&st.grads) {
            let mut dot = 0.0;
            for k in 0..D {
                let c = comps[k][cell];
                grad_normals[i][k] += w * c;
                dot += c * n[k];
            }
            for k in 0..D {
                grad_positions[i][k] += dw[k] * dot;
            }
        }
    }
}
