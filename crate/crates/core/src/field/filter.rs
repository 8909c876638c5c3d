//! Separable image filters on scalar grids with replicate padding.

use super::grid::ScalarGrid;
use crate::error::{Error, Result};

/// Kernel size of the edge-map smoothing (7 taps, std 1).
pub const EDGE_KERNEL_SIZE: usize = 7;
pub const EDGE_KERNEL_STD: f64 = 1.0;

/// Normalized Gaussian taps `exp(-x²/2σ²)` for `x ∈ [-radius, radius]`.
pub fn gaussian_taps(std: f64, radius: usize) -> Vec<f64> {
    let taps: Vec<f64> = (-(radius as isize)..=radius as isize)
        .map(|x| (-(x * x) as f64 / (2.0 * std * std)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Correlates `values` with `taps` along `axis`, clamping out-of-range indices.
pub(crate) fn convolve_axis(
    values: &[f64],
    dim: usize,
    res: usize,
    axis: usize,
    taps: &[f64],
) -> Vec<f64> {
    let radius = (taps.len() / 2) as isize;
    let stride = res.pow((dim - 1 - axis) as u32);
    let mut out = vec![0.0; values.len()];
    for (flat, o) in out.iter_mut().enumerate() {
        let i = ((flat / stride) % res) as isize;
        let base = flat - (i as usize) * stride;
        let mut acc = 0.0;
        for (t, &w) in taps.iter().enumerate() {
            let j = (i + t as isize - radius).clamp(0, res as isize - 1) as usize;
            acc += w * values[base + j * stride];
        }
        *o = acc;
    }
    out
}

/// Isotropic Gaussian blur with `radius = ceil(3·std)` taps per side.
pub fn gaussian_blur(grid: &ScalarGrid, std: f64) -> Result<ScalarGrid> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::invalid(format!("smoothing std must be > 0, got {std}")));
    }
    let radius = (3.0 * std).ceil() as usize;
    Ok(blur_with(grid, &gaussian_taps(std, radius)))
}

fn blur_with(grid: &ScalarGrid, taps: &[f64]) -> ScalarGrid {
    let (dim, res) = (grid.dim(), grid.res());
    let mut values = grid.values().to_vec();
    for axis in 0..dim {
        values = convolve_axis(&values, dim, res, axis, taps);
    }
    ScalarGrid::from_raw(dim, res, values)
}

/// Gradient magnitude from the separable Sobel operator (central difference
/// along each axis, `[1, 2, 1]` smoothing across the others).
pub fn sobel_magnitude(grid: &ScalarGrid) -> ScalarGrid {
    let (dim, res) = (grid.dim(), grid.res());
    let mut mag2 = vec![0.0; grid.len()];
    for axis in 0..dim {
        let mut g = convolve_axis(grid.values(), dim, res, axis, &[-1.0, 0.0, 1.0]);
        for other in (0..dim).filter(|&a| a != axis) {
            g = convolve_axis(&g, dim, res, other, &[1.0, 2.0, 1.0]);
        }
        for (m, v) in mag2.iter_mut().zip(&g) {
            *m += v * v;
        }
    }
    ScalarGrid::from_raw(dim, res, mag2.into_iter().map(f64::sqrt).collect())
}

/// Edge weights for the indicator loss: Gaussian-smoothed (7 taps, std 1)
/// Sobel magnitude of `chi`. With `rescale` the map is divided by its maximum.
pub fn edge_weight_map_with(chi: &ScalarGrid, rescale: bool) -> Result<ScalarGrid> {
    if chi.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("indicator grid"));
    }
    let taps = gaussian_taps(EDGE_KERNEL_STD, EDGE_KERNEL_SIZE / 2);
    let w = blur_with(&sobel_magnitude(chi), &taps);
    let max = w.max();
    if !rescale || max <= 0.0 {
        return Ok(w);
    }
    let values = w.into_values().into_iter().map(|v| v / max).collect();
    Ok(ScalarGrid::from_raw(chi.dim(), chi.res(), values))
}

pub fn edge_weight_map(chi: &ScalarGrid) -> Result<ScalarGrid> {
    edge_weight_map_with(chi, true)
}
