use super::cloud::OrientedPointCloud;
use super::grid::ScalarGrid;
use super::stencil::Stencil;
use crate::error::{Error, Result};

pub const DEFAULT_SCALE: f64 = 0.5;

/// Scalars of the affine map `χ = κ (χ' - μ)` produced by normalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Normalization {
    /// Mean of `χ'` interpolated at the points.
    pub mean: f64,
    /// Shifted reference value `χ'(corner) - μ`.
    pub reference: f64,
    /// Overall factor `-m / |reference|`, or 0 for a flat field.
    pub factor: f64,
}

pub(crate) fn normalization<const D: usize>(
    chi_prime: &ScalarGrid,
    cloud: &OrientedPointCloud<D>,
    scale: f64,
) -> Result<Normalization> {
    chi_prime.expect_dim(D)?;
    if cloud.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let values = chi_prime.values();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("unnormalized indicator"));
    }
    let res = chi_prime.res();
    let sum: f64 = cloud
        .positions()
        .iter()
        .map(|p| Stencil::new(p, res).interpolate(values))
        .sum();
    let mean = sum / cloud.len() as f64;
    // The domain corner is the center of cell 0, where interpolation is exact.
    let reference = values[0] - mean;
    let spread = values.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    let magnitude = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if spread <= 1e-12 * magnitude || spread == 0.0 {
        return Ok(Normalization { mean, reference, factor: 0.0 });
    }
    if reference.abs() < 1e-12 {
        return Err(Error::DegenerateNormalization);
    }
    Ok(Normalization { mean, reference, factor: -scale / reference.abs() })
}

/// Normalizes an unnormalized indicator so the points sit on the zero level
/// and the domain corner (outside) maps to `∓m`.
///
/// With outward normals the result is positive inside and the corner is `-m`.
/// A field that is constant up to rounding maps to zero everywhere.
pub fn normalize_indicator<const D: usize>(
    chi_prime: &ScalarGrid,
    cloud: &OrientedPointCloud<D>,
    scale: f64,
) -> Result<ScalarGrid> {
    let norm = normalization(chi_prime, cloud, scale)?;
    Ok(apply(chi_prime, &norm))
}

pub(crate) fn apply(chi_prime: &ScalarGrid, norm: &Normalization) -> ScalarGrid {
    let values = chi_prime.values().iter().map(|&v| norm.factor * (v - norm.mean)).collect();
    ScalarGrid::from_raw(chi_prime.dim(), chi_prime.res(), values)
}

/// Adjoint of [`apply`] composed with [`normalization`]. Returns the cotangent on
/// `χ'` and accumulates position gradients from the interpolated mean.
pub(crate) fn normalize_adjoint<const D: usize>(
    chi_prime: &ScalarGrid,
    cloud: &OrientedPointCloud<D>,
    norm: &Normalization,
    cotangent: &ScalarGrid,
    grad_positions: &mut [[f64; D]],
) -> ScalarGrid {
    let res = chi_prime.res();
    let values = chi_prime.values();
    let cot = cotangent.values();
    let kappa = norm.factor;
    let mut out: Vec<f64> = cot.iter().map(|&c| kappa * c).collect();
    if kappa == 0.0 {
        return ScalarGrid::from_raw(chi_prime.dim(), res, out);
    }
    let total: f64 = cot.iter().sum();
    let weighted: f64 = cot.iter().zip(values).map(|(c, v)| c * (v - norm.mean)).sum();
    // κ = -m / |a|  =>  dκ/da = -κ / a
    let grad_reference = -kappa * weighted / norm.reference;
    out[0] += grad_reference;
    let grad_mean = -kappa * total - grad_reference;
    let per_point = grad_mean / cloud.len() as f64;
    for (i, p) in cloud.positions().iter().enumerate() {
        let st = Stencil::new(p, res);
        for (&cell, &w) in st.cells.iter().zip(&st.weights) {
            out[cell] += per_point * w;
        }
        let g = st.interpolate_grad(values);
        for k in 0..D {
            grad_positions[i][k] += per_point * g[k];
        }
    }
    ScalarGrid::from_raw(chi_prime.dim(), res, out)
}
