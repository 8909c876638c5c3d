use std::sync::Arc;

use super::cloud::OrientedPointCloud;
use super::grid::ScalarGrid;
use super::normalize::{self, Normalization};
use super::rasterize::{rasterize, rasterize_adjoint};
use super::spectral::{SpectralKernel, SpectralSolver};
use crate::error::{Error, Result};

/// Paper-default kernel bandwidth in grid cells.
pub const DEFAULT_SIGMA: f64 = 2.0;

/// Differentiable Poisson reconstruction at a fixed resolution and bandwidth:
/// rasterize, spectral solve, normalize.
///
/// Building one of these caches the FFT plans and spectral multipliers, which
/// matters inside optimization loops.
#[derive(Clone, Debug)]
pub struct Dpsr {
    solver: Arc<SpectralSolver>,
    scale: f64,
}

impl Dpsr {
    pub fn new(dim: usize, res: usize, sigma: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("indicator scale must be > 0, got {scale}")));
        }
        let kernel = SpectralKernel::gaussian(dim, res, sigma)?;
        Ok(Self { solver: Arc::new(SpectralSolver::new(kernel)), scale })
    }

    pub fn res(&self) -> usize {
        self.solver.res()
    }

    pub fn dim(&self) -> usize {
        self.solver.dim()
    }

    pub fn sigma(&self) -> f64 {
        self.solver.kernel().sigma()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn solver(&self) -> &SpectralSolver {
        &self.solver
    }

    /// Unnormalized indicator `χ'`.
    pub fn unnormalized<const D: usize>(&self, cloud: &OrientedPointCloud<D>) -> Result<ScalarGrid> {
        self.check_dim(D)?;
        let q = rasterize(cloud, self.res())?;
        self.solver.solve(&q)
    }

    /// Normalized indicator without recording a tape.
    pub fn indicator<const D: usize>(&self, cloud: &OrientedPointCloud<D>) -> Result<ScalarGrid> {
        Ok(self.forward(cloud)?.0)
    }

    pub fn forward<const D: usize>(
        &self,
        cloud: &OrientedPointCloud<D>,
    ) -> Result<(ScalarGrid, AdjointTape<D>)> {
        let chi_prime = self.unnormalized(cloud)?;
        let norm = normalize::normalization(&chi_prime, cloud, self.scale)?;
        let chi = normalize::apply(&chi_prime, &norm);
        let tape = AdjointTape {
            dpsr: self.clone(),
            cloud: cloud.clone(),
            chi_prime,
            norm,
            consumed: false,
        };
        Ok((chi, tape))
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: d });
        }
        Ok(())
    }
}

/// Gradients of a scalar loss with respect to every point and normal.
#[derive(Clone, Debug, PartialEq)]
pub struct CloudGradient<const D: usize> {
    pub positions: Vec<[f64; D]>,
    pub normals: Vec<[f64; D]>,
}

impl<const D: usize> CloudGradient<D> {
    /// Flattened `[positions..., normals...]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.positions.iter().chain(&self.normals).flatten().copied().collect()
    }
}

/// Forward record of one reconstruction, sufficient for the reverse pass.
///
/// The reverse pass may run once; a second call reports [`Error::TapeConsumed`].
#[derive(Debug)]
pub struct AdjointTape<const D: usize> {
    dpsr: Dpsr,
    cloud: OrientedPointCloud<D>,
    chi_prime: ScalarGrid,
    norm: Normalization,
    consumed: bool,
}

impl<const D: usize> AdjointTape<D> {
    pub fn cloud(&self) -> &OrientedPointCloud<D> {
        &self.cloud
    }

    pub fn unnormalized(&self) -> &ScalarGrid {
        &self.chi_prime
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// Re-runs the recorded forward pass.
    pub fn replay(&self) -> Result<ScalarGrid> {
        self.dpsr.indicator(&self.cloud)
    }

    pub fn backward(&mut self, cotangent: &ScalarGrid) -> Result<CloudGradient<D>> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        self.chi_prime.same_shape(cotangent)?;
        self.consumed = true;
        let k = self.cloud.len();
        let mut grad = CloudGradient { positions: vec![[0.0; D]; k], normals: vec![[0.0; D]; k] };
        let chi_prime_cot = normalize::normalize_adjoint(
            &self.chi_prime,
            &self.cloud,
            &self.norm,
            cotangent,
            &mut grad.positions,
        );
        let q_cot = self.dpsr.solver.solve_adjoint(&chi_prime_cot)?;
        rasterize_adjoint(&self.cloud, &q_cot, &mut grad.positions, &mut grad.normals);
        Ok(grad)
    }
}

/// One-shot forward pass: `χ̂` plus a tape for [`dpsr_backward`].
pub fn dpsr_forward<const D: usize>(
    cloud: &OrientedPointCloud<D>,
    sigma: f64,
    res: usize,
    scale: f64,
) -> Result<(ScalarGrid, AdjointTape<D>)> {
    Dpsr::new(D, res, sigma, scale)?.forward(cloud)
}

pub fn dpsr_backward<const D: usize>(
    tape: &mut AdjointTape<D>,
    cotangent: &ScalarGrid,
) -> Result<CloudGradient<D>> {
    tape.backward(cotangent)
}
