use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::fft::{frequency, FftN};
use super::grid::{unflatten, ScalarGrid, VectorGrid};
use crate::error::{Error, Result};

/// Radially symmetric spectral Gaussian `exp(-2 (σ |u| / r)^2)` over integer
/// frequencies `u ∈ [-r/2, r/2)^d`. `σ` is measured in grid cells.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralKernel {
    sigma: f64,
    dim: usize,
    res: usize,
    multipliers: Vec<f64>,
}

impl SpectralKernel {
    pub fn gaussian(dim: usize, res: usize, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("kernel bandwidth must be >= 0, got {sigma}")));
        }
        let n = ScalarGrid::zeros(dim, res)?.len();
        let mut idx = [0usize; 3];
        let multipliers = (0..n)
            .map(|flat| {
                unflatten(dim, res, flat, &mut idx);
                let u2: f64 = (0..dim).map(|k| (frequency(idx[k], res) as f64).powi(2)).sum();
                (-2.0 * sigma * sigma * u2 / (res * res) as f64).exp()
            })
            .collect();
        Ok(Self { sigma, dim, res, multipliers })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn res(&self) -> usize {
        self.res
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }
}

/// Periodic spectral Poisson solver with a fixed smoothing kernel.
///
/// For each component `c` the solver applies the multiplier
/// `g(u) · i u_c / (-2π |u|²)`, so the output is the mean-free `χ'` with
/// `∇²χ' = ∇·(g * q)`. The zero frequency is set to zero, and the derivative of
/// the unpaired Nyquist bin (`u_c = -r/2`, even `r`) is taken as zero so the
/// operator maps real fields to real fields.
#[derive(Debug)]
pub struct SpectralSolver {
    kernel: SpectralKernel,
    fft: FftN,
    /// Imaginary parts of the per-component multipliers (the real parts vanish).
    multipliers: Vec<Vec<f64>>,
}

impl SpectralSolver {
    pub fn new(kernel: SpectralKernel) -> Self {
        let (dim, res) = (kernel.dim, kernel.res);
        let n = kernel.multipliers.len();
        let nyquist = if res % 2 == 0 { Some(-(res as i64) / 2) } else { None };
        let mut multipliers = vec![vec![0.0; n]; dim];
        let mut idx = [0usize; 3];
        for flat in 1..n {
            unflatten(dim, res, flat, &mut idx);
            let u: Vec<i64> = (0..dim).map(|k| frequency(idx[k], res)).collect();
            let u2: f64 = u.iter().map(|&x| (x * x) as f64).sum();
            let g = kernel.multipliers[flat];
            for c in 0..dim {
                if Some(u[c]) == nyquist {
                    continue;
                }
                multipliers[c][flat] = g * u[c] as f64 / (-2.0 * PI * u2);
            }
        }
        Self { fft: FftN::new(dim, res), kernel, multipliers }
    }

    pub fn kernel(&self) -> &SpectralKernel {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim
    }

    pub fn res(&self) -> usize {
        self.kernel.res
    }

    /// Complex spectrum `χ̃` of the solution (before the inverse transform).
    pub fn solve_spectrum(&self, q: &VectorGrid) -> Result<Vec<Complex64>> {
        self.check(q.dim(), q.res())?;
        let n = self.fft.len();
        let mut acc = vec![Complex64::default(); n];
        let mut buf = vec![Complex64::default(); n];
        for (c, comp) in q.components().iter().enumerate() {
            for (b, &v) in buf.iter_mut().zip(comp) {
                *b = Complex64::new(v, 0.0);
            }
            self.fft.forward(&mut buf);
            for ((a, b), &m) in acc.iter_mut().zip(&buf).zip(&self.multipliers[c]) {
                // (i m) * b
                *a += Complex64::new(-m * b.im, m * b.re);
            }
        }
        Ok(acc)
    }

    pub fn solve(&self, q: &VectorGrid) -> Result<ScalarGrid> {
        let mut spec = self.solve_spectrum(q)?;
        self.fft.inverse(&mut spec);
        Ok(ScalarGrid::from_raw(self.dim(), self.res(), take_real(&spec)))
    }

    /// Adjoint of [`solve`](Self::solve): same pipeline with conjugated multipliers.
    pub fn solve_adjoint(&self, cotangent: &ScalarGrid) -> Result<VectorGrid> {
        self.check(cotangent.dim(), cotangent.res())?;
        let n = self.fft.len();
        let mut spec: Vec<Complex64> =
            cotangent.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut spec);
        let mut comps = Vec::with_capacity(self.dim());
        let mut buf = vec![Complex64::default(); n];
        for c in 0..self.dim() {
            for ((b, s), &m) in buf.iter_mut().zip(&spec).zip(&self.multipliers[c]) {
                // (-i m) * s
                *b = Complex64::new(m * s.im, -m * s.re);
            }
            self.fft.inverse(&mut buf);
            comps.push(take_real(&buf));
        }
        Ok(VectorGrid::from_raw(self.dim(), self.res(), comps))
    }

    fn check(&self, dim: usize, res: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: dim });
        }
        if res != self.res() {
            return Err(Error::ResolutionMismatch(self.res(), res));
        }
        Ok(())
    }
}

fn take_real(spec: &[Complex64]) -> Vec<f64> {
    let real: Vec<f64> = spec.iter().map(|v| v.re).collect();
    debug_assert!({
        let max_re = real.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_im = spec.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
        max_im <= 1e-9 * max_re.max(1e-300) || max_im < 1e-13
    });
    real
}

/// Solves for the unnormalized indicator `χ'` of a rasterized point-normal field.
pub fn solve_poisson_spectral(q: &VectorGrid, kernel: &SpectralKernel) -> Result<ScalarGrid> {
    if q.res() != kernel.res() {
        return Err(Error::ResolutionMismatch(kernel.res(), q.res()));
    }
    SpectralSolver::new(kernel.clone()).solve(q)
}
