use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Separable d-dimensional FFT over a cubic grid of side `res`.
///
/// The forward transform is unnormalized; the inverse divides by the cell count.
pub struct FftN {
    dim: usize,
    res: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftN {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftN").field("dim", &self.dim).field("res", &self.res).finish()
    }
}

impl FftN {
    pub fn new(dim: usize, res: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            res,
            forward: planner.plan_fft_forward(res),
            inverse: planner.plan_fft_inverse(res),
        }
    }

    pub fn len(&self) -> usize {
        self.res.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.len();
        assert_eq!(data.len(), n, "fft buffer length");
        let r = self.res;
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut lines = vec![Complex64::default(); n];
        for axis in 0..self.dim {
            let stride = r.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            let outer = n / (r * stride);
            for o in 0..outer {
                for inner in 0..stride {
                    let line = (o * stride + inner) * r;
                    let src = o * r * stride + inner;
                    for j in 0..r {
                        lines[line + j] = data[src + j * stride];
                    }
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            for o in 0..outer {
                for inner in 0..stride {
                    let line = (o * stride + inner) * r;
                    let dst = o * r * stride + inner;
                    for j in 0..r {
                        data[dst + j * stride] = lines[line + j];
                    }
                }
            }
        }
    }
}

/// Signed integer frequency of FFT bin `j`: `j` for `j < res/2`, else `j - res`,
/// so bins cover `[-res/2, res/2)`.
pub fn frequency(j: usize, res: usize) -> i64 {
    if 2 * j < res {
        j as i64
    } else {
        j as i64 - res as i64
    }
}
