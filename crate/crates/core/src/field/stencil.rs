//! Periodic multilinear stencils shared by splatting and interpolation.

/// The `2^D` cells surrounding a point together with their multilinear
/// weights and the weights' spatial derivatives.
pub(crate) struct Stencil<const D: usize> {
    pub cells: Vec<usize>,
    pub weights: Vec<f64>,
    /// `grads[c][k]` is d weight_c / d p_k.
    pub grads: Vec<[f64; D]>,
}

impl<const D: usize> Stencil<D> {
    /// Cell centers sit at `(i + 0.5) / res`; indices wrap periodically.
    /// A point exactly on a cell boundary takes its derivative from the lower
    /// (left) cell pair.
    pub fn new(p: &[f64; D], res: usize) -> Self {
        let r = res as f64;
        let mut base = [0isize; D];
        let mut frac = [0.0; D];
        for k in 0..D {
            let s = p[k] * r - 0.5;
            let f = s.floor();
            base[k] = f as isize;
            frac[k] = s - f;
        }
        let corners = 1usize << D;
        let mut cells = Vec::with_capacity(corners);
        let mut weights = Vec::with_capacity(corners);
        let mut grads = Vec::with_capacity(corners);
        for corner in 0..corners {
            let mut flat = 0usize;
            let mut axis_w = [0.0; D];
            let mut axis_dw = [0.0; D];
            for k in 0..D {
                let bit = (corner >> (D - 1 - k)) & 1;
                let idx = (base[k] + bit as isize).rem_euclid(res as isize) as usize;
                flat = flat * res + idx;
                if bit == 1 {
                    axis_w[k] = frac[k];
                    axis_dw[k] = r;
                } else {
                    axis_w[k] = 1.0 - frac[k];
                    axis_dw[k] = -r;
                }
            }
            let w: f64 = axis_w.iter().product();
            let mut g = [0.0; D];
            for k in 0..D {
                let mut prod = axis_dw[k];
                for j in 0..D {
                    if j != k {
                        prod *= axis_w[j];
                    }
                }
                g[k] = prod;
            }
            cells.push(flat);
            weights.push(w);
            grads.push(g);
        }
        Self { cells, weights, grads }
    }

    pub fn interpolate(&self, values: &[f64]) -> f64 {
        self.cells.iter().zip(&self.weights).map(|(&c, &w)| w * values[c]).sum()
    }

    pub fn interpolate_grad(&self, values: &[f64]) -> [f64; D] {
        let mut g = [0.0; D];
        for (&c, dg) in self.cells.iter().zip(&self.grads) {
            for k in 0..D {
                g[k] += dg[k] * values[c];
            }
        }
        g
    }
}
