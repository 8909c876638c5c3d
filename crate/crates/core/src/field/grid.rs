use crate::error::{Error, Result};

fn check_shape(dim: usize, res: usize) -> Result<usize> {
    if dim != 2 && dim != 3 {
        return Err(Error::invalid(format!("grid dimension must be 2 or 3, got {dim}")));
    }
    if res < 2 {
        return Err(Error::invalid(format!("grid resolution must be at least 2, got {res}")));
    }
    Ok(res.pow(dim as u32))
}

/// Uniform scalar field on the unit square/cube.
///
/// Cell `i` along an axis has its center at `(i + 0.5) / res`. Values are stored
/// row-major with axis 0 slowest; axis `k` corresponds to coordinate `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    dim: usize,
    res: usize,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn zeros(dim: usize, res: usize) -> Result<Self> {
        let n = check_shape(dim, res)?;
        Ok(Self { dim, res, values: vec![0.0; n] })
    }

    pub fn from_values(dim: usize, res: usize, values: Vec<f64>) -> Result<Self> {
        let n = check_shape(dim, res)?;
        if values.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} grid values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar grid"));
        }
        Ok(Self { dim, res, values })
    }

    /// Samples `f` at every cell center. `f` receives `dim` coordinates.
    pub fn from_fn(dim: usize, res: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let n = check_shape(dim, res)?;
        let mut values = Vec::with_capacity(n);
        let mut p = [0.0; 3];
        for flat in 0..n {
            cell_center_into(dim, res, flat, &mut p);
            values.push(f(&p[..dim]));
        }
        Self::from_values(dim, res, values)
    }

    /// Internal constructor for values produced by finite arithmetic.
    pub(crate) fn from_raw(dim: usize, res: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), res.pow(dim as u32));
        Self { dim, res, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn res(&self) -> usize {
        self.res
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[flat_index(self.res, idx)]
    }

    pub fn cell_center(&self, flat: usize) -> [f64; 3] {
        let mut p = [0.0; 3];
        cell_center_into(self.dim, self.res, flat, &mut p);
        p
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_values(self.dim, self.res, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn same_shape(&self, other: &ScalarGrid) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        if self.res != other.res {
            return Err(Error::ResolutionMismatch(self.res, other.res));
        }
        Ok(())
    }

    pub(crate) fn expect_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.dim });
        }
        Ok(())
    }
}

/// Uniform `dim`-component vector field, stored as one plane per component.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorGrid {
    dim: usize,
    res: usize,
    components: Vec<Vec<f64>>,
}

impl VectorGrid {
    pub fn zeros(dim: usize, res: usize) -> Result<Self> {
        let n = check_shape(dim, res)?;
        Ok(Self { dim, res, components: vec![vec![0.0; n]; dim] })
    }

    pub fn from_components(dim: usize, res: usize, components: Vec<Vec<f64>>) -> Result<Self> {
        let n = check_shape(dim, res)?;
        if components.len() != dim || components.iter().any(|c| c.len() != n) {
            return Err(Error::invalid(format!(
                "vector grid needs {dim} components of {n} values"
            )));
        }
        if components.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector grid"));
        }
        Ok(Self { dim, res, components })
    }

    /// Samples a vector-valued `f` at every cell center.
    pub fn from_fn(dim: usize, res: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let n = check_shape(dim, res)?;
        let mut components = vec![Vec::with_capacity(n); dim];
        let mut p = [0.0; 3];
        for flat in 0..n {
            cell_center_into(dim, res, flat, &mut p);
            let v = f(&p[..dim]);
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            for (c, x) in components.iter_mut().zip(v) {
                c.push(x);
            }
        }
        Self::from_components(dim, res, components)
    }

    pub(crate) fn from_raw(dim: usize, res: usize, components: Vec<Vec<f64>>) -> Self {
        Self { dim, res, components }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn res(&self) -> usize {
        self.res
    }

    pub fn cells(&self) -> usize {
        self.res.pow(self.dim as u32)
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.components[c]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.components
    }
}

/// Flat row-major index with axis 0 slowest.
pub(crate) fn flat_index(res: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * res + i)
}

/// Multi-index of a flat offset, axis 0 first.
pub(crate) fn unflatten(dim: usize, res: usize, mut flat: usize, out: &mut [usize]) {
    for k in (0..dim).rev() {
        out[k] = flat % res;
        flat /= res;
    }
}

fn cell_center_into(dim: usize, res: usize, flat: usize, p: &mut [f64; 3]) {
    let mut idx = [0usize; 3];
    unflatten(dim, res, flat, &mut idx);
    for k in 0..dim {
        p[k] = (idx[k] as f64 + 0.5) / res as f64;
    }
}
