use crate::error::{Error, Result};

/// Points in the closed unit domain with unit normals.
///
/// Positions are clamped into `[0, 1]^D` and normals rescaled to unit length on
/// construction.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientedPointCloud<const D: usize> {
    positions: Vec<[f64; D]>,
    normals: Vec<[f64; D]>,
}

pub type PointCloud2 = OrientedPointCloud<2>;
pub type PointCloud3 = OrientedPointCloud<3>;

impl<const D: usize> OrientedPointCloud<D> {
    pub fn new(mut positions: Vec<[f64; D]>, mut normals: Vec<[f64; D]>) -> Result<Self> {
        if positions.len() != normals.len() {
            return Err(Error::invalid(format!(
                "{} positions but {} normals",
                positions.len(),
                normals.len()
            )));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point positions"));
        }
        if normals.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point normals"));
        }
        for p in &mut positions {
            for x in p.iter_mut() {
                *x = x.clamp(0.0, 1.0);
            }
        }
        for (i, n) in normals.iter_mut().enumerate() {
            let len = norm(n);
            if len < 1e-300 {
                return Err(Error::invalid(format!("normal {i} has zero length")));
            }
            for x in n.iter_mut() {
                *x /= len;
            }
        }
        Ok(Self { positions, normals })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; D]] {
        &self.positions
    }

    pub fn normals(&self) -> &[[f64; D]] {
        &self.normals
    }

    /// Skips clamping and normalization; gradient checks perturb raw normals.
    #[cfg(test)]
    pub(crate) fn from_parts_unchecked(positions: Vec<[f64; D]>, normals: Vec<[f64; D]>) -> Self {
        debug_assert_eq!(positions.len(), normals.len());
        Self { positions, normals }
    }

    /// Same points with every normal negated.
    pub fn flipped(&self) -> Self {
        Self {
            positions: self.positions.clone(),
            normals: self.normals.iter().map(|n| n.map(|x| -x)).collect(),
        }
    }

    /// Translates every point, re-clamping into the unit domain.
    pub fn translated(&self, offset: [f64; D]) -> Self {
        let positions = self
            .positions
            .iter()
            .map(|p| std::array::from_fn(|k| (p[k] + offset[k]).clamp(0.0, 1.0)))
            .collect();
        Self { positions, normals: self.normals.clone() }
    }

    pub fn into_parts(self) -> (Vec<[f64; D]>, Vec<[f64; D]>) {
        (self.positions, self.normals)
    }
}

pub(crate) fn norm<const D: usize>(v: &[f64; D]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
