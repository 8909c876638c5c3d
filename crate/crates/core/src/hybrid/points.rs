use crate::error::{Error, Result};
use crate::field::{edge_weight_map, mse_loss, wmse_loss, Dpsr, OrientedPointCloud, ScalarGrid, DEFAULT_SCALE, DEFAULT_SIGMA};
use crate::flow::{Adam, AdamState};

/// Window used when reporting smoothed loss curves.
pub const SMOOTHING_WINDOW: usize = 50;

/// Settings for [`optimize_oriented_points`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HybridConfig {
    /// Number of oriented points drawn by drivers that build their own start.
    pub points: usize,
    pub res: usize,
    pub sigma: f64,
    /// Indicator scale `m`.
    pub scale: f64,
    pub lr: f64,
    pub iterations: usize,
    /// Edge-weighted loss when set, plain squared error otherwise.
    pub edge_weighting: bool,
    pub seed: u64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            points: 2048,
            res: 64,
            sigma: DEFAULT_SIGMA,
            scale: DEFAULT_SCALE,
            lr: 3e-3,
            iterations: 1000,
            edge_weighting: true,
            seed: 0,
        }
    }
}

impl HybridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points < 4 {
            return Err(Error::invalid(format!("need at least 4 points, got {}", self.points)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be > 0, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Per-iteration losses of an optimization run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossHistory {
    pub raw: Vec<f64>,
}

impl LossHistory {
    /// Means over consecutive blocks of `window` iterations; a trailing partial
    /// block is averaged too.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        self.raw.chunks(window.max(1)).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
    }

    pub fn first(&self) -> Option<f64> {
        self.raw.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.raw.last().copied()
    }

    /// CSV with `iteration,loss` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,loss\n");
        for (i, l) in self.raw.iter().enumerate() {
            s.push_str(&format!("{i},{l:e}\n"));
        }
        s
    }
}

/// Outcome of [`optimize_oriented_points`].
#[derive(Clone, Debug)]
pub struct HybridResult<const D: usize> {
    pub cloud: OrientedPointCloud<D>,
    /// Indicator of the final cloud.
    pub indicator: ScalarGrid,
    /// Loss before each update.
    pub losses: LossHistory,
}

/// Fits point positions and normals so the reconstructed indicator matches
/// `target_chi`. Normals are projected back to unit length and positions
/// clamped into the domain after every Adam step.
pub fn optimize_oriented_points<const D: usize>(
    target_chi: &ScalarGrid,
    init: &OrientedPointCloud<D>,
    cfg: &HybridConfig,
) -> Result<HybridResult<D>> {
    cfg.validate()?;
    target_chi.expect_dim(D)?;
    if target_chi.res() != cfg.res {
        return Err(Error::ResolutionMismatch(target_chi.res(), cfg.res));
    }
    if init.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 points, got {}", init.len())));
    }
    let dpsr = Dpsr::new(D, cfg.res, cfg.sigma, cfg.scale)?;
    let weights = if cfg.edge_weighting { Some(edge_weight_map(target_chi)?) } else { None };
    let k = init.len();
    let mut params: Vec<f64> = init.positions().iter().chain(init.normals()).flatten().copied().collect();
    let adam = Adam::new(cfg.lr);
    let mut state = AdamState::new(params.len());
    let mut losses = Vec::with_capacity(cfg.iterations);
    let split = |p: &[f64]| -> Result<OrientedPointCloud<D>> {
        let pos = p[..k * D].chunks_exact(D).map(|c| std::array::from_fn(|j| c[j])).collect();
        let nrm = p[k * D..].chunks_exact(D).map(|c| std::array::from_fn(|j| c[j])).collect();
        OrientedPointCloud::new(pos, nrm)
    };
    for it in 0..cfg.iterations {
        let cloud = split(&params).map_err(|_| Error::Divergence { iteration: it, loss: f64::NAN })?;
        let (chi, mut tape) = dpsr.forward(&cloud)?;
        let (loss, cot) = match &weights {
            Some(w) => wmse_loss(&chi, target_chi, w)?,
            None => mse_loss(&chi, target_chi)?,
        };
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration: it, loss });
        }
        log::debug!("stage=hybrid iter={it} loss={loss:.6e}");
        losses.push(loss);
        let grad = tape.backward(&cot)?.flatten();
        adam.step(&mut params, &grad, &mut state);
        project::<D>(&mut params, k * D);
    }
    let cloud = split(&params)?;
    let indicator = dpsr.indicator(&cloud)?;
    Ok(HybridResult { cloud, indicator, losses: LossHistory { raw: losses } })
}

// Clamp positions into the unit domain and rescale normals to unit length.
fn project<const D: usize>(params: &mut [f64], split: usize) {
    for x in &mut params[..split] {
        *x = x.clamp(0.0, 1.0);
    }
    for n in params[split..].chunks_exact_mut(D) {
        let l = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        if l > 0.0 {
            n.iter_mut().for_each(|x| *x /= l);
        }
    }
}
