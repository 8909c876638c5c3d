//! Topology correction: binarize, keep the largest component, offset the
//! smoothed signed distance, re-extract, then register back to the input.

mod edt;

pub use edt::{exact_signed_distance, signed_distance_grid, signed_distance_grid_with, squared_distance_transform};

use crate::error::{Error, Result};
use crate::field::ScalarGrid;
use crate::flow::{register_surfaces, RegistrationConfig, VelocityField};
use crate::mesh::{euler_characteristic, genus, largest_component, marching_cubes, SurfaceMesh};

/// Level offset for filling thin tunnels (dilation).
pub const TAU_FILL: f64 = 0.5;
/// Level offset for cutting thin handles (erosion).
pub const TAU_CUT: f64 = -1.8;

/// Settings for [`correct_topology`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopoConfig {
    /// Level offset in cells. The surface is extracted where the smoothed
    /// signed distance equals `−tau`: positive values dilate, negative erode.
    pub tau: f64,
    pub smooth_std: f64,
    /// Cells with `χ > threshold` are inside.
    pub threshold: f64,
    /// Extraction attempts; each retry grows `|tau|` by half a cell.
    pub attempts: usize,
    pub registration: RegistrationConfig,
}

impl Default for TopoConfig {
    fn default() -> Self {
        Self { tau: TAU_FILL, smooth_std: 1.0, threshold: 0.0, attempts: 3, registration: RegistrationConfig::default() }
    }
}

impl TopoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.smooth_std > 0.0 && self.smooth_std.is_finite()) {
            return Err(Error::invalid("smoothing std must be > 0"));
        }
        if !self.tau.is_finite() || self.attempts == 0 {
            return Err(Error::invalid("tau must be finite and attempts positive"));
        }
        Ok(())
    }
}

/// Output of [`correct_topology`].
#[derive(Clone, Debug)]
pub struct TopoResult {
    /// Genus-0 mesh registered back toward the input surface.
    pub mesh: SurfaceMesh,
    /// The offset surface before registration.
    pub offset_mesh: SurfaceMesh,
    /// Offset that produced a genus-0 surface.
    pub tau: f64,
    pub attempts: usize,
    pub field: VelocityField,
    pub losses: Vec<f64>,
}

/// Binary mask of the largest connected inside region of `chi`.
pub fn binarize(chi: &ScalarGrid, threshold: f64) -> Result<ScalarGrid> {
    Ok(largest_component(&chi.map(|v| if v > threshold { 1.0 } else { 0.0 })?))
}

/// Largest component of the `−tau` level set of a smoothed signed distance grid.
pub fn offset_surface(sdf: &ScalarGrid, tau: f64) -> Result<SurfaceMesh> {
    Ok(largest_component(&marching_cubes(sdf, -tau)?))
}

/// Ladder of offsets tried by [`correct_topology`].
pub fn tau_ladder(tau: f64, attempts: usize) -> Vec<f64> {
    let step = if tau < 0.0 { -0.5 } else { 0.5 };
    (0..attempts).map(|k| tau + step * k as f64).collect()
}

/// Replaces the surface of `chi` by a genus-0 offset surface and registers it
/// back onto `defective` (normally `marching_cubes(chi, 0)`).
pub fn correct_topology(chi: &ScalarGrid, cfg: &TopoConfig, defective: &SurfaceMesh) -> Result<TopoResult> {
    cfg.validate()?;
    if chi.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: chi.dim() });
    }
    if defective.is_empty() {
        return Err(Error::EmptySurface);
    }
    let mask = binarize(chi, cfg.threshold)?;
    let sdf = signed_distance_grid_with(&mask, cfg.smooth_std)?;
    let ladder = tau_ladder(cfg.tau, cfg.attempts);
    let mut found = None;
    for (k, &tau) in ladder.iter().enumerate() {
        let mesh = offset_surface(&sdf, tau)?;
        let ok = !mesh.is_empty() && euler_characteristic(&mesh) == 2 && genus(&mesh).is_ok_and(|g| g == 0);
        log::info!("topology offset tau={tau} faces={} euler={}", mesh.face_count(), euler_characteristic(&mesh));
        if ok {
            found = Some((mesh, tau, k + 1));
            break;
        }
    }
    let Some((offset_mesh, tau, attempts)) = found else {
        return Err(Error::TopologyCorrectionFailed { tau: *ladder.last().unwrap() });
    };
    let reg = register_surfaces(&offset_mesh, defective, &cfg.registration)?;
    Ok(TopoResult { mesh: reg.deformed, offset_mesh, tau, attempts, field: reg.field, losses: reg.losses })
}
