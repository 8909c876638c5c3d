//! Optimization drivers: oriented point clouds fitted against a target
//! indicator grid, and the explicit contour-deformation baseline they are
//! compared with.

mod baseline;
mod points;
mod shapes;
mod toy;

pub use baseline::{deform_baseline_2d, edge_length_loss, normal_consistency_loss, BaselineResult, DeformBaselineConfig, LossWeights};
pub use points::{optimize_oriented_points, HybridConfig, HybridResult, LossHistory, SMOOTHING_WINDOW};
pub use shapes::{make_circle, make_polygon_target, POLYGON_CENTER, POLYGON_RADII};
pub use toy::{contour_chamfer, run_toy2d, run_toy2d_with, write_toy2d_panels, Toy2dConfig, Toy2dResult, PANEL_FILES};
