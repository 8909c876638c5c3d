use std::fmt::Write as _;
use std::path::Path;

use super::baseline::{deform_baseline_2d, BaselineResult, DeformBaselineConfig};
use super::points::{optimize_oriented_points, HybridConfig, HybridResult};
use super::shapes::{make_circle, make_polygon_target};
use crate::error::Result;
use crate::field::{Dpsr, OrientedPointCloud, ScalarGrid};
use crate::mesh::io::{contours_to_svg, SvgLayer};
use crate::mesh::{marching_squares, sample_surface, Contour};
use crate::metrics::chamfer_distance;

/// Settings of the 2D contour toy: polygon target, circle source, explicit
/// deformation baseline, then oriented-point optimization seeded from it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Toy2dConfig {
    pub pivots: usize,
    pub circle_vertices: usize,
    pub circle_radius: f64,
    pub baseline: DeformBaselineConfig,
    pub hybrid: HybridConfig,
    /// Oriented samples of the target used to build its indicator.
    pub target_samples: usize,
    /// Samples per contour for the final chamfer comparison.
    pub eval_samples: usize,
    pub seed: u64,
}

impl Default for Toy2dConfig {
    fn default() -> Self {
        Self {
            pivots: 40,
            circle_vertices: 200,
            circle_radius: 0.25,
            baseline: DeformBaselineConfig::default(),
            hybrid: HybridConfig { points: 1000, res: 128, edge_weighting: false, ..Default::default() },
            target_samples: 10_000,
            eval_samples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Toy2dResult {
    pub target: Contour,
    pub source: Contour,
    /// Indicator reconstructed from target samples.
    pub target_indicator: ScalarGrid,
    pub baseline: BaselineResult,
    pub hybrid_init: OrientedPointCloud<2>,
    pub hybrid: HybridResult<2>,
    /// Zero level set of the optimized indicator.
    pub hybrid_contour: Contour,
    pub baseline_chamfer: f64,
    pub hybrid_chamfer: f64,
}

/// Symmetric squared chamfer between two contours from `samples` points each.
pub fn contour_chamfer(a: &Contour, b: &Contour, samples: usize, seed: u64) -> Result<f64> {
    chamfer_distance(&sample_surface(a, samples, seed)?, &sample_surface(b, samples, seed)?)
}

/// Runs the toy on the seeded polygon target.
pub fn run_toy2d(cfg: &Toy2dConfig) -> Result<Toy2dResult> {
    run_toy2d_with(make_polygon_target(cfg.pivots, cfg.seed)?, cfg)
}

/// Runs the toy on a given target contour.
pub fn run_toy2d_with(target: Contour, cfg: &Toy2dConfig) -> Result<Toy2dResult> {
    let source = make_circle(cfg.circle_vertices, cfg.circle_radius, [0.5, 0.5])?;
    let h = cfg.hybrid;
    let dpsr = Dpsr::new(2, h.res, h.sigma, h.scale)?;
    let target_indicator = dpsr.indicator(&sample_surface(&target, cfg.target_samples, cfg.seed)?)?;
    log::info!("stage=baseline iterations={}", cfg.baseline.iterations);
    let baseline = deform_baseline_2d(&target, &source, &DeformBaselineConfig { seed: cfg.seed, ..cfg.baseline })?;
    let hybrid_init = sample_surface(&baseline.contour, h.points, cfg.seed.wrapping_add(1))?;
    log::info!("stage=hybrid iterations={}", h.iterations);
    let hybrid = optimize_oriented_points(&target_indicator, &hybrid_init, &h)?;
    let hybrid_contour = marching_squares(&hybrid.indicator, 0.0)?;
    let baseline_chamfer = contour_chamfer(&baseline.contour, &target, cfg.eval_samples, cfg.seed)?;
    let hybrid_chamfer = contour_chamfer(&hybrid_contour, &target, cfg.eval_samples, cfg.seed)?;
    log::info!("stage=toy2d baseline_chamfer={baseline_chamfer:.6e} hybrid_chamfer={hybrid_chamfer:.6e}");
    Ok(Toy2dResult {
        target,
        source,
        target_indicator,
        baseline,
        hybrid_init,
        hybrid,
        hybrid_contour,
        baseline_chamfer,
        hybrid_chamfer,
    })
}

const SIZE: f64 = 400.0;

fn dots(cloud: &OrientedPointCloud<2>, color: &str) -> String {
    let mut s = String::new();
    for (p, n) in cloud.positions().iter().zip(cloud.normals()) {
        let (x, y) = (p[0] * SIZE, (1.0 - p[1]) * SIZE);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.2" fill="{color}"/>"#);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="0.5"/>"#,
            x + 6.0 * n[0],
            y - 6.0 * n[1]
        );
    }
    s
}

fn heat(grid: &ScalarGrid) -> String {
    let res = grid.res();
    let cell = SIZE / res as f64;
    let m = grid.values().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
    let mut s = String::new();
    for i in 0..res {
        for j in 0..res {
            let v = grid.get(&[i, j]) / m;
            let (r, b) = if v > 0.0 { (255, (255.0 * (1.0 - v)) as u8) } else { ((255.0 * (1.0 + v)) as u8, 255) };
            let g = (255.0 * (1.0 - v.abs())) as u8;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="rgb({r},{g},{b})"/>"#,
                i as f64 * cell,
                SIZE - (j + 1) as f64 * cell
            );
        }
    }
    s
}

// Extra elements drawn below (`under`) and above (`over`) the contour layers.
fn panel(layers: &[SvgLayer<'_>], under: &str, over: &str) -> String {
    let base = contours_to_svg(layers, SIZE);
    let background = base.find("fill=\"white\"/>\n").map_or(0, |i| i + 15);
    let close = base.rfind("</svg>").unwrap_or(base.len());
    format!("{}{under}{}{over}{}", &base[..background], &base[background..close], &base[close..])
}

/// File names written by [`write_toy2d_panels`].
pub const PANEL_FILES: [&str; 5] = [
    "a_target.svg",
    "c_target_indicator.svg",
    "d_baseline.svg",
    "e_hybrid_init.svg",
    "g_hybrid.svg",
];

/// Writes the SVG panels and loss CSVs of a toy run into `dir`.
pub fn write_toy2d_panels(result: &Toy2dResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let layer = |contour, stroke| SvgLayer { contour, stroke, width: 1.5 };
    let target = layer(&result.target, "black");
    let panels = [
        panel(&[target.clone(), layer(&result.source, "steelblue")], "", ""),
        panel(std::slice::from_ref(&target), &heat(&result.target_indicator), ""),
        panel(&[target.clone(), layer(&result.baseline.contour, "darkorange")], "", ""),
        panel(std::slice::from_ref(&target), "", &dots(&result.hybrid_init, "seagreen")),
        panel(&[target.clone(), layer(&result.hybrid_contour, "crimson")], "", ""),
    ];
    for (name, body) in PANEL_FILES.iter().zip(panels) {
        std::fs::write(dir.join(name), body)?;
    }
    std::fs::write(dir.join("baseline_loss.csv"), result.baseline.losses.to_csv())?;
    std::fs::write(dir.join("hybrid_loss.csv"), result.hybrid.losses.to_csv())?;
    Ok(())
}
