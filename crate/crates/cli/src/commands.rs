use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use hybridshape::field::{Dpsr, ScalarGrid};
use hybridshape::flow::{register_surfaces, Flowable, GradientMode, RegistrationConfig};
use hybridshape::hybrid::{optimize_oriented_points, run_toy2d, write_toy2d_panels, DeformBaselineConfig, HybridConfig, LossWeights, Toy2dConfig};
use hybridshape::mesh::io::{load_mesh, read_loops, save_mesh, write_loops};
use hybridshape::mesh::{euler_characteristic, genus, marching_cubes, sample_surface, self_intersection_ratio};
use hybridshape::metrics::{evaluate, SurfaceMetrics};
use hybridshape::topo::{correct_topology, TopoConfig};
use hybridshape::{fixtures, Contour, Error, SurfaceMesh};

use crate::config::{Key, Settings};
use crate::manifest::RunManifest;
use crate::UsageError;

macro_rules! keys {
    ($($name:literal = $default:literal : $help:literal),* $(,)?) => {
        &[$(Key { name: $name, default: $default, help: $help }),*]
    };
}

pub const RECONSTRUCT_KEYS: &[Key] = keys![
    "fixture" = "dented": "analytic target shape (sphere, torus, dented, handle, tunnel)",
    "target_grid" = "": "HGRD indicator used as target instead of the fixture",
    "truth_res" = "192": "marching-cubes resolution of the reference fixture mesh",
    "target_samples" = "20000": "oriented samples of the reference mesh forming the target indicator",
    "points" = "2048": "oriented points optimized (initialized on a sphere)",
    "init_radius" = "0.3": "radius of the initial point sphere",
    "res" = "64": "indicator grid resolution",
    "sigma" = "2": "spectral smoothing bandwidth in cells",
    "scale" = "0.5": "indicator scale m",
    "lr" = "0.003": "Adam learning rate for points and normals",
    "iterations" = "1000": "optimization iterations",
    "edge_weighting" = "true": "edge-weighted loss (false: plain squared error)",
    "topofix" = "auto": "topology correction: auto (if genus > 0), on, off",
    "tau" = "0.5": "topology offset in cells",
    "smooth_std" = "1": "signed distance smoothing std in cells",
    "threshold" = "0": "indicator binarization threshold",
    "attempts" = "3": "topology offset attempts",
    "reg_iters" = "75": "registration iterations",
    "reg_lr" = "0.0003": "registration learning rate",
    "reg_samples" = "20000": "registration samples per surface and iteration",
    "reg_h" = "0.2": "RK4 step size",
    "eval_samples" = "100000": "samples per surface for metrics",
    "seed" = "0": "random seed",
];

pub const TOPOFIX_KEYS: &[Key] = keys![
    "tau" = "0.5": "topology offset in cells (negative erodes)",
    "smooth_std" = "1": "signed distance smoothing std in cells",
    "threshold" = "0": "indicator binarization threshold",
    "attempts" = "3": "topology offset attempts",
    "reg_iters" = "75": "registration iterations",
    "reg_lr" = "0.0003": "registration learning rate",
    "reg_samples" = "20000": "registration samples per surface and iteration",
    "reg_h" = "0.2": "RK4 step size",
    "seed" = "0": "random seed",
];

pub const REGISTER_KEYS: &[Key] = keys![
    "iterations" = "75": "Adam iterations",
    "lr" = "0.0003": "learning rate",
    "samples" = "20000": "samples per surface and iteration",
    "h" = "0.2": "RK4 step size",
    "normal_weight" = "0": "weight of the normal-distance term",
    "gradient" = "discrete": "gradient mode: discrete or adjoint",
    "seed" = "0": "random seed",
];

pub const EVAL_KEYS: &[Key] = keys![
    "samples" = "100000": "samples per surface",
    "seed" = "0": "random seed",
];

pub const TOY2D_KEYS: &[Key] = keys![
    "pivots" = "40": "polygon target vertices",
    "circle_vertices" = "200": "source circle vertices",
    "circle_radius" = "0.25": "source circle radius",
    "baseline_iters" = "3000": "explicit deformation iterations",
    "baseline_lr" = "0.0001": "explicit deformation learning rate",
    "baseline_samples" = "1000": "samples per contour and iteration",
    "w_cd" = "1": "chamfer weight",
    "w_nd" = "0.02": "normal distance weight",
    "w_edge" = "0.005": "edge length weight",
    "w_nc" = "0.005": "normal consistency weight",
    "hybrid_points" = "1000": "oriented points",
    "hybrid_res" = "128": "indicator resolution",
    "hybrid_lr" = "0.003": "oriented point learning rate",
    "hybrid_iters" = "1000": "oriented point iterations",
    "sigma" = "2": "spectral smoothing bandwidth in cells",
    "target_samples" = "10000": "target samples forming its indicator",
    "eval_samples" = "10000": "samples per contour for the chamfer comparison",
    "seed" = "0": "random seed",
];

pub const GRIDGEN_KEYS: &[Key] = keys![
    "fixture" = "sphere": "analytic shape (sphere, torus, dented, handle, tunnel)",
    "res" = "64": "grid resolution",
];

fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn fixture(name: &str) -> Result<fn(&[f64]) -> f64> {
    fixtures::named_sdf(name)
        .ok_or_else(|| UsageError(format!("unknown fixture '{name}' (expected one of {:?})", fixtures::FIXTURE_NAMES)).into())
}

fn registration(s: &Settings, prefix: &str, iters_key: &str) -> Result<RegistrationConfig> {
    let key = |k: &str| format!("{prefix}{k}");
    Ok(RegistrationConfig {
        iterations: s.get(iters_key)?,
        lr: s.get(&key("lr"))?,
        samples: s.get(&key("samples"))?,
        h: s.get(&key("h"))?,
        seed: s.get("seed")?,
        ..Default::default()
    })
}

fn topo_config(s: &Settings) -> Result<TopoConfig> {
    Ok(TopoConfig {
        tau: s.get("tau")?,
        smooth_std: s.get("smooth_std")?,
        threshold: s.get("threshold")?,
        attempts: s.get("attempts")?,
        registration: registration(s, "reg_", "reg_iters")?,
    })
}

fn metrics_table(m: &SurfaceMetrics) -> (String, String) {
    let csv = format!("ASSD,HD90,NC,SI\n{:.6e},{:.6e},{:.6},{:.6}\n", m.assd, m.hd90, m.nc, m.si);
    let mut text = String::new();
    let _ = writeln!(text, "{:>12} {:>12} {:>10} {:>10}", "ASSD", "HD90", "NC", "SI");
    let _ = writeln!(text, "{:>12.6e} {:>12.6e} {:>10.6} {:>10.6}", m.assd, m.hd90, m.nc, m.si);
    (csv, text)
}

pub fn gridgen(s: &Settings, out: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("gridgen", s.map());
    create_dir(out)?;
    let f = fixture(s.str("fixture"))?;
    let res: usize = s.get("res")?;
    let grid = m.stage("grid", || fixtures::sdf_grid(3, res, f))?;
    let mesh = m.stage("extract", || marching_cubes(&grid, 0.0))?;
    let (g, o) = (out_path(out, "grid.hgrd"), out_path(out, "mesh.obj"));
    grid.save(&g)?;
    save_mesh(&mesh, &o)?;
    m.output("grid", &g);
    m.output("mesh", &o);
    println!("grid={} mesh={} faces={} euler={}", g.display(), o.display(), mesh.face_count(), euler_characteristic(&mesh));
    Ok(m)
}

pub fn reconstruct(s: &Settings, out: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("reconstruct", s.map());
    create_dir(out)?;
    let seed: u64 = s.get("seed")?;
    let cfg = HybridConfig {
        points: s.get("points")?,
        res: s.get("res")?,
        sigma: s.get("sigma")?,
        scale: s.get("scale")?,
        lr: s.get("lr")?,
        iterations: s.get("iterations")?,
        edge_weighting: s.get("edge_weighting")?,
        seed,
    };
    cfg.validate()?;
    let dpsr = Dpsr::new(3, cfg.res, cfg.sigma, cfg.scale)?;
    let (target, truth) = m.stage("target", || -> Result<(ScalarGrid, SurfaceMesh)> {
        if s.str("target_grid").is_empty() {
            let truth = marching_cubes(&fixtures::sdf_grid(3, s.get("truth_res")?, fixture(s.str("fixture"))?)?, 0.0)?;
            let target = dpsr.indicator(&sample_surface(&truth, s.get("target_samples")?, seed)?)?;
            Ok((target, truth))
        } else {
            let target = ScalarGrid::load(s.str("target_grid"))?;
            let truth = marching_cubes(&target, 0.0)?;
            Ok((target, truth))
        }
    })?;
    let init = fixtures::fibonacci_sphere(cfg.points, [0.5; 3], s.get("init_radius")?)?;
    let fit = m.stage("optimize", || optimize_oriented_points(&target, &init, &cfg))?;
    let mut mesh = m.stage("extract", || marching_cubes(&fit.indicator, 0.0))?;
    let genus_before = genus(&mesh).ok();
    let run_topofix = match s.str("topofix") {
        "on" => true,
        "off" => false,
        "auto" => genus_before != Some(0),
        other => return Err(UsageError(format!("topofix must be auto, on or off, got '{other}'")).into()),
    };
    if run_topofix {
        let tc = topo_config(s)?;
        let fixed = m.stage("topofix", || correct_topology(&fit.indicator, &tc, &mesh))?;
        mesh = fixed.mesh;
    }
    let eval_samples: usize = s.get("eval_samples")?;
    let metrics = m.stage("metrics", || evaluate(&mesh, &truth, eval_samples, seed))?;
    let (csv, text) = metrics_table(&metrics);
    print!("{text}");
    let files = [
        ("indicator", "indicator.hgrd"),
        ("target", "target.hgrd"),
        ("mesh", "mesh.obj"),
        ("metrics", "metrics.csv"),
        ("loss", "loss.csv"),
        ("points", "points.csv"),
    ];
    for (role, name) in files {
        m.output(role, &out_path(out, name));
    }
    fit.indicator.save(out_path(out, "indicator.hgrd"))?;
    target.save(out_path(out, "target.hgrd"))?;
    save_mesh(&mesh, out_path(out, "mesh.obj"))?;
    std::fs::write(out_path(out, "metrics.csv"), csv)?;
    std::fs::write(out_path(out, "loss.csv"), fit.losses.to_csv())?;
    let mut pts = String::from("x,y,z,nx,ny,nz\n");
    for (p, n) in fit.cloud.positions().iter().zip(fit.cloud.normals()) {
        let _ = writeln!(pts, "{:e},{:e},{:e},{:e},{:e},{:e}", p[0], p[1], p[2], n[0], n[1], n[2]);
    }
    std::fs::write(out_path(out, "points.csv"), pts)?;
    log::info!(
        "stage=reconstruct genus_before={genus_before:?} topofix={run_topofix} euler={} faces={}",
        euler_characteristic(&mesh),
        mesh.face_count()
    );
    Ok(m)
}

pub fn topofix(s: &Settings, grid: &Path, mesh_path: &Path, out: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("topofix", s.map());
    m.input("grid", grid);
    m.input("mesh", mesh_path);
    create_dir(out)?;
    let chi = ScalarGrid::load(grid).with_context(|| format!("loading {}", grid.display()))?;
    let defective = load_mesh(mesh_path).with_context(|| format!("loading {}", mesh_path.display()))?;
    let cfg = topo_config(s)?;
    let result = m.stage("topofix", || correct_topology(&chi, &cfg, &defective))?;
    let mesh_out = out_path(out, "corrected.obj");
    let diag_out = out_path(out, "diagnostics.json");
    save_mesh(&result.mesh, &mesh_out)?;
    let diagnostics = json!({
        "genus_before": genus(&defective).ok(),
        "genus_after": genus(&result.mesh).ok(),
        "euler_before": euler_characteristic(&defective),
        "euler_after": euler_characteristic(&result.mesh),
        "tau": result.tau,
        "attempts": result.attempts,
        "final_chamfer": result.losses.last(),
        "si_offset": self_intersection_ratio(&result.offset_mesh),
        "si_after": self_intersection_ratio(&result.mesh),
    });
    std::fs::write(&diag_out, serde_json::to_string_pretty(&diagnostics)?)?;
    m.output("mesh", &mesh_out);
    m.output("diagnostics", &diag_out);
    println!("{diagnostics}");
    Ok(m)
}

fn register_generic<const D: usize, S: Flowable<D>>(
    source: &S,
    target: &S,
    cfg: &RegistrationConfig,
    m: &mut RunManifest,
) -> Result<(S, hybridshape::flow::VelocityField, Vec<f64>)> {
    let reg = m.stage("register", || register_surfaces(source, target, cfg))?;
    Ok((reg.deformed, reg.field, reg.losses))
}

fn is_contour(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "loops")
}

fn load_contour(p: &Path) -> Result<Contour> {
    Ok(read_loops(std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?)?)
}

pub fn register(s: &Settings, source: &Path, target: &Path, out: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("register", s.map());
    m.input("source", source);
    m.input("target", target);
    create_dir(out)?;
    let gradient = match s.str("gradient") {
        "discrete" => GradientMode::Discrete,
        "adjoint" => GradientMode::Adjoint,
        other => return Err(UsageError(format!("gradient must be discrete or adjoint, got '{other}'")).into()),
    };
    let cfg = RegistrationConfig { normal_weight: s.get("normal_weight")?, gradient, ..registration(s, "", "iterations")? };
    let field_out = out_path(out, "field.hvel");
    let loss_out = out_path(out, "loss.csv");
    let losses = if is_contour(source) != is_contour(target) {
        return Err(UsageError("source and target must both be meshes or both be .loops contours".into()).into());
    } else if is_contour(source) {
        let (deformed, field, losses) = register_generic(&load_contour(source)?, &load_contour(target)?, &cfg, &mut m)?;
        let p = out_path(out, "deformed.loops");
        write_loops(&deformed, std::fs::File::create(&p)?)?;
        m.output("deformed", &p);
        field.save(&field_out)?;
        losses
    } else {
        let (deformed, field, losses) = register_generic(&load_mesh(source)?, &load_mesh(target)?, &cfg, &mut m)?;
        let p = out_path(out, "deformed.obj");
        save_mesh(&deformed, &p)?;
        m.output("deformed", &p);
        field.save(&field_out)?;
        losses
    };
    let csv: String = std::iter::once("iteration,loss\n".to_string())
        .chain(losses.iter().enumerate().map(|(i, l)| format!("{i},{l:e}\n")))
        .collect();
    std::fs::write(&loss_out, csv)?;
    m.output("field", &field_out);
    m.output("loss", &loss_out);
    println!("iterations={} first_loss={:e} last_loss={:e}", losses.len(), losses.first().unwrap_or(&f64::NAN), losses.last().unwrap_or(&f64::NAN));
    Ok(m)
}

pub fn eval(s: &Settings, pred: &Path, gt: &Path, out: Option<&Path>) -> Result<Option<RunManifest>> {
    let mut m = RunManifest::new("eval", s.map());
    m.input("pred", pred);
    m.input("gt", gt);
    let (a, b) = (load_mesh(pred)?, load_mesh(gt)?);
    let (samples, seed): (usize, u64) = (s.get("samples")?, s.get("seed")?);
    let metrics = m.stage("metrics", || evaluate(&a, &b, samples, seed))?;
    let (csv, text) = metrics_table(&metrics);
    print!("{csv}\n{text}");
    let Some(out) = out else { return Ok(None) };
    create_dir(out)?;
    let p = out_path(out, "metrics.csv");
    std::fs::write(&p, csv)?;
    m.output("metrics", &p);
    Ok(Some(m))
}

pub fn toy2d(s: &Settings, out: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("toy2d", s.map());
    create_dir(out)?;
    let base = Toy2dConfig::default();
    let cfg = Toy2dConfig {
        pivots: s.get("pivots")?,
        circle_vertices: s.get("circle_vertices")?,
        circle_radius: s.get("circle_radius")?,
        baseline: DeformBaselineConfig {
            weights: LossWeights { chamfer: s.get("w_cd")?, normal: s.get("w_nd")?, edge: s.get("w_edge")?, consistency: s.get("w_nc")? },
            lr: s.get("baseline_lr")?,
            iterations: s.get("baseline_iters")?,
            samples: s.get("baseline_samples")?,
            ..base.baseline
        },
        hybrid: HybridConfig {
            points: s.get("hybrid_points")?,
            res: s.get("hybrid_res")?,
            lr: s.get("hybrid_lr")?,
            iterations: s.get("hybrid_iters")?,
            sigma: s.get("sigma")?,
            ..base.hybrid
        },
        target_samples: s.get("target_samples")?,
        eval_samples: s.get("eval_samples")?,
        seed: s.get("seed")?,
    };
    let r = m.stage("toy2d", || run_toy2d(&cfg))?;
    write_toy2d_panels(&r, out)?;
    for name in hybridshape::hybrid::PANEL_FILES {
        m.output(name.trim_end_matches(".svg"), &out_path(out, name));
    }
    let summary = json!({
        "baseline_chamfer": r.baseline_chamfer,
        "hybrid_chamfer": r.hybrid_chamfer,
        "ratio": r.hybrid_chamfer / r.baseline_chamfer,
        "hybrid_loops": r.hybrid_contour.loops().len(),
    });
    let p = out_path(out, "summary.json");
    std::fs::write(&p, serde_json::to_string_pretty(&summary)?)?;
    write_loops(&r.baseline.contour, std::fs::File::create(out_path(out, "baseline.loops"))?)?;
    write_loops(&r.hybrid_contour, std::fs::File::create(out_path(out, "hybrid.loops"))?)?;
    m.output("summary", &p);
    println!("{summary}");
    Ok(m)
}

/// Exit code for a failed run.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::TopologyCorrectionFailed { .. }) => 3,
        Some(Error::NonFinite(_) | Error::VelocityBlowUp | Error::Divergence { .. } | Error::DegenerateNormalization) => 2,
        _ => 1,
    }
}
