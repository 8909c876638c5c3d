use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::adam::{Adam, AdamState};
use super::network::{FieldConfig, VectorField, VelocityField};
use super::ode::{flow_points, integrate, integrate_grad, GradientMode, IntegrateOptions, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::mesh::{Contour, SampleSurface, SurfaceMesh};
use crate::metrics::{nearest_pairs, NearestIndex};
use crate::rng::{stream, Stream};

/// Surfaces whose vertices can be moved by a flow. Elements are triangles in
/// 3D and edges in 2D, so each one has exactly `D` corners.
pub trait Flowable<const D: usize>: Sized + SampleSurface<D> {
    fn positions(&self) -> Vec<[f64; D]>;
    fn elements(&self) -> Vec<[usize; D]>;
    fn rebuild(&self, positions: Vec<[f64; D]>) -> Result<Self>;
    /// Outward normal scaled by the element measure (up to a constant).
    fn raw_normal(c: &[[f64; D]; D]) -> [f64; D];
    /// Pulls a cotangent on [`Self::raw_normal`] back to the corners.
    fn raw_normal_vjp(c: &[[f64; D]; D], g: [f64; D]) -> [[f64; D]; D];
    /// Barycentric weights of a uniform sample on one element.
    fn draw_weights(rng: &mut ChaCha8Rng) -> [f64; D];
}

impl Flowable<3> for SurfaceMesh {
    fn positions(&self) -> Vec<[f64; 3]> {
        self.vertices().to_vec()
    }

    fn elements(&self) -> Vec<[usize; 3]> {
        self.triangles().to_vec()
    }

    fn rebuild(&self, positions: Vec<[f64; 3]>) -> Result<Self> {
        self.with_vertices(positions)
    }

    fn raw_normal(c: &[[f64; 3]; 3]) -> [f64; 3] {
        crate::mesh::cross(crate::mesh::sub(c[1], c[0]), crate::mesh::sub(c[2], c[0]))
    }

    fn raw_normal_vjp(c: &[[f64; 3]; 3], g: [f64; 3]) -> [[f64; 3]; 3] {
        use crate::mesh::{cross, sub};
        let (e1, e2) = (sub(c[1], c[0]), sub(c[2], c[0]));
        let g1 = cross(e2, g);
        let g2 = cross(g, e1);
        [std::array::from_fn(|k| -g1[k] - g2[k]), g1, g2]
    }

    fn draw_weights(rng: &mut ChaCha8Rng) -> [f64; 3] {
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let s = r1.sqrt();
        [1.0 - s, s * (1.0 - r2), s * r2]
    }
}

impl Flowable<2> for Contour {
    fn positions(&self) -> Vec<[f64; 2]> {
        self.vertices()
    }

    fn elements(&self) -> Vec<[usize; 2]> {
        self.edges()
    }

    fn rebuild(&self, positions: Vec<[f64; 2]>) -> Result<Self> {
        self.with_vertices(&positions)
    }

    fn raw_normal(c: &[[f64; 2]; 2]) -> [f64; 2] {
        [c[1][1] - c[0][1], c[0][0] - c[1][0]]
    }

    fn raw_normal_vjp(_: &[[f64; 2]; 2], g: [f64; 2]) -> [[f64; 2]; 2] {
        let gd = [-g[1], g[0]];
        [[-gd[0], -gd[1]], gd]
    }

    fn draw_weights(rng: &mut ChaCha8Rng) -> [f64; 2] {
        let t: f64 = rng.gen();
        [1.0 - t, t]
    }
}

fn norm<const D: usize>(v: &[f64; D]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Samples on a surface whose vertices are `verts`, with enough bookkeeping
/// to pull position and normal cotangents back to the vertices.
pub struct DiffSamples<const D: usize> {
    pub positions: Vec<[f64; D]>,
    pub normals: Vec<[f64; D]>,
    elements: Vec<usize>,
    weights: Vec<[f64; D]>,
}

/// Area- or length-weighted samples of `elements` at vertex positions `verts`.
pub fn sample_elements<const D: usize, S: Flowable<D>>(
    verts: &[[f64; D]],
    elements: &[[usize; D]],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DiffSamples<D>> {
    let corners = |e: &[usize; D]| -> [[f64; D]; D] { std::array::from_fn(|k| verts[e[k]]) };
    let raw: Vec<[f64; D]> = elements.iter().map(|e| S::raw_normal(&corners(e))).collect();
    let mut acc = 0.0;
    let cdf: Vec<f64> = raw
        .iter()
        .map(|r| {
            acc += norm(r);
            acc
        })
        .collect();
    if !(acc > 0.0) {
        return Err(if acc.is_nan() { Error::NonFinite("deformed surface") } else { Error::EmptySurface });
    }
    let mut out = DiffSamples {
        positions: Vec::with_capacity(count),
        normals: Vec::with_capacity(count),
        elements: Vec::with_capacity(count),
        weights: Vec::with_capacity(count),
    };
    for _ in 0..count {
        let x = rng.gen::<f64>() * acc;
        let e = cdf.partition_point(|&c| c <= x).min(cdf.len() - 1);
        let w = S::draw_weights(rng);
        let c = corners(&elements[e]);
        let l = norm(&raw[e]);
        out.positions.push(std::array::from_fn(|k| (0..D).map(|j| w[j] * c[j][k]).sum()));
        out.normals.push(raw[e].map(|x| x / l));
        out.elements.push(e);
        out.weights.push(w);
    }
    Ok(out)
}

impl<const D: usize> DiffSamples<D> {
    /// Vertex cotangents from per-sample position (and optional normal) cotangents.
    pub fn backprop<S: Flowable<D>>(
        &self,
        verts: &[[f64; D]],
        elements: &[[usize; D]],
        gpos: &[[f64; D]],
        gnrm: Option<&[[f64; D]]>,
    ) -> Vec<[f64; D]> {
        let mut out = vec![[0.0; D]; verts.len()];
        for (s, &e) in self.elements.iter().enumerate() {
            let el = elements[e];
            for j in 0..D {
                for k in 0..D {
                    out[el[j]][k] += self.weights[s][j] * gpos[s][k];
                }
            }
            if let Some(gn) = gnrm {
                let c: [[f64; D]; D] = std::array::from_fn(|k| verts[el[k]]);
                let r = S::raw_normal(&c);
                let l = norm(&r);
                let n = self.normals[s];
                let dot: f64 = (0..D).map(|k| n[k] * gn[s][k]).sum();
                let gr: [f64; D] = std::array::from_fn(|k| (gn[s][k] - dot * n[k]) / l);
                let gc = S::raw_normal_vjp(&c, gr);
                for j in 0..D {
                    for k in 0..D {
                        out[el[j]][k] += gc[j][k];
                    }
                }
            }
        }
        out
    }
}

/// Settings for [`register_surfaces`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegistrationConfig {
    pub iterations: usize,
    pub lr: f64,
    /// Points sampled from each surface per iteration.
    pub samples: usize,
    pub h: f64,
    pub seed: u64,
    /// Weight of the normal-distance term added to the chamfer loss.
    pub normal_weight: f64,
    pub gradient: GradientMode,
    /// Network shape; `dim` and `seed` are overridden by the surfaces and `seed`.
    pub field: FieldConfig,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            iterations: 75,
            lr: 3e-4,
            samples: 20_000,
            h: DEFAULT_STEP,
            seed: 0,
            normal_weight: 0.0,
            gradient: GradientMode::Discrete,
            field: FieldConfig::new(3, 0),
        }
    }
}

/// Result of a registration run.
#[derive(Clone, Debug)]
pub struct Registration<S> {
    pub field: VelocityField,
    /// The source with flowed vertices and unchanged connectivity.
    pub deformed: S,
    /// Loss before each parameter update.
    pub losses: Vec<f64>,
}

/// Weighted chamfer plus weighted normal distance between differentiable
/// samples and a fixed target cloud, with cotangents on the samples.
pub(crate) fn chamfer_with_grad<const D: usize>(
    src: &DiffSamples<D>,
    target: &NearestIndex<D>,
    target_pts: &[[f64; D]],
    chamfer_weight: f64,
    normal_weight: f64,
) -> (f64, Vec<[f64; D]>, Option<Vec<[f64; D]>>) {
    let n = src.positions.len() as f64 / chamfer_weight;
    let m = target_pts.len() as f64 / chamfer_weight;
    let src_index = NearestIndex::new(&src.positions, &src.normals);
    let ab = nearest_pairs(&src.positions, target);
    let ba = nearest_pairs(target_pts, &src_index);
    let mut gpos = vec![[0.0; D]; src.positions.len()];
    let mut loss = 0.0;
    for (i, &(j, d2)) in ab.iter().enumerate() {
        loss += d2 / n;
        let (p, q) = (src.positions[i], target.position(j));
        for k in 0..D {
            gpos[i][k] += 2.0 * (p[k] - q[k]) / n;
        }
    }
    for (j, &(i, d2)) in ba.iter().enumerate() {
        loss += d2 / m;
        let (p, q) = (src.positions[i], target_pts[j]);
        for k in 0..D {
            gpos[i][k] += 2.0 * (p[k] - q[k]) / m;
        }
    }
    if normal_weight == 0.0 {
        return (loss, gpos, None);
    }
    let (n, m) = (src.positions.len() as f64, target_pts.len() as f64);
    let mut gn = vec![[0.0; D]; src.positions.len()];
    let dot = |a: &[f64; D], b: &[f64; D]| (0..D).map(|k| a[k] * b[k]).sum::<f64>();
    for (i, &(j, _)) in ab.iter().enumerate() {
        let t = target.normal(j);
        let c = dot(&src.normals[i], t);
        loss += normal_weight * 0.5 * (1.0 - c.abs()) / n;
        for k in 0..D {
            gn[i][k] -= normal_weight * 0.5 * c.signum() * t[k] / n;
        }
    }
    for (j, &(i, _)) in ba.iter().enumerate() {
        let t = target.normal(j);
        let c = dot(&src.normals[i], t);
        loss += normal_weight * 0.5 * (1.0 - c.abs()) / m;
        for k in 0..D {
            gn[i][k] -= normal_weight * 0.5 * c.signum() * t[k] / m;
        }
    }
    (loss, gpos, Some(gn))
}

fn flatten<const D: usize>(v: &[[f64; D]]) -> Vec<f64> {
    v.iter().flatten().copied().collect()
}

fn unflatten<const D: usize>(v: &[f64]) -> Vec<[f64; D]> {
    v.chunks_exact(D).map(|c| std::array::from_fn(|k| c[k])).collect()
}

/// Fits a stationary velocity field whose time-one flow carries `source` onto
/// `target`, minimizing the chamfer distance between surface samples.
pub fn register_surfaces<const D: usize, S: Flowable<D>>(
    source: &S,
    target: &S,
    cfg: &RegistrationConfig,
) -> Result<Registration<S>> {
    let field = VelocityField::new(FieldConfig { dim: D, seed: cfg.seed, ..cfg.field })?;
    register_from(field, source, target, cfg)
}

/// As [`register_surfaces`], starting from a given field.
pub fn register_from<const D: usize, S: Flowable<D>>(
    mut field: VelocityField,
    source: &S,
    target: &S,
    cfg: &RegistrationConfig,
) -> Result<Registration<S>> {
    if field.dim() != D {
        return Err(Error::DimensionMismatch { expected: D, got: field.dim() });
    }
    if cfg.samples == 0 {
        return Err(Error::invalid("registration needs at least one sample"));
    }
    let verts = flatten(&source.positions());
    let elements = source.elements();
    if verts.is_empty() || elements.is_empty() {
        return Err(Error::EmptySurface);
    }
    let target_verts = target.positions();
    let target_elements = target.elements();
    let mut rng = stream(cfg.seed, Stream::Sampling);
    let adam = Adam::new(cfg.lr);
    let mut state = AdamState::new(field.num_params());
    let mut losses = Vec::with_capacity(cfg.iterations);
    let opts = IntegrateOptions { h: cfg.h, keep_stages: cfg.gradient == GradientMode::Discrete, ..Default::default() };
    for it in 0..cfg.iterations {
        let traj = integrate(&field, &verts, opts).map_err(|e| match e {
            Error::VelocityBlowUp => Error::Divergence { iteration: it, loss: f64::NAN },
            e => e,
        })?;
        let moved: Vec<[f64; D]> = unflatten(&traj.final_points);
        // both surfaces see the same random draws, so coincident surfaces give
        // coincident samples and an exactly zero gradient
        let mut target_rng = rng.clone();
        let tgt = sample_elements::<D, S>(&target_verts, &target_elements, cfg.samples, &mut target_rng)?;
        let index = NearestIndex::new(&tgt.positions, &tgt.normals);
        let src = sample_elements::<D, S>(&moved, &elements, cfg.samples, &mut rng)
            .map_err(|e| match e {
                Error::NonFinite(_) => Error::Divergence { iteration: it, loss: f64::NAN },
                e => e,
            })?;
        let (loss, gpos, gn) = chamfer_with_grad(&src, &index, &tgt.positions, 1.0, cfg.normal_weight);
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration: it, loss });
        }
        log::debug!("register iteration={it} loss={loss:.6e}");
        losses.push(loss);
        let gv = src.backprop::<S>(&moved, &elements, &gpos, gn.as_deref());
        let grad = integrate_grad(&field, &traj, &flatten(&gv), cfg.gradient)?;
        if !grad.params.iter().all(|g| g.is_finite()) {
            return Err(Error::Divergence { iteration: it, loss: f64::NAN });
        }
        adam.step(field.params_mut(), &grad.params, &mut state);
    }
    let moved = flow_points(&field, &verts, cfg.h)?;
    let deformed = source.rebuild(unflatten(&moved))?;
    Ok(Registration { field, deformed, losses })
}
