use super::points::LossHistory;
use crate::error::{Error, Result};
use crate::flow::{chamfer_with_grad, sample_elements, Adam, AdamState, FieldConfig, Flowable, VectorField, VelocityField};
use crate::mesh::{Contour, Vec2};
use crate::metrics::NearestIndex;
use crate::rng::{stream, Stream};

/// Weights of the explicit-deformation loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub chamfer: f64,
    pub normal: f64,
    pub edge: f64,
    pub consistency: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { chamfer: 1.0, normal: 0.02, edge: 0.005, consistency: 0.005 }
    }
}

/// Settings for [`deform_baseline_2d`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeformBaselineConfig {
    pub weights: LossWeights,
    pub lr: f64,
    pub iterations: usize,
    /// Points sampled from each contour per iteration.
    pub samples: usize,
    /// Network shape; `dim` and `seed` are overridden.
    pub field: FieldConfig,
    pub seed: u64,
}

impl Default for DeformBaselineConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            lr: 1e-4,
            iterations: 3000,
            samples: 1000,
            field: FieldConfig::new(2, 0),
            seed: 0,
        }
    }
}

impl DeformBaselineConfig {
    pub fn validate(&self) -> Result<()> {
        let w = self.weights;
        if [w.chamfer, w.normal, w.edge, w.consistency].iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::invalid("loss weights must be finite and nonnegative"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.samples == 0 {
            return Err(Error::invalid("learning rate and sample count must be positive"));
        }
        Ok(())
    }
}

/// Outcome of [`deform_baseline_2d`].
#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub contour: Contour,
    pub field: VelocityField,
    pub losses: LossHistory,
}

/// Mean squared deviation of edge lengths from their mean, with vertex gradients.
pub fn edge_length_loss(verts: &[Vec2], edges: &[[usize; 2]]) -> (f64, Vec<Vec2>) {
    let lens: Vec<f64> = edges.iter().map(|e| dist(verts[e[0]], verts[e[1]])).collect();
    let m = edges.len() as f64;
    let mean = lens.iter().sum::<f64>() / m;
    let mut grad = vec![[0.0; 2]; verts.len()];
    let mut loss = 0.0;
    for (e, &l) in edges.iter().zip(&lens) {
        loss += (l - mean).powi(2) / m;
        // deviations sum to zero, so the mean's own dependence drops out
        let g = 2.0 * (l - mean) / m;
        let (a, b) = (verts[e[0]], verts[e[1]]);
        for k in 0..2 {
            let d = g * (a[k] - b[k]) / l;
            grad[e[0]][k] += d;
            grad[e[1]][k] -= d;
        }
    }
    (loss, grad)
}

/// Mean of `1 − cos` between the normals of consecutive edges along each loop,
/// with vertex gradients. Loop vertices are numbered as in [`Contour::vertices`].
pub fn normal_consistency_loss(contour: &Contour, verts: &[Vec2]) -> (f64, Vec<Vec2>) {
    let mut grad = vec![[0.0; 2]; verts.len()];
    let pairs = contour.vertex_count() as f64;
    let mut loss = 0.0;
    let mut offset = 0;
    for lp in contour.loops() {
        let n = lp.len();
        for k in 0..n {
            let (i0, i1, i2) = (offset + k, offset + (k + 1) % n, offset + (k + 2) % n);
            let u = sub(verts[i1], verts[i0]);
            let v = sub(verts[i2], verts[i1]);
            let (lu, lv) = (norm(u), norm(v));
            // edge normals are the directions rotated by the same angle
            let c = (u[0] * v[0] + u[1] * v[1]) / (lu * lv);
            loss += (1.0 - c) / pairs;
            let gu: Vec2 = std::array::from_fn(|j| -(v[j] / (lu * lv) - c * u[j] / (lu * lu)) / pairs);
            let gv: Vec2 = std::array::from_fn(|j| -(u[j] / (lu * lv) - c * v[j] / (lv * lv)) / pairs);
            for j in 0..2 {
                grad[i0][j] -= gu[j];
                grad[i1][j] += gu[j] - gv[j];
                grad[i2][j] += gv[j];
            }
        }
        offset += n;
    }
    (loss, grad)
}

fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

fn dist(a: Vec2, b: Vec2) -> f64 {
    norm(sub(a, b))
}

/// Deforms `source` toward `target` by a neural displacement field applied to
/// its vertices, minimizing chamfer, normal, edge-length and normal-consistency
/// terms.
pub fn deform_baseline_2d(target: &Contour, source: &Contour, cfg: &DeformBaselineConfig) -> Result<BaselineResult> {
    cfg.validate()?;
    if target.is_empty() || source.is_empty() {
        return Err(Error::EmptySurface);
    }
    let mut field = VelocityField::new(FieldConfig { dim: 2, seed: cfg.seed, ..cfg.field })?;
    let verts: Vec<f64> = source.vertices().into_iter().flatten().collect();
    let edges = source.edges();
    let target_verts = target.vertices();
    let target_edges = target.edges();
    let mut rng = stream(cfg.seed, Stream::Sampling);
    let adam = Adam::new(cfg.lr);
    let mut state = AdamState::new(field.num_params());
    let mut losses = Vec::with_capacity(cfg.iterations);
    let w = cfg.weights;
    for it in 0..cfg.iterations {
        let disp = field.eval(&verts);
        let moved: Vec<Vec2> = verts.chunks_exact(2).zip(disp.chunks_exact(2)).map(|(p, d)| [p[0] + d[0], p[1] + d[1]]).collect();
        if moved.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { iteration: it, loss: f64::NAN });
        }
        let mut target_rng = rng.clone();
        let tgt = sample_elements::<2, Contour>(&target_verts, &target_edges, cfg.samples, &mut target_rng)?;
        let index = NearestIndex::new(&tgt.positions, &tgt.normals);
        let src = sample_elements::<2, Contour>(&moved, &edges, cfg.samples, &mut rng)
            .map_err(|_| Error::Divergence { iteration: it, loss: f64::NAN })?;
        let (fit, gpos, gn) = chamfer_with_grad(&src, &index, &tgt.positions, w.chamfer, w.normal);
        let mut gv = src.backprop::<Contour>(&moved, &edges, &gpos, gn.as_deref());
        let (le, ge) = edge_length_loss(&moved, &edges);
        let (lc, gc) = normal_consistency_loss(source, &moved);
        for ((g, a), b) in gv.iter_mut().zip(&ge).zip(&gc) {
            for k in 0..2 {
                g[k] += w.edge * a[k] + w.consistency * b[k];
            }
        }
        let loss = fit + w.edge * le + w.consistency * lc;
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration: it, loss });
        }
        log::debug!("stage=baseline iter={it} loss={loss:.6e}");
        losses.push(loss);
        let cot: Vec<f64> = gv.into_iter().flatten().collect();
        let mut grad = vec![0.0; field.num_params()];
        field.vjp(&verts, &cot, &mut grad);
        adam.step(field.params_mut(), &grad, &mut state);
    }
    let disp = field.eval(&verts);
    let moved: Vec<Vec2> = verts.chunks_exact(2).zip(disp.chunks_exact(2)).map(|(p, d)| [p[0] + d[0], p[1] + d[1]]).collect();
    let contour = source.rebuild(moved)?;
    Ok(BaselineResult { contour, field, losses: LossHistory { raw: losses } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::make_circle;

    fn fd<F: Fn(&[Vec2]) -> f64>(f: F, verts: &[Vec2], grad: &[Vec2]) {
        let h = 1e-6;
        for i in 0..verts.len() {
            for k in 0..2 {
                let mut p = verts.to_vec();
                p[i][k] += h;
                let mut m = verts.to_vec();
                m[i][k] -= h;
                let d = (f(&p) - f(&m)) / (2.0 * h);
                assert!((d - grad[i][k]).abs() < 1e-6 * (1.0 + d.abs()), "{i}.{k}: {d} vs {}", grad[i][k]);
            }
        }
    }

    fn wobbly() -> Contour {
        let lp = (0..9)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / 9.0;
                let r = 0.2 + 0.05 * (3.0 * a).sin() + 0.01 * k as f64;
                [0.5 + r * a.cos(), 0.5 + r * a.sin()]
            })
            .collect();
        Contour::new(vec![lp, vec![[0.1, 0.1], [0.2, 0.1], [0.15, 0.18], [0.1, 0.16]]]).unwrap()
    }

    #[test]
    fn regularizer_gradients_match_finite_differences() {
        let c = wobbly();
        let v = c.vertices();
        let e = c.edges();
        let (_, g) = edge_length_loss(&v, &e);
        fd(|p| edge_length_loss(p, &e).0, &v, &g);
        let (_, g) = normal_consistency_loss(&c, &v);
        fd(|p| normal_consistency_loss(&c, p).0, &v, &g);
    }

    #[test]
    fn regularizers_vanish_on_regular_polygon() {
        let c = make_circle(12, 0.3, [0.5, 0.5]).unwrap();
        let (le, _) = edge_length_loss(&c.vertices(), &c.edges());
        assert!(le < 1e-30);
        let (lc, _) = normal_consistency_loss(&c, &c.vertices());
        let expect = 1.0 - (std::f64::consts::TAU / 12.0).cos();
        assert!((lc - expect).abs() < 1e-12);
    }

    fn quick(iterations: usize) -> DeformBaselineConfig {
        DeformBaselineConfig {
            iterations,
            samples: 400,
            lr: 1e-3,
            field: FieldConfig { hidden: 64, embed: 32, ..FieldConfig::new(2, 0) },
            ..Default::default()
        }
    }

    #[test]
    fn identity_task() {
        let c = make_circle(64, 0.25, [0.5, 0.5]).unwrap();
        // shared sample draws make the fit term and its gradient exactly zero
        let fit_only = DeformBaselineConfig {
            weights: LossWeights { chamfer: 1.0, normal: 0.0, edge: 0.0, consistency: 0.0 },
            lr: 1e-4,
            ..quick(20)
        };
        let out = deform_baseline_2d(&c, &c, &fit_only).unwrap();
        assert!(out.losses.raw.iter().all(|&l| l == 0.0));
        assert_eq!(out.contour, c);
        // the curvature penalty alone nudges the circle only slightly
        let out = deform_baseline_2d(&c, &c, &DeformBaselineConfig { lr: 1e-4, ..quick(20) }).unwrap();
        let first = out.losses.first().unwrap();
        assert!(out.losses.last().unwrap() < 1.1 * first);
        let drift = out.contour.vertices().iter().zip(c.vertices()).map(|(a, b)| dist(*a, b)).fold(0.0, f64::max);
        assert!(drift < 1e-2, "{drift}");
    }

    #[test]
    fn regularization_trades_fit_for_evenness() {
        let target = crate::hybrid::make_polygon_target(12, 3).unwrap();
        let source = make_circle(80, 0.25, [0.5, 0.5]).unwrap();
        let full = deform_baseline_2d(&target, &source, &quick(150)).unwrap();
        let bare_cfg = DeformBaselineConfig { weights: LossWeights { chamfer: 1.0, normal: 0.0, edge: 0.0, consistency: 0.0 }, ..quick(150) };
        let bare = deform_baseline_2d(&target, &source, &bare_cfg).unwrap();
        let cd = |c: &Contour| {
            let a = crate::mesh::sample_surface(c, 4000, 1).unwrap();
            let b = crate::mesh::sample_surface(&target, 4000, 1).unwrap();
            crate::metrics::chamfer_distance(&a, &b).unwrap()
        };
        let var = |c: &Contour| edge_length_loss(&c.vertices(), &c.edges()).0;
        assert!(cd(&bare.contour) < cd(&full.contour), "{} vs {}", cd(&bare.contour), cd(&full.contour));
        assert!(var(&bare.contour) > var(&full.contour));
    }

    #[test]
    fn bad_weights() {
        let c = make_circle(8, 0.2, [0.5, 0.5]).unwrap();
        let cfg = DeformBaselineConfig { weights: LossWeights { edge: -1.0, ..Default::default() }, ..Default::default() };
        assert!(matches!(deform_baseline_2d(&c, &c, &cfg), Err(Error::InvalidArgument(_))));
    }
}
