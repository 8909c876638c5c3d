use super::network::VectorField;
use crate::error::{Error, Result};

/// Default RK4 step size.
pub const DEFAULT_STEP: f64 = 0.2;

/// Integration interval and step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrateOptions {
    pub t0: f64,
    pub t1: f64,
    pub h: f64,
    /// Keep the RK4 stage inputs for discrete backpropagation.
    pub keep_stages: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { t0: 0.0, t1: 1.0, h: DEFAULT_STEP, keep_stages: false }
    }
}

/// One RK4 step: signed step size and, when retained, the four stage inputs.
#[derive(Clone, Debug)]
pub struct RkStep {
    pub h: f64,
    pub stages: Option<[Vec<f64>; 4]>,
}

/// Points carried along a flow, stored flat (`n · dim`).
#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    pub dim: usize,
    pub initial: Vec<f64>,
    pub steps: Vec<RkStep>,
    pub final_points: Vec<f64>,
}

impl FlowTrajectory {
    pub fn has_stages(&self) -> bool {
        self.steps.iter().all(|s| s.stages.is_some())
    }
}

/// Signed step sizes covering `[t0, t1]`; the last one is truncated.
pub fn step_sizes(t0: f64, t1: f64, h: f64) -> Result<Vec<f64>> {
    if !(h.is_finite() && h > 0.0 && t0.is_finite() && t1.is_finite()) {
        return Err(Error::invalid("step size must be positive and times finite"));
    }
    let span = (t1 - t0).abs();
    let sign = if t1 < t0 { -1.0 } else { 1.0 };
    let n = ((span / h) * (1.0 - 1e-12)).ceil() as usize;
    Ok((0..n).map(|i| sign * if i + 1 == n { span - h * i as f64 } else { h }).collect())
}

fn axpy(y: &[f64], a: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(u, v)| u + a * v).collect()
}

fn checked<F: VectorField + ?Sized>(field: &F, p: &[f64]) -> Result<Vec<f64>> {
    let v = field.eval(p);
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::VelocityBlowUp)
    }
}

/// Classical RK4 for `dΦ/dt = v(Φ)` with a stationary field.
pub fn integrate<F: VectorField + ?Sized>(field: &F, points: &[f64], opts: IntegrateOptions) -> Result<FlowTrajectory> {
    let d = field.dim();
    if !points.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch { expected: d, got: points.len() % d });
    }
    let mut y = points.to_vec();
    let mut steps = Vec::new();
    for h in step_sizes(opts.t0, opts.t1, opts.h)? {
        let k1 = checked(field, &y)?;
        let z2 = axpy(&y, h / 2.0, &k1);
        let k2 = checked(field, &z2)?;
        let z3 = axpy(&y, h / 2.0, &k2);
        let k3 = checked(field, &z3)?;
        let z4 = axpy(&y, h, &k3);
        let k4 = checked(field, &z4)?;
        let next: Vec<f64> = (0..y.len())
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let stages = opts.keep_stages.then(|| [std::mem::replace(&mut y, next.clone()), z2, z3, z4]);
        if stages.is_none() {
            y = next;
        }
        steps.push(RkStep { h, stages });
    }
    if !y.iter().all(|x| x.is_finite()) {
        return Err(Error::VelocityBlowUp);
    }
    Ok(FlowTrajectory { dim: d, initial: points.to_vec(), steps, final_points: y })
}

/// Points flowed from `t = 0` to `t = 1` with step `h`.
pub fn flow_points<F: VectorField + ?Sized>(field: &F, points: &[f64], h: f64) -> Result<Vec<f64>> {
    Ok(integrate(field, points, IntegrateOptions { h, ..Default::default() })?.final_points)
}

/// How parameter gradients are computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GradientMode {
    /// Backpropagation through the stored RK4 stages.
    #[default]
    Discrete,
    /// Adjoint ODE integrated backward from the final points.
    Adjoint,
}

/// Gradients of a scalar loss given `dL/dΦ(·, t1)`.
#[derive(Clone, Debug)]
pub struct FlowGradient {
    pub params: Vec<f64>,
    pub points: Vec<f64>,
}

pub fn integrate_grad<F: VectorField + ?Sized>(
    field: &F,
    traj: &FlowTrajectory,
    cot: &[f64],
    mode: GradientMode,
) -> Result<FlowGradient> {
    if cot.len() != traj.final_points.len() {
        return Err(Error::DimensionMismatch { expected: traj.final_points.len(), got: cot.len() });
    }
    match mode {
        GradientMode::Discrete => discrete(field, traj, cot),
        GradientMode::Adjoint => adjoint(field, traj, cot),
    }
}

fn discrete<F: VectorField + ?Sized>(field: &F, traj: &FlowTrajectory, cot: &[f64]) -> Result<FlowGradient> {
    let mut gp = vec![0.0; field.num_params()];
    let mut a = cot.to_vec();
    for step in traj.steps.iter().rev() {
        let [z1, z2, z3, z4] = step.stages.as_ref().ok_or(Error::MissingTrajectory)?;
        let h = step.h;
        let mut ya = a.clone();
        // stage cotangents before pulling back through later stages
        let mut k3 = a.iter().map(|x| h / 3.0 * x).collect::<Vec<_>>();
        let mut k2 = k3.clone();
        let mut k1 = a.iter().map(|x| h / 6.0 * x).collect::<Vec<_>>();
        let k4: Vec<f64> = k1.clone();
        let (_, g4) = field.vjp(z4, &k4, &mut gp);
        for i in 0..a.len() {
            ya[i] += g4[i];
            k3[i] += h * g4[i];
        }
        let (_, g3) = field.vjp(z3, &k3, &mut gp);
        for i in 0..a.len() {
            ya[i] += g3[i];
            k2[i] += h / 2.0 * g3[i];
        }
        let (_, g2) = field.vjp(z2, &k2, &mut gp);
        for i in 0..a.len() {
            ya[i] += g2[i];
            k1[i] += h / 2.0 * g2[i];
        }
        let (_, g1) = field.vjp(z1, &k1, &mut gp);
        for i in 0..a.len() {
            ya[i] += g1[i];
        }
        a = ya;
    }
    Ok(FlowGradient { params: gp, points: a })
}

// Augmented state (z, a, g) with dz/dt = v(z), da/dt = -aᵀ∂v/∂z, dg/dt = -aᵀ∂v/∂θ.
fn augmented<F: VectorField + ?Sized>(field: &F, z: &[f64], a: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut g = vec![0.0; field.num_params()];
    let (v, ga) = field.vjp(z, a, &mut g);
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::VelocityBlowUp);
    }
    Ok((v, ga.into_iter().map(|x| -x).collect(), g.into_iter().map(|x| -x).collect()))
}

fn adjoint<F: VectorField + ?Sized>(field: &F, traj: &FlowTrajectory, cot: &[f64]) -> Result<FlowGradient> {
    let mut z = traj.final_points.clone();
    let mut a = cot.to_vec();
    let mut g = vec![0.0; field.num_params()];
    for step in traj.steps.iter().rev() {
        let h = -step.h;
        let (v1, a1, g1) = augmented(field, &z, &a)?;
        let (v2, a2, g2) = augmented(field, &axpy(&z, h / 2.0, &v1), &axpy(&a, h / 2.0, &a1))?;
        let (v3, a3, g3) = augmented(field, &axpy(&z, h / 2.0, &v2), &axpy(&a, h / 2.0, &a2))?;
        let (v4, a4, g4) = augmented(field, &axpy(&z, h, &v3), &axpy(&a, h, &a3))?;
        let comb = |y: &mut Vec<f64>, k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| {
            for i in 0..y.len() {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        };
        comb(&mut z, &v1, &v2, &v3, &v4);
        comb(&mut a, &a1, &a2, &a3, &a4);
        comb(&mut g, &g1, &g2, &g3, &g4);
    }
    Ok(FlowGradient { params: g, points: a })
}

/// Largest distance between a point and its image after flowing forward to
/// `t = 1` and back to `t = 0`.
pub fn invertibility_check<F: VectorField + ?Sized>(field: &F, points: &[f64], h: f64) -> Result<f64> {
    let fwd = integrate(field, points, IntegrateOptions { h, ..Default::default() })?;
    let back = integrate(field, &fwd.final_points, IntegrateOptions { t0: 1.0, t1: 0.0, h, keep_stages: false })?;
    let d = field.dim();
    Ok(points
        .chunks_exact(d)
        .zip(back.final_points.chunks_exact(d))
        .map(|(p, q)| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::network::{FieldConfig, LinearField, VelocityField};
    use crate::rng::{stream, Stream};
    use rand::Rng;

    fn rotation() -> LinearField {
        LinearField::new(2, &[0.0, -1.0, 1.0, 0.0], &[0.0, 0.0]).unwrap()
    }

    fn points2() -> Vec<f64> {
        vec![0.5, 0.0, 0.1, 0.4, -0.3, 0.2, 0.25, -0.45]
    }

    // exp(A) for the rotation generator is the rotation by one radian
    fn exact_rotation(p: &[f64]) -> Vec<f64> {
        let (c, s) = (1f64.cos(), 1f64.sin());
        p.chunks_exact(2).flat_map(|q| [c * q[0] - s * q[1], s * q[0] + c * q[1]]).collect()
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn step_counts() {
        assert_eq!(step_sizes(0.0, 1.0, 0.2).unwrap().len(), 5);
        let s = step_sizes(0.0, 1.0, 0.3).unwrap();
        assert_eq!(s.len(), 4);
        assert!((s[3] - 0.1).abs() < 1e-15);
        let r = step_sizes(1.0, 0.0, 0.2).unwrap();
        assert!(r.iter().all(|&h| (h + 0.2).abs() < 1e-15));
        assert!(step_sizes(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_and_constant_fields() {
        let p = points2();
        let z = integrate(&LinearField::zero(2), &p, IntegrateOptions::default()).unwrap();
        assert_eq!(z.final_points, p);
        assert_eq!(invertibility_check(&LinearField::zero(2), &p, 0.2).unwrap(), 0.0);
        let c = LinearField::new(2, &[0.0; 4], &[0.25, -0.5]).unwrap();
        let out = flow_points(&c, &p, 0.2).unwrap();
        for (q, r) in p.chunks_exact(2).zip(out.chunks_exact(2)) {
            assert!((r[0] - q[0] - 0.25).abs() < 1e-15 && (r[1] - q[1] + 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn rotation_matches_matrix_exponential_with_fourth_order() {
        let p = points2();
        let exact = exact_rotation(&p);
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| max_err(&flow_points(&rotation(), &p, h).unwrap(), &exact))
            .collect();
        assert!(errs[0] < 1e-5, "{errs:?}");
        let slope = (errs[0] / errs[2]).log2() / 2.0;
        assert!((slope - 4.0).abs() < 0.3, "slope {slope}");
    }

    #[test]
    fn rotation_round_trip() {
        // RK4 shrinks the rotation by about h⁶/144 per step, so the round-trip
        // error is about 4.4e-6 |p| at h = 0.2
        let near: Vec<f64> = points2().iter().map(|x| 0.4 * x).collect();
        assert!(invertibility_check(&rotation(), &near, 0.2).unwrap() < 1e-6);
        let errs: Vec<f64> =
            [0.2, 0.1, 0.05].iter().map(|&h| invertibility_check(&rotation(), &points2(), h).unwrap()).collect();
        assert!(errs[1] < errs[0] / 16.0 && errs[2] < errs[1] / 16.0, "{errs:?}");
    }

    #[test]
    fn reverse_integration_undoes_rotation() {
        let p = points2();
        let back = integrate(&rotation(), &exact_rotation(&p), IntegrateOptions { t0: 1.0, t1: 0.0, ..Default::default() })
            .unwrap();
        assert!(max_err(&back.final_points, &p) < 1e-5);
    }

    #[test]
    fn blow_up_is_reported() {
        let f = LinearField::new(1, &[f64::NAN], &[0.0]).unwrap();
        assert!(matches!(integrate(&f, &[1.0], IntegrateOptions::default()), Err(Error::VelocityBlowUp)));
    }

    #[test]
    fn translation_parameter_gradient_is_one() {
        // v = θ e₁, loss = first coordinate of Φ(p, 1)
        let f = LinearField::new(2, &[0.0; 4], &[0.7, 0.0]).unwrap();
        let opts = IntegrateOptions { keep_stages: true, ..Default::default() };
        let t = integrate(&f, &[0.3, 0.4], opts).unwrap();
        for mode in [GradientMode::Discrete, GradientMode::Adjoint] {
            let g = integrate_grad(&f, &t, &[1.0, 0.0], mode).unwrap();
            assert!((g.params[4] - 1.0).abs() < 1e-14, "{mode:?}: {:?}", g.params);
            let z = integrate_grad(&f, &t, &[0.0, 0.0], mode).unwrap();
            assert!(z.params.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn discrete_requires_stages() {
        let f = rotation();
        let t = integrate(&f, &[0.3, 0.4], IntegrateOptions::default()).unwrap();
        assert!(matches!(integrate_grad(&f, &t, &[1.0, 0.0], GradientMode::Discrete), Err(Error::MissingTrajectory)));
        assert!(integrate_grad(&f, &t, &[1.0, 0.0], GradientMode::Adjoint).is_ok());
    }

    fn random_network() -> VelocityField {
        network_with_head(0.1)
    }

    fn network_with_head(amp: f64) -> VelocityField {
        let mut f = VelocityField::new(FieldConfig { dim: 3, scale: 1.0, embed: 16, hidden: 16, depth: 2, seed: 11 }).unwrap();
        let mut rng = stream(12, Stream::Fixture);
        let n = f.num_params();
        for x in &mut f.params_mut()[n - 16 * 3 - 3..] {
            *x = rng.gen_range(-amp..amp);
        }
        f
    }

    fn random_points(n: usize) -> Vec<f64> {
        let mut rng = stream(13, Stream::Fixture);
        (0..3 * n).map(|_| rng.gen_range(0.2..0.8)).collect()
    }

    fn loss(field: &VelocityField, p: &[f64], w: &[f64]) -> f64 {
        flow_points(field, p, 0.2).unwrap().iter().zip(w).map(|(a, b)| a * b + 0.5 * a * a).sum()
    }

    #[test]
    fn discrete_gradients_match_finite_differences() {
        let f = random_network();
        let p = random_points(8);
        let w: Vec<f64> = (0..p.len()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let t = integrate(&f, &p, IntegrateOptions { keep_stages: true, ..Default::default() }).unwrap();
        let cot: Vec<f64> = t.final_points.iter().zip(&w).map(|(a, b)| b + a).collect();
        let g = integrate_grad(&f, &t, &cot, GradientMode::Discrete).unwrap();
        let h = 1e-6;
        let n = f.num_params();
        let mut checked = 0;
        for i in (0..n).step_by(13).chain(n - 51..n) {
            let mut fp = f.clone();
            fp.params_mut()[i] += h;
            let mut fm = f.clone();
            fm.params_mut()[i] -= h;
            let fd = (loss(&fp, &p, &w) - loss(&fm, &p, &w)) / (2.0 * h);
            let scale = fd.abs().max(g.params[i].abs());
            if scale > 1e-4 {
                assert!((fd - g.params[i]).abs() / scale < 1e-4, "param {i}: fd {fd} vs {}", g.params[i]);
                checked += 1;
            } else {
                assert!((fd - g.params[i]).abs() < 1e-8);
            }
        }
        assert!(checked > 20, "only {checked} parameters with signal");
    }

    #[test]
    fn adjoint_agrees_with_discrete() {
        // gentle field: points move about 0.04 each
        let f = network_with_head(0.03);
        let p = random_points(8);
        let t = integrate(&f, &p, IntegrateOptions { keep_stages: true, ..Default::default() }).unwrap();
        let cot: Vec<f64> = (0..p.len()).map(|i| (i as f64 * 0.61).sin()).collect();
        let a = integrate_grad(&f, &t, &cot, GradientMode::Discrete).unwrap();
        let b = integrate_grad(&f, &t, &cot, GradientMode::Adjoint).unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = a.params.iter().zip(&b.params).map(|(x, y)| x - y).collect();
        assert!(norm(&diff) / norm(&a.params) < 1e-3, "{}", norm(&diff) / norm(&a.params));
        let dp: Vec<f64> = a.points.iter().zip(&b.points).map(|(x, y)| x - y).collect();
        assert!(norm(&dp) / norm(&a.points) < 1e-3);
    }
}
