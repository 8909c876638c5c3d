use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

use super::trig;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Frequency factor of the sine activations.
pub const OMEGA0: f64 = 30.0;

const CHUNK: usize = 512;

/// A differentiable map from `dim`-dimensional points to `dim`-dimensional vectors.
///
/// Points and outputs are flat row-major buffers of `n · dim` values.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn eval(&self, points: &[f64]) -> Vec<f64>;
    /// Evaluates the field and pulls `cot` back through it. Returns the output
    /// and the cotangent on `points`; parameter cotangents are added to `grad`.
    fn vjp(&self, points: &[f64], cot: &[f64], grad: &mut [f64]) -> (Vec<f64>, Vec<f64>);

    fn num_params(&self) -> usize {
        self.params().len()
    }
}

/// `v(p) = A p + c`, parameters `[A (row-major), c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearField {
    dim: usize,
    params: Vec<f64>,
}

impl LinearField {
    pub fn new(dim: usize, a: &[f64], c: &[f64]) -> Result<Self> {
        if a.len() != dim * dim || c.len() != dim {
            return Err(Error::invalid("linear field shape"));
        }
        Ok(Self { dim, params: [a, c].concat() })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, params: vec![0.0; dim * dim + dim] }
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn eval(&self, points: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let (a, c) = self.params.split_at(d * d);
        let mut out = vec![0.0; points.len()];
        for (p, o) in points.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            for i in 0..d {
                o[i] = c[i] + (0..d).map(|j| a[i * d + j] * p[j]).sum::<f64>();
            }
        }
        out
    }

    fn vjp(&self, points: &[f64], cot: &[f64], grad: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let a = &self.params[..d * d];
        let mut gp = vec![0.0; points.len()];
        for ((p, g), gq) in points.chunks_exact(d).zip(cot.chunks_exact(d)).zip(gp.chunks_exact_mut(d)) {
            for i in 0..d {
                for j in 0..d {
                    grad[i * d + j] += g[i] * p[j];
                    gq[j] += g[i] * a[i * d + j];
                }
                grad[d * d + i] += g[i];
            }
        }
        (self.eval(points), gp)
    }
}

/// Hyper-parameters of [`VelocityField`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldConfig {
    pub dim: usize,
    /// Standard deviation of the Fourier frequencies.
    pub scale: f64,
    /// Embedding length (sine and cosine halves together).
    pub embed: usize,
    pub hidden: usize,
    /// Number of hidden-to-hidden sine layers.
    pub depth: usize,
    pub seed: u64,
}

impl FieldConfig {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, scale: 5.0, embed: 128, hidden: 256, depth: 2, seed }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dim == 2 || self.dim == 3) {
            return Err(Error::invalid(format!("field dimension {}", self.dim)));
        }
        if self.embed < 2 || !self.embed.is_multiple_of(2) || self.hidden == 0 {
            return Err(Error::invalid("embedding length must be even and positive"));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::invalid("Fourier scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    w: usize,
    b: usize,
    rows: usize,
    cols: usize,
}

/// Stationary velocity field: Fourier features, sine layers, linear head.
#[derive(Clone, Debug)]
pub struct VelocityField {
    cfg: FieldConfig,
    freqs: Array2<f64>,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

impl VelocityField {
    /// Random initialization; the output layer starts at zero, so the initial
    /// flow is the identity.
    pub fn new(cfg: FieldConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream(cfg.seed, Stream::Init);
        let freqs = Self::draw_freqs(&cfg, &mut rng);
        let layers = Self::layout(&cfg);
        let mut params = vec![0.0; layers.last().map_or(0, |l| l.b + l.rows)];
        for (i, l) in layers.iter().enumerate() {
            let head = i == layers.len() - 1;
            let bound = match i {
                _ if head => 0.0,
                0 => 1.0 / l.cols as f64,
                _ => (6.0 / l.cols as f64).sqrt() / OMEGA0,
            };
            if bound > 0.0 {
                let u = Uniform::new_inclusive(-bound, bound);
                params[l.w..l.w + l.rows * l.cols].iter_mut().for_each(|x| *x = u.sample(&mut rng));
            }
            if !head {
                let bb = 1.0 / (l.cols as f64).sqrt();
                let u = Uniform::new_inclusive(-bb, bb);
                params[l.b..l.b + l.rows].iter_mut().for_each(|x| *x = u.sample(&mut rng));
            }
        }
        Ok(Self { cfg, freqs, layers, params })
    }

    fn draw_freqs(cfg: &FieldConfig, rng: &mut impl Rng) -> Array2<f64> {
        let normal = Normal::new(0.0, cfg.scale).expect("positive scale");
        Array2::from_shape_fn((cfg.embed / 2, cfg.dim), |_| normal.sample(rng))
    }

    fn layout(cfg: &FieldConfig) -> Vec<Layer> {
        let mut dims = vec![cfg.embed];
        dims.extend(std::iter::repeat_n(cfg.hidden, cfg.depth + 1));
        dims.push(cfg.dim);
        let mut off = 0;
        dims.windows(2)
            .map(|w| {
                let l = Layer { w: off, b: off + w[0] * w[1], rows: w[1], cols: w[0] };
                off = l.b + l.rows;
                l
            })
            .collect()
    }

    pub fn config(&self) -> &FieldConfig {
        &self.cfg
    }

    fn weight(&self, l: &Layer) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((l.rows, l.cols), &self.params[l.w..l.w + l.rows * l.cols]).unwrap()
    }

    fn bias(&self, l: &Layer) -> &[f64] {
        &self.params[l.b..l.b + l.rows]
    }

    fn embed(&self, points: &[f64]) -> Array2<f64> {
        let d = self.cfg.dim;
        let p = ArrayView2::from_shape((points.len() / d, d), points).unwrap();
        let u = p.dot(&self.freqs.t());
        let (n, m) = u.dim();
        let mut x = Array2::zeros((n, 2 * m));
        for (row, urow) in x.outer_iter_mut().zip(u.outer_iter()) {
            let row = row.into_slice().unwrap();
            let (sr, cr) = row.split_at_mut(m);
            for j in 0..m {
                (sr[j], cr[j]) = trig::sin_cos(2.0 * PI * urow[j]);
            }
        }
        x
    }

    fn affine(&self, l: &Layer, input: &Array2<f64>) -> Array2<f64> {
        let mut z = Array2::zeros((input.nrows(), l.rows));
        general_mat_mul(1.0, input, &self.weight(l).t(), 0.0, &mut z);
        z += &ArrayView2::from_shape((1, l.rows), self.bias(l)).unwrap();
        z
    }

    fn eval_chunk(&self, points: &[f64]) -> Vec<f64> {
        let (head, hidden) = self.layers.split_last().unwrap();
        let mut a = self.embed(points);
        for l in hidden {
            a = self.affine(l, &a);
            a.mapv_inplace(|x| trig::sin(OMEGA0 * x));
        }
        self.affine(head, &a).into_raw_vec_and_offset().0
    }

    fn vjp_chunk(&self, points: &[f64], cot: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let d = self.cfg.dim;
        let n = points.len() / d;
        let (head, hidden) = self.layers.split_last().unwrap();
        // layer inputs, and ω₀·cos(ω₀ z) for every sine layer
        let mut acts = vec![self.embed(points)];
        let mut slopes = Vec::with_capacity(hidden.len());
        for l in hidden {
            let mut z = self.affine(l, acts.last().unwrap());
            let mut slope = Array2::zeros(z.dim());
            ndarray::Zip::from(&mut z).and(&mut slope).for_each(|zv, sv| {
                let (sn, cs) = trig::sin_cos(OMEGA0 * *zv);
                *zv = sn;
                *sv = OMEGA0 * cs;
            });
            acts.push(z);
            slopes.push(slope);
        }
        let out = self.affine(head, acts.last().unwrap());
        let mut grad = vec![0.0; self.params.len()];
        let mut g = ArrayView2::from_shape((n, d), cot).unwrap().to_owned();
        for (i, l) in self.layers.iter().enumerate().rev() {
            if i < slopes.len() {
                g *= &slopes[i];
            }
            let gw = g.t().dot(&acts[i]);
            grad[l.w..l.w + l.rows * l.cols].copy_from_slice(gw.as_slice().unwrap());
            let gb: Array1<f64> = g.sum_axis(Axis(0));
            grad[l.b..l.b + l.rows].copy_from_slice(gb.as_slice().unwrap());
            g = g.dot(&self.weight(l));
        }
        // through the embedding [sin u, cos u] with u = 2π P Bᵀ
        let x = &acts[0];
        let m = x.ncols() / 2;
        let mut gu = Array2::zeros((n, m));
        ndarray::Zip::from(&mut gu)
            .and(x.slice(s![.., ..m]))
            .and(x.slice(s![.., m..]))
            .and(g.slice(s![.., ..m]))
            .and(g.slice(s![.., m..]))
            .for_each(|o, &sn, &cs, &a, &b| *o = 2.0 * PI * (a * cs - b * sn));
        let gp = gu.dot(&self.freqs);
        (out.into_raw_vec_and_offset().0, gp.into_raw_vec_and_offset().0, grad)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// `b"HVEL"`, then `u32` d, `f64` s, `u32` L, `u32` H, `u32` D, `u64` seed,
    /// `u64` parameter count and the little-endian `f64` parameters.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let c = &self.cfg;
        w.write_all(b"HVEL")?;
        w.write_all(&(c.dim as u32).to_le_bytes())?;
        w.write_all(&c.scale.to_le_bytes())?;
        for v in [c.embed, c.hidden, c.depth] {
            w.write_all(&(v as u32).to_le_bytes())?;
        }
        w.write_all(&c.seed.to_le_bytes())?;
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.params.len() * 8);
        for p in &self.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut h = [0u8; 44];
        r.read_exact(&mut h).map_err(|_| Error::Format("truncated HVEL header".into()))?;
        if &h[..4] != b"HVEL" {
            return Err(Error::Format("bad HVEL magic".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(h[i..i + 4].try_into().unwrap()) as usize;
        let u64_at = |i: usize| u64::from_le_bytes(h[i..i + 8].try_into().unwrap());
        let cfg = FieldConfig {
            dim: u32_at(4),
            scale: f64::from_le_bytes(h[8..16].try_into().unwrap()),
            embed: u32_at(16),
            hidden: u32_at(20),
            depth: u32_at(24),
            seed: u64_at(28),
        };
        let count = u64_at(36) as usize;
        let mut field = Self::new(cfg).map_err(|e| Error::Format(format!("bad HVEL header: {e}")))?;
        if count != field.params.len() {
            return Err(Error::Format(format!("HVEL expects {} parameters, file has {count}", field.params.len())));
        }
        let mut bytes = vec![0u8; count * 8];
        r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated HVEL payload".into()))?;
        for (p, b) in field.params.iter_mut().zip(bytes.chunks_exact(8)) {
            *p = f64::from_le_bytes(b.try_into().unwrap());
        }
        Ok(field)
    }
}

impl VectorField for VelocityField {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn eval(&self, points: &[f64]) -> Vec<f64> {
        let step = CHUNK * self.cfg.dim;
        points
            .par_chunks(step)
            .map(|c| self.eval_chunk(c))
            .collect::<Vec<_>>()
            .concat()
    }

    fn vjp(&self, points: &[f64], cot: &[f64], grad: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
        let step = CHUNK * self.cfg.dim;
        let parts: Vec<_> = points
            .par_chunks(step)
            .zip(cot.par_chunks(step))
            .map(|(p, c)| self.vjp_chunk(p, c))
            .collect();
        let mut out = Vec::with_capacity(points.len());
        let mut gp = Vec::with_capacity(points.len());
        // summed in chunk order so results do not depend on the thread count
        for (o, g, gt) in parts {
            out.extend(o);
            gp.extend(g);
            grad.iter_mut().zip(&gt).for_each(|(a, b)| *a += b);
        }
        (out, gp)
    }
}
