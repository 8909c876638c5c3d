use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::contour::Contour;
use super::surface::{length, SurfaceMesh};
use crate::error::{Error, Result};
use crate::field::OrientedPointCloud;
use crate::rng::{stream, Stream};

/// A point on a mesh face in barycentric coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceSample {
    pub face: usize,
    pub bary: [f64; 3],
}

/// A point on a contour edge: `(1 - t) · a + t · b` for edge `a → b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeSample {
    pub edge: usize,
    pub t: f64,
}

fn pick(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total = *cdf.last().unwrap();
    let x = rng.gen::<f64>() * total;
    cdf.partition_point(|&c| c <= x).min(cdf.len() - 1)
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Result<Vec<f64>> {
    let mut acc = 0.0;
    let cdf: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    if cdf.last().is_none_or(|&t| t <= 0.0) {
        return Err(Error::EmptySurface);
    }
    Ok(cdf)
}

/// Area-weighted uniform face samples.
pub fn sample_faces(mesh: &SurfaceMesh, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<FaceSample>> {
    let cdf = cumulative((0..mesh.face_count()).map(|f| mesh.face_area(f)))?;
    Ok((0..count)
        .map(|_| {
            let face = pick(&cdf, rng);
            let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
            let s = r1.sqrt();
            FaceSample { face, bary: [1.0 - s, s * (1.0 - r2), s * r2] }
        })
        .collect())
}

/// Length-weighted uniform edge samples.
pub fn sample_edges(contour: &Contour, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<EdgeSample>> {
    let v = contour.vertices();
    let edges = contour.edges();
    let cdf = cumulative(edges.iter().map(|e| {
        let (a, b) = (v[e[0]], v[e[1]]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    }))?;
    Ok((0..count).map(|_| EdgeSample { edge: pick(&cdf, rng), t: rng.gen() }).collect())
}

/// Surfaces that can be sampled into oriented points.
pub trait SampleSurface<const D: usize> {
    fn sample_points(&self, count: usize, rng: &mut ChaCha8Rng) -> Result<OrientedPointCloud<D>>;
}

impl SampleSurface<3> for SurfaceMesh {
    fn sample_points(&self, count: usize, rng: &mut ChaCha8Rng) -> Result<OrientedPointCloud<3>> {
        let samples = sample_faces(self, count, rng)?;
        let (positions, normals) = samples
            .iter()
            .map(|s| {
                let c = self.corners(s.face);
                let p = std::array::from_fn(|k| {
                    s.bary[0] * c[0][k] + s.bary[1] * c[1][k] + s.bary[2] * c[2][k]
                });
                let n = self.face_cross(s.face);
                let l = length(n);
                (p, n.map(|x| x / l))
            })
            .unzip();
        OrientedPointCloud::new(positions, normals)
    }
}

impl SampleSurface<2> for Contour {
    /// Normals point outward for counter-clockwise loops.
    fn sample_points(&self, count: usize, rng: &mut ChaCha8Rng) -> Result<OrientedPointCloud<2>> {
        let samples = sample_edges(self, count, rng)?;
        let v = self.vertices();
        let edges = self.edges();
        let (positions, normals) = samples
            .iter()
            .map(|s| {
                let (a, b) = (v[edges[s.edge][0]], v[edges[s.edge][1]]);
                let d = [b[0] - a[0], b[1] - a[1]];
                let l = d[0].hypot(d[1]);
                ([a[0] + s.t * d[0], a[1] + s.t * d[1]], [d[1] / l, -d[0] / l])
            })
            .unzip();
        OrientedPointCloud::new(positions, normals)
    }
}

/// Uniform oriented samples of a mesh or contour, reproducible for a fixed seed.
pub fn sample_surface<const D: usize, S: SampleSurface<D>>(
    surface: &S,
    count: usize,
    seed: u64,
) -> Result<OrientedPointCloud<D>> {
    surface.sample_points(count, &mut stream(seed, Stream::Sampling))
}
