//! Surface distances over sampled oriented points.

mod kdtree;

use rayon::prelude::*;

pub use kdtree::NearestIndex;

use crate::error::{Error, Result};
use crate::field::OrientedPointCloud;
use crate::mesh::{self_intersection_ratio, sample_surface, SampleSurface, SurfaceMesh};

/// Default number of samples per surface for mesh metrics.
pub const DEFAULT_METRIC_SAMPLES: usize = 100_000;

/// For each point of `a`: index of its nearest point in `b` and the squared distance.
pub fn nearest_pairs<const D: usize>(a: &[[f64; D]], b: &NearestIndex<D>) -> Vec<(usize, f64)> {
    a.par_iter().map(|p| b.nearest(p).expect("non-empty index")).collect()
}

fn nonempty<const D: usize>(c: &OrientedPointCloud<D>) -> Result<()> {
    if c.is_empty() {
        Err(Error::EmptyPointSet)
    } else {
        Ok(())
    }
}

fn directional<const D: usize>(
    a: &OrientedPointCloud<D>,
    b: &OrientedPointCloud<D>,
) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
    let (ia, ib) = (NearestIndex::from_cloud(a), NearestIndex::from_cloud(b));
    (nearest_pairs(a.positions(), &ib), nearest_pairs(b.positions(), &ia))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Sum of the two directional mean squared nearest-neighbour distances.
pub fn chamfer_distance<const D: usize>(a: &OrientedPointCloud<D>, b: &OrientedPointCloud<D>) -> Result<f64> {
    chamfer_distance_with(a, b, true)
}

/// Chamfer distance with squared (`true`) or plain Euclidean nearest distances.
pub fn chamfer_distance_with<const D: usize>(
    a: &OrientedPointCloud<D>,
    b: &OrientedPointCloud<D>,
    squared: bool,
) -> Result<f64> {
    nonempty(a)?;
    nonempty(b)?;
    let (ab, ba) = directional(a, b);
    let f = |d2: f64| if squared { d2 } else { d2.sqrt() };
    Ok(mean(ab.iter().map(|p| f(p.1))) + mean(ba.iter().map(|p| f(p.1))))
}

/// Average over both directions of `1 − |⟨n, n_nearest⟩|`.
pub fn normal_distance<const D: usize>(a: &OrientedPointCloud<D>, b: &OrientedPointCloud<D>) -> Result<f64> {
    nonempty(a)?;
    nonempty(b)?;
    let (ab, ba) = directional(a, b);
    let term = |n: &[f64; D], m: &[f64; D]| 1.0 - (0..D).map(|k| n[k] * m[k]).sum::<f64>().abs();
    let dab = mean(ab.iter().enumerate().map(|(i, p)| term(&a.normals()[i], &b.normals()[p.0])));
    let dba = mean(ba.iter().enumerate().map(|(i, p)| term(&b.normals()[i], &a.normals()[p.0])));
    Ok(0.5 * (dab + dba))
}

/// Samples both surfaces with the same seed.
fn sample_pair<const D: usize, S: SampleSurface<D>>(
    pred: &S,
    gt: &S,
    samples: usize,
    seed: u64,
) -> Result<(OrientedPointCloud<D>, OrientedPointCloud<D>)> {
    if samples == 0 {
        return Err(Error::invalid("metric sample count must be positive"));
    }
    Ok((sample_surface(pred, samples, seed)?, sample_surface(gt, samples, seed)?))
}

/// Directional unsquared distances, kept only for query points passing `keep`.
fn distances<const D: usize>(
    a: &OrientedPointCloud<D>,
    b: &OrientedPointCloud<D>,
    keep: &(impl Fn(&[f64; D]) -> bool + Sync),
) -> (Vec<f64>, Vec<f64>) {
    let (ab, ba) = directional(a, b);
    let pick = |c: &OrientedPointCloud<D>, pairs: Vec<(usize, f64)>| {
        c.positions()
            .iter()
            .zip(pairs)
            .filter(|(p, _)| keep(p))
            .map(|(_, (_, d2))| d2.sqrt())
            .collect::<Vec<f64>>()
    };
    (pick(a, ab), pick(b, ba))
}

/// Average symmetric surface distance: pooled mean of point-to-nearest-sample
/// distances in both directions.
pub fn assd<const D: usize, S: SampleSurface<D>>(pred: &S, gt: &S, samples: usize, seed: u64) -> Result<f64> {
    assd_where(pred, gt, samples, seed, |_| true)
}

/// ASSD restricted to samples (of either surface) for which `keep` holds;
/// nearest neighbours are still searched among all samples.
pub fn assd_where<const D: usize, S: SampleSurface<D>>(
    pred: &S,
    gt: &S,
    samples: usize,
    seed: u64,
    keep: impl Fn(&[f64; D]) -> bool + Sync,
) -> Result<f64> {
    let (a, b) = sample_pair(pred, gt, samples, seed)?;
    let (ab, ba) = distances(&a, &b, &keep);
    if ab.is_empty() && ba.is_empty() {
        return Err(Error::invalid("no samples pass the region filter"));
    }
    Ok((ab.iter().sum::<f64>() + ba.iter().sum::<f64>()) / (ab.len() + ba.len()) as f64)
}

/// Nearest-rank percentile of unsorted values; `p` in (0, 100].
pub fn percentile_nearest_rank(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * values.len() as f64).ceil().max(1.0) as usize;
    values[rank.min(values.len()) - 1]
}

/// Percentile Hausdorff distance: maximum of the two directional
/// nearest-rank percentiles.
pub fn hausdorff_p<const D: usize, S: SampleSurface<D>>(
    pred: &S,
    gt: &S,
    percentile: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::invalid(format!("percentile must be in (0, 100], got {percentile}")));
    }
    let (a, b) = sample_pair(pred, gt, samples, seed)?;
    let (mut ab, mut ba) = distances(&a, &b, &|_| true);
    Ok(percentile_nearest_rank(&mut ab, percentile).max(percentile_nearest_rank(&mut ba, percentile)))
}

/// Pooled mean of `|cos|` between each sample normal and its nearest
/// counterpart's normal.
pub fn normal_consistency<const D: usize, S: SampleSurface<D>>(
    pred: &S,
    gt: &S,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let (a, b) = sample_pair(pred, gt, samples, seed)?;
    let (ab, ba) = directional(&a, &b);
    let cos = |n: &[f64; D], m: &[f64; D]| (0..D).map(|k| n[k] * m[k]).sum::<f64>().abs();
    let s1: f64 = ab.iter().enumerate().map(|(i, p)| cos(&a.normals()[i], &b.normals()[p.0])).sum();
    let s2: f64 = ba.iter().enumerate().map(|(i, p)| cos(&b.normals()[i], &a.normals()[p.0])).sum();
    Ok((s1 + s2) / (ab.len() + ba.len()) as f64)
}

/// The evaluation table: ASSD, HD90, NC and the prediction's SI ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceMetrics {
    pub assd: f64,
    pub hd90: f64,
    pub nc: f64,
    pub si: f64,
}

pub fn evaluate(pred: &SurfaceMesh, gt: &SurfaceMesh, samples: usize, seed: u64) -> Result<SurfaceMetrics> {
    Ok(SurfaceMetrics {
        assd: assd(pred, gt, samples, seed)?,
        hd90: hausdorff_p(pred, gt, 90.0, samples, seed)?,
        nc: normal_consistency(pred, gt, samples, seed)?,
        si: self_intersection_ratio(pred),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud<const D: usize>(n: usize, seed: u64) -> OrientedPointCloud<D> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = (0..n).map(|_| std::array::from_fn(|_| rng.gen())).collect();
        let q = (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
        OrientedPointCloud::new(p, q).unwrap()
    }

    fn brute<const D: usize>(a: &OrientedPointCloud<D>, b: &OrientedPointCloud<D>) -> (f64, f64) {
        let dir = |x: &OrientedPointCloud<D>, y: &OrientedPointCloud<D>| {
            let (mut cd, mut nd) = (0.0, 0.0);
            for (p, n) in x.positions().iter().zip(x.normals()) {
                let (mut bi, mut bd) = (0, f64::INFINITY);
                for (j, q) in y.positions().iter().enumerate() {
                    let d: f64 = (0..D).map(|k| (p[k] - q[k]).powi(2)).sum();
                    if d < bd {
                        (bi, bd) = (j, d);
                    }
                }
                cd += bd;
                nd += 1.0 - (0..D).map(|k| n[k] * y.normals()[bi][k]).sum::<f64>().abs();
            }
            (cd / x.len() as f64, nd / x.len() as f64)
        };
        let (c1, n1) = dir(a, b);
        let (c2, n2) = dir(b, a);
        (c1 + c2, 0.5 * (n1 + n2))
    }

    #[test]
    fn chamfer_closed_forms() {
        let a = OrientedPointCloud::new(vec![[0.0, 0.0]], vec![[1.0, 0.0]]).unwrap();
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        // positions are clamped to the unit square, so compare the raw form
        let b = OrientedPointCloud::from_parts_unchecked(vec![[3.0, 4.0]], vec![[1.0, 0.0]]);
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 50.0);
        assert_eq!(chamfer_distance_with(&a, &b, false).unwrap(), 10.0);
        let e = OrientedPointCloud::<2>::new(vec![], vec![]).unwrap();
        assert!(matches!(chamfer_distance(&a, &e), Err(Error::EmptyPointSet)));
    }

    #[test]
    fn matches_brute_force() {
        let (a, b) = (random_cloud::<3>(64, 1), random_cloud::<3>(64, 2));
        let (cd, nd) = brute(&a, &b);
        assert_eq!(chamfer_distance(&a, &b).unwrap(), cd);
        assert_eq!(normal_distance(&a, &b).unwrap(), nd);
        assert_eq!(chamfer_distance(&b, &a).unwrap(), chamfer_distance(&a, &b).unwrap());
    }

    #[test]
    fn normal_distance_cases() {
        let a = random_cloud::<2>(30, 3);
        assert!(normal_distance(&a, &a).unwrap() < 1e-15);
        let rot = OrientedPointCloud::new(
            a.positions().to_vec(),
            a.normals().iter().map(|n| [-n[1], n[0]]).collect(),
        )
        .unwrap();
        assert!((normal_distance(&a, &rot).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn concentric_spheres() {
        let a = fixtures::icosphere(4, [0.5; 3], 0.3);
        let b = fixtures::icosphere(4, [0.5; 3], 0.32);
        let d = assd(&a, &b, 20_000, 7).unwrap();
        assert!((d - 0.02).abs() / 0.02 < 0.05, "{d}");
        let d2 = assd(&a, &b, 40_000, 7).unwrap();
        assert!((d2 - d).abs() / d < 0.02);
        let h90 = hausdorff_p(&a, &b, 90.0, 20_000, 7).unwrap();
        let h100 = hausdorff_p(&a, &b, 100.0, 20_000, 7).unwrap();
        assert!((h90 - 0.02).abs() < 0.004, "{h90}");
        assert!(h100 >= h90);
        assert_eq!(assd(&b, &a, 20_000, 7).unwrap(), d);
    }

    #[test]
    fn self_metrics() {
        let a = fixtures::icosphere(3, [0.5; 3], 0.3);
        let n = 10_000;
        let spacing = (a.area() / n as f64).sqrt();
        assert!(assd(&a, &a, n, 1).unwrap() < 2.0 * spacing);
        assert!(hausdorff_p(&a, &a, 90.0, n, 1).unwrap() < 2.0 * spacing);
        assert!(normal_consistency(&a, &a, n, 1).unwrap() > 0.99);
        assert!(normal_consistency(&a, &a.flipped(), n, 1).unwrap() > 0.99);
    }

    #[test]
    fn sphere_versus_cube() {
        let s = fixtures::icosphere(3, [0.5; 3], 0.25);
        let c = fixtures::cube_mesh([0.5; 3], 0.2);
        let nc = normal_consistency(&s, &c, 2000, 3).unwrap();
        // brute-force oracle on the same samples
        let (a, b) = (sample_surface(&s, 2000, 3).unwrap(), sample_surface(&c, 2000, 3).unwrap());
        let nd = brute(&a, &b).1;
        assert!((nc - (1.0 - nd)).abs() < 1e-12);
        assert!(nc < 0.95, "{nc}");
    }

    #[test]
    fn rigid_motion_invariance() {
        let a = fixtures::icosphere(2, [0.45; 3], 0.2);
        let b = fixtures::torus_mesh(24, 12, [0.5; 3], 0.2, 0.08);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let m = |v: [f64; 3]| {
            let (x, y) = (v[0] - 0.5, v[1] - 0.5);
            [0.5 + c * x - s * y + 0.01, 0.5 + s * x + c * y, v[2] - 0.02]
        };
        let d0 = assd(&a, &b, 5000, 2).unwrap();
        let d1 = assd(&a.map_vertices(m), &b.map_vertices(m), 5000, 2).unwrap();
        assert!((d0 - d1).abs() < 1e-9);
        let n0 = normal_consistency(&a, &b, 5000, 2).unwrap();
        let n1 = normal_consistency(&a.map_vertices(m), &b.map_vertices(m), 5000, 2).unwrap();
        assert!((n0 - n1).abs() < 1e-9);
    }

    #[test]
    fn percentile_rank() {
        let mut v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile_nearest_rank(&mut v, 90.0), 9.0);
        assert_eq!(percentile_nearest_rank(&mut v, 100.0), 10.0);
        assert_eq!(percentile_nearest_rank(&mut v, 1.0), 1.0);
    }
}
