use crate::error::{Error, Result};
use crate::field::{gaussian_blur, ScalarGrid};

// Lower envelope of parabolas: squared distance to the nearest feature along one line.
fn edt_line(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        out.fill(f64::INFINITY);
        return;
    };
    let meet = |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
    let mut k = 0;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..f.len() {
        if f[q].is_infinite() {
            continue;
        }
        let mut s = meet(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = meet(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance, in cells, from every cell to the nearest
/// cell with `feature[i] == true`.
pub fn squared_distance_transform(feature: &[bool], dim: usize, res: usize) -> Vec<f64> {
    let mut d: Vec<f64> = feature.iter().map(|&f| if f { 0.0 } else { f64::INFINITY }).collect();
    let (mut line, mut out) = (vec![0.0; res], vec![0.0; res]);
    let (mut v, mut z) = (vec![0usize; res], vec![0.0; res + 1]);
    for axis in 0..dim {
        let stride = res.pow((dim - 1 - axis) as u32);
        for start in 0..d.len() {
            // visit each line once, from its first cell
            if (start / stride) % res != 0 {
                continue;
            }
            for i in 0..res {
                line[i] = d[start + i * stride];
            }
            edt_line(&line, &mut out, &mut v, &mut z);
            for i in 0..res {
                d[start + i * stride] = out[i];
            }
        }
    }
    d
}

fn inside_mask(mask: &ScalarGrid) -> Result<Vec<bool>> {
    let mut inside = Vec::with_capacity(mask.len());
    for &v in mask.values() {
        if v != 0.0 && v != 1.0 {
            return Err(Error::invalid(format!("mask values must be 0 or 1, got {v}")));
        }
        inside.push(v == 1.0);
    }
    if inside.iter().all(|&b| b) || !inside.iter().any(|&b| b) {
        return Err(Error::NoBoundary);
    }
    Ok(inside)
}

/// Signed distance of a binary mask in cell units, positive inside. A cell at
/// Euclidean distance `k` from the nearest cell of the other label gets
/// `±(k − 0.5)`, which places the zero level halfway between the two cells.
pub fn exact_signed_distance(mask: &ScalarGrid) -> Result<ScalarGrid> {
    let inside = inside_mask(mask)?;
    let outside: Vec<bool> = inside.iter().map(|b| !b).collect();
    let (dim, res) = (mask.dim(), mask.res());
    let to_out = squared_distance_transform(&outside, dim, res);
    let to_in = squared_distance_transform(&inside, dim, res);
    let values = inside
        .iter()
        .enumerate()
        .map(|(i, &b)| if b { to_out[i].sqrt() - 0.5 } else { 0.5 - to_in[i].sqrt() })
        .collect();
    Ok(ScalarGrid::from_raw(dim, res, values))
}

/// Signed distance grid followed by a Gaussian blur of the given std (cells).
pub fn signed_distance_grid_with(mask: &ScalarGrid, std: f64) -> Result<ScalarGrid> {
    gaussian_blur(&exact_signed_distance(mask)?, std)
}

/// Signed distance grid smoothed with a unit-std Gaussian.
pub fn signed_distance_grid(mask: &ScalarGrid) -> Result<ScalarGrid> {
    signed_distance_grid_with(mask, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coords(i: usize, dim: usize, res: usize) -> Vec<usize> {
        (0..dim).map(|a| (i / res.pow((dim - 1 - a) as u32)) % res).collect()
    }

    fn brute(feature: &[bool], dim: usize, res: usize) -> Vec<f64> {
        (0..feature.len())
            .map(|i| {
                let ci = coords(i, dim, res);
                (0..feature.len())
                    .filter(|&j| feature[j])
                    .map(|j| {
                        let cj = coords(j, dim, res);
                        ci.iter().zip(&cj).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn transform_matches_brute_force(
            bits in prop::collection::vec(prop::bool::weighted(0.15), 216),
            two_d in any::<bool>(),
        ) {
            let (dim, res, n) = if two_d { (2, 14, 196) } else { (3, 6, 216) };
            let f = &bits[..n];
            prop_assert_eq!(squared_distance_transform(f, dim, res), brute(f, dim, res));
        }
    }

    #[test]
    fn single_cell() {
        let mut v = vec![0.0; 729];
        let center = 4 * 81 + 4 * 9 + 4;
        v[center] = 1.0;
        let mask = ScalarGrid::from_values(3, 9, v).unwrap();
        let sd = exact_signed_distance(&mask).unwrap();
        let c = sd.get(&[4, 4, 4]);
        assert!(c > 0.0 && c <= 1.0);
        let inside: Vec<bool> = mask.values().iter().map(|&x| x == 1.0).collect();
        let oracle = brute(&inside, 3, 9);
        for (i, (&s, &o)) in sd.values().iter().zip(&oracle).enumerate() {
            if i != center {
                assert_eq!(s, 0.5 - o.sqrt());
            }
        }
        let smooth = signed_distance_grid(&mask).unwrap();
        let argmax = (0..729).max_by(|&a, &b| smooth.values()[a].total_cmp(&smooth.values()[b])).unwrap();
        assert_eq!(argmax, center);
    }

    #[test]
    fn half_space_ramp() {
        let mask = ScalarGrid::from_fn(3, 12, |p| if p[0] < 0.5 { 1.0 } else { 0.0 }).unwrap();
        let sd = exact_signed_distance(&mask).unwrap();
        for i in 0..12 {
            let expect = 5.5 - i as f64;
            for j in [0, 5, 11] {
                assert_eq!(sd.get(&[i, j, 3]), expect);
            }
        }
    }

    #[test]
    fn sphere_zero_crossing() {
        let res = 32;
        let mask = ScalarGrid::from_fn(3, res, |p| {
            let r = p.iter().map(|x| (x * res as f64 - 16.0).powi(2)).sum::<f64>().sqrt();
            if r <= 10.0 { 1.0 } else { 0.0 }
        })
        .unwrap();
        let sd = signed_distance_grid(&mask).unwrap();
        // walk along axis 0 through the center row and locate the sign change
        let row: Vec<f64> = (0..res).map(|i| sd.get(&[i, 15, 15])).collect();
        let i = (16..res - 1).find(|&i| row[i] > 0.0 && row[i + 1] <= 0.0).unwrap();
        let t = row[i] / (row[i] - row[i + 1]);
        let x = i as f64 + 0.5 + t;
        let dist = ((x - 16.0).powi(2) + 2.0 * 0.25).sqrt();
        assert!((dist - 10.0).abs() < 1.0, "{dist}");
    }

    #[test]
    fn errors() {
        let ones = ScalarGrid::from_values(2, 8, vec![1.0; 64]).unwrap();
        assert!(matches!(signed_distance_grid(&ones), Err(Error::NoBoundary)));
        let zeros = ScalarGrid::from_values(2, 8, vec![0.0; 64]).unwrap();
        assert!(matches!(signed_distance_grid(&zeros), Err(Error::NoBoundary)));
        let mut v = vec![0.0; 64];
        v[3] = 0.5;
        let bad = ScalarGrid::from_values(2, 8, v).unwrap();
        assert!(matches!(exact_signed_distance(&bad), Err(Error::InvalidArgument(_))));
    }
}
